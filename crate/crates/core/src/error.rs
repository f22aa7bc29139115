use thiserror::Error;

use crate::linsolve::SolveReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid spacing h = {h} leaves no interior node in the domain")]
    EmptyInterior { h: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("negative {what} value {value} at index {index}")]
    Negative {
        what: &'static str,
        value: f64,
        index: usize,
    },

    #[error("{what} did not converge after {} iterations (residual {:.3e})", report.iterations, report.final_residual)]
    NotConverged {
        what: &'static str,
        report: SolveReport,
    },

    #[error("line search failed in {what} (gradient norm {gradient_norm:.3e})")]
    LineSearch {
        what: &'static str,
        gradient_norm: f64,
    },

    #[error("bisection bracket failure: {0}")]
    Bracket(String),

    #[error("indicator field is not binary: value {value} at node {node}")]
    NonBinary { value: f64, node: usize },

    #[error("indicator set is empty")]
    EmptySet,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
