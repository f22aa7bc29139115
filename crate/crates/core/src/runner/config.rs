//! Experiment configuration, read from and written to TOML.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::expr::Expr;
use crate::coefficient::Load;
use crate::convex::ConvexFunctionSpec;
use crate::error::{Error, Result};
use crate::grid::{DomainSpec, Grid, ScalarField};

fn default_tol() -> f64 {
    1e-8
}

fn default_eps_final() -> f64 {
    1e-6
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub h: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Output directory; defaults to `<output root>/<name>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub domain: DomainSpec,
    pub problem: Problem,
    /// Pass/fail criterion evaluated after the solve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Problem {
    CoefficientPower { p: f64, f: Source },
    CoefficientTwoPhase {
        alpha: f64,
        beta: f64,
        f: Source,
        /// Last smoothing level of the kink continuation.
        #[serde(default = "default_eps_final")]
        eps_final: f64,
    },
    PotentialCompliance { psi: ConvexFunctionSpec, f: Source },
    PotentialBangbang { alpha: f64, beta: f64, k: f64, f: Source },
    SourceCompliance { alpha: f64, beta: f64, m: f64 },
    SourceEigen { m: f64 },
    /// Compares the sampled G-closure test with the closed-form lens on
    /// random eigenvalue pairs in `[alpha, beta]²`.
    GclosureScan { alpha: f64, beta: f64, samples: usize, seed: u64 },
}

impl Problem {
    pub fn kind(&self) -> &'static str {
        match self {
            Problem::CoefficientPower { .. } => "coefficient_power",
            Problem::CoefficientTwoPhase { .. } => "coefficient_two_phase",
            Problem::PotentialCompliance { .. } => "potential_compliance",
            Problem::PotentialBangbang { .. } => "potential_bangbang",
            Problem::SourceCompliance { .. } => "source_compliance",
            Problem::SourceEigen { .. } => "source_eigen",
            Problem::GclosureScan { .. } => "gclosure_scan",
        }
    }
}

/// Right-hand side descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Source {
    Constant { value: f64 },
    PointMass {
        at: [f64; 2],
        #[serde(default = "one")]
        weight: f64,
    },
    /// `value` on the union of the shapes, zero elsewhere.
    IndicatorUnion {
        shapes: Vec<Shape>,
        #[serde(default = "one")]
        value: f64,
    },
    /// See [`super::expr`] for the grammar.
    Expression { expr: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    /// Closed ball.
    Ball { center: [f64; 2], radius: f64 },
    /// Closed axis-aligned box.
    Box { min: [f64; 2], max: [f64; 2] },
}

impl Shape {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Shape::Ball { center, radius } => {
                let (dx, dy) = (x - center[0], y - center[1]);
                dx * dx + dy * dy <= radius * radius
            }
            Shape::Box { min, max } => (min[0]..=max[0]).contains(&x) && (min[1]..=max[1]).contains(&y),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Shape::Ball { radius, .. } if !(radius > 0.0 && radius.is_finite()) => {
                Err(Error::param("shapes", format!("ball radius must be positive, got {radius}")))
            }
            Shape::Box { min, max } if !(min[0] <= max[0] && min[1] <= max[1]) => {
                Err(Error::param("shapes", format!("box min {min:?} exceeds max {max:?}")))
            }
            _ => Ok(()),
        }
    }
}

impl Source {
    pub fn validate(&self) -> Result<()> {
        match self {
            Source::Constant { value } if !value.is_finite() => Err(Error::param("f", "constant must be finite")),
            Source::PointMass { weight, .. } if !weight.is_finite() => {
                Err(Error::param("f", "point mass weight must be finite"))
            }
            Source::IndicatorUnion { shapes, .. } => shapes.iter().try_for_each(Shape::validate),
            Source::Expression { expr } => expr.parse::<Expr>().map(drop),
            _ => Ok(()),
        }
    }

    pub fn load(&self, grid: &Arc<Grid>) -> Result<Load> {
        Ok(match self {
            Source::PointMass { at, weight } => Load::PointMass { at: *at, weight: *weight },
            _ => Load::Field(self.field(grid)?),
        })
    }

    /// The source sampled at the interior nodes; a point mass is lumped.
    pub fn field(&self, grid: &Arc<Grid>) -> Result<ScalarField> {
        let field = match self {
            Source::Constant { value } => ScalarField::constant(grid, *value),
            Source::PointMass { at, weight } => {
                return Load::PointMass { at: *at, weight: *weight }.field(grid);
            }
            Source::IndicatorUnion { shapes, value } => ScalarField::from_fn(grid, |x, y| {
                if shapes.iter().any(|s| s.contains(x, y)) {
                    *value
                } else {
                    0.0
                }
            }),
            Source::Expression { expr } => {
                let e: Expr = expr.parse()?;
                ScalarField::from_fn(grid, |x, y| e.eval(x, y))
            }
        };
        ScalarField::from_nodal(grid, field.values().to_vec())
    }
}

/// Acceptance criteria attached to presets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Check {
    /// Radial closed form for `f ≡ 1` on the unit disk: sup error of `ū`
    /// relative to `max ū`, pointwise relative error of `a_opt` on cells
    /// with `|x| ≥ a_min_radius`.
    PowerClosedForm { u_tol: f64, a_tol: f64, a_min_radius: f64 },
    /// Closed form for a unit point mass at the origin of the unit disk,
    /// pointwise relative error of `ū` on the annulus `[r_min, r_max]`.
    DiracClosedForm { tol: f64, r_min: f64, r_max: f64 },
    /// Multiplier of the eigenvalue source problem.
    EigenSourceLambda { expected: f64, rel_tol: f64 },
    /// Smallest Dirichlet eigenvalue.
    FirstEigenvalue { expected: f64, rel_tol: f64 },
    /// Relinearized solve with the recovered potential reproduces `ū`
    /// within `tol` in relative `L²`.
    SelfConsistency { tol: f64 },
    /// Mixed-value measure at most `purity |Ω|`, cost below both constants.
    BangBang { purity: f64 },
    /// `|∫f − m| ≤ β h Per(E)` and convexity defect of the designated set.
    VolumeLayer { max_defect: f64 },
    /// Full agreement of the sampled and closed-form G-closure tests.
    GclosureAgreement,
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive and finite, got {v}")))
    }
}

fn ordered(alpha: f64, beta: f64, strict_alpha: bool) -> Result<()> {
    let alpha_ok = if strict_alpha { alpha > 0.0 } else { alpha >= 0.0 };
    if alpha_ok && alpha < beta && beta.is_finite() {
        Ok(())
    } else {
        let lower = if strict_alpha { "0 <" } else { "0 <=" };
        Err(Error::param("alpha", format!("need {lower} alpha < beta, got alpha = {alpha}, beta = {beta}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Checks everything that can be checked without solving.
    pub fn validate(&self) -> Result<()> {
        positive("h", self.h)?;
        positive("tol", self.tol)?;
        self.domain.validate()?;
        match &self.problem {
            Problem::CoefficientPower { p, f } => {
                if !(*p > 1.0 && p.is_finite()) {
                    return Err(Error::param("p", format!("must exceed 1, got {p}")));
                }
                f.validate()?;
            }
            Problem::CoefficientTwoPhase { alpha, beta, f, eps_final } => {
                ordered(*alpha, *beta, true)?;
                if !(*eps_final > 0.0 && *eps_final <= 0.1) {
                    return Err(Error::param("eps_final", format!("must lie in (0, 0.1], got {eps_final}")));
                }
                f.validate()?;
            }
            Problem::PotentialCompliance { psi, f } => {
                psi.validate()?;
                if !psi.is_superlinear() {
                    return Err(Error::param("psi", "must be power_over_p or quadratic"));
                }
                f.validate()?;
            }
            Problem::PotentialBangbang { alpha, beta, k, f } => {
                ordered(*alpha, *beta, false)?;
                if !(*k >= 0.0 && k.is_finite()) {
                    return Err(Error::param("k", format!("must be nonnegative, got {k}")));
                }
                f.validate()?;
            }
            Problem::SourceCompliance { alpha, beta, m } => {
                ordered(*alpha, *beta, false)?;
                positive("m", *m)?;
            }
            Problem::SourceEigen { m } => positive("m", *m)?,
            Problem::GclosureScan { alpha, beta, samples, .. } => {
                ordered(*alpha, *beta, true)?;
                if *samples == 0 {
                    return Err(Error::param("samples", "must be positive"));
                }
            }
        }
        if let Some(check) = &self.check {
            self.validate_check(check)?;
        }
        Ok(())
    }

    fn validate_check(&self, check: &Check) -> Result<()> {
        let expected = match check {
            Check::PowerClosedForm { .. } | Check::DiracClosedForm { .. } => "coefficient_power",
            Check::EigenSourceLambda { .. } | Check::FirstEigenvalue { .. } => "source_eigen",
            Check::SelfConsistency { .. } => "potential_compliance",
            Check::BangBang { .. } => "potential_bangbang",
            Check::VolumeLayer { .. } => "source_compliance",
            Check::GclosureAgreement => "gclosure_scan",
        };
        if self.problem.kind() != expected {
            return Err(Error::param("check", format!("applies to {expected}, not {}", self.problem.kind())));
        }
        let on_unit_disk = matches!(self.domain, DomainSpec::Disk { r, center } if r == 1.0 && center == [0.0, 0.0]);
        match (check, &self.problem) {
            (Check::PowerClosedForm { .. }, Problem::CoefficientPower { f, .. }) => {
                if !on_unit_disk || *f != (Source::Constant { value: 1.0 }) {
                    return Err(Error::param("check", "power_closed_form needs the unit disk and f = 1"));
                }
            }
            (Check::DiracClosedForm { .. }, Problem::CoefficientPower { f, .. }) => {
                if !on_unit_disk || *f != (Source::PointMass { at: [0.0, 0.0], weight: 1.0 }) {
                    return Err(Error::param("check", "dirac_closed_form needs the unit disk and a unit mass at 0"));
                }
            }
            _ => {}
        }
        Ok(())
    }
}
