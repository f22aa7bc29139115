//! Elliptic optimal control on masked 2D grids.

pub mod coefficient;
pub mod convex;
pub mod energy;
pub mod error;
pub mod grid;
pub mod io;
pub mod linsolve;
pub mod potential;
pub mod runner;
pub mod source;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/grid.md")]
    mod grid {}
    #[doc = include_str!("../../../book/src/convex.md")]
    mod convex {}
    #[doc = include_str!("../../../book/src/coefficients.md")]
    mod coefficients {}
    #[doc = include_str!("../../../book/src/potentials.md")]
    mod potentials {}
    #[doc = include_str!("../../../book/src/sources.md")]
    mod sources {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
