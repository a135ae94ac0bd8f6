//! A numerical laboratory for beta-Jacobi particle systems.
//!
//! The eigenvalue process `lambda` on `[0, 1]^m` and its angular form
//! `phi_i = arcsin(sqrt(lambda_i))` in the principal Weyl alcove of type BC
//! are simulated, their closed-form densities are evaluated where known
//! (`m = 1` for every `beta`, and `beta = 2`), and the hitting-time and
//! Laplacian claims about the process are checked numerically.
//!
//! Modules, bottom up:
//!
//! - [`roots`]: parameters, the root system `BC_m`, alcove geometry, drift.
//! - [`coords`]: eigenvalue/angle change of variables.
//! - [`dynamics`]: SDE integrators and ensembles.
//! - [`orthopoly`]: orthonormal Jacobi polynomials and quadrature.
//! - [`semigroup`]: stationary and transition densities.
//! - [`experiments`]: verification suites.
//! - [`output`], [`cli`]: file formats and the `bjl` command line.

pub mod cli;
pub mod coords;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod orthopoly;
pub mod output;
pub mod rng;
pub mod roots;
pub mod semigroup;

pub use error::{Error, Result};

// The guide's code listings run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/coordinates.md")]
    mod coordinates {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/densities.md")]
    mod densities {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
