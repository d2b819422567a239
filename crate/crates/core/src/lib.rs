//! Finite-volume Gaussian Markov random field approximations of the SPDE
//! `(kappa^2 - div H grad) u = W` on periodic rectangular grids, with
//! `H = gamma I + v v^T`.
//!
//! The crate covers the whole pipeline: grid geometry ([`grid`]),
//! coefficient fields ([`coefficients`]), assembly of the sparse precision
//! matrix ([`assembly`]), sampling and marginal variances ([`gmrf`]),
//! closed-form reference quantities for constant coefficients ([`analytic`])
//! Bayesian estimation of the anisotropy ([`inference`]) and a batch
//! command-line front end ([`cli`]).

pub mod analytic;
pub mod assembly;
pub mod cli;
pub mod coefficients;
pub mod error;
pub mod factor;
pub mod fixtures;
pub mod gmrf;
pub mod grid;
pub mod inference;
pub mod io;
pub mod sparse;

pub use error::{Error, Result};
