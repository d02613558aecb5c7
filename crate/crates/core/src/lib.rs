//! A desk-scale laboratory for the semiclassical Lieb-Thirring kinetic energy
//! bound with a gradient correction:
//!
//! ```text
//! Tr(-Delta gamma) >= (1 - eps) K_cl  int rho^{1+2/d}  -  C_d eps^{-(3+4/d)} int |grad sqrt(rho)|^2
//! ```
//!
//! The crate evaluates every ingredient of the localization argument on
//! finite-rank density matrices sampled on Dirichlet box grids: lattice Riesz
//! means and the Berezin-Li-Yau comparison ([`lattice`]), the mass-bounded
//! dyadic partition and its grouping ([`partition`]), and the inequality
//! evaluators with empirical constant calibration ([`inequalities`]).

pub mod cli;
pub mod constants;
pub mod error;
pub mod inequalities;
pub mod lattice;
pub mod numeric;
pub mod partition;
pub mod states;

pub use error::{Error, Result};
