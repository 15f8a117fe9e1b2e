//! Numerical laboratory for Wasserstein gradient flows of entropy-type
//! energies on an interval.
//!
//! The crate is organised along the pipeline of a typical experiment:
//! [`measures`] holds grid and atomic probability measures, [`transport`]
//! computes quantile-based 1D Wasserstein distances, [`potentials`] and
//! [`functionals`] define the driving energies, [`flows`] integrates the
//! gradient flows, and [`loja`] checks Łojasiewicz-type inequalities and
//! the convergence-rate bounds they imply.

pub mod error;
pub mod flows;
pub mod functionals;
pub mod loja;
pub mod measures;
pub mod numeric;
pub mod potentials;
pub mod transport;

pub use error::{Error, Result};
