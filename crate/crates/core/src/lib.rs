//! Agnostic policy search in low-rank episodic MDPs.
//!
//! Expected per-step rewards of any policy whose induced transition matrix
//! has rank at most `d` obey an order-`d` linear recurrence whose
//! coefficients are signed elementary symmetric polynomials of the
//! matrix's eigenvalues. This crate estimates the first `3d` expected
//! rewards from uniformly collected episodes by importance sampling, fits
//! the recurrence's eigenvalues under a unit-disk constraint, and
//! extrapolates to the full horizon to rank the policies of a finite class.
//!
//! Modules:
//!
//! * [`mdp`]: tabular models, sampling, exact dynamic-programming oracles;
//! * [`coeffs`]: the `alpha`/`beta` coefficient algebra and companion matrices;
//! * [`estimator`]: importance sampling, eigenvalue fits and policy search;
//! * [`lock`]: the contextual combination-lock hard-instance family.

pub mod coeffs;
pub mod error;
pub mod estimator;
pub mod lock;
pub mod mdp;

pub use error::{Error, Result};
pub use num_complex::Complex64;
