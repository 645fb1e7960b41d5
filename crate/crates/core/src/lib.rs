//! Spectral data of the canonical Dirac operator with linear potential and
//! Gel'fand-Levitan synthesis of potentials with finitely many prescribed
//! spectral changes.
//!
//! - [`hermite`]: orthonormal Hermite functions and their ladder derivatives.
//! - [`quadrature`]: adaptive Gauss-Kronrod, running integrals on grids, tail integrals.
//! - [`model`]: closed-form eigenvalues, eigenfunctions and norming constants.
//! - [`cauchy`]: Cauchy problem for the Dirac system with an arbitrary potential.
//! - [`glcore`]: degenerate-kernel Gel'fand-Levitan engine.
//! - [`verify`]: residuals, Gram matrices and shooting scans of synthesized operators.
//! - [`cli`]: plan documents, CSV output and command implementations.

// NaN must fail range checks; quadrature and integrator coefficients keep published digits
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision, clippy::needless_range_loop)]

pub mod cauchy;
pub mod cli;
pub mod error;
pub mod glcore;
pub mod hermite;
pub mod model;
pub mod quadrature;
pub mod verify;

pub use error::{Error, Result};
