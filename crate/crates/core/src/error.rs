use thiserror::Error;

use crate::model::VectorTrajectory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("Hermite polynomial order {0} exceeds the supported maximum of 60")]
    OrderTooLarge(usize),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("trajectories are sampled on different grids")]
    GridMismatch,

    #[error("grid is not uniform (node {index} deviates from step {step})")]
    NonUniformGrid { index: usize, step: f64 },

    #[error("quadrature did not converge on [{a}, {b}]: error estimate {error:e} above tolerance {tol:e}")]
    NonConvergence { a: f64, b: f64, error: f64, tol: f64 },

    #[error("invalid integration bounds [{a}, {b}]")]
    InvalidBounds { a: f64, b: f64 },

    #[error("boundary condition alpha = {0} has no closed-form model spectral data")]
    UnsupportedBoundary(f64),

    #[error("spectral points are not sorted by eigenvalue")]
    Unsorted,

    #[error("norming constant must be positive and finite, got {0}")]
    InvalidNorming(f64),

    #[error("step size underflow at x = {x}; trajectory truncated there")]
    StepSizeUnderflow { x: f64, partial: Box<VectorTrajectory> },

    #[error("mu = {mu} collides with model eigenvalue {lambda}")]
    MuCollidesWithSpectrum { mu: f64, lambda: f64 },

    #[error("invalid perturbation plan: {0}")]
    InvalidPlan(String),

    #[error("Gel'fand-Levitan system is numerically singular at x = {x} (scaled determinant {scaled_det:e})")]
    SingularSystem { x: f64, scaled_det: f64 },

    #[error("det S(x) is not positive at x = {x} (got {determinant:e})")]
    NonPositiveDeterminant { x: f64, determinant: f64 },

    #[error("commutator and determinant potential formulas disagree at x = {x} by {diff:e}")]
    CrossPathMismatch { x: f64, diff: f64 },

    #[error("eigenfunction index {0} was removed by the plan")]
    IndexWasRemoved(String),

    #[error("unknown eigenfunction index {0}")]
    UnknownIndex(String),

    #[error("x = {x} lies outside the tabulated range [0, {x_max}]")]
    OutOfRange { x: f64, x_max: f64 },

    #[error("composition rejected: {0}")]
    Composition(String),

    #[error("invalid scan range [{lo}, {hi}] with {samples} samples")]
    InvalidScan { lo: f64, hi: f64, samples: usize },
}
