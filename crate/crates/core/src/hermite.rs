//! Chebyshev-Hermite polynomials and the orthonormal Hermite functions.
//!
//! The orthonormal functions are generated by the normalized three-term
//! recurrence seeded with `phi_0 = pi^{-1/4} exp(-x^2/2)`, so the raw
//! polynomial `H_n` (which grows like `2^n n!`) is never formed. Once
//! `exp(-x^2/2)` underflows (|x| beyond roughly 38) every order evaluates to
//! exactly zero.
//!
//! Derivatives are taken from the ladder relation
//! `phi_n' = sqrt(2n) phi_{n-1} - x phi_n`, never by differencing.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Largest order accepted by [`hermite_poly`].
pub const MAX_POLY_ORDER: usize = 60;

/// Physicists' Hermite polynomial `H_n(x)` by upward recurrence from
/// `H_0 = 1`, `H_1 = 2x`.
pub fn hermite_poly(n: usize, x: f64) -> Result<f64> {
    if n > MAX_POLY_ORDER {
        return Err(Error::OrderTooLarge(n));
    }
    let mut prev = 1.0;
    if n == 0 {
        return Ok(prev);
    }
    let mut curr = 2.0 * x;
    for k in 1..n {
        let next = 2.0 * x * curr - 2.0 * k as f64 * prev;
        prev = curr;
        curr = next;
    }
    Ok(curr)
}

/// Normalization `C_n = (2^n n! sqrt(pi))^{-1/2}`.
pub fn normalization(n: usize) -> f64 {
    // log form keeps large n finite
    let mut log_c = -0.25 * PI.ln();
    for k in 1..=n {
        log_c -= 0.5 * (2.0 * k as f64).ln();
    }
    log_c.exp()
}

#[inline]
fn seed(x: f64) -> f64 {
    PI.powf(-0.25) * (-0.5 * x * x).exp()
}

/// Runs the normalized recurrence up to `n_max`, handing each `(k, phi_k)`
/// to `sink`. Scalar and batch evaluation share this path so they agree bit
/// for bit.
#[inline]
fn run_recurrence(n_max: usize, x: f64, mut sink: impl FnMut(usize, f64)) {
    let mut prev = 0.0;
    let mut curr = seed(x);
    sink(0, curr);
    for k in 0..n_max {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * x * curr - (kf / (kf + 1.0)).sqrt() * prev;
        prev = curr;
        curr = next;
        sink(k + 1, curr);
    }
}

/// Orthonormal Hermite function `phi_n(x) = C_n exp(-x^2/2) H_n(x)`.
pub fn phi(n: usize, x: f64) -> f64 {
    let mut out = 0.0;
    run_recurrence(n, x, |_, v| out = v);
    out
}

/// `phi_k(x)` for every `k` in `0..=n_max` from a single recurrence pass.
pub fn phi_batch(n_max: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    run_recurrence(n_max, x, |_, v| out.push(v));
    out
}

/// `phi_n'(x)` from the ladder relation.
pub fn phi_derivative(n: usize, x: f64) -> f64 {
    if n == 0 {
        return -x * phi(0, x);
    }
    let mut lower = 0.0;
    let mut upper = 0.0;
    run_recurrence(n, x, |k, v| {
        if k + 1 == n {
            lower = v;
        } else if k == n {
            upper = v;
        }
    });
    (2.0 * n as f64).sqrt() * lower - x * upper
}

/// Value and derivative of `phi_n` at `x`, sharing one recurrence pass.
pub fn phi_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let batch = phi_batch(n, x);
    let value = batch[n];
    let derivative = if n == 0 {
        -x * value
    } else {
        (2.0 * n as f64).sqrt() * batch[n - 1] - x * value
    };
    (value, derivative)
}
