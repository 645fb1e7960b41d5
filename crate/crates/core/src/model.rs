//! Explicit spectral data of the model operators.
//!
//! Whole axis: `U_n` with eigenvalue `sign(n) sqrt(2|n|)`. Half axis with
//! `y1(0) = 0` (alpha = 0): `V_k = -U_{2k} / phi_{2|k|}(0)`, eigenvalue
//! `2 sqrt|k| sign k`. Half axis with `y2(0) = 0` (alpha = pi/2): the
//! `U_{2k+1}` family scaled so the value at the origin is `(1, 0)`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::{phi, phi_batch};
use crate::quadrature::{integrate_with, lagrange_interpolate, Grid, Tolerance, TAIL_EXTENT};

/// A two-component real function that can be evaluated anywhere on the half axis.
pub trait VectorFunction: Send + Sync {
    fn eval(&self, x: f64) -> [f64; 2];

    /// Abscissa past which the function is known to decay like a Gaussian.
    fn reach(&self) -> f64 {
        0.0
    }
}

/// Boundary parameter of `y1(0) cos(alpha) + y2(0) sin(alpha) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BoundaryCondition {
    /// `y1(0) = 0`.
    Alpha0,
    /// `y2(0) = 0`.
    AlphaHalfPi,
    /// Any other angle. Only the Cauchy integrator accepts it.
    General(f64),
}

impl BoundaryCondition {
    pub fn alpha(self) -> f64 {
        match self {
            Self::Alpha0 => 0.0,
            Self::AlphaHalfPi => PI / 2.0,
            Self::General(a) => a,
        }
    }

    /// Cauchy data `(sin alpha, -cos alpha)`, exact for the model angles.
    pub fn initial_value(self) -> [f64; 2] {
        match self {
            Self::Alpha0 => [0.0, -1.0],
            Self::AlphaHalfPi => [1.0, 0.0],
            Self::General(a) => [a.sin(), -a.cos()],
        }
    }

    pub fn is_model(self) -> bool {
        !matches!(self, Self::General(_))
    }

    /// Component that the boundary condition forces to zero at the origin.
    pub fn vanishing_component(self) -> Option<usize> {
        match self {
            Self::Alpha0 => Some(0),
            Self::AlphaHalfPi => Some(1),
            Self::General(_) => None,
        }
    }

    fn require_model(self) -> Result<()> {
        match self {
            Self::General(a) => Err(Error::UnsupportedBoundary(a)),
            _ => Ok(()),
        }
    }
}

/// An eigenvalue with its norming constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub lambda: f64,
    pub norming: f64,
}

impl SpectralPoint {
    pub fn new(lambda: f64, norming: f64) -> Result<Self> {
        if !(norming.is_finite() && norming > 0.0) {
            return Err(Error::InvalidNorming(norming));
        }
        Ok(Self { lambda, norming })
    }

    /// Jump of the spectral function at `lambda`.
    pub fn jump(&self) -> f64 {
        1.0 / self.norming
    }
}

/// Two-component function sampled on a grid.
#[derive(Debug, Clone)]
pub struct VectorTrajectory {
    pub grid: Arc<Grid>,
    pub component1: Vec<f64>,
    pub component2: Vec<f64>,
}

impl VectorTrajectory {
    pub fn new(grid: Arc<Grid>, component1: Vec<f64>, component2: Vec<f64>) -> Result<Self> {
        if component1.len() != grid.len() || component2.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, component1, component2 })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        Self { grid, component1: vec![0.0; n], component2: vec![0.0; n] }
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64) -> [f64; 2]) -> Self {
        let (component1, component2) = grid.nodes().iter().map(|&x| {
            let v = f(x);
            (v[0], v[1])
        }).unzip();
        Self { grid: Arc::clone(grid), component1, component2 }
    }

    pub fn len(&self) -> usize {
        self.component1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.component1.is_empty()
    }

    pub fn at(&self, k: usize) -> [f64; 2] {
        [self.component1[k], self.component2[k]]
    }

    /// Largest componentwise deviation from `other` over nodes with `x <= up_to`.
    pub fn sup_distance(&self, other: &VectorTrajectory, up_to: f64) -> Result<f64> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .grid
            .nodes()
            .iter()
            .enumerate()
            .take_while(|(_, &x)| x <= up_to)
            .map(|(k, _)| {
                (self.component1[k] - other.component1[k])
                    .abs()
                    .max((self.component2[k] - other.component2[k]).abs())
            })
            .fold(0.0, f64::max))
    }
}

impl VectorFunction for VectorTrajectory {
    fn eval(&self, x: f64) -> [f64; 2] {
        [
            lagrange_interpolate(&self.grid, &self.component1, x),
            lagrange_interpolate(&self.grid, &self.component2, x),
        ]
    }

    fn reach(&self) -> f64 {
        self.grid.x_max()
    }
}

/// `sign(n) sqrt(2|n|)`.
pub fn whole_axis_eigenvalue(n: i64) -> f64 {
    (n.signum() as f64) * (2.0 * n.unsigned_abs() as f64).sqrt()
}

/// `U_n(x)`: `(phi_{n-1}, phi_n)` for `n > 0`, `(-phi_{|n|-1}, phi_{|n|})` for
/// `n < 0`, `(0, phi_0)` for `n = 0`.
pub fn whole_axis_value(n: i64, x: f64) -> [f64; 2] {
    let m = n.unsigned_abs() as usize;
    if m == 0 {
        return [0.0, phi(0, x)];
    }
    let b = phi_batch(m, x);
    let first = if n > 0 { b[m - 1] } else { -b[m - 1] };
    [first, b[m]]
}

/// Whole-axis eigenfunction `U_n` as an evaluable function.
#[derive(Debug, Clone, Copy)]
pub struct WholeAxisEigenfunction {
    pub n: i64,
}

impl VectorFunction for WholeAxisEigenfunction {
    fn eval(&self, x: f64) -> [f64; 2] {
        whole_axis_value(self.n, x)
    }

    fn reach(&self) -> f64 {
        (2.0 * self.n.unsigned_abs() as f64 + 1.0).sqrt()
    }
}

pub fn whole_axis_eigenfunction(n: i64, grid: &Arc<Grid>) -> VectorTrajectory {
    VectorTrajectory::from_fn(grid, |x| whole_axis_value(n, x))
}

/// Half-axis model eigenvalue with index `k`.
pub fn half_axis_eigenvalue(k: i64, bc: BoundaryCondition) -> Result<f64> {
    bc.require_model()?;
    Ok(whole_axis_eigenvalue(whole_axis_index(k, bc)))
}

fn whole_axis_index(k: i64, bc: BoundaryCondition) -> i64 {
    match bc {
        BoundaryCondition::AlphaHalfPi => 2 * k + 1,
        _ => 2 * k,
    }
}

/// Closed-form alpha = 0 norming constant: `a_0 = sqrt(pi)/2`,
/// `a_k = 4^k (k!)^2 sqrt(pi) / (2k)!`.
fn alpha0_norming(k: i64) -> f64 {
    let m = k.unsigned_abs();
    if m == 0 {
        return PI.sqrt() / 2.0;
    }
    // 4^m (m!)^2 / (2m)! = prod_{j=1}^m 2j / (2j - 1)
    (1..=m).fold(PI.sqrt(), |acc, j| acc * (2 * j) as f64 / (2 * j - 1) as f64)
}

/// Model half-axis eigenfunction normalized by its Cauchy data.
#[derive(Debug, Clone, Copy)]
pub struct ModelEigenfunction {
    k: i64,
    bc: BoundaryCondition,
    whole_index: i64,
    scale: f64,
    lambda: f64,
    norming: f64,
}

impl ModelEigenfunction {
    pub fn new(k: i64, bc: BoundaryCondition) -> Result<Self> {
        bc.require_model()?;
        let whole_index = whole_axis_index(k, bc);
        let at_origin = whole_axis_value(whole_index, 0.0);
        let scale = match bc {
            BoundaryCondition::Alpha0 => -1.0 / at_origin[1],
            _ => 1.0 / at_origin[0],
        };
        let mut f = Self {
            k,
            bc,
            whole_index,
            scale,
            lambda: whole_axis_eigenvalue(whole_index),
            norming: 0.0,
        };
        f.norming = match bc {
            BoundaryCondition::Alpha0 => alpha0_norming(k),
            _ => f.norm_by_quadrature()?,
        };
        Ok(f)
    }

    fn norm_by_quadrature(&self) -> Result<f64> {
        integrate_with(
            |x| {
                let v = self.eval(x);
                v[0] * v[0] + v[1] * v[1]
            },
            0.0,
            self.reach() + TAIL_EXTENT,
            Tolerance::relative(1e-14),
        )
    }

    pub fn index(&self) -> i64 {
        self.k
    }

    pub fn boundary(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn norming(&self) -> f64 {
        self.norming
    }

    pub fn spectral_point(&self) -> SpectralPoint {
        SpectralPoint { lambda: self.lambda, norming: self.norming }
    }

    pub fn sample(&self, grid: &Arc<Grid>) -> VectorTrajectory {
        VectorTrajectory::from_fn(grid, |x| self.eval(x))
    }
}

impl VectorFunction for ModelEigenfunction {
    fn eval(&self, x: f64) -> [f64; 2] {
        let u = whole_axis_value(self.whole_index, x);
        [self.scale * u[0], self.scale * u[1]]
    }

    fn reach(&self) -> f64 {
        (2.0 * self.whole_index.unsigned_abs() as f64 + 1.0).sqrt()
    }
}

pub fn model_eigenfunction(k: i64, bc: BoundaryCondition, grid: &Arc<Grid>) -> Result<VectorTrajectory> {
    Ok(ModelEigenfunction::new(k, bc)?.sample(grid))
}

/// Eigenvalue and norming constant of model index `k`. For alpha = pi/2 the
/// norming constant is the quadrature of the eigenfunction's squared norm.
pub fn norming_constant(k: i64, bc: BoundaryCondition) -> Result<SpectralPoint> {
    Ok(ModelEigenfunction::new(k, bc)?.spectral_point())
}

/// Model spectral points for `k_min..=k_max`, sorted by eigenvalue.
pub fn model_spectrum(bc: BoundaryCondition, k_min: i64, k_max: i64) -> Result<Vec<SpectralPoint>> {
    (k_min..=k_max).map(|k| norming_constant(k, bc)).collect()
}

/// Step spectral function: `sum_{0 < lambda_n <= lambda} 1/a_n` for
/// `lambda > 0`, `-sum_{lambda < lambda_n <= 0} 1/a_n` for `lambda < 0`,
/// and zero at the origin.
pub fn spectral_function(lambda: f64, points: &[SpectralPoint]) -> Result<f64> {
    if points.windows(2).any(|w| w[1].lambda < w[0].lambda) {
        return Err(Error::Unsorted);
    }
    if let Some(p) = points.iter().find(|p| !(p.norming > 0.0)) {
        return Err(Error::InvalidNorming(p.norming));
    }
    let value = if lambda > 0.0 {
        points
            .iter()
            .filter(|p| p.lambda > 0.0 && p.lambda <= lambda)
            .map(SpectralPoint::jump)
            .sum()
    } else if lambda < 0.0 {
        -points
            .iter()
            .filter(|p| p.lambda > lambda && p.lambda <= 0.0)
            .map(SpectralPoint::jump)
            .sum::<f64>()
    } else {
        0.0
    };
    Ok(value)
}
