//! Cauchy problem `B y' + Omega(x) y = lambda y`, `y(0) = (sin alpha, -cos alpha)`
//! for an arbitrary symmetric trace-free potential
//! `Omega = [[p, q], [q, -p]]`.

mod dop853;

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{half_axis_eigenvalue, BoundaryCondition, VectorTrajectory};
use crate::quadrature::{lagrange_interpolate, Grid};

/// Where a potential came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Model,
    ClosedFormRemoveZero,
    GlSynthesized,
    Imported,
}

#[derive(Debug, Clone)]
enum Repr {
    Linear,
    RemoveZero,
    Tabulated { grid: Arc<Grid>, p: Vec<f64>, q: Vec<f64> },
}

/// The pair `(p, q)` defining `Omega`. Symmetric and trace-free by construction.
#[derive(Debug, Clone)]
pub struct PotentialField {
    provenance: Provenance,
    repr: Repr,
}

impl PotentialField {
    /// `p = 0`, `q = x`.
    pub fn model() -> Self {
        Self { provenance: Provenance::Model, repr: Repr::Linear }
    }

    /// The closed-form potential obtained by removing the eigenvalue at zero
    /// from the `alpha = 0` model.
    pub fn remove_zero_closed_form() -> Self {
        Self { provenance: Provenance::ClosedFormRemoveZero, repr: Repr::RemoveZero }
    }

    /// Samples on a grid, interpolated with six-point Lagrange stencils.
    pub fn tabulated(grid: Arc<Grid>, p: Vec<f64>, q: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if p.len() != grid.len() || q.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { provenance, repr: Repr::Tabulated { grid, p, q } })
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Largest abscissa the field is defined at, if bounded.
    pub fn x_limit(&self) -> Option<f64> {
        match &self.repr {
            Repr::Tabulated { grid, .. } => Some(grid.x_max()),
            _ => None,
        }
    }

    pub fn eval(&self, x: f64) -> (f64, f64) {
        match &self.repr {
            Repr::Linear => (0.0, x),
            Repr::RemoveZero => crate::glcore::closed_form_remove_zero(x),
            Repr::Tabulated { grid, p, q } => (lagrange_interpolate(grid, p, x), lagrange_interpolate(grid, q, x)),
        }
    }

    pub fn p(&self, x: f64) -> f64 {
        self.eval(x).0
    }

    pub fn q(&self, x: f64) -> f64 {
        self.eval(x).1
    }

    /// Samples `(p, q)` at every node of `grid`.
    pub fn sample(&self, grid: &Grid) -> (Vec<f64>, Vec<f64>) {
        grid.nodes().iter().map(|&x| self.eval(x)).unzip()
    }
}

#[derive(Debug, Clone)]
pub struct CauchyProblem {
    pub potential: PotentialField,
    pub lambda: f64,
    pub boundary: BoundaryCondition,
}

impl CauchyProblem {
    pub fn new(potential: PotentialField, lambda: f64, boundary: BoundaryCondition) -> Self {
        Self { potential, lambda, boundary }
    }

    /// Right-hand side `y' = B^{-1} (lambda - Omega) y`.
    pub fn rhs(&self, x: f64, y: &[f64; 2]) -> [f64; 2] {
        let (p, q) = self.potential.eval(x);
        let l = self.lambda;
        [q * y[0] - (l + p) * y[1], (l - p) * y[0] - q * y[1]]
    }
}

/// Integrator tolerances. The defaults sit near the precision limit: at an
/// eigenvalue the forward integration amplifies local errors by up to
/// `e^{x^2/2}`, and reproducing a decaying eigenfunction to 1e-8 on `[0, 6]`
/// needs local errors of a few ulps.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { rtol: 3e-15, atol: 1e-20, max_steps: 1_000_000 }
    }
}

impl SolverOptions {
    fn engine(&self) -> dop853::Options {
        dop853::Options { rtol: self.rtol, atol: self.atol, max_steps: self.max_steps }
    }
}

fn check_range(problem: &CauchyProblem, x_end: f64) -> Result<()> {
    if let Some(limit) = problem.potential.x_limit() {
        if x_end > limit * (1.0 + 1e-12) {
            return Err(Error::OutOfRange { x: x_end, x_max: limit });
        }
    }
    Ok(())
}

/// `psi(x, lambda, alpha, Omega)` at the nodes of `grid` with default tolerances.
pub fn solve_cauchy(problem: &CauchyProblem, grid: &Arc<Grid>) -> Result<VectorTrajectory> {
    solve_cauchy_with(problem, grid, &SolverOptions::default())
}

/// As [`solve_cauchy`]. On step-size underflow the error carries the
/// trajectory with the unreached nodes set to NaN.
pub fn solve_cauchy_with(problem: &CauchyProblem, grid: &Arc<Grid>, options: &SolverOptions) -> Result<VectorTrajectory> {
    if grid.x_min() != 0.0 {
        return Err(Error::InvalidGrid(format!("Cauchy grid must start at 0, starts at {}", grid.x_min())));
    }
    check_range(problem, grid.x_max())?;
    let n = grid.len();
    let mut c1 = vec![f64::NAN; n];
    let mut c2 = vec![f64::NAN; n];
    let outcome = dop853::integrate(
        |x, y| problem.rhs(x, y),
        0.0,
        problem.boundary.initial_value(),
        grid.x_max(),
        grid.nodes(),
        &options.engine(),
        |k, v| {
            c1[k] = v[0];
            c2[k] = v[1];
        },
    );
    let trajectory = VectorTrajectory { grid: Arc::clone(grid), component1: c1, component2: c2 };
    match outcome {
        dop853::Outcome::Completed => Ok(trajectory),
        dop853::Outcome::StepSizeUnderflow(x) => Err(Error::StepSizeUnderflow { x, partial: Box::new(trajectory) }),
    }
}

/// `psi(x_end)` alone, without materialising a grid.
pub fn shoot(problem: &CauchyProblem, x_end: f64, options: &SolverOptions) -> Result<[f64; 2]> {
    check_range(problem, x_end)?;
    let mut end = [f64::NAN; 2];
    let outcome = dop853::integrate(
        |x, y| problem.rhs(x, y),
        0.0,
        problem.boundary.initial_value(),
        x_end,
        &[x_end],
        &options.engine(),
        |_, v| end = v,
    );
    match outcome {
        dop853::Outcome::Completed => Ok(end),
        dop853::Outcome::StepSizeUnderflow(x) => {
            let grid = Arc::new(Grid::from_nodes(vec![0.0, x_end.max(f64::MIN_POSITIVE)])?);
            Err(Error::StepSizeUnderflow { x, partial: Box::new(VectorTrajectory::zeros(grid)) })
        }
    }
}

/// Tolerance for deciding that `mu` sits on a model eigenvalue.
pub const COLLISION_TOL: f64 = 1e-9;

/// Model eigenvalue nearest to `mu` for a model boundary condition.
pub fn nearest_model_eigenvalue(mu: f64, bc: BoundaryCondition) -> Result<f64> {
    // invert lambda = sign(n) sqrt(2|n|) over the index family of bc
    let n_guess = (mu * mu / 2.0).round() as i64;
    let mut best = f64::INFINITY;
    let ks: Vec<i64> = match bc {
        BoundaryCondition::AlphaHalfPi => {
            let k = (n_guess - 1).div_euclid(2);
            (k - 2..=k + 2).flat_map(|k| [k, -k - 1]).collect()
        }
        _ => {
            let k = n_guess / 2;
            (k - 2..=k + 2).flat_map(|k| [k, -k]).collect()
        }
    };
    for k in ks {
        let l = half_axis_eigenvalue(k, bc)?;
        if (l - mu).abs() < (best - mu).abs() {
            best = l;
        }
    }
    Ok(best)
}

/// `W(x) = psi(x, mu, 0, Omega_0)`, the reference solution for an added eigenvalue.
pub fn reference_solution_w(mu: f64, grid: &Arc<Grid>) -> Result<VectorTrajectory> {
    reference_solution(mu, BoundaryCondition::Alpha0, grid)
}

/// As [`reference_solution_w`] for either model boundary condition.
pub fn reference_solution(mu: f64, bc: BoundaryCondition, grid: &Arc<Grid>) -> Result<VectorTrajectory> {
    let lambda = nearest_model_eigenvalue(mu, bc)?;
    if (lambda - mu).abs() <= COLLISION_TOL {
        return Err(Error::MuCollidesWithSpectrum { mu, lambda });
    }
    solve_cauchy(&CauchyProblem::new(PotentialField::model(), mu, bc), grid)
}

/// Reference solution together with its running squared norm
/// `integral_0^x |W|^2`, integrated as a third component of the same system.
pub fn reference_solution_with_norm(
    mu: f64,
    bc: BoundaryCondition,
    grid: &Arc<Grid>,
) -> Result<(VectorTrajectory, Vec<f64>)> {
    let lambda = nearest_model_eigenvalue(mu, bc)?;
    if (lambda - mu).abs() <= COLLISION_TOL {
        return Err(Error::MuCollidesWithSpectrum { mu, lambda });
    }
    if grid.x_min() != 0.0 {
        return Err(Error::InvalidGrid(format!("Cauchy grid must start at 0, starts at {}", grid.x_min())));
    }
    let problem = CauchyProblem::new(PotentialField::model(), mu, bc);
    let n = grid.len();
    let mut c1 = vec![f64::NAN; n];
    let mut c2 = vec![f64::NAN; n];
    let mut norm = vec![f64::NAN; n];
    let y0 = bc.initial_value();
    let outcome = dop853::integrate(
        |x, y: &[f64; 3]| {
            let d = problem.rhs(x, &[y[0], y[1]]);
            [d[0], d[1], y[0] * y[0] + y[1] * y[1]]
        },
        0.0,
        [y0[0], y0[1], 0.0],
        grid.x_max(),
        grid.nodes(),
        &SolverOptions::default().engine(),
        |k, v| {
            c1[k] = v[0];
            c2[k] = v[1];
            norm[k] = v[2];
        },
    );
    let trajectory = VectorTrajectory { grid: Arc::clone(grid), component1: c1, component2: c2 };
    match outcome {
        dop853::Outcome::Completed => Ok((trajectory, norm)),
        dop853::Outcome::StepSizeUnderflow(x) => Err(Error::StepSizeUnderflow { x, partial: Box::new(trajectory) }),
    }
}

/// `alpha` in `[0, pi)` mapped to a boundary condition, snapping the model angles.
pub fn boundary_from_angle(alpha: f64) -> BoundaryCondition {
    if alpha == 0.0 {
        BoundaryCondition::Alpha0
    } else if alpha == PI / 2.0 {
        BoundaryCondition::AlphaHalfPi
    } else {
        BoundaryCondition::General(alpha)
    }
}
