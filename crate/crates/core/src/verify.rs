//! Checks that a synthesized potential carries the prescribed spectral data,
//! using only the potential itself and the Cauchy integrator.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::cauchy::{shoot, CauchyProblem, PotentialField, SolverOptions};
use crate::error::{Error, Result};
use crate::glcore::{EigenIndex, PerturbedOperator};
use crate::model::{BoundaryCondition, VectorTrajectory};
use crate::quadrature::{cumulative_inner, Grid};

pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-6;
pub const DEFAULT_X_SCAN: f64 = 8.0;
pub const DEFAULT_THRESHOLD: f64 = 6.0;
pub const REFINE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub lambda: f64,
    pub sup_residual: f64,
    /// Node where the residual peaks.
    pub worst_x: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip)]
    pub grid: Arc<Grid>,
}

/// `sup |B y' + Omega y - lambda y|` over interior nodes, with fourth-order
/// central differences.
pub fn dirac_residual(potential: &PotentialField, lambda: f64, y: &VectorTrajectory) -> Result<ResidualReport> {
    dirac_residual_with(potential, lambda, y, DEFAULT_RESIDUAL_TOL)
}

pub fn dirac_residual_with(
    potential: &PotentialField,
    lambda: f64,
    y: &VectorTrajectory,
    tolerance: f64,
) -> Result<ResidualReport> {
    let grid = &y.grid;
    let h = match grid.uniform_step() {
        Some(h) => h,
        None => {
            let h0 = grid.nodes()[1] - grid.nodes()[0];
            let index = grid.nodes().windows(2).position(|w| ((w[1] - w[0]) - h0).abs() > 1e-9 * h0).unwrap_or(0) + 1;
            return Err(Error::NonUniformGrid { index, step: h0 });
        }
    };
    if grid.len() < 5 {
        return Err(Error::InvalidGrid("residual needs at least five nodes".into()));
    }
    let (c1, c2) = (&y.component1, &y.component2);
    let d = |c: &[f64], k: usize| (c[k - 2] - 8.0 * c[k - 1] + 8.0 * c[k + 1] - c[k + 2]) / (12.0 * h);
    let mut sup: f64 = 0.0;
    let mut worst_x = grid.nodes()[2];
    for k in 2..grid.len() - 2 {
        let x = grid.nodes()[k];
        let (p, q) = potential.eval(x);
        // B y' = (y2', -y1')
        let r1 = d(c2, k) + p * c1[k] + q * c2[k] - lambda * c1[k];
        let r2 = -d(c1, k) + q * c1[k] - p * c2[k] - lambda * c2[k];
        let r = r1.abs().max(r2.abs());
        if !(r <= sup) {
            sup = r;
            worst_x = x;
        }
    }
    Ok(ResidualReport { lambda, sup_residual: sup, worst_x, tolerance, pass: sup <= tolerance, grid: Arc::clone(grid) })
}

/// Gram matrix of half-axis inner products, truncated at the grid end.
pub fn orthogonality_matrix(family: &[VectorTrajectory]) -> Result<DMatrix<f64>> {
    let n = family.len();
    let mut gram = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = cumulative_inner(&family[i], &family[j])?.total;
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    Ok(gram)
}

#[derive(Debug, Clone, Copy)]
pub struct ScanOptions {
    pub x_scan: f64,
    /// Depth in natural-log units below the local background.
    pub threshold: f64,
    /// Samples on each side over which the background is taken.
    pub window: usize,
    pub solver: SolverOptions,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self { x_scan: DEFAULT_X_SCAN, threshold: DEFAULT_THRESHOLD, window: 8, solver: SolverOptions::default() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumScan {
    pub lo: f64,
    pub hi: f64,
    pub lambdas: Vec<f64>,
    /// `ln |psi(x_scan, lambda)|` at each sample.
    pub miss: Vec<f64>,
    pub detected: Vec<f64>,
    /// Refined miss value at each detection.
    pub detected_miss: Vec<f64>,
}

/// `ln |psi(x_scan, lambda)|`.
pub fn miss_distance(potential: &PotentialField, bc: BoundaryCondition, lambda: f64, options: &ScanOptions) -> Result<f64> {
    let problem = CauchyProblem::new(potential.clone(), lambda, bc);
    let end = match shoot(&problem, options.x_scan, &options.solver) {
        Ok(v) => v,
        // overflow means strong growth: far from any eigenvalue
        Err(Error::StepSizeUnderflow { .. }) => return Ok(f64::MAX.ln()),
        Err(e) => return Err(e),
    };
    Ok(end[0].hypot(end[1]).ln())
}

fn golden_section(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc < fd { (c, fc) } else { (d, fd) })
}

/// Samples the miss distance on `samples` equispaced points of `[lo, hi]`,
/// refines every local minimum by golden-section search and keeps those at
/// least `threshold` below the surrounding background.
pub fn spectrum_scan(potential: &PotentialField, bc: BoundaryCondition, lo: f64, hi: f64, samples: usize) -> Result<SpectrumScan> {
    spectrum_scan_with(potential, bc, lo, hi, samples, &ScanOptions::default())
}

pub fn spectrum_scan_with(
    potential: &PotentialField,
    bc: BoundaryCondition,
    lo: f64,
    hi: f64,
    samples: usize,
    options: &ScanOptions,
) -> Result<SpectrumScan> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi && samples >= 16) {
        return Err(Error::InvalidScan { lo, hi, samples });
    }
    let step = (hi - lo) / (samples - 1) as f64;
    let lambdas: Vec<f64> = (0..samples).map(|i| if i + 1 == samples { hi } else { lo + i as f64 * step }).collect();
    let miss = lambdas.iter().map(|&l| miss_distance(potential, bc, l, options)).collect::<Result<Vec<_>>>()?;

    let mut detected: Vec<f64> = Vec::new();
    let mut detected_miss = Vec::new();
    for i in 1..samples - 1 {
        if !(miss[i] <= miss[i - 1] && miss[i] <= miss[i + 1]) {
            continue;
        }
        let (lambda, depth) = golden_section(
            |l| miss_distance(potential, bc, l, options),
            lambdas[i - 1],
            lambdas[i + 1],
            REFINE_TOL,
        )?;
        let left = miss[i.saturating_sub(options.window)..i].iter().copied().fold(f64::MIN, f64::max);
        let right = miss[i + 1..(i + 1 + options.window).min(samples)].iter().copied().fold(f64::MIN, f64::max);
        let background = left.min(right);
        if depth > background - options.threshold {
            continue;
        }
        if detected.last().is_some_and(|&prev| lambda - prev <= REFINE_TOL) {
            continue;
        }
        detected.push(lambda);
        detected_miss.push(depth);
    }
    Ok(SpectrumScan { lo, hi, lambdas, miss, detected, detected_miss })
}

/// Tolerances and ranges of [`verify_plan`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct VerifyOptions {
    pub residual: f64,
    pub norming: f64,
    pub orthogonality: f64,
    pub eigenvalue: f64,
    /// Half-width around each removed eigenvalue that must stay free of detections.
    pub exclusion: f64,
    /// Model indices `|k| <= max_index` are checked individually.
    pub max_index: i64,
    /// Scan sample spacing in `lambda`.
    pub scan_spacing: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            residual: 1e-6,
            norming: 1e-6,
            orthogonality: 1e-6,
            eigenvalue: 1e-4,
            exclusion: 0.3,
            max_index: 4,
            scan_spacing: 0.01,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: String, value: f64, tolerance: f64) -> Self {
        Self { name, value, tolerance, pass: value <= tolerance }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub boundary: BoundaryCondition,
    pub options: VerifyOptions,
    pub checks: Vec<Check>,
    pub scan: Option<ScanSummary>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanSummary {
    pub lo: f64,
    pub hi: f64,
    pub samples: usize,
    pub expected: Vec<f64>,
    pub detected: Vec<f64>,
}

impl VerificationReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

/// Runs every check against the operator's own synthesized potential.
pub fn verify_plan(op: &PerturbedOperator, options: &VerifyOptions) -> Result<VerificationReport> {
    let field = op.potential_field()?;
    verify_with_potential(op, &field, options)
}

/// As [`verify_plan`], with residuals and the scan taken against `potential`
/// (for instance a potential file replayed from disk).
pub fn verify_with_potential(op: &PerturbedOperator, potential: &PotentialField, options: &VerifyOptions) -> Result<VerificationReport> {
    let plan = op.plan();
    let bc = plan.boundary;
    let vanishing = bc.vanishing_component().ok_or(Error::UnsupportedBoundary(bc.alpha()))?;
    let mut checks = Vec::new();

    let mut indices: Vec<EigenIndex> = (-options.max_index..=options.max_index)
        .filter(|k| !plan.removals.contains(k))
        .map(EigenIndex::Model)
        .collect();
    indices.extend(plan.rescalings.keys().filter(|k| k.abs() > options.max_index).map(|&k| EigenIndex::Model(k)));
    indices.extend(plan.additions.iter().map(|a| EigenIndex::Added(a.mu)));

    let mut family = Vec::with_capacity(indices.len());
    for &index in &indices {
        let point = op.spectral_point(index)?;
        let y = op.eigenfunction(index)?;
        let r = dirac_residual_with(potential, point.lambda, &y, options.residual)?;
        checks.push(Check::at_most(format!("residual[{index}]"), r.sup_residual, options.residual));
        let norm = cumulative_inner(&y, &y)?.total;
        checks.push(Check::at_most(format!("norming[{index}]"), (norm - point.norming).abs(), options.norming));
        let at_origin = [y.component1[0], y.component2[0]][vanishing];
        checks.push(Check::at_most(format!("boundary[{index}]"), at_origin.abs(), 0.0));
        family.push(y);
    }
    let gram = orthogonality_matrix(&family)?;
    let mut off: f64 = 0.0;
    for i in 0..gram.nrows() {
        for j in 0..i {
            off = off.max(gram[(i, j)].abs());
        }
    }
    checks.push(Check::at_most("orthogonality".into(), off, options.orthogonality));

    // scan window bracketing every prescribed and removed eigenvalue
    let mut marks: Vec<f64> = Vec::new();
    for index in &indices {
        marks.push(op.spectral_point(*index)?.lambda);
    }
    let removed: Vec<f64> = plan
        .removals
        .iter()
        .map(|&k| crate::model::half_axis_eigenvalue(k, bc))
        .collect::<Result<_>>()?;
    marks.extend(&removed);
    let lo = marks.iter().copied().fold(f64::INFINITY, f64::min) - 0.5;
    let hi = marks.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 0.5;
    let samples = (((hi - lo) / options.scan_spacing).ceil() as usize + 1).max(16);
    let x_scan = DEFAULT_X_SCAN.min(potential.x_limit().unwrap_or(f64::INFINITY)).min(op.grid().x_max());
    let scan_options = ScanOptions { x_scan, ..ScanOptions::default() };
    let scan = spectrum_scan_with(potential, bc, lo, hi, samples, &scan_options)?;

    let k_span = ((hi.abs().max(lo.abs()) / 2.0).powi(2).ceil() as i64) + 2;
    let expected: Vec<f64> = op
        .spectrum(-k_span, k_span)?
        .into_iter()
        .map(|p| p.lambda)
        .filter(|l| *l > lo && *l < hi)
        .collect();
    for &l in &expected {
        let nearest = scan.detected.iter().map(|d| (d - l).abs()).fold(f64::INFINITY, f64::min);
        checks.push(Check::at_most(format!("scan.present[{l:.6}]"), nearest, options.eigenvalue));
    }
    for &l in &removed {
        let count = scan.detected.iter().filter(|d| (*d - l).abs() <= options.exclusion).count();
        checks.push(Check::at_most(format!("scan.absent[{l:.6}]"), count as f64, 0.0));
    }
    let spurious = scan
        .detected
        .iter()
        .filter(|d| expected.iter().all(|l| (*d - l).abs() > options.eigenvalue))
        .count();
    checks.push(Check::at_most("scan.spurious".into(), spurious as f64, 0.0));

    let pass = checks.iter().all(|c| c.pass);
    Ok(VerificationReport {
        boundary: bc,
        options: *options,
        checks,
        scan: Some(ScanSummary { lo, hi, samples, expected, detected: scan.detected }),
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glcore::{synthesize, PerturbationPlan};
    use crate::model::{whole_axis_eigenfunction, ModelEigenfunction};

    const A0: BoundaryCondition = BoundaryCondition::Alpha0;

    #[test]
    fn residual_of_model_functions() {
        let grid = Arc::new(Grid::uniform(8.0, 1.0 / 256.0).unwrap());
        let u1 = whole_axis_eigenfunction(1, &grid);
        let r = dirac_residual(&PotentialField::model(), 2f64.sqrt(), &u1).unwrap();
        assert!(r.pass && r.sup_residual < 1e-6, "{}", r.sup_residual);
        let zero = VectorTrajectory::zeros(Arc::clone(&grid));
        assert_eq!(dirac_residual(&PotentialField::model(), 0.0, &zero).unwrap().sup_residual, 0.0);
        let wrong = dirac_residual(&PotentialField::model(), 1.0, &u1).unwrap();
        assert!(!wrong.pass);
    }

    #[test]
    fn residual_needs_uniform_grid() {
        let grid = Arc::new(Grid::from_nodes(vec![0.0, 0.1, 0.3, 0.4, 0.5, 0.6]).unwrap());
        let y = VectorTrajectory::zeros(grid);
        assert!(matches!(dirac_residual(&PotentialField::model(), 0.0, &y), Err(Error::NonUniformGrid { .. })));
    }

    #[test]
    fn model_gram_is_diagonal() {
        let grid = Arc::new(Grid::default_half_axis());
        let fs: Vec<_> = (-4..=4).map(|k| ModelEigenfunction::new(k, A0).unwrap()).collect();
        let family: Vec<_> = fs.iter().map(|f| f.sample(&grid)).collect();
        let gram = orthogonality_matrix(&family).unwrap();
        for i in 0..fs.len() {
            for j in 0..fs.len() {
                let expected = if i == j { fs[i].norming() } else { 0.0 };
                assert!((gram[(i, j)] - expected).abs() < 1e-8, "({i},{j})");
            }
        }
        let one = orthogonality_matrix(&family[..1]).unwrap();
        assert_eq!(one.shape(), (1, 1));
    }

    #[test]
    fn model_scan() {
        let scan = spectrum_scan(&PotentialField::model(), A0, 0.5, 3.5, 256).unwrap();
        // 2 sqrt(k) for k = 1, 2, 3
        assert_eq!(scan.detected.len(), 3, "{:?}", scan.detected);
        for (d, k) in scan.detected.iter().zip(1..) {
            assert!((d - 2.0 * (k as f64).sqrt()).abs() < 1e-4);
        }
        let empty = spectrum_scan(&PotentialField::model(), A0, 0.1, 0.4, 64).unwrap();
        assert!(empty.detected.is_empty());
        assert!(matches!(
            spectrum_scan(&PotentialField::model(), A0, 1.0, 0.5, 64),
            Err(Error::InvalidScan { .. })
        ));
    }

    #[test]
    fn removal_of_zero_scan_and_residual() {
        let grid = Arc::new(Grid::default_half_axis());
        let op = synthesize(&PerturbationPlan::new(A0).remove(0), &grid).unwrap();
        let field = op.potential_field().unwrap();
        let scan = spectrum_scan(&field, A0, -0.5, 0.5, 256).unwrap();
        assert!(scan.detected.is_empty(), "{:?}", scan.detected);
        let v1 = op.eigenfunction(EigenIndex::Model(1)).unwrap();
        let r = dirac_residual(&field, 2.0, &v1).unwrap();
        assert!(r.sup_residual < 1e-6, "{}", r.sup_residual);
    }

    #[test]
    fn empty_plan_verifies() {
        let grid = Arc::new(Grid::default_half_axis());
        let op = synthesize(&PerturbationPlan::new(A0), &grid).unwrap();
        let report = verify_plan(&op, &VerifyOptions { max_index: 2, ..VerifyOptions::default() }).unwrap();
        let failed: Vec<_> = report.failures().collect();
        assert!(report.pass, "{failed:?}");
    }
}
