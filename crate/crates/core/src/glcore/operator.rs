use std::fmt;
use std::sync::{Arc, OnceLock};

use super::plan::{build_jumps, JumpKind, JumpSource, PerturbationPlan, SpectralJump, SAME_NORMING_TOL};
use super::system::{assemble_system, cross_integral, self_integral, GLSystem};
use crate::cauchy::{PotentialField, Provenance, COLLISION_TOL};
use crate::error::{Error, Result};
use crate::model::{norming_constant, ModelEigenfunction, SpectralPoint, VectorFunction, VectorTrajectory};
use crate::quadrature::{integrate_with, tail_inner, Grid, Tolerance};

/// Agreement required between the commutator and determinant potential paths.
pub const CROSS_PATH_TOL: f64 = 1e-9;

/// Eigenfunction selector: a model index or an added eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EigenIndex {
    Model(i64),
    Added(f64),
}

impl fmt::Display for EigenIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Model(k) => write!(f, "{k}"),
            Self::Added(mu) => write!(f, "mu={mu}"),
        }
    }
}

/// Dirac operator synthesized from a perturbation plan.
#[derive(Debug)]
pub struct PerturbedOperator {
    plan: PerturbationPlan,
    grid: Arc<Grid>,
    jumps: Vec<SpectralJump>,
    field: OnceLock<PotentialField>,
}

pub fn synthesize(plan: &PerturbationPlan, grid: &Arc<Grid>) -> Result<PerturbedOperator> {
    let jumps = build_jumps(plan, grid)?;
    Ok(PerturbedOperator { plan: plan.clone(), grid: Arc::clone(grid), jumps, field: OnceLock::new() })
}

pub fn perturbed_potential(op: &PerturbedOperator, x: f64) -> Result<(f64, f64)> {
    op.potential_at(x)
}

pub fn perturbed_eigenfunction(op: &PerturbedOperator, index: EigenIndex) -> Result<VectorTrajectory> {
    op.eigenfunction(index)
}

impl PerturbedOperator {
    pub fn plan(&self) -> &PerturbationPlan {
        &self.plan
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn jumps(&self) -> &[SpectralJump] {
        &self.jumps
    }

    fn check_range(&self, x: f64) -> Result<()> {
        if !(x >= 0.0 && x <= self.grid.x_max()) {
            return Err(Error::OutOfRange { x, x_max: self.grid.x_max() });
        }
        Ok(())
    }

    pub fn system_at(&self, x: f64) -> Result<GLSystem> {
        self.check_range(x)?;
        assemble_system(&self.jumps, x)
    }

    /// `(p~, q~)` at `x`, cross-checked against the determinant formulas while
    /// there are at most three jumps.
    pub fn potential_at(&self, x: f64) -> Result<(f64, f64)> {
        let system = self.system_at(x)?;
        let (p, q) = system.potential();
        if let Some((pc, qc)) = system.potential_cramer() {
            let scale = 1f64.max(p.abs()).max(q.abs());
            let diff = (p - pc).abs().max((q - qc).abs());
            if !(diff <= CROSS_PATH_TOL * scale) {
                return Err(Error::CrossPathMismatch { x, diff });
            }
        }
        Ok((p, q))
    }

    /// `(p~, q~)` at every grid node.
    pub fn potential_samples(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        self.grid.nodes().iter().map(|&x| self.potential_at(x)).collect::<Result<Vec<_>>>().map(|v| v.into_iter().unzip())
    }

    /// The potential tabulated on the grid, computed once.
    pub fn potential_field(&self) -> Result<PotentialField> {
        if let Some(f) = self.field.get() {
            return Ok(f.clone());
        }
        let field = if self.jumps.is_empty() {
            PotentialField::model()
        } else {
            let (p, q) = self.potential_samples()?;
            PotentialField::tabulated(Arc::clone(&self.grid), p, q, Provenance::GlSynthesized)?
        };
        let _ = self.field.set(field.clone());
        Ok(field)
    }

    /// Post-perturbation spectral data: model indices `k_min..=k_max` minus
    /// removals, with rescaled norming constants, plus every addition.
    pub fn spectrum(&self, k_min: i64, k_max: i64) -> Result<Vec<SpectralPoint>> {
        let mut out = Vec::new();
        for k in k_min..=k_max {
            if self.plan.removals.contains(&k) {
                continue;
            }
            let mut point = norming_constant(k, self.plan.boundary)?;
            if let Some(&b) = self.plan.rescalings.get(&k) {
                point.norming = b;
            }
            out.push(point);
        }
        out.extend(self.plan.additions.iter().map(|a| SpectralPoint { lambda: a.mu, norming: a.norming }));
        out.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
        Ok(out)
    }

    /// Eigenvalue and expected norming constant of a surviving index.
    pub fn spectral_point(&self, index: EigenIndex) -> Result<SpectralPoint> {
        match index {
            EigenIndex::Model(k) => {
                if self.plan.removals.contains(&k) {
                    return Err(Error::IndexWasRemoved(index.to_string()));
                }
                let mut point = norming_constant(k, self.plan.boundary)?;
                if let Some(&b) = self.plan.rescalings.get(&k) {
                    point.norming = b;
                }
                Ok(point)
            }
            EigenIndex::Added(mu) => {
                let l = self.addition_position(mu).ok_or_else(|| Error::UnknownIndex(index.to_string()))?;
                Ok(SpectralPoint { lambda: self.jumps[l].lambda, norming: self.plan.additions[l - self.model_jump_count()].norming })
            }
        }
    }

    fn model_jump_count(&self) -> usize {
        self.plan.removals.len() + self.plan.rescalings.len()
    }

    fn addition_position(&self, mu: f64) -> Option<usize> {
        self.jumps.iter().position(|j| matches!(j.kind, JumpKind::Addition { mu: m, .. } if (m - mu).abs() <= COLLISION_TOL))
    }

    fn jump_position(&self, index: EigenIndex) -> Result<Option<usize>> {
        match index {
            EigenIndex::Model(k) => {
                if self.plan.removals.contains(&k) {
                    return Err(Error::IndexWasRemoved(index.to_string()));
                }
                Ok(self.jumps.iter().position(|j| j.model_index() == Some(k)))
            }
            EigenIndex::Added(mu) => {
                self.addition_position(mu).map(Some).ok_or_else(|| Error::UnknownIndex(index.to_string()))
            }
        }
    }

    /// Value of the perturbed eigenfunction at `x`.
    pub fn eigenfunction_at(&self, index: EigenIndex, x: f64) -> Result<[f64; 2]> {
        let position = self.jump_position(index)?;
        let system = self.system_at(x)?;
        Ok(self.eigenfunction_from(&system, index, position))
    }

    fn eigenfunction_from(&self, system: &GLSystem, index: EigenIndex, position: Option<usize>) -> [f64; 2] {
        match (position, index) {
            // the l-th equation of the system is exactly psi~_l = -g_l / c_l
            (Some(l), _) => {
                let g = system.g(l);
                let c = self.jumps[l].coefficient;
                [-g[0] / c, -g[1] / c]
            }
            (None, EigenIndex::Model(m)) => {
                let f = ModelEigenfunction::new(m, self.plan.boundary).expect("model boundary was validated");
                let v = f.eval(system.x);
                let mut out = v;
                for k in 0..system.len() {
                    let n_km = cross_integral(system.sources[k], system.lambdas[k], v, f.lambda());
                    let g = system.g(k);
                    out[0] += g[0] * n_km;
                    out[1] += g[1] * n_km;
                }
                out
            }
            (None, EigenIndex::Added(_)) => unreachable!("additions always have a jump"),
        }
    }

    /// The perturbed eigenfunction on the operator's grid.
    pub fn eigenfunction(&self, index: EigenIndex) -> Result<VectorTrajectory> {
        let position = self.jump_position(index)?;
        let mut c1 = Vec::with_capacity(self.grid.len());
        let mut c2 = Vec::with_capacity(self.grid.len());
        for &x in self.grid.nodes() {
            let v = self.eigenfunction_from(&self.system_at(x)?, index, position);
            c1.push(v[0]);
            c2.push(v[1]);
        }
        VectorTrajectory::new(Arc::clone(&self.grid), c1, c2)
    }

    /// As [`Self::eigenfunction`], but always through the degenerate form
    /// `psi + sum_k g_k integral_0^x psi_k . psi`, including for jump
    /// sources. For model indices without a jump the integrals come from
    /// adaptive quadrature. Loses digits once `x` is past a few units.
    pub fn eigenfunction_degenerate(&self, index: EigenIndex) -> Result<VectorTrajectory> {
        let position = self.jump_position(index)?;
        let Some(l) = position else {
            let EigenIndex::Model(m) = index else { unreachable!("additions always have a jump") };
            return self.model_eigenfunction_by_quadrature(m);
        };
        let jl = &self.jumps[l];
        let mut c1 = Vec::with_capacity(self.grid.len());
        let mut c2 = Vec::with_capacity(self.grid.len());
        for &x in self.grid.nodes() {
            let system = self.system_at(x)?;
            let mut out = system.sources[l];
            for k in 0..system.len() {
                let m_kl = if x == 0.0 {
                    0.0
                } else if k == l {
                    self_integral(jl, x)?
                } else {
                    cross_integral(system.sources[k], system.lambdas[k], system.sources[l], system.lambdas[l])
                };
                let g = system.g(k);
                out[0] += g[0] * m_kl;
                out[1] += g[1] * m_kl;
            }
            c1.push(out[0]);
            c2.push(out[1]);
        }
        VectorTrajectory::new(Arc::clone(&self.grid), c1, c2)
    }

    fn model_eigenfunction_by_quadrature(&self, m: i64) -> Result<VectorTrajectory> {
        let f = ModelEigenfunction::new(m, self.plan.boundary)?;
        let tol = Tolerance { abs: 1e-15, rel: 1e-13 };
        let mut c1 = Vec::with_capacity(self.grid.len());
        let mut c2 = Vec::with_capacity(self.grid.len());
        for &x in self.grid.nodes() {
            let system = self.system_at(x)?;
            let mut out = f.eval(x);
            for (k, jump) in self.jumps.iter().enumerate() {
                let n_km = match &jump.source {
                    // distinct model eigenfunctions are orthogonal, so integrate the tail
                    JumpSource::Model(u) => -tail_inner(u, &f, x)?,
                    JumpSource::Reference if x == 0.0 => 0.0,
                    JumpSource::Reference => integrate_with(
                        |t| {
                            let a = jump.value_at(t);
                            let b = f.eval(t);
                            a[0] * b[0] + a[1] * b[1]
                        },
                        0.0,
                        x,
                        tol,
                    )?,
                };
                let g = system.g(k);
                out[0] += g[0] * n_km;
                out[1] += g[1] * n_km;
            }
            c1.push(out[0]);
            c2.push(out[1]);
        }
        VectorTrajectory::new(Arc::clone(&self.grid), c1, c2)
    }

    /// Re-synthesizes from the model with this plan followed by `next`.
    /// Only plans whose jumps all have model sources compose.
    pub fn compose(&self, next: &PerturbationPlan) -> Result<PerturbedOperator> {
        if !self.plan.additions.is_empty() || !next.additions.is_empty() {
            return Err(Error::Composition(
                "added eigenvalues have non-model sources; compose only removals and rescalings".into(),
            ));
        }
        if next.boundary != self.plan.boundary {
            return Err(Error::Composition("boundary conditions differ".into()));
        }
        let bc = self.plan.boundary;
        let mut merged = self.plan.clone();
        for &k in &next.removals {
            if self.plan.removals.contains(&k) {
                return Err(Error::Composition(format!("index {k} is already removed")));
            }
            merged.rescalings.remove(&k);
            merged.removals.insert(k);
        }
        for (&k, &b) in &next.rescalings {
            if self.plan.removals.contains(&k) {
                return Err(Error::Composition(format!("index {k} was removed and cannot be rescaled")));
            }
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::InvalidNorming(b));
            }
            let original = norming_constant(k, bc)?.norming;
            let current = self.plan.rescalings.get(&k).copied().unwrap_or(original);
            if (b - current).abs() <= SAME_NORMING_TOL * current {
                return Err(Error::InvalidPlan(format!(
                    "rescaling index {k} to its current norming constant {current} changes nothing"
                )));
            }
            if (b - original).abs() <= SAME_NORMING_TOL * original {
                // back to the model value: the jump cancels
                merged.rescalings.remove(&k);
            } else {
                merged.rescalings.insert(k, b);
            }
        }
        synthesize(&merged, &self.grid)
    }

    /// Relative residual of `G(x,y) + F(x,y) + integral_0^x G(x,s) F(s,y) ds`
    /// for `0 <= y <= x`, with the integral taken by independent quadrature.
    pub fn gl_residual(&self, x: f64, y: f64) -> Result<f64> {
        if !(0.0 <= y && y <= x) {
            return Err(Error::InvalidBounds { a: y, b: x });
        }
        let system = self.system_at(x)?;
        let n = self.jumps.len();
        let at_y: Vec<[f64; 2]> = self.jumps.iter().map(|j| j.value_at(y)).collect();
        let mut gram = vec![vec![0.0; n]; n];
        for k in 0..n {
            for i in k..n {
                let (jk, ji) = (&self.jumps[k], &self.jumps[i]);
                let v = integrate_with(
                    |s| {
                        let a = jk.value_at(s);
                        let b = ji.value_at(s);
                        a[0] * b[0] + a[1] * b[1]
                    },
                    0.0,
                    x,
                    Tolerance { abs: 1e-300, rel: 1e-13 },
                )?;
                gram[k][i] = v;
                gram[i][k] = v;
            }
        }
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for p in 0..2 {
            for q in 0..2 {
                let mut g = 0.0;
                let mut f = 0.0;
                let mut integral = 0.0;
                for k in 0..n {
                    g += system.g(k)[p] * at_y[k][q];
                    let c = self.jumps[k].coefficient;
                    f += c * system.sources[k][p] * at_y[k][q];
                    for i in 0..n {
                        integral += system.g(k)[p] * self.jumps[i].coefficient * gram[k][i] * at_y[i][q];
                    }
                }
                worst = worst.max((g + f + integral).abs());
                scale = scale.max(g.abs() + f.abs() + integral.abs());
            }
        }
        Ok(if scale > 0.0 { worst / scale } else { 0.0 })
    }
}
