use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cauchy::{nearest_model_eigenvalue, reference_solution_with_norm, COLLISION_TOL};
use crate::error::{Error, Result};
use crate::model::{norming_constant, BoundaryCondition, ModelEigenfunction, VectorFunction, VectorTrajectory};
use crate::quadrature::{lagrange_interpolate, tail_inner, tail_inner_on_grid, Grid};

/// Relative distance below which a new norming constant counts as unchanged.
pub const SAME_NORMING_TOL: f64 = 1e-14;

/// A new eigenvalue `mu` with norming constant `norming`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Addition {
    pub mu: f64,
    pub norming: f64,
}

/// Finite change of the model spectral data.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationPlan {
    pub boundary: BoundaryCondition,
    pub removals: BTreeSet<i64>,
    pub rescalings: BTreeMap<i64, f64>,
    pub additions: Vec<Addition>,
}

impl PerturbationPlan {
    pub fn new(boundary: BoundaryCondition) -> Self {
        Self { boundary, removals: BTreeSet::new(), rescalings: BTreeMap::new(), additions: Vec::new() }
    }

    pub fn remove(mut self, k: i64) -> Self {
        self.removals.insert(k);
        self
    }

    pub fn rescale(mut self, k: i64, b: f64) -> Self {
        self.rescalings.insert(k, b);
        self
    }

    pub fn add(mut self, mu: f64, norming: f64) -> Self {
        self.additions.push(Addition { mu, norming });
        self
    }

    pub fn is_empty(&self) -> bool {
        self.removals.is_empty() && self.rescalings.is_empty() && self.additions.is_empty()
    }

    pub fn jump_count(&self) -> usize {
        self.removals.len() + self.rescalings.len() + self.additions.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.boundary.is_model() {
            return Err(Error::UnsupportedBoundary(self.boundary.alpha()));
        }
        if let Some(k) = self.removals.iter().find(|k| self.rescalings.contains_key(k)) {
            return Err(Error::InvalidPlan(format!("index {k} is both removed and rescaled")));
        }
        for (&k, &b) in &self.rescalings {
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::InvalidNorming(b));
            }
            let a = norming_constant(k, self.boundary)?.norming;
            if (b - a).abs() <= SAME_NORMING_TOL * a {
                return Err(Error::InvalidPlan(format!(
                    "rescaling index {k} to its current norming constant {a} changes nothing"
                )));
            }
        }
        for (i, add) in self.additions.iter().enumerate() {
            if !(add.norming.is_finite() && add.norming > 0.0) {
                return Err(Error::InvalidNorming(add.norming));
            }
            if !add.mu.is_finite() {
                return Err(Error::InvalidPlan(format!("added eigenvalue {} is not finite", add.mu)));
            }
            let lambda = nearest_model_eigenvalue(add.mu, self.boundary)?;
            if (lambda - add.mu).abs() <= COLLISION_TOL {
                return Err(Error::MuCollidesWithSpectrum { mu: add.mu, lambda });
            }
            if let Some(other) = self.additions[..i].iter().find(|o| (o.mu - add.mu).abs() <= COLLISION_TOL) {
                return Err(Error::InvalidPlan(format!("eigenvalue {} is added twice", other.mu)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JumpKind {
    Removal { k: i64, norming: f64 },
    Rescaling { k: i64, from: f64, to: f64 },
    Addition { mu: f64, norming: f64 },
}

#[derive(Debug, Clone)]
pub enum JumpSource {
    Model(ModelEigenfunction),
    /// Cauchy solution of the model at a non-eigenvalue.
    Reference,
}

/// Point mass of `d rho~ - d rho`.
#[derive(Debug, Clone)]
pub struct SpectralJump {
    pub lambda: f64,
    /// Signed mass of the jump.
    pub coefficient: f64,
    /// `1 / coefficient`, formed without division where the closed form allows.
    pub inverse_coefficient: f64,
    pub kind: JumpKind,
    pub source: JumpSource,
    /// Source on the grid.
    pub samples: VectorTrajectory,
    /// For model sources the tail `integral_x^inf |V|^2`, for reference
    /// sources the running `integral_0^x |W|^2`, at every grid node.
    pub diagonal: Vec<f64>,
}

impl SpectralJump {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.samples.grid
    }

    pub fn value_at(&self, x: f64) -> [f64; 2] {
        match &self.source {
            JumpSource::Model(f) => f.eval(x),
            JumpSource::Reference => match self.grid().node_index(x) {
                Some(k) => self.samples.at(k),
                None => self.samples.eval(x),
            },
        }
    }

    pub(crate) fn diagonal_at(&self, x: f64) -> Result<f64> {
        if let Some(k) = self.grid().node_index(x) {
            return Ok(self.diagonal[k]);
        }
        match &self.source {
            JumpSource::Model(f) => tail_inner(f, f, x),
            JumpSource::Reference => Ok(lagrange_interpolate(self.grid(), &self.diagonal, x)),
        }
    }

    /// Model index of the source, if it is a model eigenfunction.
    pub fn model_index(&self) -> Option<i64> {
        match self.kind {
            JumpKind::Removal { k, .. } | JumpKind::Rescaling { k, .. } => Some(k),
            JumpKind::Addition { .. } => None,
        }
    }

    /// Norming constant of the perturbed eigenfunction, if the eigenvalue survives.
    pub fn new_norming(&self) -> Option<f64> {
        match self.kind {
            JumpKind::Removal { .. } => None,
            JumpKind::Rescaling { to, .. } => Some(to),
            JumpKind::Addition { norming, .. } => Some(norming),
        }
    }
}

fn model_jump(k: i64, kind: JumpKind, coefficient: f64, inverse: f64, bc: BoundaryCondition, grid: &Arc<Grid>) -> Result<SpectralJump> {
    let f = ModelEigenfunction::new(k, bc)?;
    Ok(SpectralJump {
        lambda: f.lambda(),
        coefficient,
        inverse_coefficient: inverse,
        kind,
        samples: f.sample(grid),
        diagonal: tail_inner_on_grid(&f, &f, grid)?,
        source: JumpSource::Model(f),
    })
}

/// One jump per removal, rescaling and addition, in that order, with every
/// source materialized on `grid`.
pub fn build_jumps(plan: &PerturbationPlan, grid: &Arc<Grid>) -> Result<Vec<SpectralJump>> {
    plan.validate()?;
    if grid.x_min() != 0.0 {
        return Err(Error::InvalidGrid(format!("grid must start at 0, starts at {}", grid.x_min())));
    }
    let bc = plan.boundary;
    let mut jumps = Vec::with_capacity(plan.jump_count());
    for &k in &plan.removals {
        let a = norming_constant(k, bc)?.norming;
        jumps.push(model_jump(k, JumpKind::Removal { k, norming: a }, -1.0 / a, -a, bc, grid)?);
    }
    for (&k, &b) in &plan.rescalings {
        let a = norming_constant(k, bc)?.norming;
        let kind = JumpKind::Rescaling { k, from: a, to: b };
        jumps.push(model_jump(k, kind, 1.0 / b - 1.0 / a, a * b / (a - b), bc, grid)?);
    }
    for add in &plan.additions {
        let (samples, running) = reference_solution_with_norm(add.mu, bc, grid)?;
        jumps.push(SpectralJump {
            lambda: add.mu,
            coefficient: 1.0 / add.norming,
            inverse_coefficient: add.norming,
            kind: JumpKind::Addition { mu: add.mu, norming: add.norming },
            source: JumpSource::Reference,
            samples,
            diagonal: running,
        });
    }
    Ok(jumps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const A0: BoundaryCondition = BoundaryCondition::Alpha0;

    fn grid() -> Arc<Grid> {
        Arc::new(Grid::uniform(4.0, 1.0 / 32.0).unwrap())
    }

    #[test]
    fn removal_of_zero() {
        let jumps = build_jumps(&PerturbationPlan::new(A0).remove(0), &grid()).unwrap();
        assert_eq!(jumps.len(), 1);
        assert_eq!(jumps[0].lambda, 0.0);
        assert!((jumps[0].coefficient + 2.0 / PI.sqrt()).abs() < 1e-15);
        assert!(matches!(jumps[0].source, JumpSource::Model(_)));
        assert!((jumps[0].diagonal[0] - PI.sqrt() / 2.0).abs() < 1e-13);
    }

    #[test]
    fn identity_rescaling_is_rejected() {
        let a1 = norming_constant(1, A0).unwrap().norming;
        let err = PerturbationPlan::new(A0).rescale(1, a1).validate().unwrap_err();
        assert!(matches!(err, Error::InvalidPlan(_)));
        assert!(PerturbationPlan::new(A0).rescale(1, a1 * (1.0 + 1e-6)).validate().is_ok());
    }

    #[test]
    fn addition_jump() {
        let jumps = build_jumps(&PerturbationPlan::new(A0).add(1.5, 2.0), &grid()).unwrap();
        assert_eq!(jumps[0].lambda, 1.5);
        assert_eq!(jumps[0].coefficient, 0.5);
        assert!(matches!(jumps[0].source, JumpSource::Reference));
        assert_eq!(jumps[0].samples.at(0), [0.0, -1.0]);
    }

    #[test]
    fn plan_validation() {
        let p = PerturbationPlan::new(A0).remove(1).rescale(1, 3.0);
        assert!(matches!(p.validate(), Err(Error::InvalidPlan(_))));
        let p = PerturbationPlan::new(A0).add(2.0, 1.0);
        assert!(matches!(p.validate(), Err(Error::MuCollidesWithSpectrum { .. })));
        let p = PerturbationPlan::new(A0).add(1.5, 1.0).add(1.5, 2.0);
        assert!(matches!(p.validate(), Err(Error::InvalidPlan(_))));
        let p = PerturbationPlan::new(A0).add(1.5, -1.0);
        assert!(matches!(p.validate(), Err(Error::InvalidNorming(_))));
        let p = PerturbationPlan::new(A0).rescale(0, 0.0);
        assert!(matches!(p.validate(), Err(Error::InvalidNorming(_))));
        let p = PerturbationPlan::new(BoundaryCondition::General(0.4)).remove(0);
        assert!(matches!(p.validate(), Err(Error::UnsupportedBoundary(_))));
    }

    #[test]
    fn rescaling_coefficient_sign() {
        let a = norming_constant(0, A0).unwrap().norming;
        let jumps = build_jumps(&PerturbationPlan::new(A0).rescale(0, 2.0 * a), &grid()).unwrap();
        assert!(jumps[0].coefficient < 0.0);
        assert!((jumps[0].coefficient * jumps[0].inverse_coefficient - 1.0).abs() < 1e-14);
        let jumps = build_jumps(&PerturbationPlan::new(A0).rescale(0, 0.5 * a), &grid()).unwrap();
        assert!(jumps[0].coefficient > 0.0);
    }
}
