//! Degenerate-kernel Gel'fand-Levitan engine.
//!
//! A plan of removals, rescalings and additions becomes a list of signed
//! point masses `c_i` at `lambda_i` with source solutions `psi_i`. The kernel
//! `F(x, y) = sum c_i psi_i(x) psi_i(y)^T` is degenerate, so
//! `G(x, y) = sum g_i(x) psi_i(y)^T` and the integral equation reduces at
//! each `x` to `(I + D M(x)) g_p = -D psi_p` with
//! `M_ij(x) = integral_0^x psi_i . psi_j`.

mod operator;
mod plan;
mod system;

use std::f64::consts::PI;

use libm::erfc;

pub use operator::{perturbed_eigenfunction, perturbed_potential, synthesize, EigenIndex, PerturbedOperator, CROSS_PATH_TOL};
pub use plan::{build_jumps, Addition, JumpKind, JumpSource, PerturbationPlan, SpectralJump, SAME_NORMING_TOL};
pub use system::{assemble_system, GLSystem, CRAMER_MAX, SINGULAR_FLOOR};

/// `e^{x^2} erfc(x)`; the asymptotic series takes over once `erfc` nears underflow.
fn scaled_erfc(x: f64) -> f64 {
    if x < 20.0 {
        return (x * x).exp() * erfc(x);
    }
    let r = 1.0 / (2.0 * x * x);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..8 {
        term *= -((2 * k - 1) as f64) * r;
        sum += term;
    }
    sum / (x * PI.sqrt())
}

/// Potential after removing the eigenvalue at zero from the `alpha = 0`
/// model: `p = 0`, `q = x - e^{-x^2} / integral_x^inf e^{-s^2} ds`.
pub fn closed_form_remove_zero(x: f64) -> (f64, f64) {
    (0.0, x - 2.0 / (PI.sqrt() * scaled_erfc(x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use crate::model::{norming_constant, BoundaryCondition, ModelEigenfunction, VectorFunction};
    use crate::quadrature::{integrate, Grid};
    use crate::Error;

    const A0: BoundaryCondition = BoundaryCondition::Alpha0;

    fn grid(x_max: f64) -> Arc<Grid> {
        Arc::new(Grid::uniform(x_max, 1.0 / 64.0).unwrap())
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(closed_form_remove_zero(0.0), (0.0, -2.0 / PI.sqrt()));
        // 40-digit evaluations of 1 - e^{-1} / ((sqrt(pi)/2) erfc 1) and the same at 6
        let (_, q1) = closed_form_remove_zero(1.0);
        assert!((q1 + 1.638_967_514_234_791_3).abs() < 1e-13, "{q1}");
        let (_, q6) = closed_form_remove_zero(6.0);
        assert!((q6 + 6.162_329_280_400_098).abs() < 1e-11, "{q6}");
        // integral_x^inf e^{-s^2} ~ e^{-x^2} / (2x) (1 - 1/(2x^2)) gives q ~ -x - 1/x
        assert!((q6 + 6.0 + 1.0 / 6.0).abs() < 0.01);
    }

    #[test]
    fn closed_form_is_continuous_across_the_series_switch() {
        let below = closed_form_remove_zero(20.0 - 1e-9).1;
        let above = closed_form_remove_zero(20.0).1;
        assert!((below - above).abs() < 1e-9 * above.abs());
        // integral_x^inf e^{-s^2} ~ e^{-x^2} / (2x), so q ~ -x
        let (_, q) = closed_form_remove_zero(40.0);
        assert!((q + 40.0).abs() < 0.1);
    }

    #[test]
    fn lagrange_identity_matches_quadrature() {
        let u = ModelEigenfunction::new(1, A0).unwrap();
        let v = ModelEigenfunction::new(-2, A0).unwrap();
        for x in [0.5, 1.5, 3.0] {
            let q = integrate(
                |s| {
                    let a = u.eval(s);
                    let b = v.eval(s);
                    a[0] * b[0] + a[1] * b[1]
                },
                0.0,
                x,
                1e-14,
            )
            .unwrap();
            let closed = system::cross_integral(u.eval(x), u.lambda(), v.eval(x), v.lambda());
            assert!((q - closed).abs() < 1e-13, "x={x}: {q} vs {closed}");
        }
    }

    #[test]
    fn identity_at_origin() {
        let plan = PerturbationPlan::new(A0).remove(0).rescale(2, 1.0).add(1.5, 2.0);
        let op = synthesize(&plan, &grid(3.0)).unwrap();
        let s = op.system_at(0.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(s.matrix_s[(i, j)], if i == j { 1.0 } else { 0.0 });
            }
            for p in 0..2 {
                assert!((s.solution_g[p][i] - s.columns_h[p][i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn remove_zero_matches_closed_form() {
        let op = synthesize(&PerturbationPlan::new(A0).remove(0), &grid(8.0)).unwrap();
        let a0 = PI.sqrt() / 2.0;
        for &x in op.grid().nodes() {
            let (p, q) = op.potential_at(x).unwrap();
            let (_, qc) = closed_form_remove_zero(x);
            assert_eq!(p, 0.0);
            assert!((q - qc).abs() < 1e-9, "x={x}: {q} vs {qc}");
        }
        let s = op.system_at(1.0).unwrap();
        let direct = (a0 - integrate(|s| (-s * s).exp(), 0.0, 1.0, 1e-14).unwrap()) / a0;
        assert!((s.matrix_s[(0, 0)] - direct).abs() < 1e-14);
    }

    #[test]
    fn two_removals_stay_positive_at_twelve() {
        let op = synthesize(&PerturbationPlan::new(A0).remove(0).remove(1), &grid(12.0)).unwrap();
        let s = op.system_at(12.0).unwrap();
        assert!(s.determinant > 0.0);
        assert!(s.determinant < 1e-100);
        assert!(op.potential_at(12.0).unwrap().1.is_finite());
    }

    #[test]
    fn empty_plan_is_the_model() {
        let op = synthesize(&PerturbationPlan::new(A0), &grid(4.0)).unwrap();
        assert_eq!(op.potential_at(2.5).unwrap(), (0.0, 2.5));
        let v = op.eigenfunction(EigenIndex::Model(2)).unwrap();
        let m = ModelEigenfunction::new(2, A0).unwrap().sample(op.grid());
        assert_eq!(v.sup_distance(&m, 4.0).unwrap(), 0.0);
    }

    #[test]
    fn near_identity_rescaling_is_small() {
        let a = norming_constant(0, A0).unwrap().norming;
        let op = synthesize(&PerturbationPlan::new(A0).rescale(0, a * (1.0 + 1e-6)), &grid(6.0)).unwrap();
        for &x in op.grid().nodes() {
            let (p, q) = op.potential_at(x).unwrap();
            assert!(p.abs().max((q - x).abs()) <= 1e-4);
        }
    }

    #[test]
    fn removed_index_is_an_error() {
        let op = synthesize(&PerturbationPlan::new(A0).remove(1), &grid(2.0)).unwrap();
        assert!(matches!(op.eigenfunction(EigenIndex::Model(1)), Err(Error::IndexWasRemoved(_))));
        assert!(matches!(op.eigenfunction(EigenIndex::Added(1.5)), Err(Error::UnknownIndex(_))));
    }

    #[test]
    fn jump_eigenfunctions_agree_with_degenerate_form() {
        let plan = PerturbationPlan::new(A0).rescale(1, 2.0).add(1.5, 2.0).remove(-1);
        let op = synthesize(&plan, &grid(4.0)).unwrap();
        for index in [EigenIndex::Model(1), EigenIndex::Added(1.5), EigenIndex::Model(2)] {
            let a = op.eigenfunction(index).unwrap();
            let b = op.eigenfunction_degenerate(index).unwrap();
            assert!(a.sup_distance(&b, 4.0).unwrap() < 1e-8, "{index}");
            assert_eq!(a.component1[0], 0.0);
        }
    }

    #[test]
    fn remove_zero_eigenfunction_matches_closed_correction() {
        // component2 gains e^{-x^2/2} integral_0^x e^{-s^2/2} V_{n,2} / (a_0 - integral_0^x e^{-s^2})
        let op = synthesize(&PerturbationPlan::new(A0).remove(0), &grid(4.0)).unwrap();
        let v = op.eigenfunction(EigenIndex::Model(1)).unwrap();
        let f = ModelEigenfunction::new(1, A0).unwrap();
        let a0 = PI.sqrt() / 2.0;
        for (k, &x) in op.grid().nodes().iter().enumerate().step_by(16) {
            let base = f.eval(x);
            let num = integrate(|s| (-0.5 * s * s).exp() * f.eval(s)[1], 0.0, x, 1e-14).unwrap();
            let den = a0 - integrate(|s| (-s * s).exp(), 0.0, x, 1e-14).unwrap();
            let expected = base[1] + (-0.5 * x * x).exp() * num / den;
            assert_eq!(v.component1[k], base[0]);
            assert!((v.component2[k] - expected).abs() < 1e-10, "x={x}");
        }
    }

    #[test]
    fn composition_round_trip() {
        let g = grid(6.0);
        let a = norming_constant(0, A0).unwrap().norming;
        let first = synthesize(&PerturbationPlan::new(A0).rescale(0, 3.0), &g).unwrap();
        let back = first.compose(&PerturbationPlan::new(A0).rescale(0, a)).unwrap();
        assert!(back.plan().is_empty());
        for &x in g.nodes() {
            let (p, q) = back.potential_at(x).unwrap();
            assert!(p.abs() < 1e-8 && (q - x).abs() < 1e-8);
        }
        let with_add = synthesize(&PerturbationPlan::new(A0).add(1.5, 2.0), &g).unwrap();
        assert!(matches!(with_add.compose(&PerturbationPlan::new(A0).remove(0)), Err(Error::Composition(_))));
    }

    #[test]
    fn gl_equation_is_satisfied() {
        let plan = PerturbationPlan::new(A0).remove(1).add(1.5, 2.0);
        let op = synthesize(&plan, &grid(5.0)).unwrap();
        for (x, y) in [(0.5, 0.2), (1.0, 1.0), (2.5, 0.7), (4.0, 3.1), (5.0, 0.0)] {
            let r = op.gl_residual(x, y).unwrap();
            assert!(r < 1e-8, "x={x} y={y}: {r:e}");
        }
    }

    #[test]
    fn spectrum_accessor() {
        let plan = PerturbationPlan::new(A0).remove(1).add(1.5, 2.0).rescale(0, 4.0);
        let op = synthesize(&plan, &grid(2.0)).unwrap();
        let s = op.spectrum(-2, 3).unwrap();
        let lambdas: Vec<f64> = s.iter().map(|p| p.lambda).collect();
        assert_eq!(lambdas.len(), 6);
        assert!(lambdas.windows(2).all(|w| w[0] < w[1]));
        assert!(lambdas.contains(&1.5));
        assert!(!lambdas.contains(&2.0));
        let zero = s.iter().find(|p| p.lambda == 0.0).unwrap();
        assert_eq!(zero.norming, 4.0);
    }
}
