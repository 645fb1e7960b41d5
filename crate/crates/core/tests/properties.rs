use std::sync::Arc;

use proptest::prelude::*;

use diracgl::cauchy::{shoot, CauchyProblem, PotentialField, SolverOptions};
use diracgl::glcore::{synthesize, PerturbationPlan};
use diracgl::hermite::{phi, phi_derivative};
use diracgl::model::{model_spectrum, norming_constant, spectral_function, BoundaryCondition, SpectralPoint};
use diracgl::quadrature::Grid;

const A0: BoundaryCondition = BoundaryCondition::Alpha0;

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn ladder_relations(n in 1usize..=60, x in -8.0f64..8.0) {
        let d = phi_derivative(n, x);
        let down = d + x * phi(n, x) - (2.0 * n as f64).sqrt() * phi(n - 1, x);
        prop_assert!(down.abs() < 1e-10);
        prop_assert!(phi(n, x).abs() < 1.0);
    }

    #[test]
    fn spectral_function_is_monotone(a in -6.0f64..6.0, b in -6.0f64..6.0) {
        let points: Vec<SpectralPoint> = model_spectrum(A0, -12, 12).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(spectral_function(lo, &points).unwrap() <= spectral_function(hi, &points).unwrap());
    }

    #[test]
    fn wronskian_ties_two_cauchy_solutions(lambda in -3.0f64..3.0, x in 0.1f64..3.0) {
        // for equal lambda, (B y, z) is constant; with data (0,-1) and (1,0) it is -1
        let a = shoot(&CauchyProblem::new(PotentialField::model(), lambda, BoundaryCondition::Alpha0), x, &SolverOptions::default()).unwrap();
        let b = shoot(&CauchyProblem::new(PotentialField::model(), lambda, BoundaryCondition::AlphaHalfPi), x, &SolverOptions::default()).unwrap();
        let w = a[0] * b[1] - a[1] * b[0];
        prop_assert!((w - 1.0).abs() < 1e-9, "{w}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn small_plans_agree_across_paths(
        removal in proptest::option::of(-3i64..=3),
        rescale in proptest::option::of((-3i64..=3, 0.3f64..6.0)),
        add in proptest::option::of(-3.0f64..3.0),
        x in 0.0f64..5.0,
    ) {
        let mut plan = PerturbationPlan::new(A0);
        if let Some(k) = removal {
            plan = plan.remove(k);
        }
        if let Some((k, b)) = rescale {
            let a = norming_constant(k, A0).unwrap().norming;
            if Some(k) != removal && (b - a).abs() > 1e-3 {
                plan = plan.rescale(k, b);
            }
        }
        if let Some(mu) = add {
            let near = model_spectrum(A0, -3, 3).unwrap().iter().map(|p| (p.lambda - mu).abs()).fold(f64::INFINITY, f64::min);
            if near > 1e-3 {
                plan = plan.add(mu, 1.0);
            }
        }
        let grid = Arc::new(Grid::uniform(5.0, 1.0 / 128.0).unwrap());
        let op = synthesize(&plan, &grid).unwrap();
        let s = op.system_at(x).unwrap();
        prop_assert!(s.determinant > 0.0);
        let (p, q) = s.potential();
        if let Some((pc, qc)) = s.potential_cramer() {
            let scale = 1f64.max(p.abs()).max(q.abs());
            prop_assert!((p - pc).abs().max((q - qc).abs()) <= 1e-9 * scale);
        }
        let y = x * 0.37;
        prop_assert!(op.gl_residual(x, y).unwrap() < 1e-8);
    }
}
