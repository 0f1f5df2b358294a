//! Property suite over randomized inputs: gradient consistency,
//! convexity in the weights, the W1 bound for the euclidean profile,
//! and the exact symmetries of quadratic values under translation and
//! scaling.

use proptest::prelude::*;
use weakot_core::classical_ot;
use weakot_core::costs::CostFunction;
use weakot_core::measures::DiscreteMeasure;
use weakot_core::weak_solver;

prop_compose! {
    fn weighted_support(d: usize)(m in 2usize..=5)(
        support in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, d), m),
        raw in prop::collection::vec(0.05..1.0f64, m),
    ) -> (Vec<Vec<f64>>, Vec<f64>) {
        let total: f64 = raw.iter().sum();
        (support, raw.iter().map(|w| w / total).collect())
    }
}

prop_compose! {
    fn measure_side(d: usize)(n in 2usize..=4)(
        points in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, d), n),
        raw in prop::collection::vec(0.2..1.0f64, n),
    ) -> DiscreteMeasure {
        let total: f64 = raw.iter().sum();
        let weights = raw.iter().map(|w| w / total).collect();
        DiscreteMeasure::new(points, weights).expect("valid generated measure")
    }
}

fn cost_family() -> impl Strategy<Value = CostFunction> {
    prop_oneof![
        Just(CostFunction::barycentric_quadratic()),
        Just(CostFunction::barycentric_euclidean()),
        (1.0..3.0f64).prop_map(|t| CostFunction::barycentric_power(t).unwrap()),
    ]
}

fn residual_norm(x: &[f64], support: &[Vec<f64>], p: &[f64]) -> f64 {
    let mut sq = 0.0;
    for (k, &xk) in x.iter().enumerate() {
        let mean: f64 = support.iter().zip(p).map(|(y, &w)| w * y[k]).sum();
        sq += (xk - mean) * (xk - mean);
    }
    sq.sqrt()
}

proptest! {
    #[test]
    fn gradients_match_central_differences(
        d in 1usize..=2,
        cost in cost_family(),
        seedling in weighted_support(2),
        x in prop::collection::vec(-1.0..1.0f64, 2),
    ) {
        // Truncate the 2-d draws to the sampled dimension.
        let support: Vec<Vec<f64>> = seedling.0.iter().map(|y| y[..d].to_vec()).collect();
        let p = seedling.1.clone();
        let x = x[..d].to_vec();
        // Away from the kink of the non-quadratic profiles the value is
        // smooth; finite differences are meaningless at the kink itself.
        prop_assume!(cost.is_quadratic() || residual_norm(&x, &support, &p) > 1e-2);

        let grad = cost.grad_weights(&x, &support, &p).unwrap();
        let h = 1e-6;
        for j in 0..p.len() {
            let mut hi = p.clone();
            let mut lo = p.clone();
            hi[j] += h;
            lo[j] -= h;
            let fd = (cost.eval(&x, &support, &hi).unwrap()
                - cost.eval(&x, &support, &lo).unwrap())
                / (2.0 * h);
            prop_assert!(
                (fd - grad[j]).abs() <= 1e-4 * (1.0 + grad[j].abs()),
                "coordinate {}: finite difference {} vs gradient {}",
                j, fd, grad[j]
            );
        }
    }

    #[test]
    fn values_are_convex_in_the_weights(
        cost in cost_family(),
        a in weighted_support(2),
        raw_q in prop::collection::vec(0.05..1.0f64, 5),
    ) {
        let (support, p) = a;
        let total: f64 = raw_q[..p.len()].iter().sum();
        let q: Vec<f64> = raw_q[..p.len()].iter().map(|w| w / total).collect();
        let mid: Vec<f64> = p.iter().zip(&q).map(|(a, b)| 0.5 * (a + b)).collect();
        let x = vec![0.3, -0.7];
        let value_mid = cost.eval(&x, &support, &mid).unwrap();
        let chord = 0.5 * cost.eval(&x, &support, &p).unwrap()
            + 0.5 * cost.eval(&x, &support, &q).unwrap();
        prop_assert!(value_mid <= chord + 1e-12, "midpoint {} above chord {}", value_mid, chord);
    }

    #[test]
    fn euclidean_profile_is_w1_lipschitz(
        a in weighted_support(1),
        raw_q in prop::collection::vec(0.05..1.0f64, 5),
        x in -1.0..1.0f64,
    ) {
        let (support, p) = a;
        let total: f64 = raw_q[..p.len()].iter().sum();
        let q: Vec<f64> = raw_q[..p.len()].iter().map(|w| w / total).collect();
        let cost = CostFunction::barycentric_euclidean();
        let x = vec![x];
        let gap = (cost.eval(&x, &support, &p).unwrap()
            - cost.eval(&x, &support, &q).unwrap())
            .abs();
        let w1 = classical_ot::wasserstein(
            &DiscreteMeasure::new(support.clone(), p).unwrap(),
            &DiscreteMeasure::new(support, q).unwrap(),
            1.0,
        )
        .unwrap();
        prop_assert!(gap <= w1 + 1e-9, "cost moved {} but W1 is {}", gap, w1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn quadratic_values_are_translation_invariant(
        mu in measure_side(2),
        nu in measure_side(2),
        shift in prop::collection::vec(-2.0..2.0f64, 2),
    ) {
        let cost = CostFunction::barycentric_quadratic();
        let base = weak_solver::solve(&mu, &nu, &cost, 1e-11, 100_000).unwrap().value();

        let translate = |m: &DiscreteMeasure| {
            let points = m
                .points()
                .iter()
                .map(|p| p.iter().zip(&shift).map(|(a, b)| a + b).collect())
                .collect();
            DiscreteMeasure::new(points, m.weights().to_vec()).unwrap()
        };
        let moved = weak_solver::solve(&translate(&mu), &translate(&nu), &cost, 1e-11, 100_000)
            .unwrap()
            .value();
        prop_assert!(
            (base - moved).abs() <= 1e-9 * (1.0 + base),
            "translation moved the value: {} vs {}",
            base, moved
        );
    }

    #[test]
    fn quadratic_values_scale_with_the_square(
        mu in measure_side(1),
        nu in measure_side(1),
        s in 0.5..2.0f64,
    ) {
        let cost = CostFunction::barycentric_quadratic();
        let base = weak_solver::solve(&mu, &nu, &cost, 1e-12, 100_000).unwrap().value();

        let rescale = |m: &DiscreteMeasure| {
            let points = m
                .points()
                .iter()
                .map(|p| p.iter().map(|a| s * a).collect())
                .collect();
            DiscreteMeasure::new(points, m.weights().to_vec()).unwrap()
        };
        let scaled = weak_solver::solve(&rescale(&mu), &rescale(&nu), &cost, 1e-12, 100_000)
            .unwrap()
            .value();
        prop_assert!(
            (scaled - s * s * base).abs() <= 1e-9 * (1.0 + scaled.abs()),
            "scaling by {} gave {} instead of {}",
            s, scaled, s * s * base
        );
    }
}
