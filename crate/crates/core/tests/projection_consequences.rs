//! Consequences of the quadratic projection onto the convex-order
//! cone: the barycentric map is cyclically monotone (a gradient of a
//! convex function on the support), candidate measures in the cone
//! upper-bound the projection value, restarts agree, and optimal plans
//! share their map.

mod common;

use common::Gen;
use weakot_core::classical_ot;
use weakot_core::costs::CostFunction;
use weakot_core::measures::{Coupling, DiscreteMeasure};
use weakot_core::order;
use weakot_core::weak_solver;

#[test]
fn projected_maps_are_cyclically_monotone() {
    let mut gen = Gen::new(0x0_c1c);
    for case in 0..8 {
        let d = 1 + case % 2;
        let mu = gen.measure_sized(3, 6, d);
        let nu = gen.measure_sized(3, 6, d);
        let projection = order::project_to_convex_order(&mu, &nu, 1e-6).unwrap();
        let map = projection.map();

        for _ in 0..30 {
            let len = 2 + gen.index(map.len().min(4));
            let cycle: Vec<usize> = (0..len).map(|_| gen.index(map.len())).collect();
            let mut total = 0.0;
            for (pos, &a) in cycle.iter().enumerate() {
                let b = cycle[(pos + 1) % len];
                let (ia, ta) = &map[a];
                let (_, tb) = &map[b];
                let x = mu.point(*ia);
                for k in 0..d {
                    total += (tb[k] - ta[k]) * x[k];
                }
            }
            assert!(
                total <= 1e-6,
                "case {case}: cycle {cycle:?} has positive increment {total}"
            );
        }
    }
}

#[test]
fn cone_candidates_upper_bound_the_projection_value() {
    let mut gen = Gen::new(0x0_b0b);
    for _ in 0..8 {
        let d = 1 + gen.index(2);
        let mu = gen.measure_sized(2, 6, d);
        let nu = gen.measure_sized(2, 6, d);
        let projection = order::project_to_convex_order(&mu, &nu, 1e-6).unwrap();

        // nu itself and the Dirac at its mean both lie in the cone.
        let w_nu = classical_ot::wasserstein(&mu, &nu, 2.0).unwrap();
        assert!(
            projection.value() <= w_nu * w_nu + 1e-6,
            "nu is a candidate: {} vs {}",
            projection.value(),
            w_nu * w_nu
        );
        let dirac = DiscreteMeasure::dirac(nu.mean()).unwrap();
        let w_dirac = classical_ot::wasserstein(&mu, &dirac, 2.0).unwrap();
        assert!(
            projection.value() <= w_dirac * w_dirac + 1e-6,
            "the mean Dirac is a candidate: {} vs {}",
            projection.value(),
            w_dirac * w_dirac
        );

        // Equality at the returned projection.
        let w_star = classical_ot::wasserstein(&mu, projection.mu_star(), 2.0).unwrap();
        assert!(
            (projection.value() - w_star * w_star).abs()
                <= 1e-6 * (1.0 + projection.value()),
            "returned point misses its own distance: {} vs {}",
            projection.value(),
            w_star * w_star
        );
    }
}

#[test]
fn restarts_agree_on_the_projection() {
    let mut gen = Gen::new(0x0_5eed);
    for case in 0..8 {
        let d = 1 + case % 2;
        let mu = gen.measure_sized(2, 6, d);
        let nu = gen.measure_sized(2, 6, d);
        let deviation = order::probe_uniqueness(&mu, &nu, 17 + case as u64).unwrap();
        assert!(
            deviation <= 1e-5,
            "case {case}: restarts disagree by {deviation}"
        );
    }
}

#[test]
fn optimal_plans_share_their_barycentric_map() {
    let mu = DiscreteMeasure::new(vec![vec![-1.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
    let nu = DiscreteMeasure::new(vec![vec![-2.0], vec![2.0]], vec![0.5, 0.5]).unwrap();
    let projection = order::project_to_convex_order(&mu, &nu, 1e-6).unwrap();
    assert!(projection.value() <= 1e-8);

    // A second optimal plan: the mixing weights that put each kernel
    // mean back on its source atom.
    let mixing = Coupling::new(
        mu.clone(),
        nu.clone(),
        vec![vec![0.375, 0.125], vec![0.125, 0.375]],
    )
    .unwrap();
    let cost = CostFunction::barycentric_quadratic();
    assert_eq!(weak_solver::evaluate(&mixing, &cost).unwrap(), 0.0);
    assert!(order::matches_optimal_map(&mixing, projection.map(), 1e-5));

    // The product plan is feasible but has a different map.
    let product = Coupling::product(mu, nu);
    assert!(!order::matches_optimal_map(&product, projection.map(), 1e-5));
}
