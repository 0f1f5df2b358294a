//! Subset redistribution checks: solved plans pass them, the antitone
//! swap fails with a quantified improvement, witnesses convert into
//! strictly cheaper couplings, and exhaustive passes carry the
//! Lipschitz data that ties them to optimality.

mod common;

use common::Gen;
use weakot_core::costs::CostFunction;
use weakot_core::measures::{Coupling, DiscreteMeasure};
use weakot_core::monotonicity;
use weakot_core::weak_solver;
use weakot_core::Error;

/// mu = nu = (delta_{-1} + delta_{+1}) / 2 coupled crosswise, so each
/// kernel mean sits at distance 2 from its source.
fn antitone_plan() -> Coupling {
    let mu = DiscreteMeasure::new(vec![vec![-1.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
    let nu = mu.clone();
    Coupling::new(mu, nu, vec![vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap()
}

#[test]
fn solved_plans_pass_subset_checks() {
    let mut gen = Gen::new(0x0_ca5e);
    let costs = [
        CostFunction::barycentric_quadratic(),
        CostFunction::barycentric_euclidean(),
        CostFunction::barycentric_power(1.5).unwrap(),
    ];
    for case in 0..6 {
        let d = 1 + case % 2;
        let mu = gen.measure_sized(2, 5, d);
        let nu = gen.measure_sized(2, 5, d);
        let cost = &costs[case % costs.len()];
        // A residual gap g only rules out subset violations beyond
        // g / min_i mu_i, so the check tolerance scales with the
        // certification the profile can reach.
        let (solve_tol, check_tol) = if cost.is_quadratic() {
            (1e-9, 1e-6)
        } else {
            (1e-6, 1e-4)
        };
        let solution = weak_solver::solve(&mu, &nu, cost, solve_tol, 100_000).unwrap();
        let report = monotonicity::check(solution.coupling(), cost, 3, check_tol).unwrap();
        assert!(
            report.passed(),
            "case {case}: optimal plan flagged, improvement {:?}",
            report.worst_violation().map(|v| v.improvement())
        );
        assert!(report.checked_subsets() > 0);
        assert!(report.lipschitz().is_none(), "plain check carries no bound");
    }
}

#[test]
fn antitone_plan_is_flagged_with_the_crossing_gain() {
    let pi = antitone_plan();
    let cost = CostFunction::barycentric_quadratic();
    let report = monotonicity::check(&pi, &cost, 2, 1e-6).unwrap();
    assert!(!report.passed());
    let violation = report.worst_violation().expect("the swap must be found");
    assert_eq!(violation.subset(), &[0, 1]);
    // Each atom pays |2|^2 = 4; sorting the kernels back pays zero.
    assert!(violation.improvement() >= 4.0 - 1e-6);
    assert!((violation.old_cost() - 8.0).abs() <= 1e-9);
    assert!(violation.new_cost() <= 1e-9);
}

#[test]
fn applying_the_witness_lowers_the_cost() {
    let pi = antitone_plan();
    let cost = CostFunction::barycentric_quadratic();
    let before = weak_solver::evaluate(&pi, &cost).unwrap();
    let report = monotonicity::check(&pi, &cost, 2, 1e-6).unwrap();
    let violation = report.worst_violation().unwrap();
    let improved = monotonicity::apply_improvement(&pi, violation).unwrap();

    // Marginals survive the blend.
    for (a, b) in improved.mu().weights().iter().zip(pi.mu().weights()) {
        assert!((a - b).abs() <= 1e-15);
    }
    let after = weak_solver::evaluate(&improved, &cost).unwrap();
    assert!(after < before, "blend must strictly improve: {after} vs {before}");
    // The blend fraction is the smallest subset weight, here 1/2, and
    // convexity converts the witness gain at that rate.
    let eps = 0.5;
    assert!(after <= before - eps * violation.improvement() + 1e-12);
}

#[test]
fn exhaustive_pass_records_a_lipschitz_bound() {
    let mut gen = Gen::new(0x0_11f5);
    let mu = gen.measure(4, 2);
    let nu = gen.measure(3, 2);

    let euclidean = CostFunction::barycentric_euclidean();
    let solution = weak_solver::solve(&mu, &nu, &euclidean, 1e-6, 100_000).unwrap();
    let report = monotonicity::certify_optimality(solution.coupling(), &euclidean, 1e-4).unwrap();
    assert!(report.passed());
    let bound = report.lipschitz().expect("certificates carry the bound");
    assert!(!bound.coarse, "the euclidean profile ships its own constant");
    assert_eq!(bound.value, 1.0);

    let quadratic = CostFunction::barycentric_quadratic();
    let solution = weak_solver::solve(&mu, &nu, &quadratic, 1e-9, 100_000).unwrap();
    let report = monotonicity::certify_optimality(solution.coupling(), &quadratic, 1e-6).unwrap();
    assert!(report.passed());
    let bound = report.lipschitz().expect("certificates carry the bound");
    assert!(bound.coarse, "the quadratic profile needs the finite-support fallback");
    assert!(bound.value > 0.0);
}

#[test]
fn oversized_supports_are_refused_for_certification() {
    let mut gen = Gen::new(0x0_b16);
    let mu = gen.measure(monotonicity::MAX_CERTIFY_SUPPORT + 1, 1);
    let nu = gen.measure(2, 1);
    let pi = Coupling::product(mu, nu);
    let cost = CostFunction::barycentric_euclidean();
    match monotonicity::certify_optimality(&pi, &cost, 1e-6) {
        Err(Error::InstanceTooLarge { .. }) => {}
        other => panic!("expected a size refusal, got {other:?}"),
    }
}
