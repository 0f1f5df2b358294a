//! Identities of the lifted formulation: embedding couplings as plans
//! over (point, kernel) pairs, recovering them through the intensity,
//! and the Jensen contraction that makes both problems share a value.

mod common;

use common::Gen;
use weakot_core::costs::CostFunction;
use weakot_core::lifted::{LiftedAtom, LiftedPlan};
use weakot_core::measures::{Coupling, DiscreteMeasure};
use weakot_core::weak_solver;

/// Splits every kernel row of the embedded plan into two admissible
/// halves. The result stays in the admissible class of the coupling's
/// marginals but is no longer an embedded coupling.
fn split_plan(gen: &mut Gen, pi: &Coupling) -> LiftedPlan {
    let base = LiftedPlan::from_coupling(pi);
    let mut atoms: Vec<LiftedAtom> = Vec::new();
    for atom in base.atoms() {
        let kernel = atom.kernel();
        let m = kernel.len();
        let alpha = gen.range(0.25, 0.75);
        let raw: Vec<f64> = (0..m).map(|_| 0.05 + gen.uniform()).collect();
        let total: f64 = raw.iter().sum();
        let target: Vec<f64> = raw.iter().map(|w| w / total).collect();

        // Largest step toward the target that keeps both halves
        // nonnegative: alpha p + (1 - alpha) q must reproduce the row.
        let ratio = alpha / (1.0 - alpha);
        let mut step: f64 = 1.0;
        for (&kj, &rj) in kernel.weights().iter().zip(&target) {
            let delta = rj - kj;
            if delta > 1e-12 {
                step = step.min(kj / (ratio * delta));
            } else if delta < -1e-12 {
                step = step.min(kj / -delta);
            }
        }
        let step = 0.5 * step.min(1.0);
        let p: Vec<f64> = kernel
            .weights()
            .iter()
            .zip(&target)
            .map(|(&kj, &rj)| (kj + step * (rj - kj)).max(0.0))
            .collect();
        let q: Vec<f64> = kernel
            .weights()
            .iter()
            .zip(&target)
            .map(|(&kj, &rj)| (kj - ratio * step * (rj - kj)).max(0.0))
            .collect();
        let points = kernel.points().to_vec();
        atoms.push(
            LiftedAtom::new(
                atom.location().to_vec(),
                DiscreteMeasure::new(points.clone(), p).unwrap(),
                alpha * atom.weight(),
            )
            .unwrap(),
        );
        atoms.push(
            LiftedAtom::new(
                atom.location().to_vec(),
                DiscreteMeasure::new(points, q).unwrap(),
                (1.0 - alpha) * atom.weight(),
            )
            .unwrap(),
        );
    }
    LiftedPlan::new(atoms).unwrap()
}

#[test]
fn intensity_left_inverts_the_embedding() {
    let mut gen = Gen::new(0x11f7);
    for _ in 0..20 {
        let d = 1 + gen.index(2);
        let mu = gen.measure_sized(2, 5, d);
        let nu = gen.measure_sized(2, 5, d);
        let pi = gen.coupling(&mu, &nu);
        let back = LiftedPlan::from_coupling(&pi).intensity();
        for (row, recovered) in pi.matrix().iter().zip(back.matrix()) {
            for (&a, &b) in row.iter().zip(recovered) {
                assert!((a - b).abs() <= 1e-12, "entry drifted: {a} vs {b}");
            }
        }
    }
}

#[test]
fn splitting_kernels_never_lowers_the_cost() {
    let cost = CostFunction::barycentric_quadratic();
    let mut gen = Gen::new(0x2e55);
    let mut widest_gap: f64 = 0.0;
    for _ in 0..20 {
        let d = 1 + gen.index(2);
        let mu = gen.measure_sized(2, 5, d);
        let nu = gen.measure_sized(2, 5, d);
        let pi = gen.coupling(&mu, &nu);
        let plan = split_plan(&mut gen, &pi);
        assert!(plan.is_admissible(&mu, &nu), "split plan left the class");

        let lifted = plan.cost(&cost).unwrap();
        let through = weak_solver::evaluate(&plan.intensity(), &cost).unwrap();
        assert!(
            lifted >= through - 1e-9,
            "contraction violated: {lifted} < {through}"
        );
        widest_gap = widest_gap.max(lifted - through);
    }
    assert!(
        widest_gap > 1e-9,
        "every split collapsed; the generator is too tame"
    );
}

#[test]
fn admissible_plans_sandwich_the_solved_value() {
    let cost = CostFunction::barycentric_quadratic();
    let mut gen = Gen::new(0x3a2d);
    let mu = gen.measure(4, 2);
    let nu = gen.measure(5, 2);
    let solution = weak_solver::solve(&mu, &nu, &cost, 1e-10, 100_000).unwrap();

    for k in 0..50 {
        let pi = gen.coupling(&mu, &nu);
        let plan = if k % 2 == 0 {
            LiftedPlan::from_coupling(&pi)
        } else {
            split_plan(&mut gen, &pi)
        };
        assert!(plan.is_admissible(&mu, &nu));
        let lifted = plan.cost(&cost).unwrap();
        assert!(
            lifted >= solution.value() - 1e-6,
            "plan {k} undercut the optimum: {lifted} vs {}",
            solution.value()
        );
    }

    let embedded = LiftedPlan::from_coupling(solution.coupling());
    let lifted_at_optimum = embedded.cost(&cost).unwrap();
    assert!(
        (lifted_at_optimum - solution.value()).abs() <= 1e-12,
        "embedding shifted the optimal value: {lifted_at_optimum} vs {}",
        solution.value()
    );
}

#[test]
fn admissibility_rejects_wrong_marginals() {
    let plan = LiftedPlan::new(vec![LiftedAtom::new(
        vec![0.0],
        DiscreteMeasure::dirac(vec![1.0]).unwrap(),
        1.0,
    )
    .unwrap()])
    .unwrap();
    let mu = DiscreteMeasure::dirac(vec![0.0]).unwrap();
    let nu = DiscreteMeasure::dirac(vec![2.0]).unwrap();
    assert!(!plan.is_admissible(&mu, &nu));
}
