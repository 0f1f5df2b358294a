//! Monotonicity certificates for weak transport plans. A coupling is
//! monotone for a cost when no finite family of source atoms can pool
//! the mass of their kernels and redistribute it among themselves at
//! strictly lower total cost:
//!
//! ```text
//! sum_{i in S} C(x_i, p_i)  <=  sum_{i in S} C(x_i, m_i)
//! whenever sum m_i = sum p_i  (as measures)
//! ```
//!
//! Optimal plans are monotone, so a violation is a constructive proof
//! of non-optimality; [`apply_improvement`] turns one into a feasible
//! coupling with strictly smaller objective. Each subset's best
//! redistribution is itself a small weak transport instance (uniform
//! first marginal on the subset, pooled kernel mass as the second),
//! solved by the main solver at a tenth of the violation tolerance.
//!
//! Redistributions are searched over the support of the pooled mass.
//! For barycentric convex profiles that restriction is harmless: the
//! pooled mass fixes which target points exist, and a kernel
//! supported elsewhere cannot satisfy the pooling constraint at all.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::costs::{CostFunction, LipschitzBound};
use crate::error::{Error, Result};
use crate::measures::{Coupling, DiscreteMeasure};
use crate::weak_solver;

/// Largest subset family `check` will enumerate.
pub const MAX_SUBSETS: u128 = 1_000_000;

/// Largest support size `certify_optimality` will exhaust.
pub const MAX_CERTIFY_SUPPORT: usize = 6;

/// Iteration cap for each inner redistribution solve.
const INNER_MAX_ITER: usize = 20_000;

/// A strict improvement found by the subset search: redistributing
/// the pooled kernel mass of `subset` as `redistribution` lowers the
/// subset cost from `old_cost` to `new_cost`.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    subset: Vec<usize>,
    redistribution: Vec<Vec<f64>>,
    old_cost: f64,
    new_cost: f64,
}

impl Violation {
    /// Atom indices of mu that form the subset, in increasing order.
    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    /// Replacement kernels, one row per subset atom over the support
    /// of nu. Rows sum to one; columns sum to the pooled mass.
    pub fn redistribution(&self) -> &[Vec<f64>] {
        &self.redistribution
    }

    /// Subset cost of the original kernels.
    pub fn old_cost(&self) -> f64 {
        self.old_cost
    }

    /// Subset cost of the redistribution.
    pub fn new_cost(&self) -> f64 {
        self.new_cost
    }

    /// old_cost - new_cost, always above the tolerance of the check
    /// that produced the violation.
    pub fn improvement(&self) -> f64 {
        self.old_cost - self.new_cost
    }
}

/// Outcome of a monotonicity search.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    passed: bool,
    checked_subsets: usize,
    worst_violation: Option<Violation>,
    max_inner_gap: f64,
    lipschitz: Option<LipschitzBound>,
}

impl MonotonicityReport {
    /// Whether no subset admitted an improving redistribution.
    pub fn passed(&self) -> bool {
        self.passed
    }

    /// Number of subsets examined.
    pub fn checked_subsets(&self) -> usize {
        self.checked_subsets
    }

    /// The violation with the largest improvement, when any exists.
    pub fn worst_violation(&self) -> Option<&Violation> {
        self.worst_violation.as_ref()
    }

    /// Largest certified gap left by an inner redistribution solve.
    /// A pass is conclusive only down to this resolution: a subset
    /// improvement smaller than the inner gap cannot be ruled out.
    pub fn max_inner_gap(&self) -> f64 {
        self.max_inner_gap
    }

    /// The Lipschitz hypothesis recorded by [`certify_optimality`];
    /// absent for a plain check.
    pub fn lipschitz(&self) -> Option<&LipschitzBound> {
        self.lipschitz.as_ref()
    }
}

/// Searches all subsets of the support of mu with between 2 and
/// `n_max` atoms (2 <= n_max <= 4; singletons are always monotone)
/// for a redistribution improving by more than `tol`. Subsets are
/// enumerated by size, then lexicographically; the worst violation
/// is reported.
pub fn check(
    pi: &Coupling,
    cost: &CostFunction,
    n_max: usize,
    tol: f64,
) -> Result<MonotonicityReport> {
    if !(2..=4).contains(&n_max) {
        return Err(Error::InvalidInput(format!(
            "subset size bound must lie in 2..=4, got {n_max}"
        )));
    }
    check_impl(pi, cost, n_max, tol, None)
}

/// Exhausts every subset of the support of mu (at most
/// [`MAX_CERTIFY_SUPPORT`] atoms) and records the Lipschitz bound of
/// the cost over the instance, which is what ties an exhaustive pass
/// to optimality. The cost must carry or admit a Lipschitz bound.
pub fn certify_optimality(
    pi: &Coupling,
    cost: &CostFunction,
    tol: f64,
) -> Result<MonotonicityReport> {
    let bound = cost
        .lipschitz_for(pi.mu().points(), pi.nu().points())
        .ok_or(Error::MissingLipschitzBound)?;
    let support = pi.mu().support().len();
    if support > MAX_CERTIFY_SUPPORT {
        return Err(Error::InstanceTooLarge {
            size: support as u128,
            limit: MAX_CERTIFY_SUPPORT as u128,
        });
    }
    check_impl(pi, cost, support.max(2), tol, Some(bound))
}

fn check_impl(
    pi: &Coupling,
    cost: &CostFunction,
    n_max: usize,
    tol: f64,
    lipschitz: Option<LipschitzBound>,
) -> Result<MonotonicityReport> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let kernel = pi.disintegrate();
    let atoms = kernel.support().len();
    let total = subset_count(atoms, n_max);
    if total > MAX_SUBSETS {
        return Err(Error::InstanceTooLarge {
            size: total,
            limit: MAX_SUBSETS,
        });
    }

    let mut checked = 0usize;
    let mut worst: Option<Violation> = None;
    let mut max_inner_gap = 0.0_f64;
    for size in 2..=n_max.min(atoms) {
        let mut picks: Vec<usize> = (0..size).collect();
        loop {
            checked += 1;
            let subset: Vec<usize> = picks.iter().map(|&k| kernel.support()[k]).collect();
            let rows: Vec<&[f64]> = picks.iter().map(|&k| kernel.rows()[k].as_slice()).collect();

            let mut old_cost = 0.0;
            for (&i, row) in subset.iter().zip(&rows) {
                old_cost += cost.eval(pi.mu().point(i), pi.nu().points(), row)?;
            }
            let (new_cost, replacement, inner_gap) =
                best_redistribution(pi, cost, &subset, &rows, tol)?;
            max_inner_gap = max_inner_gap.max(inner_gap);
            if new_cost < old_cost - tol {
                let improvement = old_cost - new_cost;
                if worst.as_ref().map_or(true, |w| improvement > w.improvement()) {
                    worst = Some(Violation {
                        subset: subset.clone(),
                        redistribution: replacement,
                        old_cost,
                        new_cost,
                    });
                }
            }

            if !advance(&mut picks, atoms) {
                break;
            }
        }
    }
    Ok(MonotonicityReport {
        passed: worst.is_none(),
        checked_subsets: checked,
        worst_violation: worst,
        max_inner_gap,
        lipschitz,
    })
}

/// Minimum subset cost over redistributions of the pooled mass: a
/// weak transport instance with uniform weights on the subset and the
/// pooled kernels, scaled by the subset size. Returns the cost, the
/// replacement kernels, and the certified gap of the inner solve.
fn best_redistribution(
    pi: &Coupling,
    cost: &CostFunction,
    subset: &[usize],
    rows: &[&[f64]],
    tol: f64,
) -> Result<(f64, Vec<Vec<f64>>, f64)> {
    let s = subset.len() as f64;
    let points: Vec<Vec<f64>> = subset.iter().map(|&i| pi.mu().point(i).to_vec()).collect();
    let sub_mu = DiscreteMeasure::uniform(points)?;
    let mut pooled = vec![0.0; pi.nu().len()];
    for row in rows {
        for (c, &q) in pooled.iter_mut().zip(*row) {
            *c += q / s;
        }
    }
    let sub_nu = DiscreteMeasure::new(pi.nu().points().to_vec(), pooled)?;
    let inner_tol = tol / (10.0 * s);
    let solution = match weak_solver::solve(&sub_mu, &sub_nu, cost, inner_tol, INNER_MAX_ITER) {
        Ok(sol) => sol,
        // An unconverged inner solve still bounds the minimum from
        // above, so using its plan can only under-report violations;
        // the leftover gap is surfaced through max_inner_gap.
        Err(Error::ConvergenceFailure { solution, .. }) => *solution,
        Err(e) => return Err(e),
    };
    let new_cost = s * solution.value();
    let inner_gap = s * solution.fw_gap();
    let kernel = solution.coupling().disintegrate();
    let mut replacement = vec![vec![0.0; pi.nu().len()]; subset.len()];
    for (&k, row) in kernel.support().iter().zip(kernel.rows()) {
        replacement[k] = row.clone();
    }
    Ok((new_cost, replacement, inner_gap))
}

/// Blends a violation's redistribution into the coupling with the
/// largest mass fraction that keeps every subset row nonnegative.
/// Marginals are preserved because the redistribution pools to the
/// same column mass; convexity of the cost in the kernel makes the
/// objective drop by at least that fraction of the improvement.
pub fn apply_improvement(pi: &Coupling, violation: &Violation) -> Result<Coupling> {
    let kernel = pi.disintegrate();
    let mut matrix = pi.matrix().to_vec();
    let mut eps = f64::INFINITY;
    for &i in violation.subset() {
        let w = pi.mu().weight(i);
        if w <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "violation names atom {i}, which carries no mass"
            )));
        }
        eps = eps.min(w);
    }
    if violation.subset().is_empty() {
        return Err(Error::InvalidInput(String::from("violation has an empty subset")));
    }
    for (&i, replacement) in violation.subset().iter().zip(violation.redistribution()) {
        if replacement.len() != pi.nu().len() {
            return Err(Error::DimensionMismatch {
                what: "redistribution row",
                expected: pi.nu().len(),
                found: replacement.len(),
            });
        }
        let row = kernel
            .row_for(i)
            .ok_or_else(|| Error::InvalidInput(format!("atom {i} has no kernel row")))?;
        for (j, (&m, &p)) in replacement.iter().zip(row).enumerate() {
            matrix[i][j] += eps * (m - p);
        }
    }
    let cleaned = matrix
        .into_iter()
        .map(|row| row.into_iter().map(|q| q.max(0.0)).collect())
        .collect();
    Coupling::new(pi.mu().clone(), pi.nu().clone(), cleaned)
}

/// Number of subsets of sizes 2..=n_max from `atoms` atoms,
/// saturating.
fn subset_count(atoms: usize, n_max: usize) -> u128 {
    let mut total: u128 = 0;
    for size in 2..=n_max.min(atoms) {
        let mut c: u128 = 1;
        for k in 0..size {
            c = c.saturating_mul((atoms - k) as u128);
            c /= (k + 1) as u128;
        }
        total = total.saturating_add(c);
    }
    total
}

/// Advances a sorted index combination in lexicographic order.
fn advance(picks: &mut [usize], atoms: usize) -> bool {
    let size = picks.len();
    let mut idx = size;
    loop {
        if idx == 0 {
            return false;
        }
        idx -= 1;
        if picks[idx] != idx + atoms - size {
            break;
        }
    }
    picks[idx] += 1;
    for later in idx + 1..size {
        picks[later] = picks[later - 1] + 1;
    }
    true
}
