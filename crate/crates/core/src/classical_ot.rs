//! Exact linear optimal transport between finitely supported measures.
//!
//! `solve` runs a transportation simplex: a spanning-tree basis on the
//! bipartite supply/demand graph, dual variables read off the tree,
//! and a most-negative-reduced-cost pivot with lexicographic tie
//! breaking. A cycling detector switches to Bland's rule after too
//! many consecutive degenerate pivots, which guarantees termination.
//! Basic flows are recomputed exactly from the tree every iteration,
//! so the returned matrix carries no accumulated pivot drift.
//!
//! The solver is the linear-minimization oracle for the weak solver,
//! so determinism matters: identical inputs take identical pivots and
//! return identical solutions.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::float;
use crate::measures::{dist, Coupling, DiscreteMeasure};

/// Cost entries above this magnitude are rejected as input errors.
pub const MAX_COST_MAGNITUDE: f64 = 1e12;

/// Consecutive degenerate pivots tolerated before the pivot rule
/// permanently falls back to Bland's rule.
const CYCLING_THRESHOLD_FACTOR: usize = 2;

/// An exact solution of the classical transport linear program.
///
/// Invariants: the coupling is feasible for its marginals; the duals
/// satisfy u_i + v_j <= c_ij up to the pivot tolerance with equality
/// on basic cells (complementary slackness); and the value equals
/// both the primal cost and the dual objective <u, mu> + <v, nu> up
/// to rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct OtSolution {
    coupling: Coupling,
    value: f64,
    dual_u: Vec<f64>,
    dual_v: Vec<f64>,
    iterations: usize,
}

impl OtSolution {
    /// The optimal coupling.
    pub fn coupling(&self) -> &Coupling {
        &self.coupling
    }

    /// Optimal value sum_ij c_ij pi_ij.
    pub fn value(&self) -> f64 {
        self.value
    }

    /// Row duals, normalized so the first entry is 0.
    pub fn dual_u(&self) -> &[f64] {
        &self.dual_u
    }

    /// Column duals.
    pub fn dual_v(&self) -> &[f64] {
        &self.dual_v
    }

    /// Simplex pivots performed.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Consumes the solution, keeping only the coupling.
    pub fn into_coupling(self) -> Coupling {
        self.coupling
    }
}

/// sum_ij cost_ij matrix_ij, the linear objective on a plan.
pub fn transport_value(cost: &[Vec<f64>], matrix: &[Vec<f64>]) -> f64 {
    cost.iter()
        .zip(matrix)
        .map(|(cr, mr)| cr.iter().zip(mr).map(|(c, q)| c * q).sum::<f64>())
        .sum()
}

/// Cost matrix c_ij = |x_i - y_j|^exponent for the marginals' points.
pub fn distance_cost_matrix(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    exponent: f64,
) -> Result<Vec<Vec<f64>>> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            what: "marginal dimensions",
            expected: mu.dim(),
            found: nu.dim(),
        });
    }
    Ok(mu
        .points()
        .iter()
        .map(|x| {
            nu.points()
                .iter()
                .map(|y| float::powf(dist(x, y), exponent))
                .collect()
        })
        .collect())
}

/// t-Wasserstein distance (t >= 1): the t-th root of the optimal
/// transport cost for c = |x - y|^t.
pub fn wasserstein(mu: &DiscreteMeasure, nu: &DiscreteMeasure, t: f64) -> Result<f64> {
    if !t.is_finite() || t < 1.0 {
        return Err(Error::InvalidInput(format!(
            "Wasserstein order must be finite and >= 1, got {t}"
        )));
    }
    let cost = distance_cost_matrix(mu, nu, t)?;
    let sol = solve(&cost, mu, nu)?;
    // Clamp tiny negative rounding before the root.
    Ok(float::powf(sol.value.max(0.0), 1.0 / t))
}

/// Solves min sum_ij c_ij pi_ij over couplings of (mu, nu) exactly.
pub fn solve(cost: &[Vec<f64>], mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<OtSolution> {
    let (n, m) = (mu.len(), nu.len());
    if cost.len() != n {
        return Err(Error::DimensionMismatch {
            what: "cost rows",
            expected: n,
            found: cost.len(),
        });
    }
    let mut scale: f64 = 1.0;
    for row in cost {
        if row.len() != m {
            return Err(Error::DimensionMismatch {
                what: "cost columns",
                expected: m,
                found: row.len(),
            });
        }
        for &c in row {
            if !c.is_finite() {
                return Err(Error::InvalidInput(String::from("cost matrix has a non-finite entry")));
            }
            if float::abs(c) > MAX_COST_MAGNITUDE {
                return Err(Error::InvalidInput(format!(
                    "cost magnitude {c:e} exceeds {MAX_COST_MAGNITUDE:e}"
                )));
            }
            scale = scale.max(float::abs(c));
        }
    }

    let mut tableau = Tableau::new(cost, mu.weights(), nu.weights(), scale);
    let cap = 50 * n * m;
    let mut bland = false;
    let mut consecutive_degenerate = 0usize;
    let mut iterations = 0usize;

    loop {
        tableau.rebuild_adjacency();
        tableau.recompute_flows();
        tableau.compute_duals();
        let Some((i, j)) = tableau.entering(bland) else {
            break;
        };
        if iterations >= cap {
            return Err(Error::NumericalFailure(format!(
                "transport simplex exceeded its cap of {cap} pivots"
            )));
        }
        let degenerate = tableau.pivot(i, j);
        iterations += 1;
        if degenerate {
            consecutive_degenerate += 1;
            if consecutive_degenerate > CYCLING_THRESHOLD_FACTOR * (n + m) {
                bland = true;
            }
        } else {
            consecutive_degenerate = 0;
        }
    }

    let matrix = tableau.flow_matrix();
    let value = transport_value(cost, &matrix);
    let coupling = Coupling::new(mu.clone(), nu.clone(), matrix)?;
    Ok(OtSolution {
        coupling,
        value,
        dual_u: tableau.u,
        dual_v: tableau.v,
        iterations,
    })
}

/// Working state of the transportation simplex. Nodes 0..n are rows,
/// n..n+m are columns; the basis is always a spanning tree with
/// n + m - 1 cells.
struct Tableau<'a> {
    n: usize,
    m: usize,
    cost: &'a [Vec<f64>],
    supply: &'a [f64],
    demand: &'a [f64],
    /// Basic cells (i, j).
    basis: Vec<(usize, usize)>,
    in_basis: Vec<bool>,
    /// Flow on each basic cell, aligned with `basis`.
    flow: Vec<f64>,
    /// Tree adjacency: node -> (neighbor node, basis index).
    adj: Vec<Vec<(usize, usize)>>,
    u: Vec<f64>,
    v: Vec<f64>,
    /// Reduced costs below -pivot_tol enter the basis.
    pivot_tol: f64,
}

impl<'a> Tableau<'a> {
    fn new(cost: &'a [Vec<f64>], supply: &'a [f64], demand: &'a [f64], scale: f64) -> Self {
        let (n, m) = (supply.len(), demand.len());
        let mut t = Tableau {
            n,
            m,
            cost,
            supply,
            demand,
            basis: Vec::with_capacity(n + m - 1),
            in_basis: vec![false; n * m],
            flow: Vec::new(),
            adj: vec![Vec::new(); n + m],
            u: vec![0.0; n],
            v: vec![0.0; m],
            pivot_tol: 1e-10 * scale,
        };
        t.northwest_corner();
        t
    }

    /// Northwest-corner starting basis: a staircase of n + m - 1 cells,
    /// acyclic and spanning by construction, degenerate cells included.
    fn northwest_corner(&mut self) {
        let (n, m) = (self.n, self.m);
        let mut s: Vec<f64> = self.supply.to_vec();
        let mut d: Vec<f64> = self.demand.to_vec();
        let (mut i, mut j) = (0usize, 0usize);
        loop {
            self.basis.push((i, j));
            self.in_basis[i * m + j] = true;
            let t = s[i].min(d[j]);
            s[i] -= t;
            d[j] -= t;
            if i == n - 1 && j == m - 1 {
                break;
            }
            if j == m - 1 {
                i += 1;
            } else if i == n - 1 {
                j += 1;
            } else if s[i] <= d[j] {
                // Row exhausted first (ties close the row).
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    fn rebuild_adjacency(&mut self) {
        for a in &mut self.adj {
            a.clear();
        }
        for (e, &(i, j)) in self.basis.iter().enumerate() {
            let col = self.n + j;
            self.adj[i].push((col, e));
            self.adj[col].push((i, e));
        }
    }

    /// Basic flows from the tree by leaf elimination. The tree system
    /// has a unique solution, so this erases any float drift a pivot
    /// update would accumulate. Tiny negative leftovers are clamped.
    fn recompute_flows(&mut self) {
        let nodes = self.n + self.m;
        let mut remaining: Vec<f64> = self
            .supply
            .iter()
            .chain(self.demand.iter())
            .copied()
            .collect();
        let mut degree: Vec<usize> = self.adj.iter().map(Vec::len).collect();
        let mut edge_done = vec![false; self.basis.len()];
        self.flow = vec![0.0; self.basis.len()];
        let mut queue: VecDeque<usize> =
            (0..nodes).filter(|&v| degree[v] == 1).collect();
        while let Some(node) = queue.pop_front() {
            if degree[node] != 1 {
                continue;
            }
            let Some(&(other, e)) = self.adj[node].iter().find(|&&(_, e)| !edge_done[e]) else {
                continue;
            };
            self.flow[e] = remaining[node].max(0.0);
            remaining[other] -= remaining[node];
            remaining[node] = 0.0;
            edge_done[e] = true;
            degree[node] -= 1;
            degree[other] -= 1;
            if degree[other] == 1 {
                queue.push_back(other);
            }
        }
    }

    /// Duals from u_0 = 0 and u_i + v_j = c_ij on basic cells.
    fn compute_duals(&mut self) {
        let nodes = self.n + self.m;
        let mut seen = vec![false; nodes];
        let mut queue = VecDeque::new();
        self.u[0] = 0.0;
        seen[0] = true;
        queue.push_back(0usize);
        while let Some(node) = queue.pop_front() {
            for &(next, e) in &self.adj[node] {
                if seen[next] {
                    continue;
                }
                let (i, j) = self.basis[e];
                if next >= self.n {
                    self.v[next - self.n] = self.cost[i][j] - self.u[i];
                } else {
                    self.u[next] = self.cost[i][j] - self.v[j];
                }
                seen[next] = true;
                queue.push_back(next);
            }
        }
    }

    /// Entering cell: most negative reduced cost, lexicographic ties
    /// (Dantzig), or the lexicographically first negative cell once
    /// Bland's rule is active. `None` means optimal.
    fn entering(&self, bland: bool) -> Option<(usize, usize)> {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..self.n {
            for j in 0..self.m {
                if self.in_basis[i * self.m + j] {
                    continue;
                }
                let rc = self.cost[i][j] - self.u[i] - self.v[j];
                if rc < -self.pivot_tol {
                    if bland {
                        return Some((i, j));
                    }
                    // Strict < keeps the lexicographically first of ties.
                    if best.map_or(true, |(b, _, _)| rc < b) {
                        best = Some((rc, i, j));
                    }
                }
            }
        }
        best.map(|(_, i, j)| (i, j))
    }

    /// Pivots the entering cell into the basis: finds the unique tree
    /// cycle, picks the blocking cell on it, and swaps the two.
    /// Returns whether the pivot was degenerate (zero step). Flows are
    /// recomputed from the new tree next iteration, so only the basis
    /// changes here.
    fn pivot(&mut self, enter_i: usize, enter_j: usize) -> bool {
        // Vertex path from row node enter_i to column node enter_j.
        let nodes = self.n + self.m;
        let target = self.n + enter_j;
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; nodes];
        let mut seen = vec![false; nodes];
        let mut queue = VecDeque::new();
        seen[enter_i] = true;
        queue.push_back(enter_i);
        while let Some(node) = queue.pop_front() {
            if node == target {
                break;
            }
            for &(next, e) in &self.adj[node] {
                if !seen[next] {
                    seen[next] = true;
                    parent[next] = Some((node, e));
                    queue.push_back(next);
                }
            }
        }
        let mut path_edges = Vec::new();
        let mut node = target;
        while let Some((prev, e)) = parent[node] {
            path_edges.push(e);
            node = prev;
        }
        path_edges.reverse();

        // Entering cell takes +step; path edges alternate -, +, -, ...
        // starting from the one incident to the entering row, so both
        // endpoints of the cycle stay balanced.
        let mut leaving: Option<(f64, usize, usize, usize)> = None;
        for (k, &e) in path_edges.iter().enumerate() {
            if k % 2 == 0 {
                let (i, j) = self.basis[e];
                let f = self.flow[e];
                let better = match leaving {
                    None => true,
                    Some((bf, bi, bj, _)) => f < bf || (f == bf && (i, j) < (bi, bj)),
                };
                if better {
                    leaving = Some((f, i, j, e));
                }
            }
        }
        let (step, _, _, leave_edge) =
            leaving.expect("tree cycle always has a negative-signed edge");
        let (li, lj) = self.basis[leave_edge];
        self.in_basis[li * self.m + lj] = false;
        self.in_basis[enter_i * self.m + enter_j] = true;
        self.basis[leave_edge] = (enter_i, enter_j);
        step <= 0.0
    }

    fn flow_matrix(&self) -> Vec<Vec<f64>> {
        let mut matrix = vec![vec![0.0; self.m]; self.n];
        for (e, &(i, j)) in self.basis.iter().enumerate() {
            matrix[i][j] = self.flow[e];
        }
        matrix
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn measure(xs: &[f64], ws: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::new(xs.iter().map(|&x| vec![x]).collect(), ws.to_vec()).unwrap()
    }

    #[test]
    fn two_by_two_picks_monotone_matching() {
        // Squared costs: monotone matching costs 4, the swap costs 5.
        let mu = measure(&[0.0, 1.0], &[0.5, 0.5]);
        let nu = measure(&[2.0, 3.0], &[0.5, 0.5]);
        let cost = distance_cost_matrix(&mu, &nu, 2.0).unwrap();
        let sol = solve(&cost, &mu, &nu).unwrap();
        assert!((sol.value() - 4.0).abs() <= 1e-12);
        assert!((sol.coupling().entry(0, 0) - 0.5).abs() <= 1e-12);
        assert!((sol.coupling().entry(1, 1) - 0.5).abs() <= 1e-12);
        assert!((wasserstein(&mu, &nu, 2.0).unwrap() - 2.0).abs() <= 1e-12);
    }

    #[test]
    fn duals_certify_optimality() {
        let mu = measure(&[0.0, 1.0, 2.5], &[0.2, 0.5, 0.3]);
        let nu = measure(&[-1.0, 0.5, 2.0, 4.0], &[0.25, 0.25, 0.25, 0.25]);
        let cost = distance_cost_matrix(&mu, &nu, 2.0).unwrap();
        let sol = solve(&cost, &mu, &nu).unwrap();

        // Feasible duals: u_i + v_j <= c_ij within tolerance.
        for i in 0..3 {
            for j in 0..4 {
                assert!(sol.dual_u()[i] + sol.dual_v()[j] <= cost[i][j] + 1e-7);
            }
        }
        // Strong duality: <u, mu> + <v, nu> = value.
        let dual: f64 = sol
            .dual_u()
            .iter()
            .zip(mu.weights())
            .map(|(u, w)| u * w)
            .sum::<f64>()
            + sol
                .dual_v()
                .iter()
                .zip(nu.weights())
                .map(|(v, w)| v * w)
                .sum::<f64>();
        assert!((dual - sol.value()).abs() <= 1e-9);
        // Complementary slackness: positive cells are tight.
        for i in 0..3 {
            for j in 0..4 {
                if sol.coupling().entry(i, j) > 1e-12 {
                    let slack = cost[i][j] - sol.dual_u()[i] - sol.dual_v()[j];
                    assert!(slack.abs() <= 1e-7);
                }
            }
        }
    }

    #[test]
    fn handles_zero_mass_atoms() {
        let mu = measure(&[0.0, 1.0], &[1.0, 0.0]);
        let nu = measure(&[2.0, 3.0], &[0.0, 1.0]);
        let cost = distance_cost_matrix(&mu, &nu, 1.0).unwrap();
        let sol = solve(&cost, &mu, &nu).unwrap();
        assert!((sol.value() - 3.0).abs() <= 1e-12);
        assert!((sol.coupling().entry(0, 1) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn rejects_oversized_costs_and_bad_shapes() {
        let mu = measure(&[0.0], &[1.0]);
        let nu = measure(&[1.0], &[1.0]);
        assert!(solve(&[vec![2e12]], &mu, &nu).is_err());
        assert!(solve(&[vec![f64::NAN]], &mu, &nu).is_err());
        assert!(solve(&[vec![1.0, 2.0]], &mu, &nu).is_err());
        assert!(wasserstein(&mu, &nu, 0.5).is_err());
    }

    #[test]
    fn deterministic_across_runs() {
        let mu = measure(&[0.0, 0.3, 0.7, 1.1], &[0.25, 0.25, 0.25, 0.25]);
        let nu = measure(&[-0.5, 0.2, 0.9], &[0.4, 0.3, 0.3]);
        let cost = distance_cost_matrix(&mu, &nu, 2.0).unwrap();
        let a = solve(&cost, &mu, &nu).unwrap();
        let b = solve(&cost, &mu, &nu).unwrap();
        assert_eq!(a, b);
    }
}
