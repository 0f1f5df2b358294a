//! The primal weak transport problem on finite supports:
//!
//! ```text
//! V(mu, nu) = min over couplings pi of sum_i mu_i C(x_i, pi_{x_i})
//! ```
//!
//! a convex program over the transportation polytope whenever C(x, .)
//! is convex. `solve` runs conditional-gradient descent: linearize at
//! the current plan, call the exact transport LP as the linear
//! minimization oracle, and step toward the returned vertex. Each
//! oracle call yields the certificate gap <G, pi - s> bounding the
//! distance to optimality; the solver keeps the best lower bound seen
//! and stops once best value minus best bound drops below tolerance.
//!
//! Plain conditional gradient crawls on optima that sit on a face of
//! the polytope, so on quadratic runs the plain steps (exact parabola
//! line search toward the oracle vertex) are interleaved with an
//! exact descent on the current support pattern: within a fixed
//! pattern the marginal constraints leave the alternating cycles of
//! its bipartite graph as the only feasible directions, the objective
//! becomes a least-squares problem in cycle coordinates, and a ratio
//! test walks to the face optimum, dropping cells that hit zero. The
//! oracle vertex seeds the pattern so better faces stay reachable,
//! and the certificate still comes solely from the oracle gap.
//! Nonsmooth profiles keep plain steps on the classic 2/(k+2)
//! schedule and a correspondingly looser default tolerance.
//!
//! `brute_force` is an independent check for tiny instances: it walks
//! kernels over a simplex grid (all rows but the last free, the last
//! forced by column feasibility) together with all vertices of the
//! transportation polytope, and returns the best plan found. Its value
//! is nonincreasing when the resolution doubles, because the grids
//! nest.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::classical_ot::{self, transport_value};
use crate::costs::CostFunction;
use crate::error::{Error, Result};
use crate::float;
use crate::linalg::lstsq_basic;
use crate::measures::{dist, Coupling, DiscreteMeasure};
use crate::rng::Rng;

/// Default gap tolerance for the quadratic profile.
pub const DEFAULT_TOL_QUADRATIC: f64 = 1e-8;

/// Default gap tolerance for nonsmooth profiles, which use fixed
/// step sizes instead of exact line search.
pub const DEFAULT_TOL_GENERAL: f64 = 1e-6;

/// Default iteration cap.
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// Atom-count product above which [`brute_force`] refuses to run.
pub const BRUTE_FORCE_MAX_CELLS: u128 = 9;

/// The default gap tolerance for a cost: tighter when exact line
/// search applies.
pub fn default_tol(cost: &CostFunction) -> f64 {
    if cost.is_quadratic() {
        DEFAULT_TOL_QUADRATIC
    } else {
        DEFAULT_TOL_GENERAL
    }
}

/// A solved weak transport instance with its optimality certificate.
///
/// Invariants: the coupling is feasible; `fw_gap` is at least -1e-10
/// (rounding only); the optimal value lies in
/// `[value - fw_gap, value]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakSolution {
    coupling: Coupling,
    value: f64,
    fw_gap: f64,
    iterations: usize,
    history: Vec<(f64, f64)>,
    map_deviation: Option<f64>,
}

impl WeakSolution {
    /// The best coupling found.
    pub fn coupling(&self) -> &Coupling {
        &self.coupling
    }

    /// Objective value of that coupling.
    pub fn value(&self) -> f64 {
        self.value
    }

    /// Certified optimality gap: `value - fw_gap` is a valid lower
    /// bound on the optimum.
    pub fn fw_gap(&self) -> f64 {
        self.fw_gap
    }

    /// The certified lower bound `value - fw_gap`.
    pub fn certified_lower_bound(&self) -> f64 {
        self.value - self.fw_gap
    }

    /// Oracle iterations performed.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Per-iteration (objective, oracle gap) pairs, in order.
    pub fn history(&self) -> &[(f64, f64)] {
        &self.history
    }

    /// Largest barycentric-map disagreement against the best run when
    /// the solution came from [`solve_with_restarts`]; `None` for a
    /// single run. Small values back the uniqueness of the optimal
    /// map even when optimal matrices differ.
    pub fn map_deviation(&self) -> Option<f64> {
        self.map_deviation
    }

    /// Consumes the solution, keeping only the coupling.
    pub fn into_coupling(self) -> Coupling {
        self.coupling
    }
}

/// Objective sum over positive-mass atoms of mu_i C(x_i, row_i/mu_i).
pub fn evaluate(pi: &Coupling, cost: &CostFunction) -> Result<f64> {
    let kernel = pi.disintegrate();
    let mut total = 0.0;
    for (&i, row) in kernel.support().iter().zip(kernel.rows()) {
        total += pi.mu().weight(i) * cost.eval(pi.mu().point(i), pi.nu().points(), row)?;
    }
    Ok(total)
}

/// Solves the weak transport problem from the product coupling.
pub fn solve(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostFunction,
    tol: f64,
    max_iter: usize,
) -> Result<WeakSolution> {
    solve_from(Coupling::product(mu.clone(), nu.clone()), cost, tol, max_iter)
}

/// Solves the weak transport problem from a caller-supplied feasible
/// starting coupling.
pub fn solve_from(
    start: Coupling,
    cost: &CostFunction,
    tol: f64,
    max_iter: usize,
) -> Result<WeakSolution> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    if max_iter == 0 {
        return Err(Error::InvalidInput(String::from("iteration cap must be at least 1")));
    }
    if start.mu().dim() != start.nu().dim() {
        return Err(Error::DimensionMismatch {
            what: "marginal dimensions",
            expected: start.mu().dim(),
            found: start.nu().dim(),
        });
    }
    let mu = start.mu().clone();
    let nu = start.nu().clone();
    let quadratic = cost.is_quadratic();

    let mut pi: Vec<Vec<f64>> = start.matrix().to_vec();
    let mut history: Vec<(f64, f64)> = Vec::new();
    let mut best_value = f64::INFINITY;
    let mut best_matrix = pi.clone();
    let mut lower_bound = f64::NEG_INFINITY;
    let mut iterations = 0;

    for k in 0..max_iter {
        iterations = k + 1;
        let f = objective(&mu, &nu, &pi, cost)?;
        if f < best_value {
            best_value = f;
            best_matrix = pi.clone();
        }
        let grad = gradient(&mu, &nu, &pi, cost)?;
        let oracle = classical_ot::solve(&grad, &mu, &nu)?;
        let inner = transport_value(&grad, &pi);
        let gap = inner - oracle.value();
        history.push((f, gap));
        lower_bound = lower_bound.max(f - gap);
        if best_value - lower_bound <= tol {
            break;
        }

        let vertex = oracle.into_coupling();
        if quadratic && k % DESCENT_PERIOD == 1 {
            let candidate = pattern_descent(&mu, &nu, &pi, vertex.matrix());
            if objective(&mu, &nu, &candidate, cost)? < f {
                pi = candidate;
                continue;
            }
        }
        let step = if quadratic {
            let direction: Vec<Vec<f64>> = vertex
                .matrix()
                .iter()
                .zip(&pi)
                .map(|(sr, pr)| sr.iter().zip(pr).map(|(&s, &p)| s - p).collect())
                .collect();
            quadratic_step_along(&mu, &nu, &pi, &direction)
        } else {
            2.0 / (k as f64 + 2.0)
        };
        for (pr, sr) in pi.iter_mut().zip(vertex.matrix()) {
            for (p, &sv) in pr.iter_mut().zip(sr) {
                *p += step * (sv - *p);
            }
        }
    }

    let fw_gap = best_value - lower_bound;
    let solution = WeakSolution {
        coupling: finalize(mu, nu, best_matrix)?,
        value: best_value,
        fw_gap,
        iterations,
        history,
        map_deviation: None,
    };
    if fw_gap > tol {
        return Err(Error::ConvergenceFailure {
            gap: fw_gap,
            tol,
            solution: Box::new(solution),
        });
    }
    Ok(solution)
}

/// Runs `solve` once from the product coupling and `restarts - 1`
/// further times from seeded random feasible plans, returning the
/// best converged run with its barycentric-map deviation filled in.
pub fn solve_with_restarts(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostFunction,
    tol: f64,
    max_iter: usize,
    restarts: usize,
    seed: u64,
) -> Result<WeakSolution> {
    if restarts == 0 {
        return Err(Error::InvalidInput(String::from("need at least one start")));
    }
    let mut rng = Rng::seeded(seed);
    let mut runs: Vec<WeakSolution> = Vec::new();
    let mut first_failure: Option<Error> = None;
    for r in 0..restarts {
        let start = if r == 0 {
            Coupling::product(mu.clone(), nu.clone())
        } else {
            random_coupling(mu, nu, &mut rng)?
        };
        match solve_from(start, cost, tol, max_iter) {
            Ok(sol) => runs.push(sol),
            Err(e) => {
                if first_failure.is_none() {
                    first_failure = Some(e);
                }
            }
        }
    }
    let Some(best_at) = runs
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.value.total_cmp(&b.value))
        .map(|(i, _)| i)
    else {
        return Err(first_failure.expect("no runs and no failure is impossible"));
    };
    let best_map = runs[best_at].coupling.barycentric_map();
    let mut deviation: f64 = 0.0;
    for run in &runs {
        for ((_, t), (_, t_best)) in run.coupling.barycentric_map().iter().zip(&best_map) {
            deviation = deviation.max(dist(t, t_best));
        }
    }
    let mut best = runs.swap_remove(best_at);
    best.map_deviation = Some(deviation);
    Ok(best)
}

/// Exhaustive search over kernels on a simplex grid of the given
/// resolution, unioned with all vertices of the transportation
/// polytope. Only for instances whose positive supports multiply to
/// at most [`BRUTE_FORCE_MAX_CELLS`] cells. The value is exact in the
/// resolution limit and nonincreasing when the resolution doubles.
pub fn brute_force(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostFunction,
    resolution: u32,
) -> Result<(f64, Coupling)> {
    if resolution < 8 {
        return Err(Error::InvalidInput(format!(
            "grid resolution must be at least 8, got {resolution}"
        )));
    }
    let rows: Vec<usize> = mu.support();
    let cols: Vec<usize> = nu.support();
    let cells = (rows.len() as u128) * (cols.len() as u128);
    if cells > BRUTE_FORCE_MAX_CELLS {
        return Err(Error::InstanceTooLarge {
            size: cells,
            limit: BRUTE_FORCE_MAX_CELLS,
        });
    }
    let combos = compositions_count(resolution as u128, cols.len() as u128);
    let work = combos.saturating_pow(rows.len().saturating_sub(1) as u32);
    const WORK_CAP: u128 = 50_000_000;
    if work > WORK_CAP {
        return Err(Error::InstanceTooLarge {
            size: work,
            limit: WORK_CAP,
        });
    }

    let sub_mu: Vec<f64> = rows.iter().map(|&i| mu.weight(i)).collect();
    let sub_nu: Vec<f64> = cols.iter().map(|&j| nu.weight(j)).collect();
    let xs: Vec<&[f64]> = rows.iter().map(|&i| mu.point(i)).collect();
    let ys: Vec<Vec<f64>> = cols.iter().map(|&j| nu.point(j).to_vec()).collect();

    let mut best_value = f64::INFINITY;
    let mut best_kernels: Vec<Vec<f64>> = Vec::new();

    // Vertices first: exact optima that sit on a vertex are found
    // regardless of the grid.
    for kernels in polytope_vertices(&sub_mu, &sub_nu) {
        let v = kernel_cost(cost, &xs, &ys, &sub_mu, &kernels)?;
        if v < best_value {
            best_value = v;
            best_kernels = kernels;
        }
    }

    let mut grid = GridSearch {
        cost,
        xs: &xs,
        ys: &ys,
        mu: &sub_mu,
        nu: &sub_nu,
        resolution,
        kernels: vec![vec![0.0; cols.len()]; rows.len()],
        used: vec![0.0; cols.len()],
        best_value,
        best_kernels,
        error: None,
    };
    grid.run(0);
    if let Some(e) = grid.error {
        return Err(e);
    }
    best_value = grid.best_value;
    best_kernels = grid.best_kernels;

    let mut matrix = vec![vec![0.0; nu.len()]; mu.len()];
    for (r, &i) in rows.iter().enumerate() {
        for (c, &j) in cols.iter().enumerate() {
            matrix[i][j] = sub_mu[r] * best_kernels[r][c];
        }
    }
    Ok((best_value, finalize(mu.clone(), nu.clone(), matrix)?))
}

/// Objective at a raw matrix (rows aligned with mu's atoms).
fn objective(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    matrix: &[Vec<f64>],
    cost: &CostFunction,
) -> Result<f64> {
    let mut total = 0.0;
    for (i, row) in matrix.iter().enumerate() {
        let w = mu.weight(i);
        if w > 0.0 {
            let p: Vec<f64> = row.iter().map(|&q| q / w).collect();
            total += w * cost.eval(mu.point(i), nu.points(), &p)?;
        }
    }
    Ok(total)
}

/// Gradient matrix G_ij = d objective / d pi_ij; zero rows for
/// zero-mass atoms.
fn gradient(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    matrix: &[Vec<f64>],
    cost: &CostFunction,
) -> Result<Vec<Vec<f64>>> {
    let mut grad = vec![vec![0.0; nu.len()]; mu.len()];
    for (i, row) in matrix.iter().enumerate() {
        let w = mu.weight(i);
        if w > 0.0 {
            let p: Vec<f64> = row.iter().map(|&q| q / w).collect();
            // d/d pi_ij of w C(x_i, row/w) is the kernel gradient: the
            // outer w and the inner 1/w cancel.
            grad[i] = cost.grad_weights(mu.point(i), nu.points(), &p)?;
        }
    }
    Ok(grad)
}

/// Iterations between support-pattern descents on quadratic runs.
const DESCENT_PERIOD: usize = 4;

/// Exact minimization of the quadratic objective over the face of the
/// transportation polytope spanned by the iterate's support together
/// with the seed plan's support. Within a fixed pattern the feasible
/// directions are spanned by the alternating cycles of its bipartite
/// graph, so the face optimum is a least-squares solve in cycle
/// coordinates; a ratio test walks toward it, removing cells that hit
/// zero. Cycle moves carry both marginals exactly, so every
/// intermediate plan stays feasible and the objective never rises.
fn pattern_descent(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    start: &[Vec<f64>],
    seed: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let n = mu.len();
    let m = nu.len();
    let d = nu.dim();
    let mut pi: Vec<Vec<f64>> = start.to_vec();
    let mut pattern = vec![vec![false; m]; n];
    for (i, (row, seed_row)) in pi.iter().zip(seed).enumerate() {
        for (j, (&q, &s)) in row.iter().zip(seed_row).enumerate() {
            pattern[i][j] = q > 0.0 || s > 0.0;
        }
    }
    for _round in 0..(n * m + 2) {
        // Spanning forest of the pattern graph by breadth-first
        // search; rows are nodes 0..n, columns n..n+m.
        let nodes = n + m;
        let mut parent: Vec<Option<(usize, (usize, usize))>> = vec![None; nodes];
        let mut seen = vec![false; nodes];
        let mut in_tree = vec![vec![false; m]; n];
        let mut queue: Vec<usize> = Vec::new();
        for root in 0..nodes {
            if seen[root] {
                continue;
            }
            seen[root] = true;
            queue.clear();
            queue.push(root);
            let mut head = 0;
            while head < queue.len() {
                let v = queue[head];
                head += 1;
                if v < n {
                    for j in 0..m {
                        if pattern[v][j] && !seen[n + j] {
                            seen[n + j] = true;
                            in_tree[v][j] = true;
                            parent[n + j] = Some((v, (v, j)));
                            queue.push(n + j);
                        }
                    }
                } else {
                    let j = v - n;
                    for i in 0..n {
                        if pattern[i][j] && !seen[i] {
                            seen[i] = true;
                            in_tree[i][j] = true;
                            parent[i] = Some((v, (i, j)));
                            queue.push(i);
                        }
                    }
                }
            }
        }
        // Fundamental cycle of each non-tree cell. Signs alternate
        // along the closed walk, which has even length in a bipartite
        // graph, so each node sees one +1 and one -1: both marginals
        // are untouched.
        let chain = |mut v: usize| {
            let mut nodes_chain = vec![v];
            let mut edges = Vec::new();
            while let Some((p, e)) = parent[v] {
                edges.push(e);
                v = p;
                nodes_chain.push(v);
            }
            (nodes_chain, edges)
        };
        let mut cycles: Vec<Vec<(usize, usize, f64)>> = Vec::new();
        for i in 0..n {
            for j in 0..m {
                if !pattern[i][j] || in_tree[i][j] {
                    continue;
                }
                let (row_nodes, row_edges) = chain(i);
                let (col_nodes, col_edges) = chain(n + j);
                let mut cut_row = row_nodes.len() - 1;
                let mut cut_col = col_nodes.len() - 1;
                'meet: for (a, na) in row_nodes.iter().enumerate() {
                    for (b, nb) in col_nodes.iter().enumerate() {
                        if na == nb {
                            cut_row = a;
                            cut_col = b;
                            break 'meet;
                        }
                    }
                }
                let mut walk: Vec<(usize, usize)> = vec![(i, j)];
                walk.extend(col_edges[..cut_col].iter().copied());
                walk.extend(row_edges[..cut_row].iter().rev().copied());
                cycles.push(
                    walk.into_iter()
                        .enumerate()
                        .map(|(t, (ci, cj))| (ci, cj, if t % 2 == 0 { 1.0 } else { -1.0 }))
                        .collect(),
                );
            }
        }
        if cycles.is_empty() {
            break;
        }
        // Face optimum in cycle coordinates: weighted barycenter
        // residuals against the cycles' barycenter shifts.
        let mut shifts = vec![vec![0.0; cycles.len()]; n * d];
        let mut residual = vec![0.0; n * d];
        for i in 0..n {
            let w = mu.weight(i);
            if w <= 0.0 {
                continue;
            }
            let sw = float::sqrt(w);
            let mut z = vec![0.0; d];
            for (j, &q) in pi[i].iter().enumerate() {
                for (k, y) in nu.point(j).iter().enumerate() {
                    z[k] += q * y / w;
                }
            }
            for k in 0..d {
                residual[i * d + k] = sw * (mu.point(i)[k] - z[k]);
            }
        }
        for (e, cycle) in cycles.iter().enumerate() {
            for &(ci, cj, s) in cycle {
                let w = mu.weight(ci);
                if w <= 0.0 {
                    continue;
                }
                let sw = float::sqrt(w);
                for (k, y) in nu.point(cj).iter().enumerate() {
                    shifts[ci * d + k][e] += s * y / sw;
                }
            }
        }
        let Some(t) = lstsq_basic(&shifts, &residual, 1e-12) else {
            break;
        };
        let mut delta = vec![vec![0.0; m]; n];
        for (e, cycle) in cycles.iter().enumerate() {
            for &(ci, cj, s) in cycle {
                delta[ci][cj] += t[e] * s;
            }
        }
        let magnitude = delta
            .iter()
            .flat_map(|row| row.iter())
            .fold(0.0_f64, |acc, &v| acc.max(float::abs(v)));
        if magnitude <= 1e-15 {
            break;
        }
        let mut alpha = 1.0_f64;
        for (pr, dr) in pi.iter().zip(&delta) {
            for (&p, &dv) in pr.iter().zip(dr) {
                if dv < -1e-18 {
                    alpha = alpha.min(p / -dv);
                }
            }
        }
        let full = alpha >= 1.0 - 1e-12;
        let alpha = alpha.min(1.0);
        let mut blocked = false;
        for i in 0..n {
            for j in 0..m {
                if !pattern[i][j] {
                    continue;
                }
                let next = pi[i][j] + alpha * delta[i][j];
                if !full && delta[i][j] < 0.0 && next <= 1e-15 * (1.0 + pi[i][j]) {
                    pi[i][j] = 0.0;
                    pattern[i][j] = false;
                    blocked = true;
                } else {
                    pi[i][j] = next.max(0.0);
                }
            }
        }
        if !full && !blocked {
            break;
        }
    }
    pi
}

/// Closed-form step for the quadratic profile: the objective along
/// pi + step * direction is a parabola in the row barycenters,
/// minimized over [0, 1].
fn quadratic_step_along(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    pi: &[Vec<f64>],
    direction: &[Vec<f64>],
) -> f64 {
    let d = nu.dim();
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, (pr, dr)) in pi.iter().zip(direction).enumerate() {
        let w = mu.weight(i);
        if w <= 0.0 {
            continue;
        }
        let mut residual = mu.point(i).to_vec();
        let mut shift = vec![0.0; d];
        for (j, (&pv, &dv)) in pr.iter().zip(dr).enumerate() {
            let y = nu.point(j);
            for k in 0..d {
                residual[k] -= pv / w * y[k];
                shift[k] += dv / w * y[k];
            }
        }
        for k in 0..d {
            num += w * residual[k] * shift[k];
            den += w * shift[k] * shift[k];
        }
    }
    if den <= 0.0 {
        return 0.0;
    }
    (num / den).clamp(0.0, 1.0)
}

/// Clamps rounding dust and rebuilds a validated coupling.
fn finalize(mu: DiscreteMeasure, nu: DiscreteMeasure, matrix: Vec<Vec<f64>>) -> Result<Coupling> {
    let cleaned = matrix
        .into_iter()
        .map(|row| row.into_iter().map(|q| q.max(0.0)).collect())
        .collect();
    Coupling::new(mu, nu, cleaned)
}

/// A seeded random feasible coupling: a mixture of the product plan
/// and two vertices drawn by minimizing random linear costs.
fn random_coupling(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    rng: &mut Rng,
) -> Result<Coupling> {
    let (n, m) = (mu.len(), nu.len());
    let product = Coupling::product(mu.clone(), nu.clone());
    let mut parts: Vec<Vec<Vec<f64>>> = vec![product.matrix().to_vec()];
    for _ in 0..2 {
        let cost: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..m).map(|_| rng.uniform()).collect())
            .collect();
        parts.push(classical_ot::solve(&cost, mu, nu)?.into_coupling().matrix().to_vec());
    }
    let mut weights: Vec<f64> = (0..parts.len()).map(|_| rng.uniform() + 1e-3).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    let mut matrix = vec![vec![0.0; m]; n];
    for (part, &w) in parts.iter().zip(&weights) {
        for i in 0..n {
            for j in 0..m {
                matrix[i][j] += w * part[i][j];
            }
        }
    }
    Coupling::new(mu.clone(), nu.clone(), matrix)
}

/// Number of compositions of `resolution` into `slots` nonnegative
/// parts, saturating at u128::MAX.
fn compositions_count(resolution: u128, slots: u128) -> u128 {
    if slots == 0 {
        return 0;
    }
    // C(resolution + slots - 1, slots - 1) by incremental products.
    let k = slots - 1;
    let mut result: u128 = 1;
    for i in 1..=k {
        result = result.saturating_mul(resolution + i);
        result /= i;
    }
    result
}

/// cost of the kernel rows: sum_i mu_i C(x_i, kernels_i).
fn kernel_cost(
    cost: &CostFunction,
    xs: &[&[f64]],
    ys: &[Vec<f64>],
    mu: &[f64],
    kernels: &[Vec<f64>],
) -> Result<f64> {
    let mut total = 0.0;
    for ((x, &w), p) in xs.iter().zip(mu).zip(kernels) {
        total += w * cost.eval(x, ys, p)?;
    }
    Ok(total)
}

/// All vertices of the transportation polytope with row sums `mu` and
/// column sums `nu`, returned as kernel rows (rows divided by mu_i).
/// Vertices correspond to spanning trees of the bipartite support
/// graph with nonnegative tree flows.
fn polytope_vertices(mu: &[f64], nu: &[f64]) -> Vec<Vec<Vec<f64>>> {
    let (n, m) = (mu.len(), nu.len());
    let cells: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .collect();
    let basis_size = n + m - 1;
    let mut out = Vec::new();
    if basis_size > cells.len() {
        return out;
    }
    let mut chosen: Vec<usize> = (0..basis_size).collect();
    loop {
        if let Some(flows) = tree_flows(mu, nu, &chosen.iter().map(|&c| cells[c]).collect::<Vec<_>>()) {
            let kernels: Vec<Vec<f64>> = (0..n)
                .map(|i| (0..m).map(|j| flows[i][j] / mu[i]).collect())
                .collect();
            if !out.contains(&kernels) {
                out.push(kernels);
            }
        }
        // Next combination in lexicographic order.
        let mut idx = basis_size;
        loop {
            if idx == 0 {
                return out;
            }
            idx -= 1;
            if chosen[idx] != idx + cells.len() - basis_size {
                break;
            }
        }
        chosen[idx] += 1;
        for later in idx + 1..basis_size {
            chosen[later] = chosen[later - 1] + 1;
        }
    }
}

/// Flows on a candidate basis: `None` unless the cells form a
/// spanning tree carrying nonnegative flow.
fn tree_flows(mu: &[f64], nu: &[f64], cells: &[(usize, usize)]) -> Option<Vec<Vec<f64>>> {
    let (n, m) = (mu.len(), nu.len());
    let mut flows = vec![vec![0.0; m]; n];
    let mut remaining_row = mu.to_vec();
    let mut remaining_col = nu.to_vec();
    let mut active: Vec<(usize, usize)> = cells.to_vec();
    // Leaf elimination: a node incident to one active cell forces it.
    while !active.is_empty() {
        let mut row_deg = vec![0usize; n];
        let mut col_deg = vec![0usize; m];
        for &(i, j) in &active {
            row_deg[i] += 1;
            col_deg[j] += 1;
        }
        let leaf = active
            .iter()
            .position(|&(i, j)| row_deg[i] == 1 || col_deg[j] == 1)?;
        let (i, j) = active.swap_remove(leaf);
        let f = if row_deg[i] == 1 {
            remaining_row[i]
        } else {
            remaining_col[j]
        };
        if f < -1e-12 {
            return None;
        }
        let f = f.max(0.0);
        flows[i][j] = f;
        remaining_row[i] -= f;
        remaining_col[j] -= f;
    }
    // Spanning check: all supply and demand consumed.
    if remaining_row.iter().any(|&r| float::abs(r) > 1e-9)
        || remaining_col.iter().any(|&c| float::abs(c) > 1e-9)
    {
        return None;
    }
    Some(flows)
}

/// Depth-first simplex-grid walk over all kernel rows but the last.
struct GridSearch<'a> {
    cost: &'a CostFunction,
    xs: &'a [&'a [f64]],
    ys: &'a [Vec<f64>],
    mu: &'a [f64],
    nu: &'a [f64],
    resolution: u32,
    kernels: Vec<Vec<f64>>,
    used: Vec<f64>,
    best_value: f64,
    best_kernels: Vec<Vec<f64>>,
    error: Option<Error>,
}

impl GridSearch<'_> {
    fn run(&mut self, row: usize) {
        if self.error.is_some() {
            return;
        }
        let n = self.mu.len();
        if row + 1 == n {
            // Last row is forced by column feasibility.
            let w = self.mu[row];
            let mut p = vec![0.0; self.nu.len()];
            for j in 0..self.nu.len() {
                let left = self.nu[j] - self.used[j];
                if left < -1e-12 {
                    return;
                }
                p[j] = left.max(0.0) / w;
            }
            self.kernels[row] = p;
            match kernel_cost(self.cost, self.xs, self.ys, self.mu, &self.kernels) {
                Ok(v) => {
                    if v < self.best_value {
                        self.best_value = v;
                        self.best_kernels = self.kernels.clone();
                    }
                }
                Err(e) => self.error = Some(e),
            }
            return;
        }
        let r = self.resolution;
        self.fill_slot(row, 0, r);
    }

    /// Distributes `left` grid ticks over slots `slot..` of `row`.
    fn fill_slot(&mut self, row: usize, slot: usize, left: u32) {
        if self.error.is_some() {
            return;
        }
        let m = self.nu.len();
        if slot + 1 == m {
            let add = left as f64 / self.resolution as f64;
            let w = self.mu[row];
            if self.used[slot] + w * add > self.nu[slot] + 1e-12 {
                return;
            }
            self.kernels[row][slot] = add;
            self.used[slot] += w * add;
            self.run(row + 1);
            self.used[slot] -= w * add;
            return;
        }
        for ticks in 0..=left {
            let add = ticks as f64 / self.resolution as f64;
            let w = self.mu[row];
            if self.used[slot] + w * add > self.nu[slot] + 1e-12 {
                break;
            }
            self.kernels[row][slot] = add;
            self.used[slot] += w * add;
            self.fill_slot(row, slot + 1, left - ticks);
            self.used[slot] -= w * add;
        }
        self.kernels[row][slot] = 0.0;
    }
}
