//! The dual side of the weak transport problem. A potential is a
//! vector of values on the support of nu; its conjugate at x is
//!
//! ```text
//! inf over kernels p of  sum_j p_j psi(y_j) + C(x, p)
//! ```
//!
//! and the dual objective is D(psi) = mu(conjugate) - nu(psi). Weak
//! duality D(psi) <= V(mu, nu) holds for every finite psi;
//! `maximize_dual` climbs D by projected supergradient ascent and
//! certifies its best iterate against a primal value.
//!
//! The conjugate is itself a small convex program over the simplex.
//! For the quadratic profile it is solved exactly: some minimizer is
//! supported on affinely independent points, at most one more than
//! the ambient dimension, and on such a support the stationarity
//! system bordered by the mass constraint is nonsingular, so the
//! solver walks those supports and returns the first solution whose
//! certificate gap clears [`CONJUGATE_TOL`]. Other profiles run
//! conditional gradient with away steps and exact line search along
//! the section. Either way the tolerance is well under every
//! certificate slack used downstream, so reported dual values
//! overshoot the true ones by at most that much.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::costs::CostFunction;
use crate::error::{Error, Result};
use crate::linalg::solve_dense;
use crate::measures::{dist, Coupling, DiscreteMeasure};
use crate::weak_solver::{self, WeakSolution};

/// Certificate gap at which a conjugate evaluation stops.
pub const CONJUGATE_TOL: f64 = 1e-10;

/// Iteration cap for a single conjugate evaluation.
const CONJUGATE_MAX_ITER: usize = 200_000;

/// Support-subset budget for the exact quadratic conjugate; beyond it
/// the evaluation falls back to conditional gradient.
const EXACT_SUPPORT_CAP: u128 = 50_000;

/// Lipschitz slack accepted when validating a constrained potential.
pub const LIPSCHITZ_SLACK: f64 = 1e-9;

/// A dual potential: values on the support of nu, optionally
/// constrained to be L-Lipschitz across that support.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPotential {
    support: Vec<Vec<f64>>,
    values: Vec<f64>,
    lipschitz: Option<f64>,
}

impl DualPotential {
    /// Builds a potential, checking finiteness and, when a constant
    /// is supplied, the pairwise Lipschitz inequalities up to
    /// [`LIPSCHITZ_SLACK`].
    pub fn new(support: Vec<Vec<f64>>, values: Vec<f64>, lipschitz: Option<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidInput(String::from("potential support is empty")));
        }
        if support.len() != values.len() {
            return Err(Error::DimensionMismatch {
                what: "potential values",
                expected: support.len(),
                found: values.len(),
            });
        }
        let d = support[0].len();
        for y in &support {
            if y.len() != d {
                return Err(Error::DimensionMismatch {
                    what: "potential support point",
                    expected: d,
                    found: y.len(),
                });
            }
            if y.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidInput(String::from("support point is not finite")));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(String::from("potential value is not finite")));
        }
        if let Some(l) = lipschitz {
            if !l.is_finite() || l < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "Lipschitz constant must be finite and nonnegative, got {l}"
                )));
            }
            for j in 0..support.len() {
                for k in j + 1..support.len() {
                    let spread = (values[j] - values[k]).abs();
                    let reach = l * dist(&support[j], &support[k]) + LIPSCHITZ_SLACK;
                    if spread > reach {
                        return Err(Error::InvalidInput(format!(
                            "values at support points {j} and {k} differ by {spread}, \
                             beyond the Lipschitz reach {reach}"
                        )));
                    }
                }
            }
        }
        Ok(Self { support, values, lipschitz })
    }

    /// Support points the values live on.
    pub fn support(&self) -> &[Vec<f64>] {
        &self.support
    }

    /// Potential values, aligned with the support.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The Lipschitz constraint, when one was imposed.
    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    /// Number of support points.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Whether the potential has no support points (never true for a
    /// validated potential).
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The inf-extension min_j psi_j + L |y - y_j| off the support.
    /// Available only under a Lipschitz constraint, which makes the
    /// extension agree with the stored values on the support.
    pub fn extend(&self, y: &[f64]) -> Result<f64> {
        let l = self.lipschitz.ok_or(Error::MissingLipschitzBound)?;
        if y.len() != self.support[0].len() {
            return Err(Error::DimensionMismatch {
                what: "extension point",
                expected: self.support[0].len(),
                found: y.len(),
            });
        }
        Ok(self
            .values
            .iter()
            .zip(&self.support)
            .map(|(&v, yj)| v + l * dist(y, yj))
            .fold(f64::INFINITY, f64::min))
    }
}

/// A certified primal-dual pair for one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct DualityReport {
    primal: f64,
    dual: f64,
    gap: f64,
    potential: DualPotential,
    solution: WeakSolution,
}

impl DualityReport {
    /// Primal objective value.
    pub fn primal(&self) -> f64 {
        self.primal
    }

    /// Best dual objective value found.
    pub fn dual(&self) -> f64 {
        self.dual
    }

    /// primal - dual; nonnegative up to conjugate tolerance.
    pub fn gap(&self) -> f64 {
        self.gap
    }

    /// The potential attaining the dual value.
    pub fn potential(&self) -> &DualPotential {
        &self.potential
    }

    /// The primal solution.
    pub fn solution(&self) -> &WeakSolution {
        &self.solution
    }
}

/// Evaluates the conjugate inf_p (psi . p + C(x, p)) over kernels on
/// the potential's support, returning the value and a minimizer.
pub fn conjugate(cost: &CostFunction, psi: &DualPotential, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    let m = psi.len();
    let support = psi.support();
    let h = |p: &[f64]| -> Result<f64> {
        let inner: f64 = p.iter().zip(psi.values()).map(|(&pj, &v)| pj * v).sum();
        Ok(inner + cost.eval(x, support, p)?)
    };
    let grad = |p: &[f64]| -> Result<Vec<f64>> {
        let mut g = cost.grad_weights(x, support, p)?;
        for (gj, &v) in g.iter_mut().zip(psi.values()) {
            *gj += v;
        }
        Ok(g)
    };

    if cost.is_quadratic() {
        if let Some(found) = exact_quadratic_conjugate(support, psi.values(), x, &h, &grad)? {
            return Ok(found);
        }
    }

    let mut p = vec![1.0 / m as f64; m];
    let mut best_value = f64::INFINITY;
    let mut best_p = p.clone();

    for _ in 0..CONJUGATE_MAX_ITER {
        let value = h(&p)?;
        if value < best_value {
            best_value = value;
            best_p = p.clone();
        }
        let g = grad(&p)?;
        let j_fw = (0..m)
            .min_by(|&a, &b| g[a].total_cmp(&g[b]))
            .expect("support is nonempty");
        let inner = g.iter().zip(&p).map(|(&gj, &pj)| gj * pj).sum::<f64>();
        let gap = inner - g[j_fw];
        if gap <= CONJUGATE_TOL {
            return Ok((best_value, best_p));
        }

        // Away coordinate: the worst gradient carrying mass.
        let j_aw = (0..m)
            .filter(|&j| p[j] > 0.0)
            .max_by(|&a, &b| g[a].total_cmp(&g[b]))
            .expect("the iterate carries mass");
        let away_descent = g[j_aw] - inner;
        let toward = gap >= away_descent || p[j_aw] >= 1.0 - 1e-15;

        // direction = target - p with target either e_fw (toward) or
        // p + (p - e_aw) rescaled; encode both as (vertex, sign, cap).
        let (vertex, cap) = if toward {
            (j_fw, 1.0)
        } else {
            (j_aw, p[j_aw] / (1.0 - p[j_aw]))
        };
        let direction: Vec<f64> = (0..m)
            .map(|idx| {
                let e = if idx == vertex { 1.0 } else { 0.0 };
                if toward {
                    e - p[idx]
                } else {
                    p[idx] - e
                }
            })
            .collect();
        let step = line_search(&h, &grad, &p, &direction, cap)?;
        for (pj, dj) in p.iter_mut().zip(&direction) {
            *pj = (*pj + step * dj).max(0.0);
        }
        if !toward && step >= cap {
            // Drop step: the away coordinate leaves the support
            // exactly rather than lingering as rounding dust.
            p[vertex] = 0.0;
        }
        let total: f64 = p.iter().sum();
        for pj in p.iter_mut() {
            *pj /= total;
        }
    }
    Err(Error::NumericalFailure(format!(
        "conjugate evaluation did not reach gap {CONJUGATE_TOL} within {CONJUGATE_MAX_ITER} iterations"
    )))
}

/// Exact conjugate for the quadratic profile. The optimal barycenter
/// is unique by strict convexity, reaching it takes at most d + 1
/// kernel atoms, and taking the cheapest such kernel basic makes its
/// support affinely independent, which in turn makes the stationarity
/// system on that support bordered by the mass constraint
/// nonsingular. Walking every candidate support and keeping the first
/// solution that passes the certificate gap is therefore exact; a
/// near-singular solve yields junk that simply fails the certificate.
/// Returns `Ok(None)` when the subset budget is exceeded and the
/// caller should fall back to conditional gradient.
fn exact_quadratic_conjugate(
    support: &[Vec<f64>],
    values: &[f64],
    x: &[f64],
    h: &dyn Fn(&[f64]) -> Result<f64>,
    grad: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
) -> Result<Option<(f64, Vec<f64>)>> {
    let m = support.len();
    let max_size = (x.len() + 1).min(m);
    let mut budget: u128 = 0;
    for size in 1..=max_size {
        budget = budget.saturating_add(binomial(m, size));
    }
    if budget > EXACT_SUPPORT_CAP {
        return Ok(None);
    }
    for size in 1..=max_size {
        let mut picks: Vec<usize> = (0..size).collect();
        loop {
            if let Some(p) = support_stationary_point(support, values, x, &picks) {
                let g = grad(&p)?;
                let inner: f64 = g.iter().zip(&p).map(|(&gj, &pj)| gj * pj).sum();
                let floor = g.iter().copied().fold(f64::INFINITY, f64::min);
                if inner - floor <= CONJUGATE_TOL {
                    return Ok(Some((h(&p)?, p)));
                }
            }
            if !next_support(&mut picks, m) {
                break;
            }
        }
    }
    Ok(None)
}

/// Stationary kernel confined to the support subset `picks`: scores
/// equal there, total mass one. `None` when the system is singular or
/// the solution leaves the simplex.
fn support_stationary_point(
    support: &[Vec<f64>],
    values: &[f64],
    x: &[f64],
    picks: &[usize],
) -> Option<Vec<f64>> {
    let s = picks.len();
    let mut mat = vec![vec![0.0; s + 1]; s + 1];
    let mut rhs = vec![0.0; s + 1];
    for (a, &j) in picks.iter().enumerate() {
        for (b, &k) in picks.iter().enumerate() {
            mat[a][b] = 2.0 * dot(&support[j], &support[k]);
        }
        mat[a][s] = -1.0;
        mat[s][a] = 1.0;
        rhs[a] = 2.0 * dot(x, &support[j]) - values[j];
    }
    rhs[s] = 1.0;
    let sol = solve_dense(mat, rhs, 1e-11)?;
    if sol[..s].iter().any(|&w| !(w >= -1e-12)) {
        return None;
    }
    let mut p = vec![0.0; support.len()];
    let mut total = 0.0;
    for (a, &j) in picks.iter().enumerate() {
        p[j] = sol[a].max(0.0);
        total += p[j];
    }
    if !total.is_finite() || total <= 0.0 {
        return None;
    }
    for q in p.iter_mut() {
        *q /= total;
    }
    Some(p)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&u, &v)| u * v).sum()
}

fn binomial(n: usize, k: usize) -> u128 {
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Advances a sorted index combination in lexicographic order.
fn next_support(picks: &mut [usize], m: usize) -> bool {
    let size = picks.len();
    let mut idx = size;
    loop {
        if idx == 0 {
            return false;
        }
        idx -= 1;
        if picks[idx] != idx + m - size {
            break;
        }
    }
    picks[idx] += 1;
    for later in idx + 1..size {
        picks[later] = picks[later - 1] + 1;
    }
    true
}

/// One-dimensional minimization of h along p + step d for step in
/// [0, cap]: the derivative of a convex section is nondecreasing, so
/// bisection on its sign finds the minimizer.
fn line_search(
    h: &dyn Fn(&[f64]) -> Result<f64>,
    grad: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    p: &[f64],
    direction: &[f64],
    cap: f64,
) -> Result<f64> {
    let point = |step: f64| -> Vec<f64> {
        p.iter()
            .zip(direction)
            .map(|(&pj, &dj)| pj + step * dj)
            .collect()
    };
    let slope = |step: f64| -> Result<f64> {
        let g = grad(&point(step))?;
        Ok(g.iter().zip(direction).map(|(&gj, &dj)| gj * dj).sum())
    };
    if slope(cap)? <= 0.0 {
        return Ok(cap);
    }
    let (mut lo, mut hi) = (0.0_f64, cap);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if slope(mid)? <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    // Guard against a kink landing exactly at the boundary of the
    // bracket: pick whichever of the candidates evaluates lowest.
    let mut best = (h(&point(mid))?, mid);
    for candidate in [lo, hi] {
        let v = h(&point(candidate))?;
        if v < best.0 {
            best = (v, candidate);
        }
    }
    Ok(best.1)
}

/// D(psi) = sum_i mu_i conjugate(x_i) - sum_j nu_j psi_j. The
/// potential must live on exactly the support of nu.
pub fn dual_value(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostFunction,
    psi: &DualPotential,
) -> Result<f64> {
    check_support(nu, psi)?;
    let mut total = 0.0;
    for i in 0..mu.len() {
        let w = mu.weight(i);
        if w > 0.0 {
            total += w * conjugate(cost, psi, mu.point(i))?.0;
        }
    }
    for (w, v) in nu.weights().iter().zip(psi.values()) {
        total -= w * v;
    }
    Ok(total)
}

fn check_support(nu: &DiscreteMeasure, psi: &DualPotential) -> Result<()> {
    if psi.support() != nu.points() {
        return Err(Error::SupportMismatch(String::from(
            "dual potential must be given on exactly the support of nu",
        )));
    }
    Ok(())
}

/// Projected supergradient ascent on D with Polyak steps
/// (primal - D(psi)) / |g|^2, which need the primal value and are why
/// the certificate target doubles as the step rule. A Lipschitz
/// constraint, when given, is restored after each step by pairwise
/// tightening; the first coordinate is anchored at zero (D is shift
/// invariant). The best iterate is kept and certified against
/// `primal`: when no primal value is supplied the instance is solved
/// first and the solution warm-starts the potential through its
/// first-order conditions.
pub fn maximize_dual(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostFunction,
    tol: f64,
    max_iter: usize,
    lipschitz: Option<f64>,
    primal: Option<f64>,
) -> Result<(DualPotential, f64)> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            what: "marginal dimensions",
            expected: mu.dim(),
            found: nu.dim(),
        });
    }
    let (primal_value, warm_plan) = match primal {
        Some(v) => (v, None),
        None => match weak_solver::solve(mu, nu, cost, solver_tol(cost, tol), weak_solver::DEFAULT_MAX_ITER) {
            Ok(sol) => {
                let v = sol.value();
                (v, Some(sol.into_coupling()))
            }
            Err(Error::ConvergenceFailure { solution, .. }) => {
                let v = solution.value();
                (v, Some(solution.into_coupling()))
            }
            Err(e) => return Err(e),
        },
    };
    ascend(mu, nu, cost, tol, max_iter, lipschitz, primal_value, warm_plan.as_ref())
}

/// The ascent loop behind [`maximize_dual`], taking the certificate
/// target and an optional coupling whose first-order conditions seed
/// the potential.
#[allow(clippy::too_many_arguments)]
fn ascend(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostFunction,
    tol: f64,
    max_iter: usize,
    lipschitz: Option<f64>,
    primal_value: f64,
    warm_plan: Option<&Coupling>,
) -> Result<(DualPotential, f64)> {
    let mut psi_values = warm_plan
        .and_then(|pi| warm_start(cost, pi))
        .unwrap_or_else(|| vec![0.0; nu.len()]);
    if let Some(l) = lipschitz {
        tighten_lipschitz(&mut psi_values, nu.points(), l);
    }
    rebase(&mut psi_values);

    let reach = nu
        .points()
        .iter()
        .map(|y| y.iter().map(|c| c * c).sum::<f64>())
        .fold(0.0, f64::max);
    let base_step = 1.0 / (1.0 + reach);

    let mut best_value = f64::NEG_INFINITY;
    let mut best_psi = psi_values.clone();
    for k in 0..max_iter.max(1) {
        let psi = DualPotential::new(nu.points().to_vec(), psi_values.clone(), lipschitz)?;
        let mut value = 0.0;
        let mut gradient = vec![0.0; nu.len()];
        for i in 0..mu.len() {
            let w = mu.weight(i);
            if w > 0.0 {
                let (v, p) = conjugate(cost, &psi, mu.point(i))?;
                value += w * v;
                for (gj, &pj) in gradient.iter_mut().zip(&p) {
                    *gj += w * pj;
                }
            }
        }
        for (gj, &w) in gradient.iter_mut().zip(nu.weights()) {
            *gj -= w;
        }
        for (&w, &v) in nu.weights().iter().zip(psi.values()) {
            value -= w * v;
        }
        if value > best_value {
            best_value = value;
            best_psi = psi_values.clone();
        }
        if primal_value - best_value <= tol {
            break;
        }
        // Polyak step toward the known target; the harmonic fallback
        // only fires when the supergradient vanishes, where any step
        // is as good as another.
        let grad_norm2: f64 = gradient.iter().map(|g| g * g).sum();
        let step = if grad_norm2 > 1e-18 {
            (primal_value - value) / grad_norm2
        } else {
            base_step / (k as f64 + 1.0)
        };
        for (pv, g) in psi_values.iter_mut().zip(&gradient) {
            *pv += step * g;
        }
        if let Some(l) = lipschitz {
            tighten_lipschitz(&mut psi_values, nu.points(), l);
        }
        rebase(&mut psi_values);
    }

    let potential = DualPotential::new(nu.points().to_vec(), best_psi, lipschitz)?;
    let gap = primal_value - best_value;
    if gap > tol {
        return Err(Error::DualConvergenceFailure {
            gap,
            tol,
            potential: Box::new(potential),
            dual_value: best_value,
        });
    }
    Ok((potential, best_value))
}

/// Solves the primal and maximizes the dual, reporting both values
/// and their gap. The primal is solved tighter than `tol` so the gap
/// reflects the dual side.
pub fn duality_gap(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostFunction,
    tol: f64,
) -> Result<DualityReport> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let solution = weak_solver::solve(mu, nu, cost, solver_tol(cost, tol), weak_solver::DEFAULT_MAX_ITER)?;
    let primal = solution.value();
    let (potential, dual) =
        ascend(mu, nu, cost, tol, 20_000, None, primal, Some(solution.coupling()))?;
    Ok(DualityReport {
        primal,
        dual,
        gap: primal - dual,
        potential,
        solution,
    })
}

/// Primal tolerance backing a dual certificate: tight for the
/// quadratic profile, a tenth of the requested gap otherwise.
fn solver_tol(cost: &CostFunction, tol: f64) -> f64 {
    if cost.is_quadratic() {
        (tol / 10.0).min(1e-10)
    } else {
        tol / 10.0
    }
}

/// First-order-condition warm start: at an optimum, the gradient of
/// the kernel objective satisfies g_ij + psi_j = lambda_i on the
/// support of row i, which pins psi across each connected component
/// of the support graph once one value is anchored at zero.
fn warm_start(cost: &CostFunction, pi: &Coupling) -> Option<Vec<f64>> {
    let kernel = pi.disintegrate();
    let m = pi.nu().len();
    let mut grads: Vec<(usize, Vec<f64>)> = Vec::new();
    for (&i, row) in kernel.support().iter().zip(kernel.rows()) {
        let g = cost.grad_weights(pi.mu().point(i), pi.nu().points(), row).ok()?;
        grads.push((i, g));
    }
    let mut psi = vec![0.0; m];
    let mut col_seen = vec![false; m];
    let mut row_seen = vec![false; grads.len()];
    let edge = |r: usize, j: usize| kernel.rows()[r][j] > 1e-9;
    loop {
        let Some(root) = (0..m).find(|&j| !col_seen[j] && (0..grads.len()).any(|r| edge(r, j)))
        else {
            break;
        };
        // Anchor each component at zero and propagate alternately
        // through rows and columns of the support graph.
        psi[root] = 0.0;
        col_seen[root] = true;
        let mut queue: Vec<usize> = vec![root];
        while let Some(j0) = queue.pop() {
            for r in 0..grads.len() {
                if row_seen[r] || !edge(r, j0) {
                    continue;
                }
                row_seen[r] = true;
                let lambda = psi[j0] + grads[r].1[j0];
                for j in 0..m {
                    if !col_seen[j] && edge(r, j) {
                        psi[j] = lambda - grads[r].1[j];
                        col_seen[j] = true;
                        queue.push(j);
                    }
                }
            }
        }
    }
    Some(psi)
}

/// Restores pairwise Lipschitz feasibility by repeatedly splitting
/// the excess of each violated pair. Every sweep is a contraction
/// toward the constraint polytope; iteration stops at slack 1e-12.
fn tighten_lipschitz(values: &mut [f64], support: &[Vec<f64>], l: f64) {
    for _ in 0..200 {
        let mut worst = 0.0_f64;
        for j in 0..values.len() {
            for k in j + 1..values.len() {
                let reach = l * dist(&support[j], &support[k]);
                let excess = (values[j] - values[k]).abs() - reach;
                if excess > 0.0 {
                    worst = worst.max(excess);
                    let (hi, lo) = if values[j] > values[k] { (j, k) } else { (k, j) };
                    values[hi] -= excess / 2.0;
                    values[lo] += excess / 2.0;
                }
            }
        }
        if worst <= 1e-12 {
            return;
        }
    }
}

/// Anchors the first coordinate at zero.
fn rebase(values: &mut [f64]) {
    let shift = values[0];
    for v in values.iter_mut() {
        *v -= shift;
    }
}
