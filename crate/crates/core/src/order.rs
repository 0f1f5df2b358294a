//! Convex order and the quadratic projection onto its cone.
//!
//! eta is dominated by nu in convex order when every convex function
//! integrates at least as much against nu as against eta. On finite
//! supports that is equivalent, by Strassen's theorem, to a coupling
//! with first marginal eta, second marginal nu, and every kernel
//! barycenter sitting at its source point: a martingale coupling.
//! Feasibility is one linear program; when it is infeasible the LP's
//! Farkas certificate folds into a max-affine function that a convex
//! witness can be read off from, so both answers come with proof.
//!
//! [`project_to_convex_order`] computes the closest measure below nu
//! in convex order, in the quadratic Wasserstein metric: exactly the
//! weak transport optimum for the quadratic barycentric cost, whose
//! optimal kernels' barycenters T(x_i) push mu forward onto the
//! projection. Three facts are checked on the way out: the
//! pushforward is dominated by nu, its squared distance to mu equals
//! the transport value, and T contracts pairwise distances. The
//! returned map is the restriction of a gradient of a convex
//! function; the crate certifies those support-level consequences
//! rather than constructing a global extension.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::classical_ot;
use crate::costs::CostFunction;
use crate::error::{Error, Result};
use crate::measures::{dist, norm, Coupling, DiscreteMeasure};
use crate::simplex::{solve_standard_lp, LpOutcome};
use crate::weak_solver::{self, WeakSolution};

/// Barycenter slack accepted on each row of a martingale coupling.
pub const BARYCENTER_TOL: f64 = 1e-7;

/// Mean gap beyond which domination is refuted by a linear witness
/// without running the feasibility LP.
const MEAN_TOL: f64 = 1e-7;

/// Answer to a convex-order query, with evidence for both outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexOrderCertificate {
    dominated: bool,
    martingale_coupling: Option<Coupling>,
    separating_function: Option<Vec<f64>>,
}

impl ConvexOrderCertificate {
    /// Whether eta is dominated by nu in convex order.
    pub fn dominated(&self) -> bool {
        self.dominated
    }

    /// A coupling of (eta, nu) whose kernels have barycenter at their
    /// source atoms; present exactly when dominated.
    pub fn martingale_coupling(&self) -> Option<&Coupling> {
        self.martingale_coupling.as_ref()
    }

    /// Values on the support of nu of a convex function integrating
    /// strictly larger against eta than against nu (through its
    /// convex envelope); present exactly when not dominated.
    pub fn separating_function(&self) -> Option<&[f64]> {
        self.separating_function.as_deref()
    }
}

/// Decides eta <=_c nu by martingale-coupling feasibility.
pub fn check_convex_order(
    eta: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<ConvexOrderCertificate> {
    if eta.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            what: "measure dimensions",
            expected: eta.dim(),
            found: nu.dim(),
        });
    }
    let d = eta.dim();
    let mean_eta = eta.mean();
    let mean_nu = nu.mean();
    let gap: Vec<f64> = mean_eta
        .iter()
        .zip(&mean_nu)
        .map(|(a, b)| a - b)
        .collect();
    let gap_norm = norm(&gap);
    if gap_norm > MEAN_TOL {
        // Domination forces equal means; the normalized mean gap as a
        // linear functional already separates the measures.
        let witness: Vec<f64> = nu
            .points()
            .iter()
            .map(|y| y.iter().zip(&gap).map(|(c, g)| c * g / gap_norm).sum())
            .collect();
        return Ok(ConvexOrderCertificate {
            dominated: false,
            martingale_coupling: None,
            separating_function: Some(witness),
        });
    }

    let (n, m) = (eta.len(), nu.len());
    let mut a = vec![vec![0.0; n * m]; n + m + n * d];
    let mut b = vec![0.0; n + m + n * d];
    for i in 0..n {
        for j in 0..m {
            a[i][i * m + j] = 1.0;
        }
        b[i] = eta.weight(i);
    }
    for j in 0..m {
        for i in 0..n {
            a[n + j][i * m + j] = 1.0;
        }
        b[n + j] = nu.weight(j);
    }
    for i in 0..n {
        for k in 0..d {
            for j in 0..m {
                a[n + m + i * d + k][i * m + j] = nu.point(j)[k];
            }
            b[n + m + i * d + k] = eta.weight(i) * eta.point(i)[k];
        }
    }
    match solve_standard_lp(&a, &b, &vec![0.0; n * m])? {
        LpOutcome::Optimal { x, .. } => {
            let matrix: Vec<Vec<f64>> = (0..n)
                .map(|i| (0..m).map(|j| x[i * m + j].max(0.0)).collect())
                .collect();
            for (i, row) in matrix.iter().enumerate() {
                let w = eta.weight(i);
                if w > 0.0 {
                    let mut bary = vec![0.0; d];
                    for (j, &q) in row.iter().enumerate() {
                        for k in 0..d {
                            bary[k] += q * nu.point(j)[k] / w;
                        }
                    }
                    if dist(&bary, eta.point(i)) > BARYCENTER_TOL {
                        return Err(Error::NumericalFailure(format!(
                            "martingale row {i} misses its barycenter by more than {BARYCENTER_TOL}"
                        )));
                    }
                }
            }
            let coupling = Coupling::new(eta.clone(), nu.clone(), matrix)?;
            Ok(ConvexOrderCertificate {
                dominated: true,
                martingale_coupling: Some(coupling),
                separating_function: None,
            })
        }
        LpOutcome::Infeasible { farkas } => {
            // Farkas prices (alpha_i, beta_j, gamma_i) satisfy
            // alpha_i + beta_j + <gamma_i, y_j> <= 0 and price the
            // right-hand side positively; f(y) = max_i alpha_i +
            // <gamma_i, y> is then a convex separator.
            let witness: Vec<f64> = nu
                .points()
                .iter()
                .map(|y| {
                    (0..n)
                        .map(|i| {
                            farkas[i]
                                + (0..d)
                                    .map(|k| farkas[n + m + i * d + k] * y[k])
                                    .sum::<f64>()
                        })
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect();
            let margin = witness_margin(eta, nu, &witness)?;
            if margin <= 1e-9 {
                return Err(Error::NumericalFailure(String::from(
                    "infeasibility certificate failed to separate the measures",
                )));
            }
            Ok(ConvexOrderCertificate {
                dominated: false,
                martingale_coupling: None,
                separating_function: Some(witness),
            })
        }
        LpOutcome::Unbounded => Err(Error::NumericalFailure(String::from(
            "feasibility phase cannot be unbounded",
        ))),
    }
}

/// Value at z of the convex envelope of the data (y_j, values_j): the
/// largest convex function lying under every data point. Finite on
/// the convex hull of the support, positive infinity outside it.
pub fn convex_envelope_value(support: &[Vec<f64>], values: &[f64], z: &[f64]) -> Result<f64> {
    if support.is_empty() {
        return Err(Error::InvalidInput(String::from("envelope needs support points")));
    }
    if support.len() != values.len() {
        return Err(Error::DimensionMismatch {
            what: "envelope values",
            expected: support.len(),
            found: values.len(),
        });
    }
    let d = support[0].len();
    if z.len() != d {
        return Err(Error::DimensionMismatch {
            what: "envelope query point",
            expected: d,
            found: z.len(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) || z.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidInput(String::from("envelope data must be finite")));
    }
    // sup { c + <s, z> : c + <s, y_j> <= values_j } as a standard-form
    // LP over split signs plus slacks.
    let m = support.len();
    let nv = 2 * (1 + d) + m;
    let mut a = vec![vec![0.0; nv]; m];
    let mut b = vec![0.0; m];
    for (j, y) in support.iter().enumerate() {
        a[j][0] = 1.0;
        a[j][1] = -1.0;
        for k in 0..d {
            a[j][2 + 2 * k] = y[k];
            a[j][2 + 2 * k + 1] = -y[k];
        }
        a[j][2 * (1 + d) + j] = 1.0;
        b[j] = values[j];
    }
    let mut c = vec![0.0; nv];
    c[0] = -1.0;
    c[1] = 1.0;
    for k in 0..d {
        c[2 + 2 * k] = -z[k];
        c[2 + 2 * k + 1] = z[k];
    }
    match solve_standard_lp(&a, &b, &c)? {
        LpOutcome::Optimal { value, .. } => Ok(-value),
        LpOutcome::Unbounded => Ok(f64::INFINITY),
        LpOutcome::Infeasible { .. } => Err(Error::NumericalFailure(String::from(
            "affine minorant program cannot be infeasible",
        ))),
    }
}

/// Separation margin of witness values given on the support of nu:
/// the eta-integral minus the nu-integral of their convex envelope.
/// Positive infinity when an eta atom falls outside the hull of the
/// support of nu.
pub fn witness_margin(
    eta: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    values: &[f64],
) -> Result<f64> {
    if values.len() != nu.len() {
        return Err(Error::DimensionMismatch {
            what: "witness values",
            expected: nu.len(),
            found: values.len(),
        });
    }
    if eta.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            what: "measure dimensions",
            expected: eta.dim(),
            found: nu.dim(),
        });
    }
    let mut margin = 0.0;
    for i in 0..eta.len() {
        let w = eta.weight(i);
        if w > 0.0 {
            let f = convex_envelope_value(nu.points(), values, eta.point(i))?;
            if f == f64::INFINITY {
                return Ok(f64::INFINITY);
            }
            margin += w * f;
        }
    }
    for j in 0..nu.len() {
        let w = nu.weight(j);
        if w > 0.0 {
            margin -= w * convex_envelope_value(nu.points(), values, nu.point(j))?;
        }
    }
    Ok(margin)
}

/// Measured slacks of the three projection postconditions.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionChecks {
    convex_order: bool,
    value_mismatch: f64,
    value_tol: f64,
    lipschitz_slack: f64,
    lipschitz_tol: f64,
}

impl ProjectionChecks {
    /// Whether the pushforward is dominated by nu in convex order.
    pub fn convex_order(&self) -> bool {
        self.convex_order
    }

    /// Transport value minus the squared quadratic Wasserstein
    /// distance between mu and the pushforward.
    pub fn value_mismatch(&self) -> f64 {
        self.value_mismatch
    }

    /// Slack allowed on the value identity.
    pub fn value_tol(&self) -> f64 {
        self.value_tol
    }

    /// Largest pairwise |T(x_i) - T(x_k)| - |x_i - x_k|; at most zero
    /// for an exactly 1-Lipschitz map.
    pub fn lipschitz_slack(&self) -> f64 {
        self.lipschitz_slack
    }

    /// Slack allowed on the Lipschitz inequality.
    pub fn lipschitz_tol(&self) -> f64 {
        self.lipschitz_tol
    }

    /// All three checks within tolerance.
    pub fn passed(&self) -> bool {
        self.convex_order
            && self.value_mismatch.abs() <= self.value_tol
            && self.lipschitz_slack <= self.lipschitz_tol
    }
}

impl core::fmt::Display for ProjectionChecks {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(
            f,
            "convex order {}; value mismatch {:.3e} (tol {:.3e}); Lipschitz slack {:.3e} (tol {:.3e})",
            if self.convex_order { "holds" } else { "VIOLATED" },
            self.value_mismatch,
            self.value_tol,
            self.lipschitz_slack,
            self.lipschitz_tol,
        )
    }
}

/// The quadratic projection of mu onto the cone of measures
/// dominated by nu, with its optimal map and verified checks.
#[derive(Debug, Clone)]
pub struct Projection {
    mu_star: DiscreteMeasure,
    map: Vec<(usize, Vec<f64>)>,
    value: f64,
    checks: ProjectionChecks,
    solution: WeakSolution,
}

impl Projection {
    /// The projected measure: the pushforward of mu under the map.
    pub fn mu_star(&self) -> &DiscreteMeasure {
        &self.mu_star
    }

    /// Atom index of mu paired with its image T(x_i), over the
    /// support of mu.
    pub fn map(&self) -> &[(usize, Vec<f64>)] {
        &self.map
    }

    /// Squared quadratic Wasserstein distance from mu to the cone.
    pub fn value(&self) -> f64 {
        self.value
    }

    /// The measured postcondition slacks.
    pub fn checks(&self) -> &ProjectionChecks {
        &self.checks
    }

    /// The underlying weak transport solution.
    pub fn solution(&self) -> &WeakSolution {
        &self.solution
    }
}

/// Projects mu onto { eta : eta <=_c nu } in squared quadratic
/// Wasserstein distance by solving the weak transport problem with
/// the quadratic barycentric cost. Verifies domination, the value
/// identity (slack `tol` scaled by 1 + value), and pairwise
/// 1-Lipschitzness of the map (slack `tol`); failing any check is an
/// error carrying the measured slacks.
pub fn project_to_convex_order(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    tol: f64,
) -> Result<Projection> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let cost = CostFunction::barycentric_quadratic();
    // The Lipschitz check magnifies solver error by 1/sqrt(atom
    // mass), so the inner solve runs far below the check tolerance;
    // an unconverged-but-polished iterate is still worth checking.
    let inner_tol = (tol * 1e-6).clamp(1e-14, 1e-10);
    let solution = match weak_solver::solve(mu, nu, &cost, inner_tol, weak_solver::DEFAULT_MAX_ITER)
    {
        Ok(sol) => sol,
        Err(Error::ConvergenceFailure { solution, .. }) => *solution,
        Err(e) => return Err(e),
    };
    let value = solution.value();
    let map = solution.coupling().barycentric_map();

    let points: Vec<Vec<f64>> = map.iter().map(|(_, t)| t.clone()).collect();
    let weights: Vec<f64> = map.iter().map(|&(i, _)| mu.weight(i)).collect();
    let mu_star = DiscreteMeasure::new(points, weights)?;

    let order = check_convex_order(&mu_star, nu)?;
    let w2 = classical_ot::wasserstein(mu, &mu_star, 2.0)?;
    let value_mismatch = value - w2 * w2;
    let mut lipschitz_slack = f64::NEG_INFINITY;
    for a in 0..map.len() {
        for b in a + 1..map.len() {
            let (ia, ta) = (&map[a].0, &map[a].1);
            let (ib, tb) = (&map[b].0, &map[b].1);
            lipschitz_slack =
                lipschitz_slack.max(dist(ta, tb) - dist(mu.point(*ia), mu.point(*ib)));
        }
    }
    if map.len() < 2 {
        lipschitz_slack = 0.0;
    }
    let checks = ProjectionChecks {
        convex_order: order.dominated(),
        value_mismatch,
        value_tol: tol * (1.0 + value.abs()),
        lipschitz_slack,
        lipschitz_tol: tol,
    };
    if !checks.passed() {
        return Err(Error::PostconditionFailure(Box::new(checks)));
    }
    Ok(Projection {
        mu_star,
        map,
        value,
        checks,
        solution,
    })
}

/// Whether a coupling's barycentric map coincides with a reference
/// map atom by atom within `tol`. The supports must match exactly:
/// couplings of different instances never compare equal.
pub fn matches_optimal_map(pi: &Coupling, reference: &[(usize, Vec<f64>)], tol: f64) -> bool {
    let map = pi.barycentric_map();
    if map.len() != reference.len() {
        return false;
    }
    map.iter().zip(reference).all(|((i, t), (ri, rt))| {
        i == ri && t.len() == rt.len() && dist(t, rt) <= tol
    })
}

/// Re-solves the projection instance from five seeded starts and
/// returns the largest atomwise disagreement of the optimal maps: a
/// probe of the projection's uniqueness.
pub fn probe_uniqueness(mu: &DiscreteMeasure, nu: &DiscreteMeasure, seed: u64) -> Result<f64> {
    let cost = CostFunction::barycentric_quadratic();
    let solution = weak_solver::solve_with_restarts(
        mu,
        nu,
        &cost,
        1e-10,
        weak_solver::DEFAULT_MAX_ITER,
        5,
        seed,
    )?;
    Ok(solution.map_deviation().unwrap_or(0.0))
}
