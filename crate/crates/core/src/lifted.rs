//! Plans over (point, distribution) pairs: the lifted view of couplings.
//!
//! A coupling embeds as one atom (x_i, p_i, mu_i) per positive-mass
//! atom of its first marginal, where p_i is the conditional kernel at
//! x_i. The intensity of a lifted plan averages the distributions back
//! into a coupling and is a left inverse of that embedding. Costs
//! C(x, p) convex in p can only drop under averaging (Jensen), so
//! minimizing plan cost over admissible plans reproduces the weak
//! transport value, attained on embedded couplings.
//!
//! The embedding is deliberately not continuous in the coupling: two
//! nearby first-marginal atoms carry their own kernels however close
//! they sit, while merging them mixes the kernels. Keeping atoms
//! separate preserves plan costs; aggregation happens only inside
//! [`LiftedPlan::intensity`].

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::costs::CostFunction;
use crate::error::{Error, Result};
use crate::float;
use crate::measures::{Coupling, DiscreteMeasure};

/// Largest deviation of a plan's weight sum from 1 accepted on
/// construction (the input is renormalized, like measure weights).
pub const PLAN_MASS_TOL: f64 = 1e-9;

/// Per-atom weight tolerance in admissibility comparisons.
pub const ADMISSIBILITY_TOL: f64 = 1e-9;

/// One atom of a lifted plan: a location, a distribution attached to
/// it, and a weight.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedAtom {
    location: Vec<f64>,
    kernel: DiscreteMeasure,
    weight: f64,
}

impl LiftedAtom {
    /// Builds an atom; the location must be finite and nonempty, the
    /// weight finite and nonnegative.
    pub fn new(location: Vec<f64>, kernel: DiscreteMeasure, weight: f64) -> Result<Self> {
        if location.is_empty() {
            return Err(Error::InvalidInput(String::from(
                "lifted atom location must have dimension >= 1",
            )));
        }
        if location.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(String::from(
                "lifted atom location has a non-finite coordinate",
            )));
        }
        if !weight.is_finite() || weight < 0.0 {
            return Err(Error::InvalidInput(String::from(
                "lifted atom weight must be finite and nonnegative",
            )));
        }
        Ok(Self {
            location,
            kernel,
            weight,
        })
    }

    /// The location x.
    pub fn location(&self) -> &[f64] {
        &self.location
    }

    /// The distribution attached to the location.
    pub fn kernel(&self) -> &DiscreteMeasure {
        &self.kernel
    }

    /// The atom's weight.
    pub fn weight(&self) -> f64 {
        self.weight
    }
}

/// A finitely supported plan over (location, distribution) pairs.
///
/// Invariants after construction: at least one atom, all locations of
/// one dimension, all kernels of one dimension, weights nonnegative and
/// summing to 1 within [`PLAN_MASS_TOL`] (then renormalized). Atoms
/// with identical locations are never merged.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedPlan {
    atoms: Vec<LiftedAtom>,
}

impl LiftedPlan {
    /// Builds a plan from atoms.
    pub fn new(atoms: Vec<LiftedAtom>) -> Result<Self> {
        let Some(first) = atoms.first() else {
            return Err(Error::InvalidInput(String::from("plan needs at least one atom")));
        };
        let loc_dim = first.location.len();
        let ker_dim = first.kernel.dim();
        for a in &atoms {
            if a.location.len() != loc_dim {
                return Err(Error::DimensionMismatch {
                    what: "plan location dimension",
                    expected: loc_dim,
                    found: a.location.len(),
                });
            }
            if a.kernel.dim() != ker_dim {
                return Err(Error::DimensionMismatch {
                    what: "plan kernel dimension",
                    expected: ker_dim,
                    found: a.kernel.dim(),
                });
            }
        }
        let sum: f64 = atoms.iter().map(|a| a.weight).sum();
        if float::abs(sum - 1.0) > PLAN_MASS_TOL {
            return Err(Error::InvalidInput(alloc::format!(
                "plan weights sum to {sum}, farther than {PLAN_MASS_TOL} from 1"
            )));
        }
        let mut atoms = atoms;
        if sum != 1.0 {
            for a in &mut atoms {
                a.weight /= sum;
            }
        }
        Ok(Self { atoms })
    }

    /// Embeds a coupling: one atom (x_i, row_i / mu_i, mu_i) per
    /// positive-mass atom of the first marginal.
    pub fn from_coupling(pi: &Coupling) -> Self {
        let kernel = pi.disintegrate();
        let atoms = kernel
            .support()
            .iter()
            .zip(kernel.rows())
            .map(|(&i, row)| LiftedAtom {
                location: pi.mu().point(i).to_vec(),
                kernel: DiscreteMeasure::new(pi.nu().points().to_vec(), row.clone())
                    .expect("kernel rows of a valid coupling are valid measures"),
                weight: pi.mu().weight(i),
            })
            .collect();
        Self::new(atoms).expect("embedding a valid coupling yields a valid plan")
    }

    /// The atoms, in construction order.
    pub fn atoms(&self) -> &[LiftedAtom] {
        &self.atoms
    }

    /// Dimension of the locations.
    pub fn location_dim(&self) -> usize {
        self.atoms[0].location.len()
    }

    /// Dimension of the kernels.
    pub fn kernel_dim(&self) -> usize {
        self.atoms[0].kernel.dim()
    }

    /// Averages the plan back into a coupling: atoms sharing a location
    /// (exact coordinate equality) pool their weighted kernels into one
    /// row. This is a left inverse of [`LiftedPlan::from_coupling`]
    /// whenever the coupling's marginals have pairwise distinct points.
    pub fn intensity(&self) -> Coupling {
        let mut xs: Vec<Vec<f64>> = Vec::new();
        let mut x_weights: Vec<f64> = Vec::new();
        let mut ys: Vec<Vec<f64>> = Vec::new();
        let mut matrix: Vec<Vec<f64>> = Vec::new();
        for a in &self.atoms {
            let xi = match xs.iter().position(|x| x == &a.location) {
                Some(i) => i,
                None => {
                    xs.push(a.location.clone());
                    x_weights.push(0.0);
                    matrix.push(vec![0.0; ys.len()]);
                    xs.len() - 1
                }
            };
            x_weights[xi] += a.weight;
            for (y, &p) in a.kernel.points().iter().zip(a.kernel.weights()) {
                let yj = match ys.iter().position(|known| known == y) {
                    Some(j) => j,
                    None => {
                        ys.push(y.clone());
                        for row in &mut matrix {
                            row.push(0.0);
                        }
                        ys.len() - 1
                    }
                };
                matrix[xi][yj] += a.weight * p;
            }
        }
        let col_sums: Vec<f64> = (0..ys.len())
            .map(|j| matrix.iter().map(|row| row[j]).sum())
            .collect();
        let mu = DiscreteMeasure::new(xs, x_weights)
            .expect("location marginal of a valid plan is a valid measure");
        let nu = DiscreteMeasure::new(ys, col_sums)
            .expect("averaged kernel marginal of a valid plan is a valid measure");
        Coupling::new(mu, nu, matrix).expect("a valid plan averages to a valid coupling")
    }

    /// True when the plan's location marginal equals `mu` and its
    /// averaged kernel marginal equals `nu`.
    ///
    /// Measures are compared after lexicographic sorting and merging of
    /// exactly equal points; locations must match exactly, masses
    /// within [`ADMISSIBILITY_TOL`] per point.
    pub fn is_admissible(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> bool {
        if self.location_dim() != mu.dim() || self.kernel_dim() != nu.dim() {
            return false;
        }
        let firsts: Vec<(&[f64], f64)> = self
            .atoms
            .iter()
            .map(|a| (a.location.as_slice(), a.weight))
            .collect();
        let mu_atoms: Vec<(&[f64], f64)> = mu
            .points()
            .iter()
            .map(Vec::as_slice)
            .zip(mu.weights().iter().copied())
            .collect();
        if !measures_agree(firsts, mu_atoms) {
            return false;
        }
        let mut mixture: Vec<(&[f64], f64)> = Vec::new();
        for a in &self.atoms {
            for (y, &p) in a.kernel.points().iter().zip(a.kernel.weights()) {
                mixture.push((y.as_slice(), a.weight * p));
            }
        }
        let nu_atoms: Vec<(&[f64], f64)> = nu
            .points()
            .iter()
            .map(Vec::as_slice)
            .zip(nu.weights().iter().copied())
            .collect();
        measures_agree(mixture, nu_atoms)
    }

    /// Total plan cost sum_k w_k C(x_k, p_k); zero-weight atoms are
    /// skipped.
    pub fn cost(&self, cost: &CostFunction) -> Result<f64> {
        let mut total = 0.0;
        for a in &self.atoms {
            if a.weight > 0.0 {
                total += a.weight * cost.eval(&a.location, a.kernel.points(), a.kernel.weights())?;
            }
        }
        Ok(total)
    }
}

/// Equality of two atom lists as measures: sort lexicographically,
/// merge exactly equal points, then walk both lists requiring matched
/// points to agree in mass within [`ADMISSIBILITY_TOL`] and unmatched
/// points to carry at most that much mass.
fn measures_agree(a: Vec<(&[f64], f64)>, b: Vec<(&[f64], f64)>) -> bool {
    let a = canonical(a);
    let b = canonical(b);
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let order = if i == a.len() {
            core::cmp::Ordering::Greater
        } else if j == b.len() {
            core::cmp::Ordering::Less
        } else {
            lex(a[i].0, b[j].0)
        };
        match order {
            core::cmp::Ordering::Equal => {
                if float::abs(a[i].1 - b[j].1) > ADMISSIBILITY_TOL {
                    return false;
                }
                i += 1;
                j += 1;
            }
            core::cmp::Ordering::Less => {
                if a[i].1 > ADMISSIBILITY_TOL {
                    return false;
                }
                i += 1;
            }
            core::cmp::Ordering::Greater => {
                if b[j].1 > ADMISSIBILITY_TOL {
                    return false;
                }
                j += 1;
            }
        }
    }
    true
}

fn lex(a: &[f64], b: &[f64]) -> core::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        // Coordinates are finite by construction.
        match x.partial_cmp(y).expect("finite coordinates are ordered") {
            core::cmp::Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

/// Lex-sorts atoms and merges exactly equal points, summing masses.
fn canonical(mut atoms: Vec<(&[f64], f64)>) -> Vec<(&[f64], f64)> {
    atoms.sort_by(|x, y| lex(x.0, y.0));
    let mut merged: Vec<(&[f64], f64)> = Vec::with_capacity(atoms.len());
    for (p, w) in atoms {
        match merged.last_mut() {
            Some(last) if last.0 == p => last.1 += w,
            _ => merged.push((p, w)),
        }
    }
    merged
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter().map(|&x| vec![x]).collect()
    }

    fn two_branch_coupling() -> Coupling {
        // mu = (1/2, 1/2) on -1, 1; nu = (1/4, 1/2, 1/4) on -2, 0, 2;
        // kernels: -1 -> (1/2, 1/2, 0), 1 -> (0, 1/2, 1/2).
        let mu = DiscreteMeasure::new(pts(&[-1.0, 1.0]), vec![0.5, 0.5]).unwrap();
        let nu = DiscreteMeasure::new(pts(&[-2.0, 0.0, 2.0]), vec![0.25, 0.5, 0.25]).unwrap();
        let matrix = vec![vec![0.25, 0.25, 0.0], vec![0.0, 0.25, 0.25]];
        Coupling::new(mu, nu, matrix).unwrap()
    }

    #[test]
    fn product_with_dirac_first_marginal_embeds_to_one_atom() {
        let mu = DiscreteMeasure::dirac(vec![0.0]).unwrap();
        let nu = DiscreteMeasure::new(pts(&[-1.0, 1.0]), vec![0.25, 0.75]).unwrap();
        let plan = LiftedPlan::from_coupling(&Coupling::product(mu, nu.clone()));
        assert_eq!(plan.atoms().len(), 1);
        assert_eq!(plan.atoms()[0].weight(), 1.0);
        assert_eq!(plan.atoms()[0].kernel().weights(), nu.weights());
    }

    #[test]
    fn embedding_reads_off_kernels() {
        let plan = LiftedPlan::from_coupling(&two_branch_coupling());
        assert_eq!(plan.atoms().len(), 2);
        assert_eq!(plan.atoms()[0].kernel().weights(), &[0.5, 0.5, 0.0]);
        assert_eq!(plan.atoms()[1].kernel().weights(), &[0.0, 0.5, 0.5]);
    }

    #[test]
    fn intensity_inverts_embedding() {
        let pi = two_branch_coupling();
        let back = LiftedPlan::from_coupling(&pi).intensity();
        // Dyadic weights survive the round trip bit for bit.
        assert_eq!(back.matrix(), pi.matrix());

        let mu = DiscreteMeasure::new(pts(&[0.0, 3.0]), vec![0.3, 0.7]).unwrap();
        let nu = DiscreteMeasure::new(pts(&[-1.0, 5.0]), vec![0.6, 0.4]).unwrap();
        let pi = Coupling::new(mu, nu, vec![vec![0.2, 0.1], vec![0.4, 0.3]]).unwrap();
        let back = LiftedPlan::from_coupling(&pi).intensity();
        for i in 0..2 {
            for j in 0..2 {
                assert!((back.entry(i, j) - pi.entry(i, j)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn intensity_pools_atoms_at_one_location() {
        let left = LiftedAtom::new(
            vec![0.0],
            DiscreteMeasure::dirac(vec![-1.0]).unwrap(),
            0.5,
        )
        .unwrap();
        let right =
            LiftedAtom::new(vec![0.0], DiscreteMeasure::dirac(vec![1.0]).unwrap(), 0.5).unwrap();
        let pooled = LiftedPlan::new(vec![left, right]).unwrap().intensity();
        assert_eq!(pooled.mu().len(), 1);
        assert_eq!(pooled.mu().weights(), &[1.0]);
        assert_eq!(pooled.matrix(), &[vec![0.5, 0.5]]);
    }

    #[test]
    fn embedded_couplings_are_admissible() {
        let pi = two_branch_coupling();
        let plan = LiftedPlan::from_coupling(&pi);
        assert!(plan.is_admissible(pi.mu(), pi.nu()));

        // Wrong second marginal: the plan sends mass to 1, not 2.
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

    #[test]
    fn admissibility_pools_kernels_before_comparing() {
        // Two atoms at 0 whose mixture is 1/4, 1/2, 1/4 on -1, 0, 1.
        let spread = DiscreteMeasure::new(pts(&[-1.0, 1.0]), vec![0.5, 0.5]).unwrap();
        let center = DiscreteMeasure::dirac(vec![0.0]).unwrap();
        let plan = LiftedPlan::new(vec![
            LiftedAtom::new(vec![0.0], spread, 0.5).unwrap(),
            LiftedAtom::new(vec![0.0], center, 0.5).unwrap(),
        ])
        .unwrap();
        let mu = DiscreteMeasure::dirac(vec![0.0]).unwrap();
        let nu =
            DiscreteMeasure::new(pts(&[-1.0, 0.0, 1.0]), vec![0.25, 0.5, 0.25]).unwrap();
        assert!(plan.is_admissible(&mu, &nu));
        // Sanity: the unpooled first marginal still matches mu = delta_0.
        let wrong_nu =
            DiscreteMeasure::new(pts(&[-1.0, 0.0, 1.0]), vec![0.5, 0.25, 0.25]).unwrap();
        assert!(!plan.is_admissible(&mu, &wrong_nu));
    }

    #[test]
    fn plan_cost_of_a_far_dirac() {
        let plan = LiftedPlan::new(vec![LiftedAtom::new(
            vec![0.0],
            DiscreteMeasure::dirac(vec![5.0]).unwrap(),
            1.0,
        )
        .unwrap()])
        .unwrap();
        let c = CostFunction::barycentric_quadratic();
        assert_eq!(plan.cost(&c).unwrap(), 25.0);
    }

    #[test]
    fn averaging_strictly_lowers_convex_cost() {
        // Two Dirac kernels at -1 and 1 under one location: plan cost 1,
        // but their average has mean 0, so the intensity costs 0.
        let plan = LiftedPlan::new(vec![
            LiftedAtom::new(vec![0.0], DiscreteMeasure::dirac(vec![-1.0]).unwrap(), 0.5).unwrap(),
            LiftedAtom::new(vec![0.0], DiscreteMeasure::dirac(vec![1.0]).unwrap(), 0.5).unwrap(),
        ])
        .unwrap();
        let c = CostFunction::barycentric_quadratic();
        assert_eq!(plan.cost(&c).unwrap(), 1.0);
        let avg = LiftedPlan::from_coupling(&plan.intensity());
        assert_eq!(avg.cost(&c).unwrap(), 0.0);
    }

    #[test]
    fn embedding_keeps_kernels_apart_at_any_separation() {
        // Shrinking the gap between the two locations leaves the
        // embedded kernels untouched, while the pooled limit mixes
        // them: the embedding does not commute with taking limits.
        for gap in [1.0, 1e-3, 1e-9] {
            let mu = DiscreteMeasure::new(pts(&[0.0, gap]), vec![0.5, 0.5]).unwrap();
            let nu = DiscreteMeasure::new(pts(&[-1.0, 1.0]), vec![0.5, 0.5]).unwrap();
            let pi = Coupling::new(mu, nu, vec![vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
            let plan = LiftedPlan::from_coupling(&pi);
            assert_eq!(plan.atoms()[0].kernel().weights(), &[1.0, 0.0]);
            assert_eq!(plan.atoms()[1].kernel().weights(), &[0.0, 1.0]);
        }
        let mu = DiscreteMeasure::dirac(vec![0.0]).unwrap();
        let nu = DiscreteMeasure::new(pts(&[-1.0, 1.0]), vec![0.5, 0.5]).unwrap();
        let limit = LiftedPlan::from_coupling(&Coupling::product(mu, nu));
        assert_eq!(limit.atoms()[0].kernel().weights(), &[0.5, 0.5]);
    }

    #[test]
    fn rejects_inconsistent_atoms() {
        let a = LiftedAtom::new(vec![0.0], DiscreteMeasure::dirac(vec![1.0]).unwrap(), 0.5).unwrap();
        let b = LiftedAtom::new(
            vec![0.0, 0.0],
            DiscreteMeasure::dirac(vec![1.0]).unwrap(),
            0.5,
        )
        .unwrap();
        assert!(LiftedPlan::new(vec![a.clone(), b]).is_err());
        assert!(LiftedPlan::new(vec![a]).is_err());
        assert!(LiftedAtom::new(vec![0.0], DiscreteMeasure::dirac(vec![1.0]).unwrap(), -0.1)
            .is_err());
    }
}
