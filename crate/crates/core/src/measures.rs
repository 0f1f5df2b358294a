//! Finitely supported measures, couplings, and disintegration.
//!
//! Measures are labeled atom lists: duplicate points are allowed and
//! never merged, and zero weights are kept. A coupling stores both
//! marginals next to its matrix so every downstream routine can trust
//! the pair without re-deriving it.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::float;

/// Largest deviation of an input weight sum from 1 that is silently
/// renormalized away on construction; anything larger is rejected.
pub const WEIGHT_SUM_TOL: f64 = 1e-6;

/// Tolerance on marginal sums, kernel row sums, and total mass after
/// construction.
pub const MASS_TOL: f64 = 1e-9;

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("{what} contains a non-finite value")));
    }
    Ok(())
}

/// Euclidean norm of a vector.
pub(crate) fn norm(v: &[f64]) -> f64 {
    float::sqrt(v.iter().map(|a| a * a).sum())
}

/// Euclidean distance between two points of equal dimension.
pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    float::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// A finitely supported probability measure on R^d.
///
/// Invariants after construction: all points share one dimension
/// d >= 1, all coordinates are finite, weights are nonnegative, and
/// the weights sum to 1 within [`MASS_TOL`]. Inputs whose weight sum
/// deviates from 1 by at most [`WEIGHT_SUM_TOL`] are renormalized;
/// larger deviations are input errors.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Builds a measure from atom locations and weights.
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput(String::from("measure needs at least one atom")));
        }
        if points.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                what: "atom count vs weight count",
                expected: points.len(),
                found: weights.len(),
            });
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::InvalidInput(String::from("points must have dimension >= 1")));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    what: "point dimension",
                    expected: dim,
                    found: p.len(),
                });
            }
            check_finite(p, "point")?;
            let _ = i;
        }
        check_finite(&weights, "weights")?;
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidInput(String::from("weights must be nonnegative")));
        }
        let sum: f64 = weights.iter().sum();
        if float::abs(sum - 1.0) > WEIGHT_SUM_TOL {
            return Err(Error::InvalidInput(format!(
                "weights sum to {sum}, farther than {WEIGHT_SUM_TOL} from 1"
            )));
        }
        let mut weights = weights;
        if sum != 1.0 {
            for w in &mut weights {
                *w /= sum;
            }
        }
        Ok(Self { points, weights })
    }

    /// The unit mass at a single point.
    pub fn dirac(point: Vec<f64>) -> Result<Self> {
        Self::new(vec![point], vec![1.0])
    }

    /// Equal weights on the given points.
    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::InvalidInput(String::from("measure needs at least one atom")));
        }
        Self::new(points, vec![1.0 / n as f64; n])
    }

    /// Number of atoms, counting zero-weight ones.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// True when the atom list is empty; never holds after construction.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Ambient dimension d.
    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    /// Atom locations.
    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Atom weights; nonnegative, summing to 1 within [`MASS_TOL`].
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Location of atom `i`.
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    /// Weight of atom `i`.
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// Indices of atoms with strictly positive weight.
    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.weights[i] > 0.0).collect()
    }

    /// Barycenter sum_i w_i x_i.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        for (p, &w) in self.points.iter().zip(&self.weights) {
            for (mk, &pk) in m.iter_mut().zip(p) {
                *mk += w * pk;
            }
        }
        m
    }
}

/// A coupling of two finitely supported measures: a nonnegative matrix
/// with prescribed row and column sums.
///
/// Invariants after construction: `matrix` is n x m with finite
/// nonnegative entries, row sums match the first marginal's weights
/// and column sums the second's within [`MASS_TOL`] per entry, and the
/// total mass is 1 within [`MASS_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    matrix: Vec<Vec<f64>>,
}

impl Coupling {
    /// Builds a coupling, validating marginal consistency.
    pub fn new(mu: DiscreteMeasure, nu: DiscreteMeasure, matrix: Vec<Vec<f64>>) -> Result<Self> {
        let (n, m) = (mu.len(), nu.len());
        if matrix.len() != n {
            return Err(Error::DimensionMismatch {
                what: "coupling rows",
                expected: n,
                found: matrix.len(),
            });
        }
        let mut col_sums = vec![0.0; m];
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != m {
                return Err(Error::DimensionMismatch {
                    what: "coupling columns",
                    expected: m,
                    found: row.len(),
                });
            }
            check_finite(row, "coupling matrix")?;
            let mut row_sum = 0.0;
            for (j, &q) in row.iter().enumerate() {
                if q < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "coupling entry ({i}, {j}) is negative: {q}"
                    )));
                }
                row_sum += q;
                col_sums[j] += q;
            }
            if float::abs(row_sum - mu.weight(i)) > MASS_TOL {
                return Err(Error::InvalidInput(format!(
                    "row {i} sums to {row_sum}, first marginal expects {}",
                    mu.weight(i)
                )));
            }
        }
        for (j, &s) in col_sums.iter().enumerate() {
            if float::abs(s - nu.weight(j)) > MASS_TOL {
                return Err(Error::InvalidInput(format!(
                    "column {j} sums to {s}, second marginal expects {}",
                    nu.weight(j)
                )));
            }
        }
        let total: f64 = col_sums.iter().sum();
        if float::abs(total - 1.0) > MASS_TOL {
            return Err(Error::InvalidInput(format!("total mass is {total}, expected 1")));
        }
        Ok(Self { mu, nu, matrix })
    }

    /// The independent coupling mu (x) nu.
    pub fn product(mu: DiscreteMeasure, nu: DiscreteMeasure) -> Self {
        let matrix = mu
            .weights()
            .iter()
            .map(|&wi| nu.weights().iter().map(|&wj| wi * wj).collect())
            .collect();
        // Products of valid marginals cannot fail validation.
        Self::new(mu, nu, matrix).expect("product coupling is always valid")
    }

    /// First marginal.
    pub fn mu(&self) -> &DiscreteMeasure {
        &self.mu
    }

    /// Second marginal.
    pub fn nu(&self) -> &DiscreteMeasure {
        &self.nu
    }

    /// The transport matrix, rows indexed by first-marginal atoms.
    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.matrix
    }

    /// Mass sent from atom `i` of mu to atom `j` of nu.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[i][j]
    }

    /// Conditional kernel rows p_i = row_i / mu_i for every atom with
    /// positive weight. Zero-mass atoms carry no kernel row; every
    /// sum over the disintegration skips them.
    pub fn disintegrate(&self) -> Kernel {
        let mut support = Vec::new();
        let mut rows = Vec::new();
        for (i, row) in self.matrix.iter().enumerate() {
            let w = self.mu.weight(i);
            if w > 0.0 {
                support.push(i);
                rows.push(row.iter().map(|&q| q / w).collect());
            }
        }
        Kernel { support, rows }
    }

    /// Barycentric map of the plan: for every positive-mass atom x_i,
    /// the mean T(x_i) = sum_j p_ij y_j of its kernel row. Returned as
    /// (atom index, T(x_i)) pairs in index order.
    pub fn barycentric_map(&self) -> Vec<(usize, Vec<f64>)> {
        let d = self.nu.dim();
        let kernel = self.disintegrate();
        kernel
            .support()
            .iter()
            .zip(kernel.rows())
            .map(|(&i, row)| {
                let mut t = vec![0.0; d];
                for (j, &p) in row.iter().enumerate() {
                    for (tk, &yk) in t.iter_mut().zip(self.nu.point(j)) {
                        *tk += p * yk;
                    }
                }
                (i, t)
            })
            .collect()
    }

    /// Replaces the first marginal while keeping the conditional
    /// kernels: the result couples `mu_tilde` with the image measure
    /// sum_i mu_tilde_i p_i.
    ///
    /// Atoms of `mu_tilde` are matched to positive-mass atoms of the
    /// current first marginal by exact coordinate equality (first match
    /// in index order). A positive-weight atom of `mu_tilde` with no
    /// match is a support mismatch; zero-weight atoms need none and get
    /// an all-zero row.
    pub fn with_first_marginal(&self, mu_tilde: &DiscreteMeasure) -> Result<Coupling> {
        if mu_tilde.dim() != self.mu.dim() {
            return Err(Error::DimensionMismatch {
                what: "first marginal dimension",
                expected: self.mu.dim(),
                found: mu_tilde.dim(),
            });
        }
        let kernel = self.disintegrate();
        let m = self.nu.len();
        let mut matrix = Vec::with_capacity(mu_tilde.len());
        for (k, point) in mu_tilde.points().iter().enumerate() {
            let w = mu_tilde.weight(k);
            let matched = kernel
                .support()
                .iter()
                .position(|&i| self.mu.point(i) == point.as_slice());
            match matched {
                Some(r) => {
                    matrix.push(kernel.rows()[r].iter().map(|&p| w * p).collect());
                }
                None if w == 0.0 => matrix.push(vec![0.0; m]),
                None => {
                    return Err(Error::SupportMismatch(format!(
                        "atom {k} of the new first marginal carries mass {w} \
                         but lies outside the coupling's support"
                    )));
                }
            }
        }
        let mut col_sums = vec![0.0; m];
        for row in &matrix {
            for (s, &q) in col_sums.iter_mut().zip(row) {
                *s += q;
            }
        }
        let new_nu = DiscreteMeasure::new(self.nu.points().to_vec(), col_sums)?;
        Coupling::new(mu_tilde.clone(), new_nu, matrix)
    }
}

/// Conditional kernel of a coupling: one probability row over the
/// second marginal's atoms per positive-mass atom of the first.
///
/// Each row sums to 1 within [`MASS_TOL`] (relative to its atom's
/// mass); rows exist exactly for atoms with positive weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    support: Vec<usize>,
    rows: Vec<Vec<f64>>,
}

impl Kernel {
    /// Indices of the first-marginal atoms that carry a row.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Kernel rows, aligned with [`Kernel::support`].
    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// The row conditioned on atom `i`, if that atom has positive mass.
    pub fn row_for(&self, i: usize) -> Option<&[f64]> {
        self.support
            .iter()
            .position(|&k| k == i)
            .map(|r| self.rows[r].as_slice())
    }
}
