//! Minimal dense linear algebra for the small stationarity systems
//! the dual side solves. Not a general-purpose library: sizes here
//! are a few dozen unknowns at most.

use alloc::vec::Vec;

use crate::float;

/// Solves A x = b by Gaussian elimination with partial pivoting.
/// Returns `None` when a pivot falls below `tol` times the largest
/// initial entry, signalling a (numerically) singular system.
pub(crate) fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>, tol: f64) -> Option<Vec<f64>> {
    let n = a.len();
    if n == 0 || a.iter().any(|row| row.len() != n) || b.len() != n {
        return None;
    }
    let mut scale: f64 = 0.0;
    for row in &a {
        for &x in row {
            scale = scale.max(float::abs(x));
        }
    }
    let threshold = tol * scale.max(1.0);
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r, &s| {
                float::abs(a[r][col])
                    .partial_cmp(&float::abs(a[s][col]))
                    .expect("pivot comparison on finite values")
            })
            .expect("nonempty pivot range");
        if float::abs(a[pivot_row][col]) <= threshold {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec_zeros(n);
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

fn vec_zeros(n: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(n);
    v.resize(n, 0.0);
    v
}

/// A basic least-squares solution of A t ~ b by Householder QR with
/// column pivoting: coordinates beyond the detected rank stay at
/// zero. Callers that only consume A t can take any least-squares
/// solution, so the basic one is enough; rank deficiency is expected,
/// not an error.
pub(crate) fn lstsq_basic(a: &[Vec<f64>], b: &[f64], rel_tol: f64) -> Option<Vec<f64>> {
    let rows = a.len();
    if b.len() != rows {
        return None;
    }
    let cols = a.first().map_or(0, Vec::len);
    if cols == 0 {
        return Some(Vec::new());
    }
    if a.iter().any(|r| r.len() != cols) {
        return None;
    }
    // Column-major working copy: col[j][i] holds A_ij, later R_ij for
    // i <= j with the Householder vectors below.
    let mut col: Vec<Vec<f64>> = (0..cols).map(|j| a.iter().map(|r| r[j]).collect()).collect();
    let mut rhs = b.to_vec();
    let mut perm: Vec<usize> = (0..cols).collect();
    let scale = col
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>())
        .fold(0.0_f64, f64::max);
    let scale = float::sqrt(scale);
    if scale <= 0.0 || !scale.is_finite() {
        return Some(vec_zeros(cols));
    }
    let limit = rows.min(cols);
    let mut rank = 0;
    for k in 0..limit {
        let pivot = (k..cols)
            .max_by(|&p, &q| {
                let np: f64 = col[p][k..].iter().map(|x| x * x).sum();
                let nq: f64 = col[q][k..].iter().map(|x| x * x).sum();
                np.total_cmp(&nq)
            })
            .expect("nonempty pivot range");
        let norm = float::sqrt(col[pivot][k..].iter().map(|x| x * x).sum());
        if norm <= rel_tol * scale {
            break;
        }
        col.swap(k, pivot);
        perm.swap(k, pivot);
        // Householder vector v reflecting column k onto alpha e_k.
        let alpha = if col[k][k] >= 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = col[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for c in col.iter_mut().skip(k + 1) {
                let dot: f64 = v.iter().zip(&c[k..]).map(|(&vx, &cx)| vx * cx).sum();
                let f = 2.0 * dot / vnorm2;
                for (vx, cx) in v.iter().zip(c[k..].iter_mut()) {
                    *cx -= f * vx;
                }
            }
            let dot: f64 = v.iter().zip(&rhs[k..]).map(|(&vx, &bx)| vx * bx).sum();
            let f = 2.0 * dot / vnorm2;
            for (vx, bx) in v.iter().zip(rhs[k..].iter_mut()) {
                *bx -= f * vx;
            }
        }
        col[k][k] = alpha;
        for entry in col[k][k + 1..].iter_mut() {
            *entry = 0.0;
        }
        rank = k + 1;
    }
    let mut solution = vec_zeros(cols);
    for r in (0..rank).rev() {
        let mut s = rhs[r];
        for c in r + 1..rank {
            s -= col[c][r] * solution[perm[c]];
        }
        solution[perm[r]] = s / col[r][r];
    }
    Some(solution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn solves_a_small_system() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let x = solve_dense(a, vec![3.0, 5.0], 1e-12).unwrap();
        assert!((x[0] - 0.8).abs() <= 1e-12);
        assert!((x[1] - 1.4).abs() <= 1e-12);
    }

    #[test]
    fn reports_singularity() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(solve_dense(a, vec![1.0, 2.0], 1e-12).is_none());
    }

    #[test]
    fn least_squares_matches_the_normal_equations() {
        let a = vec![vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0]];
        let t = lstsq_basic(&a, &[1.0, 2.0, 4.0], 1e-12).unwrap();
        assert!((t[0] - 5.0 / 6.0).abs() <= 1e-12);
        assert!((t[1] - 1.5).abs() <= 1e-12);
    }

    #[test]
    fn least_squares_tolerates_rank_deficiency() {
        // Third column is the sum of the first two; any solution with
        // the same image is acceptable and one coordinate stays basic.
        let a = vec![
            vec![1.0, 0.0, 1.0],
            vec![0.0, 1.0, 1.0],
            vec![1.0, 1.0, 2.0],
        ];
        let b = [2.0, 3.0, 5.0];
        let t = lstsq_basic(&a, &b, 1e-12).unwrap();
        for (row, target) in a.iter().zip(b) {
            let image: f64 = row.iter().zip(&t).map(|(&c, &x)| c * x).sum();
            assert!((image - target).abs() <= 1e-12);
        }
    }

    #[test]
    fn least_squares_of_nothing_is_zero() {
        let a = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        let t = lstsq_basic(&a, &[1.0, -1.0], 1e-12).unwrap();
        assert_eq!(t, vec![0.0, 0.0]);
    }
}
