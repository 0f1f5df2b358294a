//! Dense two-phase primal simplex for small equality-form programs:
//! min c.x subject to A x = b, x >= 0.
//!
//! Bland's rule throughout, so the method terminates without cycling;
//! speed is irrelevant at the sizes the crate feeds it (tens of
//! variables). Infeasibility comes back as a Farkas vector y with
//! y.A <= 0 and y.b > 0, which the convex-order checker turns into a
//! separating witness.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::float;

const MAX_PIVOTS: usize = 50_000;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible { farkas: Vec<f64> },
    Unbounded,
}

/// Solves min c.x, A x = b, x >= 0 with a full-tableau two-phase
/// simplex. Rows may be redundant; contradictory rows yield the
/// Farkas outcome.
pub(crate) fn solve_standard_lp(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Result<LpOutcome> {
    let rows = a.len();
    let nv = c.len();
    if b.len() != rows || a.iter().any(|r| r.len() != nv) {
        return Err(Error::DimensionMismatch {
            what: "linear program shape",
            expected: nv,
            found: a.iter().map(|r| r.len()).find(|&l| l != nv).unwrap_or(b.len()),
        });
    }
    if rows == 0 {
        return Ok(LpOutcome::Optimal { x: vec![0.0; nv], value: 0.0 });
    }

    let mut scale: f64 = 1.0;
    for row in a {
        for &x in row {
            if !x.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite LP coefficient {x}")));
            }
            scale = scale.max(float::abs(x));
        }
    }
    for &x in b.iter().chain(c.iter()) {
        if !x.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite LP coefficient {x}")));
        }
    }
    let eps = 1e-9 * scale;

    // Tableau: nv structural + rows artificial columns + RHS. Rows are
    // flipped so the RHS is nonnegative; flips are remembered so the
    // Farkas vector refers to the caller's row orientation.
    let total = nv + rows;
    let mut t = vec![vec![0.0; total + 1]; rows];
    let mut flip = vec![1.0f64; rows];
    for i in 0..rows {
        let s = if b[i] < 0.0 { -1.0 } else { 1.0 };
        flip[i] = s;
        for j in 0..nv {
            t[i][j] = s * a[i][j];
        }
        t[i][nv + i] = 1.0;
        t[i][total] = s * b[i];
    }
    let mut basis: Vec<usize> = (nv..total).collect();

    // Phase-1 objective row: reduced costs of min(sum of artificials)
    // with the artificial basis.
    let mut obj = vec![0.0; total + 1];
    for j in 0..=total {
        let col_sum: f64 = (0..rows).map(|i| t[i][j]).sum();
        obj[j] = if (nv..total).contains(&j) { 1.0 } else { 0.0 } - col_sum;
    }

    let mut pivots = 0usize;
    run_simplex(&mut t, &mut obj, &mut basis, total, total + 1, eps, &mut pivots)?;

    let phase1 = -obj[total];
    if phase1 > 1e-9 * (1.0 + scale) {
        // Infeasible. Multipliers from the artificial reduced costs:
        // y_i = c_art - rc_i = 1 - obj[nv + i], mapped back through the
        // row flips and normalized to y.b = 1.
        let mut farkas: Vec<f64> = (0..rows).map(|i| flip[i] * (1.0 - obj[nv + i])).collect();
        let margin: f64 = farkas.iter().zip(b).map(|(y, bi)| y * bi).sum();
        if margin > 0.0 {
            for y in &mut farkas {
                *y /= margin;
            }
        }
        return Ok(LpOutcome::Infeasible { farkas });
    }

    // Drive leftover artificials out of the basis; rows where no
    // structural pivot exists are redundant and stay parked on their
    // artificial at level ~0, which later pivots never disturb.
    for i in 0..rows {
        if basis[i] >= nv {
            if let Some(j) = (0..nv).find(|&j| float::abs(t[i][j]) > eps) {
                pivot(&mut t, &mut obj, &mut basis, i, j, total + 1);
            }
        }
    }

    // Phase 2: rebuild reduced costs for the real objective and forbid
    // artificial columns by pricing them prohibitively.
    for j in 0..=total {
        obj[j] = if j < nv { c[j] } else { 0.0 };
    }
    for i in 0..rows {
        if basis[i] < nv {
            let cb = c[basis[i]];
            if cb != 0.0 {
                for j in 0..=total {
                    obj[j] -= cb * t[i][j];
                }
            }
        }
    }
    for j in nv..total {
        // Artificials never reenter.
        obj[j] = f64::INFINITY;
    }

    let bounded = run_simplex(&mut t, &mut obj, &mut basis, nv, total + 1, eps, &mut pivots)?;
    if !bounded {
        return Ok(LpOutcome::Unbounded);
    }

    let mut x = vec![0.0; nv];
    for i in 0..rows {
        if basis[i] < nv {
            x[basis[i]] = t[i][total].max(0.0);
        }
    }
    let value: f64 = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    Ok(LpOutcome::Optimal { x, value })
}

/// Bland-rule simplex on the prepared tableau. Only columns below
/// `enterable` may enter. Returns false on unboundedness.
fn run_simplex(
    t: &mut [Vec<f64>],
    obj: &mut [f64],
    basis: &mut [usize],
    enterable: usize,
    width: usize,
    eps: f64,
    pivots: &mut usize,
) -> Result<bool> {
    let rows = t.len();
    let rhs = width - 1;
    loop {
        let Some(enter) = (0..enterable).find(|&j| obj[j] < -eps) else {
            return Ok(true);
        };
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..rows {
            if t[i][enter] > eps {
                let ratio = t[i][rhs] / t[i][enter];
                let better = match leave {
                    None => true,
                    // Bland tie break: smallest basic variable index.
                    Some(l) => {
                        ratio < best - eps || (ratio <= best + eps && basis[i] < basis[l])
                    }
                };
                if better {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(leave) = leave else {
            return Ok(false);
        };
        pivot(t, obj, basis, leave, enter, width);
        *pivots += 1;
        if *pivots > MAX_PIVOTS {
            return Err(Error::NumericalFailure(format!(
                "simplex exceeded {MAX_PIVOTS} pivots"
            )));
        }
    }
}

fn pivot(
    t: &mut [Vec<f64>],
    obj: &mut [f64],
    basis: &mut [usize],
    row: usize,
    col: usize,
    width: usize,
) {
    let p = t[row][col];
    for j in 0..width {
        t[row][j] /= p;
    }
    t[row][col] = 1.0;
    for i in 0..t.len() {
        if i != row {
            let f = t[i][col];
            if f != 0.0 {
                for j in 0..width {
                    t[i][j] -= f * t[row][j];
                }
                t[i][col] = 0.0;
            }
        }
    }
    let f = obj[col];
    if f != 0.0 && f.is_finite() {
        for j in 0..width {
            obj[j] -= f * t[row][j];
        }
        obj[col] = 0.0;
    }
    basis[row] = col;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_a_transport_shaped_lp() {
        // min x00 + 3 x01 + 2 x10 + x11 with unit marginals (0.5 each).
        let a = vec![
            vec![1.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 1.0],
            vec![1.0, 0.0, 1.0, 0.0],
            vec![0.0, 1.0, 0.0, 1.0],
        ];
        let b = vec![0.5, 0.5, 0.5, 0.5];
        let c = vec![1.0, 3.0, 2.0, 1.0];
        match solve_standard_lp(&a, &b, &c).unwrap() {
            LpOutcome::Optimal { x, value } => {
                assert!((value - 1.0).abs() <= 1e-9);
                assert!((x[0] - 0.5).abs() <= 1e-9);
                assert!((x[3] - 0.5).abs() <= 1e-9);
            }
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        // Second row duplicates the first.
        let a = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let b = vec![1.0, 1.0];
        let c = vec![2.0, 1.0];
        match solve_standard_lp(&a, &b, &c).unwrap() {
            LpOutcome::Optimal { x, value } => {
                assert!((value - 1.0).abs() <= 1e-9);
                assert!((x[1] - 1.0).abs() <= 1e-9);
            }
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn infeasibility_produces_a_farkas_vector() {
        // x1 + x2 = 1 and x1 + x2 = 2 cannot both hold.
        let a = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let b = vec![1.0, 2.0];
        let c = vec![0.0, 0.0];
        match solve_standard_lp(&a, &b, &c).unwrap() {
            LpOutcome::Infeasible { farkas } => {
                let margin: f64 = farkas.iter().zip(&b).map(|(y, bi)| y * bi).sum();
                assert!(margin > 1e-9);
                for j in 0..2 {
                    let dot: f64 = farkas.iter().zip(&a).map(|(y, row)| y * row[j]).sum();
                    assert!(dot <= 1e-7);
                }
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn detects_unboundedness() {
        // min -x with x free to grow: x1 - x2 = 1.
        let a = vec![vec![1.0, -1.0]];
        let b = vec![1.0];
        let c = vec![-1.0, 0.0];
        assert_eq!(solve_standard_lp(&a, &b, &c).unwrap(), LpOutcome::Unbounded);
    }
}
