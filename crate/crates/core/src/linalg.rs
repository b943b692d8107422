//! Small dense linear algebra: LU solve and determinants with partial
//! pivoting. Kept in-house so the stationary-distribution routes stay
//! self-contained and auditable.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-300;

/// Solves `a x = b` in place. `a` is row-major `n x n`.
pub fn solve(a: &mut [f64], b: &mut [f64], n: usize) -> Result<Vec<f64>> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n);
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_val = a[perm[col] * n + col].abs();
        for (r, &pr) in perm.iter().enumerate().skip(col + 1) {
            let v = a[pr * n + col].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = r;
            }
        }
        if pivot_val < PIVOT_TOL {
            return Err(Error::SingularSystem(pivot_val));
        }
        perm.swap(col, pivot_row);
        let prow = perm[col];
        let pinv = 1.0 / a[prow * n + col];
        for &row in perm.iter().skip(col + 1) {
            let factor = a[row * n + col] * pinv;
            if factor == 0.0 {
                continue;
            }
            a[row * n + col] = 0.0;
            for k in (col + 1)..n {
                a[row * n + k] -= factor * a[prow * n + k];
            }
            b[row] -= factor * b[prow];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let row = perm[col];
        let mut acc = b[row];
        for k in (col + 1)..n {
            acc -= a[row * n + k] * x[k];
        }
        x[col] = acc / a[row * n + col];
    }
    Ok(x)
}

/// Determinant of a row-major `n x n` matrix (destroys `a`).
pub fn determinant(a: &mut [f64], n: usize) -> f64 {
    assert_eq!(a.len(), n * n);
    let mut det = 1.0;
    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_val = a[col * n + col].abs();
        for r in (col + 1)..n {
            let v = a[r * n + col].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = r;
            }
        }
        if pivot_val == 0.0 {
            return 0.0;
        }
        if pivot_row != col {
            for k in 0..n {
                a.swap(col * n + k, pivot_row * n + k);
            }
            det = -det;
        }
        let pivot = a[col * n + col];
        det *= pivot;
        let pinv = 1.0 / pivot;
        for r in (col + 1)..n {
            let factor = a[r * n + col] * pinv;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[r * n + k] -= factor * a[col * n + k];
            }
        }
    }
    det
}

/// Stationary distribution of a row-stochastic matrix given as rows:
/// solves pi P = pi with sum(pi) = 1 by replacing one balance equation
/// with the normalization constraint.
pub fn stationary_from_rows(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = rows.len();
    assert!(n > 0 && rows.iter().all(|r| r.len() == n));
    // A = P^T - I, last row replaced by ones.
    let mut a = vec![0.0; n * n];
    for (i, row) in rows.iter().enumerate() {
        for (j, &p) in row.iter().enumerate() {
            a[j * n + i] = p;
        }
    }
    for i in 0..n {
        a[i * n + i] -= 1.0;
    }
    for j in 0..n {
        a[(n - 1) * n + j] = 1.0;
    }
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    solve(&mut a, &mut b, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn solve_small_system() {
        // 2x + y = 5, x + 3y = 10 -> x = 1, y = 3
        let mut a = vec![2.0, 1.0, 1.0, 3.0];
        let mut b = vec![5.0, 10.0];
        let x = solve(&mut a, &mut b, 2).unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn solve_rejects_singular() {
        let mut a = vec![1.0, 2.0, 2.0, 4.0];
        let mut b = vec![1.0, 2.0];
        assert!(solve(&mut a, &mut b, 2).is_err());
    }

    #[test]
    fn determinant_matches_hand_values() {
        let mut a = vec![1.0, 2.0, 3.0, 4.0];
        assert_abs_diff_eq!(determinant(&mut a, 2), -2.0, epsilon = 1e-12);
        let mut b = vec![2.0, 0.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0, 4.0];
        assert_abs_diff_eq!(determinant(&mut b, 3), 24.0, epsilon = 1e-12);
    }

    #[test]
    fn stationary_two_state() {
        let rows = vec![vec![0.9, 0.1], vec![0.2, 0.8]];
        let pi = stationary_from_rows(&rows).unwrap();
        assert_abs_diff_eq!(pi[0], 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pi[1], 1.0 / 3.0, epsilon = 1e-12);
    }
}
