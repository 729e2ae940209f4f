//! Dense LU factorization with partial pivoting, in place.
//!
//! Elimination skips zero multipliers and zero entries of the pivot row, so
//! banded MNA matrices cost far less than the dense `n^3 / 3` bound.

use alloc::vec::Vec;

/// Relative pivot threshold: a pivot below `PIVOT_REL_TOL * max|A|` marks
/// the matrix singular.
pub(crate) const PIVOT_REL_TOL: f64 = 1e-14;

/// Solves `a x = b` for a row-major `n x n` matrix, overwriting `b` with `x`.
/// On failure returns the column whose pivot fell below threshold.
pub(crate) fn solve_in_place(a: &mut [f64], b: &mut [f64], n: usize) -> Result<(), usize> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let threshold = PIVOT_REL_TOL * scale;
    let mut pivot_nz: Vec<usize> = Vec::with_capacity(n);

    for k in 0..n {
        let mut p = k;
        let mut best = a[k * n + k].abs();
        for i in k + 1..n {
            let v = a[i * n + k].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if !(best > threshold) || best == 0.0 {
            return Err(k);
        }
        if p != k {
            for j in k..n {
                a.swap(k * n + j, p * n + j);
            }
            b.swap(k, p);
        }

        pivot_nz.clear();
        pivot_nz.extend((k + 1..n).filter(|&j| a[k * n + j] != 0.0));
        let pivot = a[k * n + k];
        let bk = b[k];
        for i in k + 1..n {
            let l = a[i * n + k];
            if l == 0.0 {
                continue;
            }
            let l = l / pivot;
            a[i * n + k] = l;
            let (upper, lower) = a.split_at_mut(i * n);
            let row_k = &upper[k * n..k * n + n];
            let row_i = &mut lower[..n];
            for &j in &pivot_nz {
                row_i[j] -= l * row_k[j];
            }
            b[i] -= l * bk;
        }
    }

    for k in (0..n).rev() {
        let row = &a[k * n..k * n + n];
        let mut acc = b[k];
        for j in k + 1..n {
            acc -= row[j] * b[j];
        }
        b[k] = acc / row[k];
    }
    Ok(())
}
