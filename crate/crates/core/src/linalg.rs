//! Dense symmetric eigenvalues: Householder reduction to tridiagonal form
//! followed by implicit QL with Wilkinson-style shifts.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAX_QL_ITERATIONS: usize = 60;

/// All eigenvalues of the symmetric `n x n` row-major matrix `a`, ascending.
/// Only the lower triangle is read.
pub fn symmetric_eigenvalues<T: Scalar>(a: &[T], n: usize) -> Result<Vec<T>> {
    if a.len() != n * n {
        return Err(Error::DimensionMismatch { expected: n * n, got: a.len() });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut z = a.to_vec();
    let (mut d, mut e) = tridiagonalize(&mut z, n);
    tridiagonal_ql(&mut d, &mut e)?;
    d.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    Ok(d)
}

/// Reduces `z` in place; returns the diagonal and the sub-diagonal (`e[0] = 0`).
/// Only the lower triangle is touched, always along contiguous rows.
fn tridiagonalize<T: Scalar>(z: &mut [T], n: usize) -> (Vec<T>, Vec<T>) {
    let zero = T::zero();
    let mut d = vec![zero; n];
    let mut e = vec![zero; n];
    let mut u = vec![zero; n];
    let mut q = vec![zero; n];
    for i in (1..n).rev() {
        let l = i - 1;
        let row_i = i * n;
        if l == 0 {
            e[i] = z[row_i];
            continue;
        }
        let scale: T = z[row_i..row_i + i].iter().map(|v| v.abs()).sum();
        if scale == zero {
            e[i] = z[row_i + l];
            continue;
        }
        let mut h = zero;
        for k in 0..i {
            u[k] = z[row_i + k] / scale;
            h += u[k] * u[k];
        }
        let f = u[l];
        let g = if f >= zero { -h.sqrt() } else { h.sqrt() };
        e[i] = scale * g;
        h -= f * g;
        u[l] = f - g;

        // p = A u / h from the lower triangle, row by row: each row j contributes
        // its dot product with u to p[j] and an axpy to p[..j].
        q[..i].iter_mut().for_each(|v| *v = zero);
        for j in 0..i {
            let row = &z[j * n..j * n + j];
            let uj = u[j];
            for (qk, &a) in q[..j].iter_mut().zip(row) {
                *qk += a * uj;
            }
            q[j] += dot(row, &u[..j]) + z[j * n + j] * uj;
        }
        let mut up = zero;
        for j in 0..i {
            q[j] /= h;
            up += q[j] * u[j];
        }
        let kk = up / (h + h);
        for j in 0..i {
            q[j] -= kk * u[j];
        }
        for j in 0..i {
            let (uj, qj) = (u[j], q[j]);
            let row = &mut z[j * n..=j * n + j];
            for ((a, &uk), &qk) in row.iter_mut().zip(&u[..=j]).zip(&q[..=j]) {
                *a -= uj * qk + qj * uk;
            }
        }
    }
    for (i, di) in d.iter_mut().enumerate() {
        *di = z[i * n + i];
    }
    e[0] = zero;
    (d, e)
}

/// Dot product with four independent accumulators so the loop vectorizes.
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: T = ca.remainder().iter().zip(cb.remainder()).map(|(&x, &y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn tridiagonal_ql<T: Scalar>(d: &mut [T], e: &mut [T]) -> Result<()> {
    let n = d.len();
    if n < 2 {
        return Ok(());
    }
    let zero = T::zero();
    let one = T::one();
    let two = T::lit(2.0);
    let eps = T::epsilon();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = zero;

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_QL_ITERATIONS {
                return Err(Error::Degenerate("tridiagonal QL did not converge".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(one);
            g = d[m] - d[l] + e[l] / (g + if g >= zero { r.abs() } else { -r.abs() });
            let (mut s, mut c, mut p) = (one, one, zero);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == zero {
                    d[i + 1] -= p;
                    e[m] = zero;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = zero;
        }
    }
    Ok(())
}
