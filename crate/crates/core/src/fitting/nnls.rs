//! Nonnegative least squares by the Lawson-Hanson active-set method.

use crate::linalg::solve_dense;
use crate::real::Real;

/// Minimizes `|A x - b|` subject to `x >= 0`. `a` is column-major with
/// `m` rows; `nonneg[j] = false` leaves column `j` unconstrained.
pub fn nnls<T: Real>(a: &[T], m: usize, b: &[T], nonneg: &[bool]) -> Vec<T> {
    let n = nonneg.len();
    debug_assert_eq!(a.len(), m * n);
    let col = |j: usize| &a[j * m..(j + 1) * m];
    let dot = |u: &[T], v: &[T]| u.iter().zip(v.iter()).map(|(&p, &q)| p * q).sum::<T>();
    let scale = b.iter().fold(T::zero(), |s, v| s.max(v.abs()))
        * a.iter().fold(T::zero(), |s, v| s.max(v.abs()))
        * T::from_usize_lossy(m);
    let tol = scale * T::tolerance();

    let mut x = vec![T::zero(); n];
    // free columns start passive (solved without bound)
    let mut passive: Vec<bool> = nonneg.iter().map(|&c| !c).collect();
    let residual = |x: &[T]| -> Vec<T> {
        let mut r = b.to_vec();
        for (j, &xj) in x.iter().enumerate() {
            if xj != T::zero() {
                for (ri, &aij) in r.iter_mut().zip(col(j).iter()) {
                    *ri -= aij * xj;
                }
            }
        }
        r
    };
    let solve_passive = |passive: &[bool]| -> Vec<T> {
        let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let k = idx.len();
        let mut out = vec![T::zero(); n];
        if k == 0 {
            return out;
        }
        let mut g = vec![T::zero(); k * k];
        let mut h = vec![T::zero(); k];
        for (p, &i) in idx.iter().enumerate() {
            h[p] = dot(col(i), b);
            for (q, &j) in idx.iter().enumerate() {
                g[p * k + q] = dot(col(i), col(j));
            }
        }
        if let Some(z) = solve_dense(&mut g, &mut h, k) {
            for (p, &i) in idx.iter().enumerate() {
                out[i] = z[p];
            }
        }
        out
    };

    if passive.iter().any(|&p| p) {
        x = solve_passive(&passive);
    }
    for _outer in 0..(3 * n + 10) {
        let r = residual(&x);
        let w: Vec<T> = (0..n).map(|j| dot(col(j), &r)).collect();
        let candidate = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].partial_cmp(&w[j]).unwrap());
        let Some(t) = candidate else { break };
        passive[t] = true;
        loop {
            let z = solve_passive(&passive);
            let violating: Vec<usize> = (0..n).filter(|&j| passive[j] && nonneg[j] && z[j] <= T::zero()).collect();
            if violating.is_empty() {
                x = z;
                break;
            }
            // step toward z until the first bound is hit
            let mut alpha = T::one();
            for &j in &violating {
                let denom = x[j] - z[j];
                if denom > T::zero() {
                    alpha = alpha.min(x[j] / denom);
                }
            }
            for j in 0..n {
                x[j] = x[j] + alpha * (z[j] - x[j]);
            }
            let floor = x.iter().fold(T::zero(), |m, v| m.max(v.abs())) * T::tolerance();
            for j in 0..n {
                if passive[j] && nonneg[j] && x[j] <= floor {
                    passive[j] = false;
                    x[j] = T::zero();
                }
            }
            if !passive.iter().zip(nonneg.iter()).any(|(&p, &c)| p && c) {
                break;
            }
        }
    }
    for (j, v) in x.iter_mut().enumerate() {
        if nonneg[j] && *v < T::zero() {
            *v = T::zero();
        }
    }
    x
}
