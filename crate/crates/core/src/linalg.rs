//! Small dense linear algebra: fixed-size square matrices for the rate
//! generator and a few dynamic helpers for the least-squares fits.

use std::ops::{Index, IndexMut};

use crate::real::{c, Real};

/// Row-major `N x N` matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SquareMatrix<T, const N: usize>(pub [[T; N]; N]);

impl<T: Real, const N: usize> SquareMatrix<T, N> {
    pub fn zeros() -> Self {
        Self([[T::zero(); N]; N])
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            m.0[i][i] = T::one();
        }
        m
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = *self;
        for row in out.0.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = *self;
        for i in 0..N {
            for j in 0..N {
                out.0[i][j] += other.0[i][j];
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = *self;
        for i in 0..N {
            for j in 0..N {
                out.0[i][j] -= other.0[i][j];
            }
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zeros();
        for i in 0..N {
            for k in 0..N {
                let a = self.0[i][k];
                if a == T::zero() {
                    continue;
                }
                for j in 0..N {
                    out.0[i][j] += a * other.0[k][j];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T; N]) -> [T; N] {
        let mut out = [T::zero(); N];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.0[i].iter().zip(v.iter()).map(|(&a, &b)| a * b).sum();
        }
        out
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> T {
        (0..N)
            .map(|j| (0..N).map(|i| self.0[i][j].abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    pub fn max_abs(&self) -> T {
        self.0
            .iter()
            .flat_map(|r| r.iter())
            .fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Solves `self * X = rhs` column-wise by LU with partial pivoting.
    /// Returns `None` when a pivot falls below `pivot_floor`.
    pub fn solve_matrix(&self, rhs: &Self, pivot_floor: T) -> Option<Self> {
        let mut a = self.0;
        let mut b = rhs.0;
        for col in 0..N {
            let (p, pmax) = (col..N)
                .map(|r| (r, a[r][col].abs()))
                .fold((col, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax <= pivot_floor {
                return None;
            }
            a.swap(col, p);
            b.swap(col, p);
            for r in (col + 1)..N {
                let f = a[r][col] / a[col][col];
                if f == T::zero() {
                    continue;
                }
                for k in col..N {
                    let v = a[col][k];
                    a[r][k] -= f * v;
                }
                for k in 0..N {
                    let v = b[col][k];
                    b[r][k] -= f * v;
                }
            }
        }
        let mut x = [[T::zero(); N]; N];
        for k in 0..N {
            for r in (0..N).rev() {
                let mut s = b[r][k];
                for j in (r + 1)..N {
                    s -= a[r][j] * x[j][k];
                }
                x[r][k] = s / a[r][r];
            }
        }
        Some(Self(x))
    }

    /// Solves `self * x = rhs`.
    pub fn solve_vec(&self, rhs: &[T; N], pivot_floor: T) -> Option<[T; N]> {
        let mut m = Self::zeros();
        for i in 0..N {
            m.0[i][0] = rhs[i];
        }
        let x = self.solve_matrix(&m, pivot_floor)?;
        let mut out = [T::zero(); N];
        for i in 0..N {
            out[i] = x.0[i][0];
        }
        Some(out)
    }

    /// Matrix exponential by scaling and squaring with a degree-13 Padé
    /// approximant.
    pub fn expm(&self) -> Self {
        const B: [f64; 14] = [
            64_764_752_532_480_000.0,
            32_382_376_266_240_000.0,
            7_771_770_303_897_600.0,
            1_187_353_796_428_800.0,
            129_060_195_264_000.0,
            10_559_470_521_600.0,
            670_442_572_800.0,
            33_522_128_640.0,
            1_323_241_920.0,
            40_840_800.0,
            960_960.0,
            16_380.0,
            182.0,
            1.0,
        ];
        const THETA_13: f64 = 5.371_920_351_148_152;

        let norm = self.norm1();
        if norm == T::zero() {
            return Self::identity();
        }
        let mut squarings = 0i32;
        let ratio = norm.as_f64() / THETA_13;
        if ratio > 1.0 {
            squarings = ratio.log2().ceil() as i32;
        }
        let a = self.scale(c::<T>(2.0).powi(-squarings));
        let id = Self::identity();
        let a2 = a.mul(&a);
        let a4 = a2.mul(&a2);
        let a6 = a4.mul(&a2);
        let b = |k: usize| c::<T>(B[k]);

        let u_inner = a6
            .scale(b(13))
            .add(&a4.scale(b(11)))
            .add(&a2.scale(b(9)));
        let u_poly = a6
            .mul(&u_inner)
            .add(&a6.scale(b(7)))
            .add(&a4.scale(b(5)))
            .add(&a2.scale(b(3)))
            .add(&id.scale(b(1)));
        let u = a.mul(&u_poly);

        let v_inner = a6
            .scale(b(12))
            .add(&a4.scale(b(10)))
            .add(&a2.scale(b(8)));
        let v = a6
            .mul(&v_inner)
            .add(&a6.scale(b(6)))
            .add(&a4.scale(b(4)))
            .add(&a2.scale(b(2)))
            .add(&id.scale(b(0)));

        let mut r = v
            .sub(&u)
            .solve_matrix(&v.add(&u), T::zero())
            .expect("Pade denominator is nonsingular for scaled input");
        for _ in 0..squarings {
            r = r.mul(&r);
        }
        r
    }
}

impl<T, const N: usize> Index<(usize, usize)> for SquareMatrix<T, N> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.0[i][j]
    }
}

impl<T, const N: usize> IndexMut<(usize, usize)> for SquareMatrix<T, N> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.0[i][j]
    }
}

/// Solves the dense system `a x = b` (row-major `n x n`) in place by
/// Gaussian elimination with partial pivoting.
pub(crate) fn solve_dense<T: Real>(a: &mut [T], b: &mut [T], n: usize) -> Option<Vec<T>> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let scale = a.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let floor = scale * T::epsilon() * T::from_usize_lossy(n);
    for col in 0..n {
        let mut p = col;
        for r in (col + 1)..n {
            if a[r * n + col].abs() > a[p * n + col].abs() {
                p = r;
            }
        }
        if a[p * n + col].abs() <= floor {
            return None;
        }
        if p != col {
            for k in 0..n {
                a.swap(col * n + k, p * n + k);
            }
            b.swap(col, p);
        }
        for r in (col + 1)..n {
            let f = a[r * n + col] / a[col * n + col];
            if f == T::zero() {
                continue;
            }
            for k in col..n {
                let v = a[col * n + k];
                a[r * n + k] -= f * v;
            }
            let bv = b[col];
            b[r] -= f * bv;
        }
    }
    let mut x = vec![T::zero(); n];
    for r in (0..n).rev() {
        let mut s = b[r];
        for j in (r + 1)..n {
            s -= a[r * n + j] * x[j];
        }
        x[r] = s / a[r * n + r];
    }
    Some(x)
}

/// Inverse of a symmetric positive (semi)definite matrix with a tiny ridge
/// when it is singular. Returns `None` if it stays singular.
pub(crate) fn invert_dense<T: Real>(a: &[T], n: usize) -> Option<Vec<T>> {
    let mut inv = vec![T::zero(); n * n];
    for col in 0..n {
        let mut m = a.to_vec();
        let mut e = vec![T::zero(); n];
        e[col] = T::one();
        let x = solve_dense(&mut m, &mut e, n)?;
        for r in 0..n {
            inv[r * n + col] = x[r];
        }
    }
    Some(inv)
}
