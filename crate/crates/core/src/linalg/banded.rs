//! Square banded matrices in diagonal-major storage, with a pivoted banded
//! LU solve.
//!
//! Diagonal-major means one contiguous slice per diagonal offset, indexed by
//! column. Out-of-band reads return exact zero. The solver is generic over
//! the scalar so the shifted tridiagonal systems of the partial fraction
//! route can be solved in complex arithmetic with the same code.

use alloc::vec;
use alloc::vec::Vec;

use super::dense::DenseMatrix;
use super::scalar::Scalar;
use crate::error::Error;
use crate::Result;

/// Square banded matrix of order `n` with `kl` sub- and `ku` superdiagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix<T: Scalar> {
    n: usize,
    kl: usize,
    ku: usize,
    /// `data[(o + kl) * n + j]` holds entry `(j - o, j)` for offset `o = j - i`.
    data: Vec<T>,
}

impl<T: Scalar> BandedMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        assert!(n > 0, "order must be positive");
        let kl = kl.min(n - 1);
        let ku = ku.min(n - 1);
        Self {
            n,
            kl,
            ku,
            data: vec![T::ZERO; (kl + ku + 1) * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, 0, 0);
        for j in 0..n {
            m.set(j, j, T::ONE);
        }
        m
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    #[inline]
    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    #[inline]
    fn in_band(&self, i: usize, j: usize) -> bool {
        let o = j as isize - i as isize;
        o >= -(self.kl as isize) && o <= self.ku as isize
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        debug_assert!(i < self.n && j < self.n);
        if !self.in_band(i, j) {
            return T::ZERO;
        }
        let o = j as isize - i as isize;
        self.data[(o + self.kl as isize) as usize * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        assert!(
            self.in_band(i, j),
            "entry ({i},{j}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let o = j as isize - i as isize;
        self.data[(o + self.kl as isize) as usize * self.n + j] = v;
    }

    /// Largest entry modulus.
    pub fn max_modulus(&self) -> f64 {
        let mut m = 0.0;
        for &v in &self.data {
            let a = v.modulus();
            if a > m {
                m = a;
            }
        }
        m
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n, "matvec dimension mismatch");
        let mut y = vec![T::ZERO; self.n];
        for o in -(self.kl as isize)..=(self.ku as isize) {
            let row = &self.data[(o + self.kl as isize) as usize * self.n..];
            let j_lo = o.max(0) as usize;
            let j_hi = (self.n as isize - 1 + o.min(0)) as usize;
            for j in j_lo..=j_hi {
                let i = (j as isize - o) as usize;
                y[i] += row[j] * x[j];
            }
        }
        y
    }

    /// Banded product; bandwidths add (clamped to the order).
    pub fn mul(&self, rhs: &BandedMatrix<T>) -> BandedMatrix<T> {
        assert_eq!(self.n, rhs.n, "matmul dimension mismatch");
        let n = self.n;
        let mut c = BandedMatrix::zeros(n, self.kl + rhs.kl, self.ku + rhs.ku);
        for i in 0..n {
            let j_lo = i.saturating_sub(c.kl);
            let j_hi = (i + c.ku).min(n - 1);
            for j in j_lo..=j_hi {
                let k_lo = i.saturating_sub(self.kl).max(j.saturating_sub(rhs.ku));
                let k_hi = (i + self.ku).min(j + rhs.kl).min(n - 1);
                let mut s = T::ZERO;
                let mut k = k_lo;
                while k <= k_hi {
                    s += self.get(i, k) * rhs.get(k, j);
                    k += 1;
                }
                if s != T::ZERO {
                    c.set(i, j, s);
                }
            }
        }
        c
    }

    pub fn scale(&self, a: T) -> BandedMatrix<T> {
        let mut m = self.clone();
        for v in &mut m.data {
            *v = *v * a;
        }
        m
    }

    pub fn add_scaled_identity(&mut self, a: T) {
        for j in 0..self.n {
            let v = self.get(j, j) + a;
            self.set(j, j, v);
        }
    }

    /// Solve `M x = b` by banded LU with partial pivoting.
    ///
    /// Row interchanges widen the upper bandwidth to at most `kl + ku`; the
    /// elimination works on a copy with that extra room. A pivot of modulus
    /// at most `1e-14` times the largest input entry reports
    /// [`Error::SingularMatrix`].
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: b.len(),
            });
        }
        let n = self.n;
        let kl = self.kl;
        let kuw = (self.kl + self.ku).min(n - 1);
        let scale = self.max_modulus();
        if scale == 0.0 {
            return Err(Error::SingularMatrix);
        }

        // working band with widened upper bandwidth, plus right-hand side
        let mut w = BandedMatrix::<T>::zeros(n, kl, kuw);
        for i in 0..n {
            let j_lo = i.saturating_sub(kl);
            let j_hi = (i + self.ku).min(n - 1);
            for j in j_lo..=j_hi {
                let v = self.get(i, j);
                if v != T::ZERO {
                    w.set(i, j, v);
                }
            }
        }
        let mut x: Vec<T> = b.to_vec();

        for k in 0..n {
            let i_hi = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = w.get(k, k).modulus();
            for i in (k + 1)..=i_hi {
                let v = w.get(i, k).modulus();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= 1e-14 * scale {
                return Err(Error::SingularMatrix);
            }
            if p != k {
                let j_hi = (k + kuw).min(n - 1);
                for j in k..=j_hi {
                    let a = w.get(k, j);
                    let c = w.get(p, j);
                    w.set(k, j, c);
                    w.set(p, j, a);
                }
                x.swap(k, p);
            }
            let pivot = w.get(k, k);
            for i in (k + 1)..=i_hi {
                let m = w.get(i, k) / pivot;
                if m != T::ZERO {
                    let j_hi = (k + kuw).min(n - 1);
                    for j in (k + 1)..=j_hi {
                        let v = w.get(i, j) - m * w.get(k, j);
                        w.set(i, j, v);
                    }
                    let xk = x[k];
                    x[i] -= m * xk;
                }
                w.set(i, k, T::ZERO);
            }
        }

        for i in (0..n).rev() {
            let j_hi = (i + kuw).min(n - 1);
            let mut s = x[i];
            for j in (i + 1)..=j_hi {
                s -= w.get(i, j) * x[j];
            }
            x[i] = s / w.get(i, i);
        }
        Ok(x)
    }
}

impl BandedMatrix<f64> {
    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n, self.n);
        for (i, j, v) in self.iter_nonzeros() {
            d.set(i, j, v);
        }
        d
    }

    /// In-band entries that are not exactly zero, row by row.
    pub fn iter_nonzeros(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            let j_lo = i.saturating_sub(self.kl);
            let j_hi = (i + self.ku).min(self.n - 1);
            (j_lo..=j_hi).filter_map(move |j| {
                let v = self.get(i, j);
                (v != 0.0).then_some((i, j, v))
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn dense_solve_oracle(a: &DenseMatrix, b: &[f64]) -> Vec<f64> {
        a.solve(b).unwrap()
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let m = BandedMatrix::<f64>::identity(5);
        let b = [1.0, -2.0, 3.0, 0.5, 4.0];
        let x = m.solve(&b).unwrap();
        for i in 0..5 {
            assert_eq!(x[i], b[i]);
        }
    }

    #[test]
    fn banded_solve_matches_dense_lu() {
        // deterministic pseudo-random band, order 20, kl=2, ku=3
        let n = 20;
        let mut m = BandedMatrix::<f64>::zeros(n, 2, 3);
        let mut state = 1u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        for i in 0..n {
            for j in i.saturating_sub(2)..=(i + 3).min(n - 1) {
                m.set(i, j, next());
            }
            // diagonal dominance not required, pivoting handles it, but keep
            // the system comfortably nonsingular
            m.set(i, i, m.get(i, i) + 4.0);
        }
        let b: Vec<f64> = (0..n).map(|_| next()).collect();
        let x = m.solve(&b).unwrap();
        let xd = dense_solve_oracle(&m.to_dense(), &b);
        for i in 0..n {
            assert!((x[i] - xd[i]).abs() < 1e-12, "entry {i}: {} vs {}", x[i], xd[i]);
        }
    }

    #[test]
    fn complex_tridiagonal_solve_matches_naive_elimination() {
        // (T - tau I) zeta = e1 with skew-symmetric tridiagonal T, the shape
        // solved by the partial fraction route
        let n = 6;
        let tau = Complex64::new(3.0, -(3.0f64).sqrt());
        let betas = [0.7, 1.3, 0.2, 2.1, 0.9];
        let mut m = BandedMatrix::<Complex64>::zeros(n, 1, 1);
        for i in 0..n {
            m.set(i, i, -tau);
        }
        for (i, &b) in betas.iter().enumerate() {
            m.set(i + 1, i, Complex64::new(b, 0.0));
            m.set(i, i + 1, Complex64::new(-b, 0.0));
        }
        let mut e1 = vec![Complex64::new(0.0, 0.0); n];
        e1[0] = Complex64::new(1.0, 0.0);
        let x = m.solve(&e1).unwrap();

        // naive dense complex Gaussian elimination oracle
        let mut a = vec![vec![Complex64::new(0.0, 0.0); n + 1]; n];
        for i in 0..n {
            for j in 0..n {
                a[i][j] = m.get(i, j);
            }
            a[i][n] = e1[i];
        }
        for k in 0..n {
            let mut p = k;
            for i in (k + 1)..n {
                if a[i][k].norm_sqr() > a[p][k].norm_sqr() {
                    p = i;
                }
            }
            a.swap(k, p);
            for i in (k + 1)..n {
                let f = a[i][k] / a[k][k];
                for j in k..=n {
                    let v = a[k][j];
                    a[i][j] -= f * v;
                }
            }
        }
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        for i in (0..n).rev() {
            let mut s = a[i][n];
            for j in (i + 1)..n {
                s -= a[i][j] * y[j];
            }
            y[i] = s / a[i][i];
        }

        for i in 0..n {
            assert!((x[i] - y[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn singular_band_is_reported() {
        let mut m = BandedMatrix::<f64>::zeros(3, 1, 1);
        m.set(0, 0, 1.0);
        m.set(1, 1, 1.0);
        // last row identically zero
        assert_eq!(m.solve(&[1.0, 1.0, 1.0]).unwrap_err(), Error::SingularMatrix);
    }

    #[test]
    fn out_of_band_reads_are_zero() {
        let mut m = BandedMatrix::<f64>::zeros(4, 1, 1);
        m.set(0, 0, 5.0);
        assert_eq!(m.get(0, 3), 0.0);
        assert_eq!(m.get(3, 0), 0.0);
    }

    #[test]
    fn product_bandwidths_add() {
        let a = BandedMatrix::<f64>::zeros(8, 1, 1);
        let b = BandedMatrix::<f64>::zeros(8, 2, 1);
        let c = a.mul(&b);
        assert_eq!(c.lower_bandwidth(), 3);
        assert_eq!(c.upper_bandwidth(), 2);
    }
}
