//! The Q-geometry: symmetric positive definite `Q`, its Cholesky factor, and
//! the inner product, norm and energy it induces.

use alloc::vec;
use alloc::vec::Vec;

use super::banded::BandedMatrix;
use super::dense::DenseMatrix;
use crate::error::Error;
use crate::math;
use crate::Result;

/// Symmetric banded matrix storing only the lower band, so symmetry holds by
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBanded {
    n: usize,
    sb: usize,
    /// `data[d * n + j]` holds entry `(j + d, j)` for sub-offset `d = i - j`.
    data: Vec<f64>,
}

impl SymBanded {
    pub fn zeros(n: usize, semibandwidth: usize) -> Self {
        assert!(n > 0, "order must be positive");
        let sb = semibandwidth.min(n - 1);
        Self {
            n,
            sb,
            data: vec![0.0; (sb + 1) * n],
        }
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), 0);
        for (j, &v) in diag.iter().enumerate() {
            m.set(j, j, v);
        }
        m
    }

    /// Extract the lower band of a dense symmetric matrix. The upper triangle
    /// of the input is ignored.
    pub fn from_dense_lower(a: &DenseMatrix, semibandwidth: usize) -> Self {
        let n = a.rows();
        let mut m = Self::zeros(n, semibandwidth);
        for j in 0..n {
            for i in j..=(j + m.sb).min(n - 1) {
                m.set(i, j, a.get(i, j));
            }
        }
        m
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn semibandwidth(&self) -> usize {
        self.sb
    }

    /// Symmetric lookup; out-of-band entries are exact zero.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        if d > self.sb {
            return 0.0;
        }
        self.data[d * self.n + lo]
    }

    /// Set entry `(i, j)` with `i >= j` (and its mirror).
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(i >= j, "set expects the lower triangle");
        let d = i - j;
        assert!(d <= self.sb, "entry ({i},{j}) outside semibandwidth {}", self.sb);
        self.data[d * self.n + j] = v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "matvec dimension mismatch");
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            y[j] += self.data[j] * x[j];
        }
        for d in 1..=self.sb {
            let row = &self.data[d * self.n..];
            for j in 0..self.n - d {
                let v = row[j];
                if v != 0.0 {
                    y[j + d] += v * x[j];
                    y[j] += v * x[j + d];
                }
            }
        }
        y
    }

    pub fn max_modulus(&self) -> f64 {
        let mut m = 0.0;
        for &v in &self.data {
            let a = math::abs(v);
            if a > m {
                m = a;
            }
        }
        m
    }

    /// View as a general banded matrix (both triangles populated).
    pub fn to_banded(&self) -> BandedMatrix<f64> {
        let mut b = BandedMatrix::zeros(self.n, self.sb, self.sb);
        for j in 0..self.n {
            for i in j..=(j + self.sb).min(self.n - 1) {
                let v = self.get(i, j);
                if v != 0.0 {
                    b.set(i, j, v);
                    if i != j {
                        b.set(j, i, v);
                    }
                }
            }
        }
        b
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                d.set(i, j, self.get(i, j));
            }
        }
        d
    }
}

/// Symmetric positive definite `Q` together with its lower Cholesky factor,
/// providing the Q-inner product, Q-norm and the quadratic energy.
///
/// The factor is computed once at construction; a failed factorization means
/// the input was not positive definite.
#[derive(Debug, Clone)]
pub struct QSpace {
    q: SymBanded,
    /// Lower-triangular banded Cholesky factor `L` with `L L^T = Q`.
    chol: BandedMatrix<f64>,
}

impl QSpace {
    pub fn new(q: SymBanded) -> Result<Self> {
        let chol = banded_cholesky(&q)?;
        Ok(Self { q, chol })
    }

    /// Q = I of order `n`.
    pub fn standard(n: usize) -> Self {
        Self::new(SymBanded::diagonal(&vec![1.0; n])).expect("identity is SPD")
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.q.order()
    }

    pub fn q(&self) -> &SymBanded {
        &self.q
    }

    pub fn chol(&self) -> &BandedMatrix<f64> {
        &self.chol
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `Q x`.
    pub fn apply_q(&self, x: &[f64]) -> Vec<f64> {
        self.q.matvec(x)
    }

    /// `<x, y>_Q = x^T Q y`.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        self.check_dim(y)?;
        Ok(math::dot(x, &self.q.matvec(y)))
    }

    /// `||x||_Q`, computed as the Euclidean norm of `L^T x` so near-null
    /// vectors do not suffer cancellation in `x^T Q x`.
    pub fn norm(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(math::norm2(&self.chol_t_matvec(x)))
    }

    /// Energy `H(y) = y^T Q y / 2`.
    pub fn energy(&self, y: &[f64]) -> Result<f64> {
        Ok(0.5 * self.inner(y, y)?)
    }

    /// Relative energy deviation `|1 - ||x||_Q / ref_norm|`.
    pub fn energy_deviation(&self, x: &[f64], ref_norm: f64) -> f64 {
        math::abs(1.0 - math::norm2(&self.chol_t_matvec(x)) / ref_norm)
    }

    /// `L^T x` (maps into Cholesky coordinates).
    pub fn chol_t_matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let sb = self.chol.lower_bandwidth();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let j_hi = (i + sb).min(n - 1);
            let mut s = 0.0;
            for j in i..=j_hi {
                s += self.chol.get(j, i) * x[j];
            }
            y[i] = s;
        }
        y
    }

    /// Solve `L^T y = z` (maps back from Cholesky coordinates).
    pub fn chol_t_solve(&self, z: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let sb = self.chol.lower_bandwidth();
        let mut y = vec![0.0; n];
        for i in (0..n).rev() {
            let j_hi = (i + sb).min(n - 1);
            let mut s = z[i];
            for j in (i + 1)..=j_hi {
                s -= self.chol.get(j, i) * y[j];
            }
            y[i] = s / self.chol.get(i, i);
        }
        y
    }
}

/// Banded Cholesky `Q = L L^T`; the factor inherits the semibandwidth.
fn banded_cholesky(q: &SymBanded) -> Result<BandedMatrix<f64>> {
    let n = q.order();
    let sb = q.semibandwidth();
    let mut l = BandedMatrix::zeros(n, sb, 0);
    for j in 0..n {
        let k_lo = j.saturating_sub(sb);
        let mut d = q.get(j, j);
        for k in k_lo..j {
            let v = l.get(j, k);
            d -= v * v;
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        let djj = math::sqrt(d);
        l.set(j, j, djj);
        for i in (j + 1)..=(j + sb).min(n - 1) {
            let mut s = q.get(i, j);
            let k_lo = i.saturating_sub(sb).max(k_lo);
            for k in k_lo..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / djj);
        }
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_spd() -> SymBanded {
        // tridiagonal SPD: 2 on the diagonal, -1 off
        let n = 6;
        let mut q = SymBanded::zeros(n, 1);
        for i in 0..n {
            q.set(i, i, 2.0);
            if i > 0 {
                q.set(i, i - 1, -1.0);
            }
        }
        q
    }

    #[test]
    fn cholesky_reconstructs_q() {
        let q = sample_spd();
        let space = QSpace::new(q.clone()).unwrap();
        let l = space.chol().to_dense();
        let llt = l.matmul(&l.transpose());
        let qd = q.to_dense();
        let scale = qd.max_norm();
        for i in 0..q.order() {
            for j in 0..q.order() {
                assert!((llt.get(i, j) - qd.get(i, j)).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn indefinite_matrix_rejected() {
        let mut q = SymBanded::zeros(2, 1);
        q.set(0, 0, 1.0);
        q.set(1, 0, 3.0);
        q.set(1, 1, 1.0);
        assert_eq!(QSpace::new(q).unwrap_err(), Error::NotPositiveDefinite);
    }

    #[test]
    fn inner_product_is_plain_dot_for_identity() {
        let space = QSpace::standard(2);
        assert_eq!(space.inner(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(space.norm(&[3.0, 4.0]).unwrap(), 5.0);
    }

    #[test]
    fn norm_and_inner_agree() {
        let space = QSpace::new(sample_spd()).unwrap();
        let x = [0.3, -1.2, 0.7, 2.2, -0.4, 1.0];
        let n = space.norm(&x).unwrap();
        let ip = space.inner(&x, &x).unwrap();
        assert!((n * n - ip).abs() < 1e-12 * ip.abs().max(1.0));
    }

    #[test]
    fn energy_of_zero_vector_is_zero() {
        let space = QSpace::new(sample_spd()).unwrap();
        assert_eq!(space.energy(&[0.0; 6]).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let space = QSpace::standard(3);
        assert!(matches!(
            space.inner(&[1.0, 2.0], &[1.0, 2.0, 3.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn chol_t_solve_inverts_chol_t_matvec() {
        let space = QSpace::new(sample_spd()).unwrap();
        let x = [1.0, -2.0, 0.5, 0.0, 3.0, -1.5];
        let z = space.chol_t_matvec(&x);
        let back = space.chol_t_solve(&z);
        for i in 0..6 {
            assert!((back[i] - x[i]).abs() < 1e-13);
        }
    }
}
