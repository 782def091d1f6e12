//! Cyclic Jacobi eigendecomposition for dense symmetric matrices.
//!
//! Used at desk scale (orders up to a few hundred) where its robustness and
//! orthogonal-to-machine-precision eigenvectors matter more than speed.

use alloc::vec::Vec;

use super::dense::DenseMatrix;
use crate::math;

/// Eigendecomposition `A = V diag(values) V^T` of a symmetric matrix.
///
/// Only the lower triangle of the input is read. Eigenvalues are returned in
/// ascending order with matching eigenvector columns.
pub fn sym_eigen(a: &DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    let n = a.rows();
    assert_eq!(n, a.cols(), "sym_eigen expects a square matrix");
    let mut m = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            m.set(i, j, a.get(i, j));
            m.set(j, i, a.get(i, j));
        }
    }
    let mut v = DenseMatrix::identity(n);

    let frob = {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += m.get(i, j) * m.get(i, j);
            }
        }
        math::sqrt(s)
    };
    let tol = 1e-15 * frob.max(1e-300);

    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m.get(p, q) * m.get(p, q);
            }
        }
        if math::sqrt(2.0 * off) <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if math::abs(apq) <= tol / (n as f64) {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                // classic Jacobi rotation
                let theta = (aqq - app) / (2.0 * apq);
                let t = {
                    let s = if theta >= 0.0 { 1.0 } else { -1.0 };
                    s / (math::abs(theta) + math::sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / math::sqrt(t * t + 1.0);
                let s = t * c;

                for k in 0..n {
                    let akp = m.get(k, p);
                    let akq = m.get(k, q);
                    m.set(k, p, c * akp - s * akq);
                    m.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = m.get(p, k);
                    let aqk = m.get(q, k);
                    m.set(p, k, c * apk - s * aqk);
                    m.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(i, i).partial_cmp(&m.get(j, j)).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| m.get(i, i)).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            vectors.set(row, col, v.get(row, src));
        }
    }
    (values, vectors)
}

/// Spectral norm `||A||_2` of a general dense matrix via `A^T A`.
pub fn spectral_norm(a: &DenseMatrix) -> f64 {
    let ata = a.transpose().matmul(a);
    let (vals, _) = sym_eigen(&ata);
    math::sqrt(vals.last().copied().unwrap_or(0.0).max(0.0))
}
