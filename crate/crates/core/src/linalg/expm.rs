//! Matrix exponential for small skew-symmetric matrices.
//!
//! Scaling and squaring with the degree-13 diagonal Padé kernel. For skew
//! input the kernel output is orthogonal up to rounding (a diagonal Padé
//! approximant of a skew matrix lies in the orthogonal group), and squaring
//! preserves that, so the result stays orthogonal to ~1e-13 regardless of
//! the norm of the input.

use super::dense::DenseMatrix;
use crate::error::Error;
use crate::math;
use crate::Result;

/// Degree-13 diagonal Padé numerator coefficients (Higham's expm kernel).
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Largest 1-norm handled by the degree-13 kernel without scaling.
const THETA13: f64 = 5.371920351148152;

/// `exp(H)` for a skew-symmetric `H` of small order.
///
/// Rejects input with `||H + H^T||_max > 1e-13 ||H||_max` as
/// [`Error::InvalidInput`]; the skewness is what guarantees an orthogonal
/// result.
pub fn small_skew_expm(h: &DenseMatrix) -> Result<DenseMatrix> {
    let n = h.rows();
    if n != h.cols() {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: h.cols(),
        });
    }
    let scale = h.max_norm();
    let mut skew_defect = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = math::abs(h.get(i, j) + h.get(j, i));
            if d > skew_defect {
                skew_defect = d;
            }
        }
    }
    if scale > 0.0 && skew_defect > 1e-13 * scale {
        return Err(Error::InvalidInput("matrix is not skew-symmetric"));
    }
    if scale == 0.0 {
        return Ok(DenseMatrix::identity(n));
    }

    // scaling step count so the scaled 1-norm is below the kernel threshold
    let nrm = h.one_norm();
    let squarings = if nrm > THETA13 {
        math::ceil(math::log2(nrm / THETA13)) as u32
    } else {
        0
    };
    let a = h.scale(1.0 / math::powi(2.0, squarings as i32));

    let a2 = a.matmul(&a);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);
    let ident = DenseMatrix::identity(n);

    // u = a * (a6*(b13 a6 + b11 a4 + b9 a2) + b7 a6 + b5 a4 + b3 a2 + b1 I)
    let inner_u = a6
        .scale(PADE13[13])
        .add(&a4.scale(PADE13[11]))
        .add(&a2.scale(PADE13[9]));
    let u = a.matmul(
        &a6.matmul(&inner_u)
            .add(&a6.scale(PADE13[7]))
            .add(&a4.scale(PADE13[5]))
            .add(&a2.scale(PADE13[3]))
            .add(&ident.scale(PADE13[1])),
    );
    // v = a6*(b12 a6 + b10 a4 + b8 a2) + b6 a6 + b4 a4 + b2 a2 + b0 I
    let inner_v = a6
        .scale(PADE13[12])
        .add(&a4.scale(PADE13[10]))
        .add(&a2.scale(PADE13[8]));
    let v = a6
        .matmul(&inner_v)
        .add(&a6.scale(PADE13[6]))
        .add(&a4.scale(PADE13[4]))
        .add(&a2.scale(PADE13[2]))
        .add(&ident.scale(PADE13[0]));

    // (v - u) X = (v + u)
    let mut r = v.sub(&u).solve_mat(&v.add(&u))?;
    for _ in 0..squarings {
        r = r.matmul(&r);
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigen::sym_eigen;

    /// Eigendecomposition-based exponential of a skew matrix: with
    /// C = H^T H = V diag(th^2) V^T, exp(H) = V cos(th) V^T + H V sinc(th) V^T.
    fn skew_expm_eigen_oracle(h: &DenseMatrix) -> DenseMatrix {
        let n = h.rows();
        let c = h.transpose().matmul(h);
        let (vals, v) = sym_eigen(&c);
        let theta: Vec<f64> = vals.iter().map(|&l| l.max(0.0).sqrt()).collect();
        let mut cos_d = DenseMatrix::zeros(n, n);
        let mut sinc_d = DenseMatrix::zeros(n, n);
        for i in 0..n {
            cos_d.set(i, i, theta[i].cos());
            let sc = if theta[i] > 1e-150 {
                theta[i].sin() / theta[i]
            } else {
                1.0
            };
            sinc_d.set(i, i, sc);
        }
        let vt = v.transpose();
        v.matmul(&cos_d)
            .matmul(&vt)
            .add(&h.matmul(&v.matmul(&sinc_d).matmul(&vt)))
    }

    fn random_skew(n: usize, seed: u64) -> DenseMatrix {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let mut h = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..i {
                let v = next();
                h.set(i, j, v);
                h.set(j, i, -v);
            }
        }
        h
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let h = DenseMatrix::zeros(4, 4);
        let e = small_skew_expm(&h).unwrap();
        assert_eq!(e, DenseMatrix::identity(4));
    }

    #[test]
    fn two_by_two_rotation_closed_form() {
        let theta = core::f64::consts::FRAC_PI_2;
        let mut h = DenseMatrix::zeros(2, 2);
        h.set(0, 1, theta);
        h.set(1, 0, -theta);
        let e = small_skew_expm(&h).unwrap();
        // exp = [[cos, sin], [-sin, cos]] = [[0, 1], [-1, 0]] at pi/2
        assert!((e.get(0, 0)).abs() < 1e-13);
        assert!((e.get(0, 1) - 1.0).abs() < 1e-13);
        assert!((e.get(1, 0) + 1.0).abs() < 1e-13);
        assert!((e.get(1, 1)).abs() < 1e-13);
    }

    #[test]
    fn matches_eigendecomposition_oracle() {
        let h = random_skew(8, 42).scale(3.0);
        let e = small_skew_expm(&h).unwrap();
        let o = skew_expm_eigen_oracle(&h);
        let mut diff = 0.0;
        for i in 0..8 {
            for j in 0..8 {
                diff = diff.max((e.get(i, j) - o.get(i, j)).abs());
            }
        }
        assert!(diff < 1e-11, "max entry difference {diff}");
    }

    #[test]
    fn result_is_orthogonal_with_unit_determinant() {
        for seed in 1..=6u64 {
            let n = 3 + (seed as usize % 18);
            let h = random_skew(n, seed).scale(seed as f64);
            let e = small_skew_expm(&h).unwrap();
            let ete = e.transpose().matmul(&e);
            let mut dev = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let want = if i == j { 1.0 } else { 0.0 };
                    dev = dev.max((ete.get(i, j) - want).abs());
                }
            }
            assert!(dev <= 1e-12, "orthogonality defect {dev} at n={n}");
            assert!((e.det() - 1.0).abs() <= 1e-10, "determinant {}", e.det());
        }
    }

    #[test]
    fn non_skew_input_rejected() {
        let mut h = DenseMatrix::zeros(2, 2);
        h.set(0, 1, 1.0);
        h.set(1, 0, -0.5);
        assert!(matches!(
            small_skew_expm(&h),
            Err(Error::InvalidInput(_))
        ));
    }
}
