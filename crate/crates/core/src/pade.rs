//! Diagonal Padé approximations of the exponential.
//!
//! The degree-s diagonal Padé approximant is `R_s(z) = D_s(z) / D_s(-z)`
//! with the polynomial
//!
//! ```text
//! D_s(z) = sum_{j=0}^{s}  s! (2s-j)! / ((2s)! j! (s-j)!)  z^j,
//! ```
//!
//! which is also the stability function of the Gauss collocation integrator
//! of order `2s`. [`PadeData`] carries the coefficients, the poles and
//! weights of the partial fraction form
//! `R_s(z) = (-1)^s + sum_j w_j / (z - tau_j)`, and the Lipschitz constant
//! `kappa_s = sum_j |w_j| / Re(tau_j)^2` of `R_s` on the skew-adjoint
//! matrices of any Q-geometry.
//!
//! All poles lie in the open right half plane and occur in conjugate pairs
//! (or are real); both facts are relied on downstream and enforced here.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::Error;
use crate::linalg::{DenseMatrix, QSpace};
use crate::math;
use crate::Result;

/// Supported degree range of [`PadeData::new`].
pub const MAX_DEGREE: usize = 8;

/// Dense-path threshold for [`cayley_apply`] callers (see the nonlinear
/// solvers); systems of this order or below are solved by dense LU.
pub const DENSE_THRESHOLD: usize = 64;

/// Coefficients, poles, weights and Lipschitz constant of a diagonal Padé
/// approximant of the exponential.
#[derive(Debug, Clone)]
pub struct PadeData {
    degree: usize,
    /// `a_0 ..= a_s` of `D_s`; exact rationals rounded once to `f64`.
    coeffs: Vec<f64>,
    /// Poles of `R_s` (zeros of `D_s(-z)`), sorted by real then imaginary
    /// part; conjugate pairs are exact by construction.
    poles: Vec<Complex64>,
    /// Residues matching `poles`.
    weights: Vec<Complex64>,
    kappa: f64,
}

impl PadeData {
    /// Build the approximant of the given degree (1 ..= 8).
    ///
    /// Coefficients come from the closed formula in exact integer
    /// arithmetic. Poles are found as roots of `D_s(-z)` by a simultaneous
    /// (Weierstrass) iteration followed by Newton polishing, then conjugate
    /// pairs are symmetrized exactly. Weights are the residues
    /// `D_s(tau) / (-D_s'(-tau))`. For degrees up to 3 the result is
    /// cross-checked against hardcoded reference constants.
    pub fn new(degree: usize) -> Result<Self> {
        if degree == 0 || degree > MAX_DEGREE {
            return Err(Error::UnsupportedDegree(degree));
        }
        let coeffs = exact_coefficients(degree);
        let poles = solve_poles(&coeffs)?;
        let weights: Vec<Complex64> = poles.iter().map(|&t| residue_at(&coeffs, t)).collect();
        let kappa = poles
            .iter()
            .zip(&weights)
            .map(|(t, w)| w.norm() / (t.re * t.re))
            .sum();

        let data = Self {
            degree,
            coeffs,
            poles,
            weights,
            kappa,
        };
        data.cross_check_small_degrees()?;
        Ok(data)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `a_0 ..= a_s` of the polynomial `D_s`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn poles(&self) -> &[Complex64] {
        &self.poles
    }

    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    /// Lipschitz constant of `R_s` on skew-adjoint matrices.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// `(-1)^s`, the constant term of the partial fraction form.
    pub fn pfd_constant(&self) -> f64 {
        if self.degree % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// `D_s(z)` by Horner.
    pub fn eval_d(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &a in self.coeffs.iter().rev() {
            acc = acc * z + a;
        }
        acc
    }

    /// `R_s(z) = D_s(z) / D_s(-z)`.
    ///
    /// Reports [`Error::PoleHit`] when the denominator underflows to zero.
    pub fn eval_scalar(&self, z: Complex64) -> Result<Complex64> {
        let den = self.eval_d(-z);
        if den.norm() <= 1e-300 {
            return Err(Error::PoleHit);
        }
        Ok(self.eval_d(z) / den)
    }

    /// `R_s(z)` through the partial fraction form
    /// `(-1)^s + sum_j w_j / (z - tau_j)`.
    pub fn eval_scalar_pfd(&self, z: Complex64) -> Result<Complex64> {
        let mut acc = Complex64::new(self.pfd_constant(), 0.0);
        for (t, w) in self.poles.iter().zip(&self.weights) {
            let d = z - t;
            if d.norm() <= 1e-300 {
                return Err(Error::PoleHit);
            }
            acc += w / d;
        }
        Ok(acc)
    }

    /// Partial fraction terms grouped for real arithmetic reuse: one
    /// representative per conjugate pair (the one with positive imaginary
    /// part, contributing twice its real part) plus the real poles.
    ///
    /// The returned group count is `ceil(s / 2)`, the number of shifted
    /// systems the partial fraction solver actually has to solve.
    pub fn pfd_groups(&self) -> PfdGroups {
        let mut pairs = Vec::new();
        let mut reals = Vec::new();
        for (&t, &w) in self.poles.iter().zip(&self.weights) {
            if t.im > 0.0 {
                pairs.push((t, w));
            } else if t.im == 0.0 {
                reals.push((t.re, w.re));
            }
        }
        PfdGroups { pairs, reals }
    }

    /// Dense-matrix evaluation `R_s(A) = D_s(-A)^{-1} D_s(A)`.
    ///
    /// Both polynomials are evaluated by matrix Horner; the denominator is
    /// factored once. Intended for small `A` (reference paths and
    /// validation).
    pub fn eval_matrix_dense(&self, a: &DenseMatrix) -> Result<DenseMatrix> {
        let n = a.rows();
        let horner = |sign: f64| -> DenseMatrix {
            let mut acc = DenseMatrix::identity(n).scale(self.coeffs[self.degree]);
            for j in (0..self.degree).rev() {
                acc = a.scale(sign).matmul(&acc);
                for i in 0..n {
                    acc.add_at(i, i, self.coeffs[j]);
                }
            }
            acc
        };
        let num = horner(1.0);
        let den = horner(-1.0);
        den.solve_mat(&num)
    }

    fn cross_check_small_degrees(&self) -> Result<()> {
        let reference: &[(Complex64, Complex64)] = match self.degree {
            1 => &[(
                Complex64::new(2.0, 0.0),
                Complex64::new(-4.0, 0.0),
            )],
            2 => &[
                (
                    Complex64::new(3.0, -SQRT3),
                    Complex64::new(6.0, 6.0 * SQRT3),
                ),
                (
                    Complex64::new(3.0, SQRT3),
                    Complex64::new(6.0, -6.0 * SQRT3),
                ),
            ],
            3 => &[
                (
                    Complex64::new(3.67781464537391, -3.50876191956744),
                    Complex64::new(16.6012701235744, 20.5831842793869),
                ),
                (
                    Complex64::new(3.67781464537391, 3.50876191956744),
                    Complex64::new(16.6012701235744, -20.5831842793869),
                ),
                (
                    Complex64::new(4.64437070925217, 0.0),
                    Complex64::new(-57.2025402471486, 0.0),
                ),
            ],
            _ => return Ok(()),
        };
        for (t_ref, w_ref) in reference {
            let matched = self
                .poles
                .iter()
                .zip(&self.weights)
                .any(|(t, w)| (t - t_ref).norm() <= 1e-10 && (w - w_ref).norm() <= 1e-9);
            if !matched {
                return Err(Error::InternalCheck(
                    "computed Padé poles/weights disagree with reference constants",
                ));
            }
        }
        Ok(())
    }
}

const SQRT3: f64 = 1.7320508075688772;

/// Conjugate-pair representatives and real poles of the partial fraction
/// form; see [`PadeData::pfd_groups`].
#[derive(Debug, Clone)]
pub struct PfdGroups {
    /// One `(pole, weight)` per conjugate pair, with positive imaginary part.
    pub pairs: Vec<(Complex64, Complex64)>,
    /// Real `(pole, weight)` terms.
    pub reals: Vec<(f64, f64)>,
}

impl PfdGroups {
    /// Number of shifted linear systems a partial-fraction solve needs.
    pub fn system_count(&self) -> usize {
        self.pairs.len() + self.reals.len()
    }
}

/// `a_j = s! (2s-j)! / ((2s)! j! (s-j)!)` in exact integer arithmetic.
fn exact_coefficients(s: usize) -> Vec<f64> {
    let fact = |k: usize| -> u128 {
        let mut f: u128 = 1;
        for i in 2..=k {
            f = f.checked_mul(i as u128).expect("factorial overflow");
        }
        f
    };
    let gcd = |mut a: u128, mut b: u128| -> u128 {
        while b != 0 {
            let t = a % b;
            a = b;
            b = t;
        }
        a
    };
    (0..=s)
        .map(|j| {
            let mut num = fact(s).checked_mul(fact(2 * s - j)).expect("overflow");
            let mut den = fact(2 * s)
                .checked_mul(fact(j))
                .and_then(|d| d.checked_mul(fact(s - j)))
                .expect("overflow");
            let g = gcd(num, den);
            num /= g;
            den /= g;
            num as f64 / den as f64
        })
        .collect()
}

/// Coefficients of `q(z) = D_s(-z)` whose roots are the poles.
fn denominator_coeffs(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .map(|(j, &a)| if j % 2 == 0 { a } else { -a })
        .collect()
}

fn poly_eval(c: &[f64], z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &a in c.iter().rev() {
        acc = acc * z + a;
    }
    acc
}

fn poly_deriv_eval(c: &[f64], z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for j in (1..c.len()).rev() {
        acc = acc * z + c[j] * j as f64;
    }
    acc
}

/// All roots of `D_s(-z)`: simultaneous Weierstrass iteration, Newton
/// polishing, then exact conjugate symmetrization.
fn solve_poles(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let q = denominator_coeffs(coeffs);
    let s = q.len() - 1;
    let lead = q[s];
    let monic: Vec<f64> = q.iter().map(|&c| c / lead).collect();

    // Cauchy bound for the root radius
    let radius = 1.0 + monic[..s]
        .iter()
        .fold(0.0f64, |m, &c| m.max(math::abs(c)));

    // asymmetric starting points on a circle
    let mut roots: Vec<Complex64> = (0..s)
        .map(|j| {
            let angle = 2.0 * core::f64::consts::PI * (j as f64 + 0.25) / s as f64;
            Complex64::new(
                0.7 * radius * math::cos(angle),
                0.7 * radius * math::sin(angle),
            ) + Complex64::new(0.3, 0.2)
        })
        .collect();

    for _ in 0..200 {
        let mut max_step = 0.0f64;
        for j in 0..s {
            let mut denom = Complex64::new(1.0, 0.0);
            for k in 0..s {
                if k != j {
                    denom *= roots[j] - roots[k];
                }
            }
            let step = poly_eval(&monic, roots[j]) / denom;
            roots[j] -= step;
            max_step = max_step.max(step.norm());
        }
        if max_step < 1e-14 * radius {
            break;
        }
    }

    // Newton polishing on the original (non-monic) polynomial
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let d = poly_deriv_eval(&q, *r);
            if d.norm() <= 1e-300 {
                break;
            }
            *r -= poly_eval(&q, *r) / d;
        }
    }

    // classify and symmetrize
    let mut reals = Vec::new();
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for r in roots {
        if math::abs(r.im) <= 1e-8 * r.norm() {
            reals.push(Complex64::new(r.re, 0.0));
        } else if r.im > 0.0 {
            upper.push(r);
        } else {
            lower.push(r);
        }
    }
    if upper.len() != lower.len() {
        return Err(Error::InternalCheck(
            "complex poles did not come out in conjugate pairs",
        ));
    }
    let by_re = |a: &Complex64, b: &Complex64| {
        a.re.partial_cmp(&b.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    };
    upper.sort_by(by_re);
    lower.sort_by(|a, b| by_re(&a.conj(), &b.conj()));

    let mut out = Vec::with_capacity(reals.len() + 2 * upper.len());
    for (u, l) in upper.iter().zip(&lower) {
        let avg = 0.5 * (u + l.conj());
        out.push(avg.conj());
        out.push(avg);
    }
    out.extend(reals);
    out.sort_by(by_re);

    for t in &out {
        if t.re <= 0.0 {
            return Err(Error::InternalCheck(
                "a Padé pole left the open right half plane",
            ));
        }
    }
    Ok(out)
}

/// Residue of `R_s` at the simple pole `tau`: `D_s(tau) / (-D_s'(-tau))`.
fn residue_at(coeffs: &[f64], tau: Complex64) -> Complex64 {
    let q = denominator_coeffs(coeffs);
    poly_eval(coeffs, tau) / poly_deriv_eval(&q, tau)
}

/// Apply the Cayley transform `C(A) = (I - A)^{-1} (I + A)` to a vector,
/// with `A` given as an action. Dense LU path for small systems; the
/// large-system route goes through the Krylov solvers instead.
///
/// For `A` skew-adjoint in the Q-geometry the denominator is provably
/// nonsingular, so [`Error::SingularMatrix`] here signals a violated input
/// contract rather than a numerical edge.
pub fn cayley_apply<F>(space: &QSpace, a_apply: F, y: &[f64]) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = space.dim();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    let a = DenseMatrix::from_action(n, &a_apply);
    let mut m = DenseMatrix::identity(n);
    for i in 0..n {
        for j in 0..n {
            m.add_at(i, j, -a.get(i, j));
        }
    }
    let mut rhs = a.matvec(y);
    for i in 0..n {
        rhs[i] += y[i];
    }
    m.solve(&rhs)
}
