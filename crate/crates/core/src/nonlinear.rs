//! Energy-preserving solvers for the implicit midpoint rule with
//! state-dependent structure matrix.
//!
//! The midpoint step for `dy/dt = J(y) Q y` solves the fixed-point equation
//!
//! ```text
//! y1 = C( (h/2) J((y0 + y1)/2) Q ) y0 =: Phi_h(y1)
//! ```
//!
//! with the Cayley transform `C(A) = (I - A)^{-1} (I + A)`. Because the
//! Cayley transform of a skew-adjoint matrix preserves the Q-norm, *every*
//! value `Phi_h(x)` has the Q-norm of `y0` - whatever `x` is. Both solvers
//! exploit this: the fixed-point iteration `x_{k+1} = Phi_h(x_k)` has
//! energy-conserving iterates from the first step on, and the BFGS solver
//! for `F_h(x) = x - Phi_h(x)` tracks the "Cayley iterates"
//! `w_k = Phi_h(x_k)`, which converge superlinearly alongside `x_k` and are
//! returned as the energy-bearing solution.
//!
//! The stopping measure is the solve-free residual
//! `r~(x) = (I - (h/2) J(m) Q) x - (I + (h/2) J(m) Q) y0` at the midpoint
//! `m = (y0 + x)/2`, which needs one `J` evaluation and two matrix-vector
//! products but no linear solve.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::krylov::{self, TraceRow};
use crate::linalg::{DenseMatrix, QSpace};
use crate::math::{self, SplitMix64, Timer};
use crate::models::PoissonModel;
use crate::pade::{self, PadeData, DENSE_THRESHOLD};
use crate::stepping::{step_count, TrajectoryReport};
use crate::Result;

/// Nonlinear iteration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IterationMethod {
    FixedPoint,
    CayleyBfgs,
}

impl IterationMethod {
    pub fn name(&self) -> &'static str {
        match self {
            IterationMethod::FixedPoint => "fp",
            IterationMethod::CayleyBfgs => "cayley-bfgs",
        }
    }
}

/// Result of a nonlinear midpoint solve.
#[derive(Debug, Clone)]
pub struct NonlinearSolveReport {
    /// The energy-bearing solution iterate (`x_k` for the fixed point,
    /// `w_k` for Cayley-BFGS).
    pub solution: Vec<f64>,
    /// Number of Cayley-transform evaluations performed.
    pub k_used: usize,
    pub converged: bool,
    pub method: IterationMethod,
    /// Per-iterate residual and energy deviation of the energy-bearing
    /// iterate (row `k` is the k-th Cayley evaluation).
    pub trace: Vec<TraceRow>,
}

/// One midpoint step as a nonlinear problem: frozen `y0`, step size and
/// model, with the routing threshold between the dense Cayley path and the
/// Krylov path.
pub struct MidpointProblem<'a> {
    model: &'a PoissonModel,
    y0: Vec<f64>,
    h: f64,
    dense_threshold: usize,
    inner_rtol: f64,
    inner_k_max: usize,
    pade1: PadeData,
}

impl<'a> MidpointProblem<'a> {
    /// Freeze a step. Validates on five random probe states that
    /// `Q J(z) Q` is skew-symmetric, i.e. that `J(z) Q` is skew-adjoint in
    /// the Q-geometry - the property all energy statements rest on.
    pub fn new(model: &'a PoissonModel, y0: &[f64], h: f64) -> Result<Self> {
        if y0.len() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                got: y0.len(),
            });
        }
        if !(h >= 0.0) {
            return Err(Error::InvalidInput("step size must be nonnegative"));
        }
        let prob = Self {
            model,
            y0: y0.to_vec(),
            h,
            dense_threshold: DENSE_THRESHOLD,
            inner_rtol: 1e-14,
            inner_k_max: 400,
            pade1: PadeData::new(1)?,
        };
        prob.validate_skew_adjointness()?;
        Ok(prob)
    }

    fn validate_skew_adjointness(&self) -> Result<()> {
        let n = self.model.dim();
        let space = self.space();
        let mut rng = SplitMix64::new(0x6d69_6470_6f69_6e74);
        for _ in 0..5 {
            let z: Vec<f64> = (0..n).map(|_| rng.next_symmetric()).collect();
            let j = self.model.j_dense(&z);
            // columns of Q J(z) Q
            let mut qjq = DenseMatrix::zeros(n, n);
            let mut e = vec![0.0; n];
            for col in 0..n {
                e[col] = 1.0;
                let v = space.apply_q(&j.matvec(&space.apply_q(&e)));
                for row in 0..n {
                    qjq.set(row, col, v[row]);
                }
                e[col] = 0.0;
            }
            let scale = qjq.max_norm();
            let mut defect = 0.0f64;
            for a in 0..n {
                for b in 0..n {
                    defect = defect.max(math::abs(qjq.get(a, b) + qjq.get(b, a)));
                }
            }
            if defect > 1e-12 * scale {
                return Err(Error::InvalidInput(
                    "J(z) Q is not skew-adjoint in the Q-inner product",
                ));
            }
        }
        Ok(())
    }

    pub fn space(&self) -> &QSpace {
        self.model.space()
    }

    pub fn y0(&self) -> &[f64] {
        &self.y0
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Route all Cayley applications with order above this through the
    /// Krylov path (default: [`DENSE_THRESHOLD`]).
    pub fn with_dense_threshold(mut self, threshold: usize) -> Self {
        self.dense_threshold = threshold;
        self
    }

    fn j_at_midpoint(&self, x: &[f64]) -> DenseMatrix {
        let m: Vec<f64> = self
            .y0
            .iter()
            .zip(x)
            .map(|(&a, &b)| 0.5 * (a + b))
            .collect();
        self.model.j_dense(&m)
    }

    fn phi_with(&self, jm: &DenseMatrix) -> Result<Vec<f64>> {
        let space = self.space();
        let half_h = 0.5 * self.h;
        if self.model.dim() <= self.dense_threshold {
            pade::cayley_apply(
                space,
                |v| {
                    let qv = space.apply_q(v);
                    let jv = jm.matvec(&qv);
                    jv.iter().map(|&x| half_h * x).collect()
                },
                &self.y0,
            )
        } else {
            // C((h/2) J Q) = R_1(h J Q): the inner Krylov iterates conserve
            // the Q-norm too, so any inner stopping point is safe
            let report = krylov::qaa_v1(
                space,
                |v| {
                    let qv = space.apply_q(v);
                    let jv = jm.matvec(&qv);
                    jv.iter().map(|&x| self.h * x).collect()
                },
                &self.y0,
                &self.pade1,
                self.inner_k_max,
                self.inner_rtol,
            )?;
            Ok(report.iterate)
        }
    }

    fn residual_with(&self, jm: &DenseMatrix, x: &[f64]) -> Vec<f64> {
        let space = self.space();
        let mut sum: Vec<f64> = self.y0.iter().zip(x).map(|(&a, &b)| a + b).collect();
        sum = jm.matvec(&space.apply_q(&sum));
        let half_h = 0.5 * self.h;
        (0..x.len())
            .map(|i| x[i] - self.y0[i] - half_h * sum[i])
            .collect()
    }

    /// `Phi_h(x) = C((h/2) J((y0+x)/2) Q) y0`.
    pub fn phi(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let jm = self.j_at_midpoint(x);
        self.phi_with(&jm)
    }

    /// The solve-free midpoint residual `r~(x)`.
    pub fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let jm = self.j_at_midpoint(x);
        Ok(self.residual_with(&jm, x))
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.model.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.model.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// Fixed-point iteration `x_{k+1} = Phi_h(x_k)`.
///
/// Globally convergent for admissible step sizes (`Phi_h` is a contraction
/// on the ball of radius `2 ||y0||_Q`); every iterate from `x_1` on has the
/// Q-norm of `y0`. The `J` evaluation at the new iterate's midpoint is
/// shared between its residual and the next Cayley application.
pub fn fixed_point_solve(
    prob: &MidpointProblem,
    x0: &[f64],
    tol: f64,
    k_max: usize,
) -> Result<NonlinearSolveReport> {
    let timer = Timer::start();
    let space = prob.space();
    let ref_norm = space.norm(prob.y0())?;
    prob.check_dim(x0)?;

    let mut trace = Vec::new();
    let mut x = x0.to_vec();
    let mut jm = prob.j_at_midpoint(&x);
    let mut converged = false;
    let mut k_used = 0;
    for k in 1..=k_max.max(1) {
        x = prob.phi_with(&jm)?;
        jm = prob.j_at_midpoint(&x);
        let res = math::norm2(&prob.residual_with(&jm, &x));
        trace.push(TraceRow {
            k,
            residual_euclid: res,
            energy_dev: space.energy_deviation(&x, ref_norm),
            elapsed_ns: timer.elapsed_ns(),
        });
        k_used = k;
        if res <= tol {
            converged = true;
            break;
        }
    }
    Ok(NonlinearSolveReport {
        solution: x,
        k_used,
        converged,
        method: IterationMethod::FixedPoint,
        trace,
    })
}

/// Quasi-Newton (BFGS) iteration on `F_h(x) = x - Phi_h(x)` with inverse
/// updates, returning the energy-bearing Cayley iterate `w_k = Phi_h(x_k)`.
///
/// `B_0^{-1} = I`; a secant pair with vanishing curvature `z^T s` skips the
/// update rather than corrupting the inverse. Stopping tests the residual
/// at `w_k`, so the reported solution conserves energy whenever the
/// iteration is cut short.
pub fn cayley_bfgs_solve(
    prob: &MidpointProblem,
    x0: &[f64],
    tol: f64,
    k_max: usize,
) -> Result<NonlinearSolveReport> {
    let timer = Timer::start();
    let space = prob.space();
    let n = prob.model.dim();
    let ref_norm = space.norm(prob.y0())?;
    prob.check_dim(x0)?;

    let mut binv = DenseMatrix::identity(n);
    let mut x = x0.to_vec();
    let mut w = prob.phi(&x)?;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut k_used = 0;

    for k in 1..=k_max.max(1) {
        let jm_w = prob.j_at_midpoint(&w);
        let res = math::norm2(&prob.residual_with(&jm_w, &w));
        trace.push(TraceRow {
            k,
            residual_euclid: res,
            energy_dev: space.energy_deviation(&w, ref_norm),
            elapsed_ns: timer.elapsed_ns(),
        });
        k_used = k;
        if res <= tol {
            converged = true;
            break;
        }
        if k == k_max {
            break;
        }

        // F(x_k) reuses the cached Cayley iterate
        let f_x: Vec<f64> = x.iter().zip(&w).map(|(&a, &b)| a - b).collect();
        let step = binv.matvec(&f_x);
        let x_next: Vec<f64> = x.iter().zip(&step).map(|(&a, &b)| a - b).collect();
        let w_next = prob.phi(&x_next)?;
        let f_next: Vec<f64> = x_next.iter().zip(&w_next).map(|(&a, &b)| a - b).collect();

        let s: Vec<f64> = x_next.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let z: Vec<f64> = f_next.iter().zip(&f_x).map(|(&a, &b)| a - b).collect();
        let zs = math::dot(&z, &s);
        if math::abs(zs) > 1e-14 * math::norm2(&z) * math::norm2(&s) {
            binv = bfgs_inverse_update(&binv, &s, &z, zs);
        }
        x = x_next;
        w = w_next;
    }

    Ok(NonlinearSolveReport {
        solution: w,
        k_used,
        converged,
        method: IterationMethod::CayleyBfgs,
        trace,
    })
}

/// `(I - s z^T / (z^T s)) B^{-1} (I - z s^T / (z^T s)) + s s^T / (z^T s)`.
fn bfgs_inverse_update(binv: &DenseMatrix, s: &[f64], z: &[f64], zs: f64) -> DenseMatrix {
    let n = s.len();
    let rho = 1.0 / zs;
    // t = B^{-1} - rho (B^{-1} z) s^T
    let bz = binv.matvec(z);
    let mut t = binv.clone();
    for i in 0..n {
        for j in 0..n {
            t.add_at(i, j, -rho * bz[i] * s[j]);
        }
    }
    // u = t - rho s (z^T t)   [left projector]
    let zt: Vec<f64> = (0..n)
        .map(|j| (0..n).map(|i| z[i] * t.get(i, j)).sum())
        .collect();
    let mut u = t;
    for i in 0..n {
        for j in 0..n {
            u.add_at(i, j, -rho * s[i] * zt[j]);
        }
    }
    for i in 0..n {
        for j in 0..n {
            u.add_at(i, j, rho * s[i] * s[j]);
        }
    }
    u
}

/// Tolerance selection for the nonlinear midpoint step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NonlinearTol {
    /// `h^2`, consistent with the midpoint rule's order.
    Order,
    Fixed(f64),
}

/// Per-step policy for the nonlinear midpoint integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearStepPolicy {
    pub h: f64,
    pub method: IterationMethod,
    pub tol: NonlinearTol,
    pub k_max: usize,
}

impl NonlinearStepPolicy {
    pub fn new(h: f64, method: IterationMethod) -> Self {
        Self {
            h,
            method,
            tol: NonlinearTol::Order,
            k_max: 200,
        }
    }

    pub fn effective_tol(&self) -> f64 {
        match self.tol {
            NonlinearTol::Order => self.h * self.h,
            NonlinearTol::Fixed(v) => v,
        }
    }
}

/// One midpoint step from `y_prev`, started at `x0 = y_prev`.
pub fn gauss_step_nonlinear(
    model: &PoissonModel,
    y_prev: &[f64],
    policy: NonlinearStepPolicy,
) -> Result<(Vec<f64>, NonlinearSolveReport)> {
    let prob = MidpointProblem::new(model, y_prev, policy.h)?;
    let tol = policy.effective_tol();
    let report = match policy.method {
        IterationMethod::FixedPoint => fixed_point_solve(&prob, y_prev, tol, policy.k_max)?,
        IterationMethod::CayleyBfgs => cayley_bfgs_solve(&prob, y_prev, tol, policy.k_max)?,
    };
    Ok((report.solution.clone(), report))
}

/// Midpoint integration of a nonlinear model over `[0, t_end]`.
pub fn integrate_nonlinear(
    model: &PoissonModel,
    t_end: f64,
    policy: NonlinearStepPolicy,
) -> Result<TrajectoryReport> {
    let steps = step_count(t_end, policy.h)?;
    let mut states = Vec::with_capacity(steps + 1);
    let mut times = Vec::with_capacity(steps + 1);
    let mut iters = Vec::with_capacity(steps);
    let mut conv = Vec::with_capacity(steps);
    let mut y = model.y0().to_vec();
    states.push(y.clone());
    times.push(0.0);
    for i in 1..=steps {
        let (y_next, report) = gauss_step_nonlinear(model, &y, policy)?;
        y = y_next;
        states.push(y.clone());
        times.push(i as f64 * policy.h);
        iters.push(report.k_used);
        conv.push(report.converged);
    }
    TrajectoryReport::from_parts(model.space(), times, states, iters, conv)
}
