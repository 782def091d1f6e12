//! Time integration of linear Poisson systems with the order-2s Gauss
//! integrator.
//!
//! Each step computes `y_{i+1} = R_s(h J Q) y_i` with one of the iterative
//! solvers from [`crate::krylov`] (or a dense direct reference path). The
//! stopping tolerance follows the integrator order, `h^{2s}` with a floor,
//! so accuracy effort matches what the step can deliver.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::krylov::{
    self, assemble_pade_matrix, IterationTrace, LinearSolveReport, TraceRow,
};
use crate::linalg::{sym_eigen, BandedMatrix, DenseMatrix, LuFactors, QSpace};
use crate::math::{self, Timer};
use crate::models::PoissonModel;
use crate::pade::PadeData;
use crate::Result;

/// Linear solver selection for a Gauss step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    /// Q-Arnoldi approximation, nominator/denominator banded solve.
    QaaV1,
    /// Q-Arnoldi approximation, partial fraction tridiagonal solves.
    QaaV2,
    /// Non-restarted GMRES on the explicitly assembled system.
    Gmres,
    /// Q-Arnoldi projection of the exact flow (runs to a fixed dimension).
    ExpArnoldi,
    /// Dense LU on the full system; the oracle path.
    DenseDirect,
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::QaaV1 => "qaa-v1",
            SolverKind::QaaV2 => "qaa-v2",
            SolverKind::Gmres => "gmres",
            SolverKind::ExpArnoldi => "exp-arnoldi",
            SolverKind::DenseDirect => "dense",
        }
    }
}

/// Residual tolerance selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RtolMode {
    /// `h^{2s}`, consistent with the integrator order.
    Order,
    /// Fixed threshold.
    Fixed(f64),
}

/// Per-step solve policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPolicy {
    /// Gauss degree (integrator order is `2s`).
    pub s: usize,
    /// Step size.
    pub h: f64,
    pub solver: SolverKind,
    pub rtol_mode: RtolMode,
    /// Lower bound on the tolerance; machine precision makes anything
    /// below this unreachable.
    pub rtol_floor: f64,
    /// Krylov dimension cap.
    pub k_max: usize,
}

impl StepPolicy {
    pub fn new(s: usize, h: f64, solver: SolverKind) -> Self {
        Self {
            s,
            h,
            solver,
            rtol_mode: RtolMode::Order,
            rtol_floor: 1e-15,
            k_max: 200,
        }
    }

    /// Effective residual threshold: the mode value, floored.
    pub fn effective_rtol(&self) -> f64 {
        let base = match self.rtol_mode {
            RtolMode::Order => math::powi(self.h, 2 * self.s as i32),
            RtolMode::Fixed(v) => v,
        };
        base.max(self.rtol_floor)
    }
}

/// Trajectory of a time integration with per-step diagnostics.
#[derive(Debug, Clone)]
pub struct TrajectoryReport {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Iterations spent per step (one entry per step, `times.len() - 1`).
    pub iters_per_step: Vec<usize>,
    /// Per-step convergence flags.
    pub step_converged: Vec<bool>,
    /// `max_i |1 - ||y_i||_Q / ||y_0||_Q|` over the whole trajectory.
    pub max_energy_dev: f64,
}

impl TrajectoryReport {
    pub fn from_parts(
        space: &QSpace,
        times: Vec<f64>,
        states: Vec<Vec<f64>>,
        iters_per_step: Vec<usize>,
        step_converged: Vec<bool>,
    ) -> Result<Self> {
        if times.len() != states.len() || times.len() != iters_per_step.len() + 1 {
            return Err(Error::GridMismatch);
        }
        let ref_norm = space.norm(&states[0])?;
        let mut max_dev = 0.0f64;
        for y in &states {
            max_dev = max_dev.max(space.energy_deviation(y, ref_norm));
        }
        Ok(Self {
            times,
            states,
            iters_per_step,
            step_converged,
            max_energy_dev: max_dev,
        })
    }

    pub fn steps(&self) -> usize {
        self.iters_per_step.len()
    }

    pub fn avg_iters(&self) -> f64 {
        if self.iters_per_step.is_empty() {
            return 0.0;
        }
        self.iters_per_step.iter().sum::<usize>() as f64 / self.iters_per_step.len() as f64
    }

    pub fn all_converged(&self) -> bool {
        self.step_converged.iter().all(|&c| c)
    }
}

/// Number of steps covering `[0, t_end]`; the horizon must be an integer
/// multiple of the step size (no shortened final step).
pub fn step_count(t_end: f64, h: f64) -> Result<usize> {
    if !(t_end > 0.0) || !(h > 0.0) {
        return Err(Error::InvalidInput("horizon and step size must be positive"));
    }
    let m = math::round(t_end / h);
    if m < 1.0 || math::abs(m * h - t_end) > 1e-9 * t_end.max(1.0) {
        return Err(Error::GridMismatch);
    }
    Ok(m as usize)
}

/// Precomputed per-(model, policy) data: the operator `h J Q` and the two
/// assembled Padé polynomials of it, reused across all steps of a sweep.
pub struct LinearStepper<'a> {
    model: &'a PoissonModel,
    policy: StepPolicy,
    pade: PadeData,
    a: BandedMatrix<f64>,
    d_minus: BandedMatrix<f64>,
    d_plus: BandedMatrix<f64>,
    direct_lu: Option<LuFactors>,
}

impl<'a> LinearStepper<'a> {
    pub fn new(model: &'a PoissonModel, policy: StepPolicy) -> Result<Self> {
        if !(policy.h > 0.0) {
            return Err(Error::InvalidInput("step size must be positive"));
        }
        let j = model
            .constant_j()
            .ok_or(Error::InvalidInput("linear stepping requires a constant J"))?;
        let pade = PadeData::new(policy.s)?;
        let a = j.mul(&model.space().q().to_banded()).scale(policy.h);
        let d_minus = assemble_pade_matrix(&a, &pade, true);
        let d_plus = assemble_pade_matrix(&a, &pade, false);
        let direct_lu = if policy.solver == SolverKind::DenseDirect {
            Some(d_minus.to_dense().lu()?)
        } else {
            None
        };
        Ok(Self {
            model,
            policy,
            pade,
            a,
            d_minus,
            d_plus,
            direct_lu,
        })
    }

    pub fn pade(&self) -> &PadeData {
        &self.pade
    }

    /// The step operator argument `h J Q` in assembled form.
    pub fn operator(&self) -> &BandedMatrix<f64> {
        &self.a
    }

    /// One Gauss step from `y_prev`. Nonconvergence at `k_max` is reported
    /// in the result, not an error; the iterate is still returned.
    pub fn step(&self, y_prev: &[f64]) -> Result<(Vec<f64>, LinearSolveReport)> {
        let space = self.model.space();
        let rtol = self.policy.effective_rtol();
        let k_max = self.policy.k_max;
        let report = match self.policy.solver {
            SolverKind::QaaV1 => krylov::qaa_v1(
                space,
                |x| self.a.matvec(x),
                y_prev,
                &self.pade,
                k_max,
                rtol,
            )?,
            SolverKind::QaaV2 => krylov::qaa_v2(
                space,
                |x| self.a.matvec(x),
                y_prev,
                &self.pade,
                k_max,
                rtol,
            )?,
            SolverKind::Gmres => {
                let b = self.d_plus.matvec(y_prev);
                let ref_qnorm = space.norm(y_prev)?;
                krylov::gmres_baseline(
                    space,
                    |x| self.d_minus.matvec(x),
                    &b,
                    k_max,
                    rtol,
                    ref_qnorm,
                )?
            }
            SolverKind::ExpArnoldi => {
                krylov::exp_arnoldi(space, |x| self.a.matvec(x), y_prev, k_max, k_max)?
            }
            SolverKind::DenseDirect => {
                let timer = Timer::start();
                let b = self.d_plus.matvec(y_prev);
                let x = self.direct_lu.as_ref().expect("cached at construction").solve(&b);
                let mx = self.d_minus.matvec(&x);
                let mut rs = 0.0;
                for i in 0..x.len() {
                    let d = b[i] - mx[i];
                    rs += d * d;
                }
                let res = math::sqrt(rs);
                let ref_qnorm = space.norm(y_prev)?;
                let edev = space.energy_deviation(&x, ref_qnorm);
                let trace: IterationTrace = vec![TraceRow {
                    k: 0,
                    residual_euclid: res,
                    energy_dev: edev,
                    elapsed_ns: timer.elapsed_ns(),
                }];
                LinearSolveReport {
                    iterate: x,
                    residual_euclid: res,
                    energy_dev: edev,
                    k: 0,
                    converged: true,
                    breakdown: false,
                    trace,
                }
            }
        };
        Ok((report.iterate.clone(), report))
    }
}

/// One Gauss step with a freshly prepared stepper. Sweeps should construct
/// a [`LinearStepper`] once instead.
pub fn gauss_step_linear(
    model: &PoissonModel,
    y_prev: &[f64],
    policy: StepPolicy,
) -> Result<(Vec<f64>, LinearSolveReport)> {
    LinearStepper::new(model, policy)?.step(y_prev)
}

/// Integrate `[0, t_end]` from the model's initial state.
pub fn integrate_linear(
    model: &PoissonModel,
    t_end: f64,
    policy: StepPolicy,
) -> Result<TrajectoryReport> {
    let steps = step_count(t_end, policy.h)?;
    let stepper = LinearStepper::new(model, policy)?;
    let mut states = Vec::with_capacity(steps + 1);
    let mut times = Vec::with_capacity(steps + 1);
    let mut iters = Vec::with_capacity(steps);
    let mut conv = Vec::with_capacity(steps);
    let mut y = model.y0().to_vec();
    states.push(y.clone());
    times.push(0.0);
    for i in 1..=steps {
        let (y_next, report) = stepper.step(&y)?;
        y = y_next;
        states.push(y.clone());
        times.push(i as f64 * policy.h);
        iters.push(report.k);
        conv.push(report.converged);
    }
    TrajectoryReport::from_parts(model.space(), times, states, iters, conv)
}

/// Discrete `L^2` error between two trajectories on the same grid
/// (trapezoid-weighted in time).
pub fn l2_error(traj: &TrajectoryReport, reference: &TrajectoryReport) -> Result<f64> {
    if traj.times.len() != reference.times.len() {
        return Err(Error::GridMismatch);
    }
    for (a, b) in traj.times.iter().zip(&reference.times) {
        if math::abs(a - b) > 1e-12 * a.abs().max(1.0) {
            return Err(Error::GridMismatch);
        }
    }
    let sq = |i: usize| -> f64 {
        let mut s = 0.0;
        for (a, b) in traj.states[i].iter().zip(&reference.states[i]) {
            let d = a - b;
            s += d * d;
        }
        s
    };
    let mut acc = 0.0;
    for i in 0..traj.times.len() - 1 {
        let dt = traj.times[i + 1] - traj.times[i];
        acc += 0.5 * dt * (sq(i) + sq(i + 1));
    }
    Ok(math::sqrt(acc))
}

/// Exact-flow reference for a linear model on the given grid.
///
/// In Cholesky coordinates `z = L^T y` the generator `B = L^T J L` is skew,
/// so `exp(t B)` follows from one symmetric eigendecomposition of
/// `C = B^T B`: with `C = V diag(th^2) V^T`,
/// `exp(tB) = V cos(t th) V^T + B V (sin(t th)/th) V^T`. The construction is
/// orthogonal up to rounding, so the reference conserves energy by design.
pub fn reference_linear(model: &PoissonModel, grid: &[f64]) -> Result<TrajectoryReport> {
    let n = model.dim();
    if n > 400 {
        return Err(Error::InvalidInput(
            "dense reference limited to order 400; use a smaller benchmark",
        ));
    }
    let j = model
        .constant_j()
        .ok_or(Error::InvalidInput("linear reference requires a constant J"))?;
    if grid.is_empty() {
        return Err(Error::GridMismatch);
    }
    let space = model.space();
    let l = space.chol().to_dense();
    let b = l.transpose().matmul(&j.to_dense()).matmul(&l);
    let c = b.transpose().matmul(&b);
    let (vals, v) = sym_eigen(&c);
    let thetas: Vec<f64> = vals.iter().map(|&x| math::sqrt(x.max(0.0))).collect();

    let z0 = space.chol_t_matvec(model.y0());
    let u0 = v.transpose().matvec(&z0);

    let mut states = Vec::with_capacity(grid.len());
    for &t in grid {
        let mut wc = vec![0.0; n];
        let mut wg = vec![0.0; n];
        for i in 0..n {
            let th = thetas[i];
            wc[i] = math::cos(t * th) * u0[i];
            wg[i] = if th > 1e-150 {
                math::sin(t * th) / th * u0[i]
            } else {
                t * u0[i]
            };
        }
        let mut z = v.matvec(&wc);
        let bz = b.matvec(&v.matvec(&wg));
        for i in 0..n {
            z[i] += bz[i];
        }
        states.push(space.chol_t_solve(&z));
    }
    let steps = grid.len() - 1;
    TrajectoryReport::from_parts(
        space,
        grid.to_vec(),
        states,
        vec![0; steps],
        vec![true; steps],
    )
}

/// Least-squares slope of `log(err)` against `log(h)`, ignoring data points
/// at or below the accuracy floor. `None` when fewer than two usable points
/// remain.
pub fn fit_loglog_slope(hs: &[f64], errs: &[f64], floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = hs
        .iter()
        .zip(errs)
        .filter(|&(_, &e)| e > floor)
        .map(|(&h, &e)| (math::ln(h), math::ln(e)))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in pts {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    (den > 0.0).then(|| num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymBanded;
    use crate::models::{mass_spring_chain_default, PoissonModel, Structure};

    fn zero_j_model(n: usize) -> PoissonModel {
        let j = BandedMatrix::zeros(n, 1, 1);
        let q = SymBanded::diagonal(&vec![1.0; n]);
        let mut y0 = vec![0.0; n];
        y0[0] = 1.0;
        PoissonModel::new("static", Structure::Constant(j), q, y0).unwrap()
    }

    #[test]
    fn zero_generator_keeps_state_for_all_solvers() {
        let model = zero_j_model(4);
        for solver in [
            SolverKind::QaaV1,
            SolverKind::QaaV2,
            SolverKind::Gmres,
            SolverKind::ExpArnoldi,
            SolverKind::DenseDirect,
        ] {
            let policy = StepPolicy::new(1, 0.1, solver);
            let (y, rep) = gauss_step_linear(&model, model.y0(), policy).unwrap();
            assert!(rep.converged, "{solver:?}");
            for i in 0..4 {
                assert!((y[i] - model.y0()[i]).abs() < 1e-13, "{solver:?}");
            }
        }
    }

    #[test]
    fn qaa_step_matches_dense_direct() {
        let model = mass_spring_chain_default(3).unwrap();
        let qaa = StepPolicy::new(1, 0.1, SolverKind::QaaV1);
        let dense = StepPolicy::new(1, 0.1, SolverKind::DenseDirect);
        let (y_qaa, rep) = gauss_step_linear(&model, model.y0(), qaa).unwrap();
        let (y_dense, _) = gauss_step_linear(&model, model.y0(), dense).unwrap();
        assert!(rep.converged);
        let mut diff = 0.0f64;
        for i in 0..model.dim() {
            diff = diff.max((y_qaa[i] - y_dense[i]).abs());
        }
        assert!(diff <= qaa.effective_rtol(), "difference {diff}");
    }

    #[test]
    fn grid_must_divide_horizon() {
        assert!(matches!(step_count(1.0, 0.3), Err(Error::GridMismatch)));
        assert_eq!(step_count(1.0, 0.1).unwrap(), 10);
        assert_eq!(step_count(1.0, 0.0125).unwrap(), 80);
    }

    #[test]
    fn single_step_integration_equals_step() {
        let model = mass_spring_chain_default(2).unwrap();
        let policy = StepPolicy::new(1, 0.1, SolverKind::QaaV1);
        let traj = integrate_linear(&model, 0.1, policy).unwrap();
        assert_eq!(traj.times.len(), 2);
        let (y, _) = gauss_step_linear(&model, model.y0(), policy).unwrap();
        for i in 0..model.dim() {
            assert_eq!(traj.states[1][i], y[i]);
        }
    }

    #[test]
    fn l2_error_of_identical_trajectories_is_zero() {
        let model = mass_spring_chain_default(2).unwrap();
        let policy = StepPolicy::new(1, 0.1, SolverKind::QaaV1);
        let traj = integrate_linear(&model, 0.5, policy).unwrap();
        assert_eq!(l2_error(&traj, &traj).unwrap(), 0.0);
    }

    #[test]
    fn l2_error_of_constant_offset() {
        // constant offset delta over [0,1]: the discrete L2 norm is |delta|
        let model = zero_j_model(2);
        let policy = StepPolicy::new(1, 0.1, SolverKind::DenseDirect);
        let a = integrate_linear(&model, 1.0, policy).unwrap();
        let mut b = a.clone();
        for y in &mut b.states {
            y[0] += 0.25;
            y[1] -= 0.5;
        }
        let want = (0.25f64 * 0.25 + 0.5 * 0.5).sqrt();
        let got = l2_error(&a, &b).unwrap();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn reference_matches_closed_form_rotation() {
        // J = [[0,1],[-1,0]], Q = I: y(t) is a clockwise rotation of y0
        let mut j = BandedMatrix::zeros(2, 1, 1);
        j.set(0, 1, 1.0);
        j.set(1, 0, -1.0);
        let q = SymBanded::diagonal(&[1.0, 1.0]);
        let model =
            PoissonModel::new("rotation", Structure::Constant(j), q, vec![1.0, 0.0]).unwrap();
        let grid: Vec<f64> = (0..=8).map(|i| i as f64 * 0.25).collect();
        let traj = reference_linear(&model, &grid).unwrap();
        for (i, &t) in grid.iter().enumerate() {
            assert!((traj.states[i][0] - t.cos()).abs() < 1e-13);
            assert!((traj.states[i][1] + t.sin()).abs() < 1e-13);
        }
        assert!(traj.max_energy_dev < 1e-13);
    }

    #[test]
    fn reference_conserves_energy_on_chain() {
        let model = mass_spring_chain_default(10).unwrap();
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let traj = reference_linear(&model, &grid).unwrap();
        assert!(traj.max_energy_dev <= 1e-12, "dev {}", traj.max_energy_dev);
    }

    #[test]
    fn slope_fit_recovers_exact_power_law()
    {
        let hs = [0.1, 0.05, 0.025];
        let errs: Vec<f64> = hs.iter().map(|h| 3.0 * h * h).collect();
        let slope = fit_loglog_slope(&hs, &errs, 1e-11).unwrap();
        assert!((slope - 2.0).abs() < 1e-12);
        // floor excludes everything -> no fit
        assert!(fit_loglog_slope(&hs, &errs, 1.0).is_none());
    }

    #[test]
    fn order_tolerance_floors() {
        let mut p = StepPolicy::new(3, 0.001, SolverKind::QaaV1);
        assert_eq!(p.effective_rtol(), 1e-15);
        p.h = 0.1;
        assert!((p.effective_rtol() - 1e-6).abs() < 1e-20);
        p.rtol_mode = RtolMode::Fixed(1e-9);
        assert_eq!(p.effective_rtol(), 1e-9);
    }
}
