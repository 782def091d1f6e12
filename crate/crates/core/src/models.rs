//! Benchmark Poisson models and a high-accuracy reference integrator.
//!
//! A Poisson model is `dy/dt = J(y) Q y` with skew-symmetric `J` (constant or
//! state-dependent) and symmetric positive definite `Q`. Constructors
//! validate skewness on random probe states and positive definiteness via
//! the Cholesky factorization inside [`QSpace`].

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::linalg::{BandedMatrix, DenseMatrix, QSpace, SymBanded};
use crate::math::{self, SplitMix64};
use crate::stepping::TrajectoryReport;
use crate::Result;

/// Structure matrix of a Poisson model.
pub enum Structure {
    /// Constant sparse (banded) `J`.
    Constant(BandedMatrix<f64>),
    /// State-dependent `y -> J(y)`, evaluated densely.
    StateDependent(Box<dyn Fn(&[f64]) -> DenseMatrix + Send + Sync>),
}

/// A Poisson system `dy/dt = J(y) Q y` with initial state.
pub struct PoissonModel {
    label: String,
    structure: Structure,
    space: QSpace,
    y0: Vec<f64>,
}

impl PoissonModel {
    /// Build and validate a model.
    ///
    /// `J(z)` is probed at five deterministic pseudo-random states; any
    /// skewness defect above `1e-13` of the entry scale is rejected, as is a
    /// `Q` that fails Cholesky.
    pub fn new(
        label: impl Into<String>,
        structure: Structure,
        q: SymBanded,
        y0: Vec<f64>,
    ) -> Result<Self> {
        let space = QSpace::new(q)?;
        if y0.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                got: y0.len(),
            });
        }
        let model = Self {
            label: label.into(),
            structure,
            space,
            y0,
        };
        model.validate_skewness()?;
        Ok(model)
    }

    fn validate_skewness(&self) -> Result<()> {
        let n = self.dim();
        let mut rng = SplitMix64::new(0x706f_6973_736f_6e);
        for _ in 0..5 {
            let z: Vec<f64> = (0..n).map(|_| rng.next_symmetric()).collect();
            let j = self.j_dense(&z);
            let scale = j.max_norm();
            let mut defect = 0.0f64;
            for a in 0..n {
                for b in 0..n {
                    defect = defect.max(math::abs(j.get(a, b) + j.get(b, a)));
                }
            }
            if defect > 1e-13 * scale {
                return Err(Error::InvalidInput("structure matrix is not skew-symmetric"));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn space(&self) -> &QSpace {
        &self.space
    }

    pub fn y0(&self) -> &[f64] {
        &self.y0
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.structure, Structure::Constant(_))
    }

    /// The constant `J`, if the model is linear.
    pub fn constant_j(&self) -> Option<&BandedMatrix<f64>> {
        match &self.structure {
            Structure::Constant(j) => Some(j),
            Structure::StateDependent(_) => None,
        }
    }

    /// `J(y)` as a dense matrix.
    pub fn j_dense(&self, y: &[f64]) -> DenseMatrix {
        match &self.structure {
            Structure::Constant(j) => j.to_dense(),
            Structure::StateDependent(f) => f(y),
        }
    }

    /// Right-hand side `J(y) Q y`.
    pub fn rhs(&self, y: &[f64]) -> Vec<f64> {
        let qy = self.space.apply_q(y);
        match &self.structure {
            Structure::Constant(j) => j.matvec(&qy),
            Structure::StateDependent(f) => f(y).matvec(&qy),
        }
    }
}

/// Chain of `n_osc` harmonic oscillators, the last one grounded.
///
/// State ordering is `(q1, p1, q2, p2, ...)`: `J` is block-diagonal with
/// 2x2 blocks `[[0, 1], [-1, 0]]`, positions carry the stiffness couplings
/// (`-k_i` off-diagonal, `k_{i-1} + k_i` on the diagonal, degenerating to
/// `k_1` for the free first mass) and momenta carry `1 / m_i`. The initial
/// state is the first unit vector.
pub fn mass_spring_chain(n_osc: usize, masses: &[f64], springs: &[f64]) -> Result<PoissonModel> {
    if n_osc == 0 {
        return Err(Error::InvalidInput("need at least one oscillator"));
    }
    if masses.len() != n_osc || springs.len() != n_osc {
        return Err(Error::DimensionMismatch {
            expected: n_osc,
            got: masses.len().min(springs.len()),
        });
    }
    if masses.iter().any(|&m| !(m > 0.0)) || springs.iter().any(|&k| !(k > 0.0)) {
        return Err(Error::InvalidInput("masses and spring constants must be positive"));
    }
    let n = 2 * n_osc;

    let mut j = BandedMatrix::zeros(n, 1, 1);
    for p in 0..n_osc {
        j.set(2 * p, 2 * p + 1, 1.0);
        j.set(2 * p + 1, 2 * p, -1.0);
    }

    let mut q = SymBanded::zeros(n, 2);
    for p in 0..n_osc {
        let diag = if p == 0 {
            springs[0]
        } else {
            springs[p - 1] + springs[p]
        };
        q.set(2 * p, 2 * p, diag);
        q.set(2 * p + 1, 2 * p + 1, 1.0 / masses[p]);
        if p + 1 < n_osc {
            q.set(2 * p + 2, 2 * p, -springs[p]);
        }
    }

    let mut y0 = vec![0.0; n];
    y0[0] = 1.0;
    PoissonModel::new("mass-spring", Structure::Constant(j), q, y0)
}

/// [`mass_spring_chain`] with the benchmark defaults: equal masses `0.5` and
/// spring constants `124`.
pub fn mass_spring_chain_default(n_osc: usize) -> Result<PoissonModel> {
    let masses = vec![0.5; n_osc];
    let springs = vec![124.0; n_osc];
    mass_spring_chain(n_osc, &masses, &springs)
}

/// Free rigid body: angular momentum dynamics with
/// `J(y)` the cross-product matrix of `y` and `Q = diag(1/I1, 1/I2, 1/I3)`.
pub fn rigid_body(i1: f64, i2: f64, i3: f64, y0: [f64; 3]) -> Result<PoissonModel> {
    if !(i1 > 0.0 && i2 > 0.0 && i3 > 0.0) {
        return Err(Error::InvalidInput("moments of inertia must be positive"));
    }
    let q = SymBanded::diagonal(&[1.0 / i1, 1.0 / i2, 1.0 / i3]);
    let j = move |y: &[f64]| -> DenseMatrix {
        let mut m = DenseMatrix::zeros(3, 3);
        m.set(0, 1, -y[2]);
        m.set(0, 2, y[1]);
        m.set(1, 0, y[2]);
        m.set(1, 2, -y[0]);
        m.set(2, 0, -y[1]);
        m.set(2, 1, y[0]);
        m
    };
    PoissonModel::new(
        "rigid-body",
        Structure::StateDependent(Box::new(j)),
        q,
        y0.to_vec(),
    )
}

/// [`rigid_body`] with the benchmark defaults `I = (2, 1, 2/3)` and
/// `y0 = (3, 3, 2)`.
pub fn rigid_body_default() -> Result<PoissonModel> {
    rigid_body(2.0, 1.0, 2.0 / 3.0, [3.0, 3.0, 2.0])
}

/// Reference trajectory from a tolerance-controlled embedded Runge-Kutta
/// pair of orders 7 and 8, propagated with the order-8 weights.
///
/// `grid` must start at zero and increase. The per-step error estimate is
/// held below `abs_tol` in the Euclidean norm; an unreachable tolerance
/// (step size underflow) is an error.
pub fn reference_nonlinear(
    model: &PoissonModel,
    grid: &[f64],
    abs_tol: f64,
) -> Result<TrajectoryReport> {
    if grid.is_empty() || grid[0] != 0.0 {
        return Err(Error::GridMismatch);
    }
    if !(abs_tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive"));
    }
    let f = |y: &[f64]| model.rhs(y);
    let mut states = Vec::with_capacity(grid.len());
    let mut y = model.y0().to_vec();
    states.push(y.clone());
    for w in grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::GridMismatch);
        }
        y = rk78_integrate(&f, &y, w[0], w[1], abs_tol)?;
        states.push(y.clone());
    }
    let steps = grid.len() - 1;
    TrajectoryReport::from_parts(
        model.space(),
        grid.to_vec(),
        states,
        vec![0; steps],
        vec![true; steps],
    )
}

// Fehlberg 7(8) coefficients. Row sums of `A` equal the nodes `C`; the
// order-8 solution uses `B8`, the embedded error estimate is
// `h * 41/840 * (k1 + k11 - k12 - k13)`.
const RK_STAGES: usize = 13;

const RK_C: [f64; RK_STAGES] = [
    0.0,
    2.0 / 27.0,
    1.0 / 9.0,
    1.0 / 6.0,
    5.0 / 12.0,
    0.5,
    5.0 / 6.0,
    1.0 / 6.0,
    2.0 / 3.0,
    1.0 / 3.0,
    1.0,
    0.0,
    1.0,
];

const RK_A: [[f64; 12]; RK_STAGES] = [
    [0.0; 12],
    [2.0 / 27.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 36.0, 1.0 / 12.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 24.0, 0.0, 1.0 / 8.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [5.0 / 12.0, 0.0, -25.0 / 16.0, 25.0 / 16.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 20.0, 0.0, 0.0, 0.25, 0.2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [
        -25.0 / 108.0,
        0.0,
        0.0,
        125.0 / 108.0,
        -65.0 / 27.0,
        125.0 / 54.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        31.0 / 300.0,
        0.0,
        0.0,
        0.0,
        61.0 / 225.0,
        -2.0 / 9.0,
        13.0 / 900.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        2.0,
        0.0,
        0.0,
        -53.0 / 6.0,
        704.0 / 45.0,
        -107.0 / 9.0,
        67.0 / 90.0,
        3.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        -91.0 / 108.0,
        0.0,
        0.0,
        23.0 / 108.0,
        -976.0 / 135.0,
        311.0 / 54.0,
        -19.0 / 60.0,
        17.0 / 6.0,
        -1.0 / 12.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        2383.0 / 4100.0,
        0.0,
        0.0,
        -341.0 / 164.0,
        4496.0 / 1025.0,
        -301.0 / 82.0,
        2133.0 / 4100.0,
        45.0 / 82.0,
        45.0 / 164.0,
        18.0 / 41.0,
        0.0,
        0.0,
    ],
    [
        3.0 / 205.0,
        0.0,
        0.0,
        0.0,
        0.0,
        -6.0 / 41.0,
        -3.0 / 205.0,
        -3.0 / 41.0,
        3.0 / 41.0,
        6.0 / 41.0,
        0.0,
        0.0,
    ],
    [
        -1777.0 / 4100.0,
        0.0,
        0.0,
        -341.0 / 164.0,
        4496.0 / 1025.0,
        -289.0 / 82.0,
        2193.0 / 4100.0,
        51.0 / 82.0,
        33.0 / 164.0,
        12.0 / 41.0,
        0.0,
        1.0,
    ],
];

const RK_B8: [f64; RK_STAGES] = [
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    34.0 / 105.0,
    9.0 / 35.0,
    9.0 / 35.0,
    9.0 / 280.0,
    9.0 / 280.0,
    0.0,
    41.0 / 840.0,
    41.0 / 840.0,
];

/// One attempted step: returns the order-8 update and the error estimate.
fn rk78_step<F>(f: &F, y: &[f64], h: f64) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = y.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(RK_STAGES);
    for i in 0..RK_STAGES {
        let mut yi = y.to_vec();
        for (j, kj) in k.iter().enumerate() {
            let a = RK_A[i][j];
            if a != 0.0 {
                math::axpy(h * a, kj, &mut yi);
            }
        }
        let _ = RK_C[i]; // autonomous right-hand side; nodes kept for reference
        k.push(f(&yi));
    }
    let mut y_next = y.to_vec();
    for (i, ki) in k.iter().enumerate() {
        if RK_B8[i] != 0.0 {
            math::axpy(h * RK_B8[i], ki, &mut y_next);
        }
    }
    let mut err_sq = 0.0;
    for c in 0..n {
        let e = h * (41.0 / 840.0) * (k[0][c] + k[10][c] - k[11][c] - k[12][c]);
        err_sq += e * e;
    }
    (y_next, math::sqrt(err_sq))
}

/// Adaptive integration from `t0` to `t1` with absolute per-step tolerance.
fn rk78_integrate<F>(f: &F, y0: &[f64], t0: f64, t1: f64, atol: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let span = t1 - t0;
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut h = span;
    let h_min = 1e-12 * span.max(1e-30);
    let mut guard = 0usize;
    while t < t1 {
        h = h.min(t1 - t);
        let (y_next, err) = rk78_step(f, &y, h);
        if err <= atol {
            t += h;
            y = y_next;
            let factor = if err > 0.0 {
                0.9 * math::powf(atol / err, 1.0 / 8.0)
            } else {
                5.0
            };
            h *= factor.clamp(0.2, 5.0);
        } else {
            h *= (0.9 * math::powf(atol / err, 1.0 / 8.0)).clamp(0.1, 0.9);
            if h < h_min {
                return Err(Error::ToleranceNotAchievable);
            }
        }
        guard += 1;
        if guard > 50_000_000 {
            return Err(Error::ToleranceNotAchievable);
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_matrices_match_displayed_pattern() {
        // literal element-by-element transcription for N = 3 defaults
        let model = mass_spring_chain_default(3).unwrap();
        let q = model.space().q();
        assert_eq!(q.get(0, 0), 124.0);
        assert_eq!(q.get(0, 2), -124.0);
        assert_eq!(q.get(1, 1), 2.0);
        assert_eq!(q.get(2, 2), 248.0);
        assert_eq!(q.get(2, 4), -124.0);
        assert_eq!(q.get(4, 4), 248.0);
        assert_eq!(q.get(5, 5), 2.0);
        assert_eq!(q.get(0, 4), 0.0);
        let j = model.constant_j().unwrap();
        assert_eq!(j.get(0, 1), 1.0);
        assert_eq!(j.get(1, 0), -1.0);
        assert_eq!(j.get(1, 2), 0.0);
    }

    #[test]
    fn single_oscillator_degenerates_cleanly() {
        let model = mass_spring_chain(1, &[0.5], &[124.0]).unwrap();
        assert_eq!(model.dim(), 2);
        let q = model.space().q();
        assert_eq!(q.get(0, 0), 124.0);
        assert_eq!(q.get(1, 1), 2.0);
        assert!((model.space().norm(&[1.0, 0.0]).unwrap() - 124.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn chain_rejects_bad_parameters() {
        assert!(mass_spring_chain(0, &[], &[]).is_err());
        assert!(mass_spring_chain(2, &[1.0, -1.0], &[1.0, 1.0]).is_err());
        assert!(mass_spring_chain(2, &[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn rigid_body_defaults() {
        let model = rigid_body_default().unwrap();
        let q = model.space().q();
        assert_eq!(q.get(0, 0), 0.5);
        assert_eq!(q.get(1, 1), 1.0);
        assert_eq!(q.get(2, 2), 1.5);
        assert!((model.space().energy(model.y0()).unwrap() - 9.75).abs() < 1e-13);
        // J(e3) swaps the first two coordinates with a sign
        let j = model.j_dense(&[0.0, 0.0, 1.0]);
        assert_eq!(j.get(0, 1), -1.0);
        assert_eq!(j.get(1, 0), 1.0);
        assert_eq!(j.get(2, 2), 0.0);
    }

    #[test]
    fn rigid_body_structure_annihilates_state() {
        let model = rigid_body_default().unwrap();
        let y = [0.3, -1.2, 0.7];
        let jy = model.j_dense(&y).matvec(&y);
        for v in jy {
            assert!(v.abs() < 1e-15);
        }
    }

    #[test]
    fn rigid_body_rejects_nonpositive_inertia() {
        assert!(rigid_body(0.0, 1.0, 1.0, [1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn skewness_validation_rejects_bad_structure() {
        let mut j = BandedMatrix::zeros(2, 1, 1);
        j.set(0, 1, 1.0);
        j.set(1, 0, -0.99);
        let q = SymBanded::diagonal(&[1.0, 1.0]);
        let err =
            PoissonModel::new("broken", Structure::Constant(j), q, vec![1.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn rk78_order_eight_on_exponential_growth() {
        // dy/dt = y has solution e^t; one fixed step of size h has local
        // error O(h^9), so halving h must shrink it by about 2^9
        let f = |y: &[f64]| y.to_vec();
        let y0 = [1.0];
        let (y_h, _) = rk78_step(&f, &y0, 0.5);
        let (y_half, _) = rk78_step(&f, &y0, 0.25);
        let e_h = (y_h[0] - 0.5f64.exp()).abs();
        let e_half = (y_half[0] - 0.25f64.exp()).abs();
        let ratio = e_h / e_half;
        assert!(
            (150.0..2000.0).contains(&ratio),
            "local error ratio {ratio} not consistent with order 8"
        );
    }

    #[test]
    fn reference_trajectory_conserves_energy() {
        let model = rigid_body_default().unwrap();
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let traj = reference_nonlinear(&model, &grid, 1e-13).unwrap();
        assert!(traj.max_energy_dev <= 1e-11, "drift {}", traj.max_energy_dev);
        // Casimir |y|_2 is also conserved along the exact flow
        let n0 = math::norm2(&traj.states[0]);
        for y in &traj.states {
            assert!((math::norm2(y) - n0).abs() <= 1e-10 * n0);
        }
    }

    #[test]
    fn reference_self_convergence() {
        let model = rigid_body_default().unwrap();
        let grid = [0.0, 1.0];
        let a = reference_nonlinear(&model, &grid, 1e-13).unwrap();
        let b = reference_nonlinear(&model, &grid, 5e-14).unwrap();
        let mut diff = 0.0f64;
        for i in 0..3 {
            diff = diff.max((a.states[1][i] - b.states[1][i]).abs());
        }
        assert!(diff <= 1e-11, "tolerance halving moved y(1) by {diff}");
    }

    #[test]
    fn reference_requires_grid_from_zero() {
        let model = rigid_body_default().unwrap();
        assert!(matches!(
            reference_nonlinear(&model, &[0.5, 1.0], 1e-12),
            Err(Error::GridMismatch)
        ));
    }
}
