//! The Lorenz '96 model: vector field, its dissipative decomposition
//! `du/dt + Au + B(u,u) = f`, analytic Jacobian and RK4 integration of the
//! trajectory alone or jointly with tangent vectors.
//!
//! Storage is 0-based; component `j` here is `u^(j+1)` in 1-based notation,
//! with periodic wrap.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Default inner integration step.
pub const DEFAULT_DT: f64 = 1e-3;

/// Model dimension `J` and constant forcing `F`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    dim: usize,
    forcing: f64,
}

impl ModelParams {
    pub fn new(dim: usize, forcing: f64) -> Result<Self> {
        if dim < 4 {
            return Err(Error::InvalidParameter(format!(
                "J must be at least 4, got {dim}"
            )));
        }
        if !forcing.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "F must be finite, got {forcing}"
            )));
        }
        Ok(Self { dim, forcing })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn forcing(&self) -> f64 {
        self.forcing
    }

    /// Squared radius `K = 2JF²` of the absorbing ball.
    pub fn absorbing_radius_sq(&self) -> f64 {
        2.0 * self.dim as f64 * self.forcing * self.forcing
    }

    /// The forcing vector `f = (F, ..., F)`.
    pub fn forcing_vector(&self) -> StateVector {
        StateVector::constant(self.dim, self.forcing)
    }

    /// The fixed point `F·(1, ..., 1)`.
    pub fn fixed_point(&self) -> StateVector {
        self.forcing_vector()
    }
}

/// A point of the phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(DVector<f64>);

impl StateVector {
    pub fn new(v: DVector<f64>) -> Self {
        Self(v)
    }

    pub fn from_vec(v: Vec<f64>) -> Self {
        Self(DVector::from_vec(v))
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self(DVector::from_column_slice(v))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DVector::zeros(dim))
    }

    pub fn constant(dim: usize, value: f64) -> Self {
        Self(DVector::from_element(dim, value))
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    /// Checks the length against `p` and that every component is finite.
    pub fn validate(&self, p: &ModelParams) -> Result<()> {
        check_dim(self.len(), p.dim())?;
        if !self.is_finite() {
            return Err(Error::InvalidParameter(
                "state vector has non-finite components".into(),
            ));
        }
        Ok(())
    }
}

impl Deref for StateVector {
    type Target = DVector<f64>;

    fn deref(&self) -> &DVector<f64> {
        &self.0
    }
}

impl From<DVector<f64>> for StateVector {
    fn from(v: DVector<f64>) -> Self {
        Self(v)
    }
}

pub(crate) fn check_dim(got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

#[inline]
fn neighbours(j: usize, n: usize) -> (usize, usize, usize) {
    let jm1 = if j == 0 { n - 1 } else { j - 1 };
    let jm2 = if j >= 2 { j - 2 } else { j + n - 2 };
    let jp1 = if j + 1 == n { 0 } else { j + 1 };
    (jm2, jm1, jp1)
}

/// `out[j] = u[j-1](u[j+1] - u[j-2]) - u[j] + forcing` on raw slices.
pub(crate) fn rhs_into(u: &[f64], forcing: f64, out: &mut [f64]) {
    let n = u.len();
    for j in 0..n {
        let (jm2, jm1, jp1) = neighbours(j, n);
        out[j] = u[jm1] * (u[jp1] - u[jm2]) - u[j] + forcing;
    }
}

/// Per-row Jacobian coefficients: entries at columns j-2, j-1 and j+1
/// (the diagonal is always -1).
struct JacobianRows {
    at_m2: Vec<f64>,
    at_m1: Vec<f64>,
    at_p1: Vec<f64>,
}

impl JacobianRows {
    fn new(n: usize) -> Self {
        Self {
            at_m2: vec![0.0; n],
            at_m1: vec![0.0; n],
            at_p1: vec![0.0; n],
        }
    }

    fn fill(&mut self, u: &[f64]) {
        let n = u.len();
        for j in 0..n {
            let (jm2, jm1, jp1) = neighbours(j, n);
            self.at_m2[j] = -u[jm1];
            self.at_m1[j] = u[jp1] - u[jm2];
            self.at_p1[j] = u[jm1];
        }
    }

    /// `out = Df(u) · x` for every column of the column-major block `x`.
    fn apply_columns(&self, x: &[f64], out: &mut [f64]) {
        let n = self.at_m2.len();
        for (xc, oc) in x.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
            for j in [0, 1, n - 1] {
                let (jm2, jm1, jp1) = neighbours(j, n);
                oc[j] = self.at_m2[j] * xc[jm2] + self.at_m1[j] * xc[jm1] - xc[j]
                    + self.at_p1[j] * xc[jp1];
            }
            for j in 2..n - 1 {
                oc[j] = self.at_m2[j] * xc[j - 2] + self.at_m1[j] * xc[j - 1] - xc[j]
                    + self.at_p1[j] * xc[j + 1];
            }
        }
    }
}

/// The raw form `du⁽ʲ⁾/dt = u⁽ʲ⁻¹⁾(u⁽ʲ⁺¹⁾ − u⁽ʲ⁻²⁾) − u⁽ʲ⁾ + F`.
pub fn vector_field(u: &StateVector, p: &ModelParams) -> Result<StateVector> {
    check_dim(u.len(), p.dim())?;
    let mut out = vec![0.0; p.dim()];
    rhs_into(u.as_slice(), p.forcing(), &mut out);
    Ok(StateVector::from_vec(out))
}

/// The symmetric bilinear form `B(u, v)` of the dissipative form, so that
/// `B(u, u)⁽ʲ⁾ = −u⁽ʲ⁻¹⁾(u⁽ʲ⁺¹⁾ − u⁽ʲ⁻²⁾)`.
pub fn bilinear(u: &StateVector, v: &StateVector, p: &ModelParams) -> Result<StateVector> {
    check_dim(u.len(), p.dim())?;
    check_dim(v.len(), p.dim())?;
    let n = p.dim();
    let out = (0..n)
        .map(|j| {
            let (jm2, jm1, jp1) = neighbours(j, n);
            // Paired so that swapping u and v swaps addends: symmetry is exact.
            -0.5 * ((v[jm1] * u[jp1] + u[jm1] * v[jp1]) - (v[jm2] * u[jm1] + u[jm2] * v[jm1]))
        })
        .collect();
    Ok(StateVector::from_vec(out))
}

/// Analytic Jacobian `D𝓕(u)` as a dense matrix.
pub fn jacobian(u: &StateVector, p: &ModelParams) -> Result<DMatrix<f64>> {
    check_dim(u.len(), p.dim())?;
    let n = p.dim();
    let mut jac = DMatrix::zeros(n, n);
    for j in 0..n {
        let (jm2, jm1, jp1) = neighbours(j, n);
        jac[(j, jm2)] += -u[jm1];
        jac[(j, jm1)] += u[jp1] - u[jm2];
        jac[(j, j)] += -1.0;
        jac[(j, jp1)] += u[jm1];
    }
    Ok(jac)
}

pub(crate) fn blow_up(step: usize, time: f64, u: &[f64]) -> Error {
    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    Error::BlowUp { step, time, norm }
}

/// Reusable RK4 buffers for the state-only system.
pub(crate) struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    pub(crate) fn step(&mut self, u: &mut [f64], dt: f64, forcing: f64) {
        let n = u.len();
        rhs_into(u, forcing, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = u[i] + 0.5 * dt * self.k1[i];
        }
        rhs_into(&self.tmp, forcing, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = u[i] + 0.5 * dt * self.k2[i];
        }
        rhs_into(&self.tmp, forcing, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = u[i] + dt * self.k3[i];
        }
        rhs_into(&self.tmp, forcing, &mut self.k4);
        for i in 0..n {
            u[i] += dt / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// Splits a duration into `count` full steps of `dt` plus an optional
/// trailing partial step.
pub(crate) fn step_plan(t: f64, dt: f64) -> (usize, f64) {
    let ratio = t / dt;
    let full = (ratio + 1e-9).floor();
    let rest = t - full * dt;
    let rest = if rest > 1e-12 * t.max(dt) { rest } else { 0.0 };
    (full as usize, rest)
}

pub(crate) fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    Ok(())
}

/// One classical fourth-order Runge–Kutta step.
pub fn rk4_step(u: &StateVector, dt: f64, p: &ModelParams) -> Result<StateVector> {
    check_dim(u.len(), p.dim())?;
    check_dt(dt)?;
    let mut out = u.as_slice().to_vec();
    Rk4::new(p.dim()).step(&mut out, dt, p.forcing());
    if out.iter().any(|x| !x.is_finite()) {
        return Err(blow_up(1, dt, &out));
    }
    Ok(StateVector::from_vec(out))
}

/// The solution operator `Ψ(u0; t)` realized by RK4 with step `dt`.
pub fn flow(u0: &StateVector, t: f64, dt: f64, p: &ModelParams) -> Result<StateVector> {
    check_dim(u0.len(), p.dim())?;
    check_dt(dt)?;
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("duration must be >= 0, got {t}")));
    }
    let mut u = u0.as_slice().to_vec();
    flow_in_place(&mut u, t, dt, p.forcing())?;
    Ok(StateVector::from_vec(u))
}

pub(crate) fn flow_in_place(u: &mut [f64], t: f64, dt: f64, forcing: f64) -> Result<()> {
    let (full, rest) = step_plan(t, dt);
    let mut rk = Rk4::new(u.len());
    for step in 0..full {
        rk.step(u, dt, forcing);
        if u.iter().any(|x| !x.is_finite()) {
            return Err(blow_up(step + 1, (step + 1) as f64 * dt, u));
        }
    }
    if rest > 0.0 {
        rk.step(u, rest, forcing);
        if u.iter().any(|x| !x.is_finite()) {
            return Err(blow_up(full + 1, t, u));
        }
    }
    Ok(())
}

/// Samples the trajectory from `u0` every `dt` up to `t`, including both ends.
pub fn trajectory(
    u0: &StateVector,
    t: f64,
    dt: f64,
    p: &ModelParams,
) -> Result<Vec<(f64, StateVector)>> {
    check_dim(u0.len(), p.dim())?;
    check_dt(dt)?;
    let (full, rest) = step_plan(t, dt);
    let mut u = u0.as_slice().to_vec();
    let mut rk = Rk4::new(u.len());
    let mut out = Vec::with_capacity(full + 2);
    out.push((0.0, u0.clone()));
    for step in 0..full {
        rk.step(&mut u, dt, p.forcing());
        if u.iter().any(|x| !x.is_finite()) {
            return Err(blow_up(step + 1, (step + 1) as f64 * dt, &u));
        }
        out.push(((step + 1) as f64 * dt, StateVector::from_slice(&u)));
    }
    if rest > 0.0 {
        rk.step(&mut u, rest, p.forcing());
        out.push((t, StateVector::from_slice(&u)));
    }
    Ok(out)
}

/// Solution of the variational equation over one window, started from the
/// identity at the window start.
#[derive(Debug, Clone)]
pub struct TangentPropagator {
    matrix: DMatrix<f64>,
    window: (f64, f64),
}

impl TangentPropagator {
    pub fn new(matrix: DMatrix<f64>, window: (f64, f64)) -> Self {
        Self { matrix, window }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    /// Shifts the window to start at `t_start`.
    pub fn starting_at(mut self, t_start: f64) -> Self {
        let len = self.window.1 - self.window.0;
        self.window = (t_start, t_start + len);
        self
    }
}

/// RK4 buffers for the augmented system (trajectory, tangent block).
struct TangentRk4 {
    rows: JacobianRows,
    state: Rk4,
    ustage: Vec<f64>,
    xstage: Vec<f64>,
    k: [Vec<f64>; 4],
}

impl TangentRk4 {
    fn new(n: usize, cols: usize) -> Self {
        let block = n * cols;
        Self {
            rows: JacobianRows::new(n),
            state: Rk4::new(n),
            ustage: vec![0.0; n],
            xstage: vec![0.0; block],
            k: [
                vec![0.0; block],
                vec![0.0; block],
                vec![0.0; block],
                vec![0.0; block],
            ],
        }
    }

    fn step(&mut self, u: &mut [f64], x: &mut [f64], dt: f64, forcing: f64) {
        let n = u.len();
        let s = &mut self.state;
        // stage 1
        rhs_into(u, forcing, &mut s.k1);
        self.rows.fill(u);
        self.rows.apply_columns(x, &mut self.k[0]);
        // stage 2
        for i in 0..n {
            self.ustage[i] = u[i] + 0.5 * dt * s.k1[i];
        }
        for (xs, (xi, ki)) in self.xstage.iter_mut().zip(x.iter().zip(&self.k[0])) {
            *xs = xi + 0.5 * dt * ki;
        }
        rhs_into(&self.ustage, forcing, &mut s.k2);
        self.rows.fill(&self.ustage);
        self.rows.apply_columns(&self.xstage, &mut self.k[1]);
        // stage 3
        for i in 0..n {
            self.ustage[i] = u[i] + 0.5 * dt * s.k2[i];
        }
        for (xs, (xi, ki)) in self.xstage.iter_mut().zip(x.iter().zip(&self.k[1])) {
            *xs = xi + 0.5 * dt * ki;
        }
        rhs_into(&self.ustage, forcing, &mut s.k3);
        self.rows.fill(&self.ustage);
        self.rows.apply_columns(&self.xstage, &mut self.k[2]);
        // stage 4
        for i in 0..n {
            self.ustage[i] = u[i] + dt * s.k3[i];
        }
        for (xs, (xi, ki)) in self.xstage.iter_mut().zip(x.iter().zip(&self.k[2])) {
            *xs = xi + dt * ki;
        }
        rhs_into(&self.ustage, forcing, &mut s.k4);
        self.rows.fill(&self.ustage);
        self.rows.apply_columns(&self.xstage, &mut self.k[3]);

        let w = dt / 6.0;
        for i in 0..n {
            u[i] += w * (s.k1[i] + 2.0 * s.k2[i] + 2.0 * s.k3[i] + s.k4[i]);
        }
        let [k1, k2, k3, k4] = &self.k;
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += w * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
}

/// Integrates the trajectory from `m` together with the tangent block
/// `basis` (J×n) over a window of length `h`. Returns `(Ψ(m; h), DΨ(m; h)·basis)`.
pub fn propagate_basis(
    m: &StateVector,
    basis: &DMatrix<f64>,
    h: f64,
    dt: f64,
    p: &ModelParams,
) -> Result<(StateVector, DMatrix<f64>)> {
    check_dim(m.len(), p.dim())?;
    check_dim(basis.nrows(), p.dim())?;
    check_dt(dt)?;
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("window length must be > 0, got {h}")));
    }
    let n = p.dim();
    let cols = basis.ncols();
    let mut u = m.as_slice().to_vec();
    let mut x = basis.as_slice().to_vec();
    let mut rk = TangentRk4::new(n, cols);
    let (full, rest) = step_plan(h, dt);
    let check = |step: usize, time: f64, u: &[f64], x: &[f64]| -> Result<()> {
        if u.iter().any(|v| !v.is_finite()) || x.iter().any(|v| !v.is_finite()) {
            return Err(blow_up(step, time, u));
        }
        Ok(())
    };
    for step in 0..full {
        rk.step(&mut u, &mut x, dt, p.forcing());
        check(step + 1, (step + 1) as f64 * dt, &u, &x)?;
    }
    if rest > 0.0 {
        rk.step(&mut u, &mut x, rest, p.forcing());
        check(full + 1, h, &u, &x)?;
    }
    Ok((StateVector::from_vec(u), DMatrix::from_vec(n, cols, x)))
}

/// Joint trajectory/tangent propagation over `(0, h)` with `L(0) = I`.
pub fn propagate_tangent(
    m: &StateVector,
    h: f64,
    dt: f64,
    p: &ModelParams,
) -> Result<(StateVector, TangentPropagator)> {
    let (end, l) = propagate_basis(m, &DMatrix::identity(p.dim(), p.dim()), h, dt, p)?;
    Ok((end, TangentPropagator::new(l, (0.0, h))))
}

/// Initial truth: `F·1` plus a seeded perturbation of norm 0.01, integrated
/// for `duration` time units.
pub fn spin_up(p: &ModelParams, seed: u64, duration: f64, dt: f64) -> Result<StateVector> {
    let mut rng = rng::stream(seed, rng::SPIN_UP_STREAM);
    let z: Vec<f64> = (0..p.dim()).map(|_| rng.sample(StandardNormal)).collect();
    let norm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
    let u0: Vec<f64> = z.iter().map(|x| p.forcing() + 0.01 * x / norm).collect();
    flow(&StateVector::from_vec(u0), duration, dt, p)
}
