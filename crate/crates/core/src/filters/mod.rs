//! Discrete-time filters built on the minimization principle
//! `argmin ½|m − Ψ(m_k)|²_Ĉ + ½|y − Hm|²_Γ`: 3DVAR (constant `Ĉ = σ²I`),
//! the extended Kalman filter and its reduced-rank unstable-subspace
//! variant, plus the synchronization filters and the continuous-time 3DVAR
//! limit.

mod continuous;
mod sync;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ordered_symmetric_eigen, spd_solve};
use crate::model::{self, check_dim, ModelParams, StateVector, TangentPropagator};
use crate::observations::ObservationOperator;

pub use continuous::{continuous_3dvar_run, Continuous3dvarConfig, MeanSquareSeries};
pub use sync::{sync_continuous_run, sync_discrete_run};

/// Negative eigenvalues of the analysis covariance down to `-PSD_TOL·|C|` are
/// clipped to zero; anything below is a divergence.
pub const PSD_TOL: f64 = 1e-10;

/// Condition number of the reduced-rank forecast factor treated as collapse.
pub const MAX_FACTOR_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FilterKind {
    ThreeDVar,
    ExKf,
    Aus,
}

impl FilterKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FilterKind::ThreeDVar => "3dvar",
            FilterKind::ExKf => "exkf",
            FilterKind::Aus => "aus",
        }
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "3dvar" => Ok(FilterKind::ThreeDVar),
            "exkf" | "ekf" => Ok(FilterKind::ExKf),
            "aus" | "exkf-aus" => Ok(FilterKind::Aus),
            other => Err(Error::Config(format!("unknown filter kind '{other}'"))),
        }
    }
}

/// Assimilation parameters shared by all discrete filters.
///
/// `C₀ = σ²I`, `Γ = ε²I` and `η = ε²/σ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub model: ModelParams,
    /// Assimilation interval `h`.
    pub h: f64,
    pub sigma: f64,
    pub epsilon: f64,
    pub kind: FilterKind,
    /// Columns of the square-root factor (AUS only).
    pub aus_rank: Option<usize>,
    /// Inner RK4 step.
    pub dt: f64,
}

impl FilterConfig {
    pub fn new(model: ModelParams, h: f64, sigma: f64, epsilon: f64, kind: FilterKind) -> Result<Self> {
        let cfg = Self {
            model,
            h,
            sigma,
            epsilon,
            kind,
            aus_rank: None,
            dt: model::DEFAULT_DT,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Same as [`Self::new`] with `σ` derived from `η = ε²/σ²`.
    pub fn with_eta(model: ModelParams, h: f64, eta: f64, epsilon: f64, kind: FilterKind) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::InvalidParameter(format!("eta must be positive, got {eta}")));
        }
        Self::new(model, h, epsilon / eta.sqrt(), epsilon, kind)
    }

    pub fn with_dt(mut self, dt: f64) -> Result<Self> {
        self.dt = dt;
        self.validate()?;
        Ok(self)
    }

    pub fn with_aus_rank(mut self, r: usize) -> Result<Self> {
        self.aus_rank = Some(r);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {x}")))
            }
        };
        positive("h", self.h)?;
        positive("sigma", self.sigma)?;
        positive("epsilon", self.epsilon)?;
        positive("dt", self.dt)?;
        if let Some(r) = self.aus_rank {
            if r == 0 || r > self.model.dim() {
                return Err(Error::InvalidParameter(format!(
                    "aus rank must be in 1..={}, got {r}",
                    self.model.dim()
                )));
            }
        }
        if self.kind == FilterKind::Aus && self.aus_rank.is_none() {
            return Err(Error::InvalidParameter("AUS requires an aus rank".into()));
        }
        Ok(())
    }

    pub fn eta(&self) -> f64 {
        self.epsilon * self.epsilon / (self.sigma * self.sigma)
    }

    /// `C₀ = σ²I`.
    pub fn model_covariance(&self) -> DMatrix<f64> {
        let n = self.model.dim();
        DMatrix::identity(n, n) * (self.sigma * self.sigma)
    }

    /// `Γ = ε²I` on an `m`-dimensional observation space.
    pub fn observation_covariance(&self, m: usize) -> DMatrix<f64> {
        DMatrix::identity(m, m) * (self.epsilon * self.epsilon)
    }
}

/// Second-moment information carried between steps.
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    /// 3DVAR: the constant `C₀` lives in the config.
    None,
    /// ExKF: full symmetric PSD `J×J` covariance.
    Full(DMatrix<f64>),
    /// AUS: `J×r` square-root factor `S` with `C = SSᵀ`.
    Factor(DMatrix<f64>),
}

/// Filter mean `m_k` plus covariance, at step `k` and time `t = k·h`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub mean: StateVector,
    pub cov: Covariance,
    pub step: usize,
    pub time: f64,
}

impl FilterState {
    /// Starting state for `cfg.kind`: no covariance for 3DVAR, `σ²I` for the
    /// ExKF and `σ` times the first `r` identity columns for AUS.
    pub fn initial(cfg: &FilterConfig, mean: StateVector) -> Result<Self> {
        check_dim(mean.len(), cfg.model.dim())?;
        let n = cfg.model.dim();
        let cov = match cfg.kind {
            FilterKind::ThreeDVar => Covariance::None,
            FilterKind::ExKf => Covariance::Full(cfg.model_covariance()),
            FilterKind::Aus => {
                let r = cfg.aus_rank.expect("validated");
                Covariance::Factor(DMatrix::identity(n, r) * cfg.sigma)
            }
        };
        Ok(Self {
            mean,
            cov,
            step: 0,
            time: 0.0,
        })
    }

    /// The covariance as a dense matrix, if any is carried.
    pub fn covariance_matrix(&self) -> Option<DMatrix<f64>> {
        match &self.cov {
            Covariance::None => None,
            Covariance::Full(c) => Some(c.clone()),
            Covariance::Factor(s) => Some(s * s.transpose()),
        }
    }

    fn advance(&self, mean: StateVector, cov: Covariance, h: f64) -> Self {
        Self {
            mean,
            cov,
            step: self.step + 1,
            time: (self.step + 1) as f64 * h,
        }
    }
}

/// `J×M` gain.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMatrix(pub DMatrix<f64>);

impl GainMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// `G = ĈHᵀ(HĈHᵀ + Γ)⁻¹`.
pub fn kalman_gain(c_hat: &DMatrix<f64>, h: &DMatrix<f64>, gamma: &DMatrix<f64>) -> Result<GainMatrix> {
    let hc = h * c_hat;
    let s = &hc * h.transpose() + gamma;
    let s = (&s + s.transpose()) * 0.5;
    // G = (S⁻¹ H Ĉ)ᵀ since Ĉ and S are symmetric.
    let gt = spd_solve(&s, &hc)?;
    Ok(GainMatrix(gt.transpose()))
}

/// The 3DVAR gain with `Ĉ = C₀`.
pub fn threedvar_gain(h: &ObservationOperator, cfg: &FilterConfig) -> Result<GainMatrix> {
    kalman_gain(
        &cfg.model_covariance(),
        h.matrix(),
        &cfg.observation_covariance(h.rank()),
    )
}

fn innovation(y: &DVector<f64>, h: &ObservationOperator, forecast: &StateVector) -> Result<DVector<f64>> {
    check_dim(y.len(), h.rank())?;
    Ok(y - h.apply(forecast.as_vector())?)
}

/// Forecast step alone: `Ψ(m; h)`.
pub fn forecast(mean: &StateVector, cfg: &FilterConfig) -> Result<StateVector> {
    model::flow(mean, cfg.h, cfg.dt, &cfg.model)
}

/// Forecast together with the window's tangent propagator `DΨ(m)`.
pub fn forecast_with_tangent(mean: &StateVector, cfg: &FilterConfig) -> Result<(StateVector, TangentPropagator)> {
    model::propagate_tangent(mean, cfg.h, cfg.dt, &cfg.model)
}

/// 3DVAR analysis of a given forecast.
pub fn threedvar_analysis(
    forecast: &StateVector,
    y: &DVector<f64>,
    h: &ObservationOperator,
    cfg: &FilterConfig,
) -> Result<StateVector> {
    check_dim(h.dim(), cfg.model.dim())?;
    let d = innovation(y, h, forecast)?;
    let g = threedvar_gain(h, cfg)?;
    Ok(StateVector::new(forecast.as_vector() + g.matrix() * d))
}

/// `m_{k+1} = Ψ(m_k) + G(y − HΨ(m_k))`, `G = C₀Hᵀ(HC₀Hᵀ + Γ)⁻¹`.
pub fn threedvar_step(
    state: &FilterState,
    y: &DVector<f64>,
    h: &ObservationOperator,
    cfg: &FilterConfig,
) -> Result<FilterState> {
    let f = forecast(&state.mean, cfg)?;
    let mean = threedvar_analysis(&f, y, h, cfg)?;
    Ok(state.advance(mean, Covariance::None, cfg.h))
}

/// Result of an ExKF analysis: new mean, covariance and its eigenvalues.
#[derive(Debug, Clone)]
pub struct ExkfAnalysis {
    pub mean: StateVector,
    pub covariance: DMatrix<f64>,
    /// Ascending eigenvalues of the (clipped) analysis covariance.
    pub eigenvalues: Vec<f64>,
}

/// ExKF analysis given the forecast mean and the window propagator `L`.
pub fn exkf_analysis(
    forecast: &StateVector,
    tangent: &DMatrix<f64>,
    cov: &DMatrix<f64>,
    y: &DVector<f64>,
    h: &ObservationOperator,
    cfg: &FilterConfig,
    step: usize,
) -> Result<ExkfAnalysis> {
    let n = cfg.model.dim();
    check_dim(cov.nrows(), n)?;
    check_dim(h.dim(), n)?;
    let c_hat = tangent * cov * tangent.transpose();
    let c_hat = (&c_hat + c_hat.transpose()) * 0.5;
    let d = innovation(y, h, forecast)?;
    let g = kalman_gain(&c_hat, h.matrix(), &cfg.observation_covariance(h.rank()))?;
    let mean = StateVector::new(forecast.as_vector() + g.matrix() * d);
    let gh = g.matrix() * h.matrix();
    let c = (DMatrix::identity(n, n) - gh) * &c_hat;
    let c = (&c + c.transpose()) * 0.5;
    let (covariance, eigenvalues) = clip_psd(c, step)?;
    Ok(ExkfAnalysis {
        mean,
        covariance,
        eigenvalues,
    })
}

/// Floors round-off negative eigenvalues at zero; fails past `PSD_TOL`.
fn clip_psd(c: DMatrix<f64>, step: usize) -> Result<(DMatrix<f64>, Vec<f64>)> {
    if c.iter().any(|x| !x.is_finite()) {
        return Err(Error::CovarianceNotPsd {
            step,
            min_eig: f64::NAN,
            norm: f64::NAN,
        });
    }
    let eig = ordered_symmetric_eigen(&c)?;
    let norm = eig.values.iter().fold(0.0_f64, |a, &l| a.max(l.abs()));
    let min = eig.values.first().copied().unwrap_or(0.0);
    if min >= 0.0 {
        return Ok((c, eig.values));
    }
    if min < -PSD_TOL * norm {
        return Err(Error::CovarianceNotPsd {
            step,
            min_eig: min,
            norm,
        });
    }
    let clipped: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0)).collect();
    let v = &eig.vectors;
    let d = DMatrix::from_diagonal(&DVector::from_column_slice(&clipped));
    let c = v * d * v.transpose();
    Ok(((&c + c.transpose()) * 0.5, clipped))
}

/// One ExKF cycle: `Ĉ = DΨ C DΨᵀ`, `G = ĈHᵀ(HĈHᵀ+Γ)⁻¹`,
/// `m = Ψ(m) + G(y − HΨ(m))`, `C = (I − GH)Ĉ` symmetrized.
pub fn exkf_step(
    state: &FilterState,
    y: &DVector<f64>,
    h: &ObservationOperator,
    cfg: &FilterConfig,
) -> Result<FilterState> {
    let Covariance::Full(cov) = &state.cov else {
        return Err(Error::InvalidParameter("ExKF step needs a full covariance".into()));
    };
    let (f, l) = forecast_with_tangent(&state.mean, cfg)?;
    let a = exkf_analysis(&f, l.matrix(), cov, y, h, cfg, state.step + 1)?;
    Ok(state.advance(a.mean, Covariance::Full(a.covariance), cfg.h))
}

/// Reduced-rank analysis confined to the span of the forecast factor
/// `Ŝ = DΨ·S` (`J×r`).
///
/// With `Z = HŜ` and `A = I + ZᵀΓ⁻¹Z` (r×r) the update is
/// `m = Ψ(m) + Ŝ A⁻¹ ZᵀΓ⁻¹ d` and the posterior factor `Ŝ A^{-1/2}`,
/// rotated so its columns are mutually orthogonal and sorted by norm.
pub fn aus_analysis(
    forecast: &StateVector,
    factor: &DMatrix<f64>,
    y: &DVector<f64>,
    h: &ObservationOperator,
    cfg: &FilterConfig,
    step: usize,
) -> Result<(StateVector, DMatrix<f64>)> {
    check_dim(factor.nrows(), cfg.model.dim())?;
    check_dim(h.dim(), cfg.model.dim())?;
    let r = factor.ncols();

    let gram = ordered_symmetric_eigen(&factor.tr_mul(factor))?;
    let (lo, hi) = (gram.values[0], gram.values[r - 1]);
    let cond = if lo > 0.0 { (hi / lo).sqrt() } else { f64::INFINITY };
    if !(cond <= MAX_FACTOR_CONDITION) {
        return Err(Error::RankCollapse { step, cond });
    }

    let inv_gamma = 1.0 / (cfg.epsilon * cfg.epsilon);
    let d = innovation(y, h, forecast)?;
    let z = h.matrix() * factor;
    let a = DMatrix::identity(r, r) + z.tr_mul(&z) * inv_gamma;
    let a_eig = ordered_symmetric_eigen(&a)?;
    let mut w = a_eig.vectors.clone();
    let mut w_inv = a_eig.vectors.clone();
    for (j, &l) in a_eig.values.iter().enumerate() {
        w.column_mut(j).scale_mut(1.0 / l.sqrt());
        w_inv.column_mut(j).scale_mut(1.0 / l);
    }
    let a_inv = &w_inv * a_eig.vectors.transpose();
    let a_inv_sqrt = &w * a_eig.vectors.transpose();

    let weights = a_inv * (z.tr_mul(&d) * inv_gamma);
    let mean = StateVector::new(forecast.as_vector() + factor * weights);

    let post = factor * a_inv_sqrt;
    let rot = ordered_symmetric_eigen(&post.tr_mul(&post))?;
    // Descending column norms.
    let mut rotated = &post * &rot.vectors;
    let cols: Vec<DVector<f64>> = (0..r).rev().map(|j| rotated.column(j).into_owned()).collect();
    for (j, c) in cols.iter().enumerate() {
        rotated.column_mut(j).copy_from(c);
    }
    Ok((mean, rotated))
}

/// Rescales the orthogonal columns of a posterior factor to norm `σ`, so the
/// next cycle carries an orthonormal basis of the tracked subspace with the
/// prior amplitude. Column order is kept.
pub fn aus_reorthonormalize(factor: &DMatrix<f64>, sigma: f64, step: usize) -> Result<DMatrix<f64>> {
    let mut out = factor.clone();
    let largest = factor.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    for mut c in out.column_iter_mut() {
        let norm = c.norm();
        if !(norm > 0.0 && largest / norm <= MAX_FACTOR_CONDITION) {
            return Err(Error::RankCollapse {
                step,
                cond: largest / norm,
            });
        }
        c.scale_mut(sigma / norm);
    }
    Ok(out)
}

/// One AUS cycle with an `r`-column square-root factor.
pub fn aus_step(
    state: &FilterState,
    y: &DVector<f64>,
    h: &ObservationOperator,
    cfg: &FilterConfig,
) -> Result<FilterState> {
    let Covariance::Factor(s) = &state.cov else {
        return Err(Error::InvalidParameter("AUS step needs a square-root factor".into()));
    };
    let (f, s_hat) = model::propagate_basis(&state.mean, s, cfg.h, cfg.dt, &cfg.model)?;
    let (mean, factor) = aus_analysis(&f, &s_hat, y, h, cfg, state.step + 1)?;
    let factor = aus_reorthonormalize(&factor, cfg.sigma, state.step + 1)?;
    Ok(state.advance(mean, Covariance::Factor(factor), cfg.h))
}
