//! Monte Carlo twin experiments: one shared truth, independent observation
//! noise per realization, RMSE and covariance-rank statistics.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{
    aus_analysis, aus_reorthonormalize, exkf_analysis, forecast, forecast_with_tangent, threedvar_analysis, FilterConfig, FilterKind,
};
use crate::harness::config::ExperimentConfig;
use crate::linalg::{numerical_rank, ordered_symmetric_eigen};
use crate::model::{self, ModelParams, StateVector};
use crate::observations::{adaptive_operator, observe, NoiseModel, ObservationOperator, OperatorKind};
use crate::rng;

/// Only `t_k > TRANSIENT_END` enters the time-averaged RMSE.
pub const TRANSIENT_END: f64 = 40.0;

/// Eigenvalues below `RANK_THRESHOLD · λ_max` count as zero.
pub const RANK_THRESHOLD: f64 = 1e-6;

/// Runs `f` on a pool capped by `CHAOSFILT_THREADS` when that is set.
pub fn with_thread_cap<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let cap = std::env::var("CHAOSFILT_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0);
    if let Some(n) = cap {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            return pool.install(f);
        }
    }
    f()
}

/// Numerical rank of a symmetric PSD matrix at [`RANK_THRESHOLD`].
pub fn covariance_rank(c: &DMatrix<f64>) -> Result<usize> {
    let eig = ordered_symmetric_eigen(c)?;
    Ok(numerical_rank(&eig.values, RANK_THRESHOLD))
}

/// Shared ingredients of every realization.
#[derive(Debug, Clone)]
pub struct TwinSetup {
    pub params: ModelParams,
    pub filter: FilterConfig,
    /// `v_0, …, v_n` at `t_k = k·h`.
    pub truth: Vec<StateVector>,
    pub times: Vec<f64>,
    pub initial_mean: StateVector,
    /// `None` for adaptive observation.
    pub fixed_operator: Option<ObservationOperator>,
    pub adaptive_rank: Option<usize>,
    pub noise: NoiseModel,
}

impl TwinSetup {
    /// Spins up the truth from `base_seed`, integrates it over `T_end`, and
    /// draws the shared initial mean `v_0 + ρζ`.
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let params = cfg.model_params()?;
        let filter = cfg.filter_config()?;
        let steps = (cfg.t_end / cfg.h).round() as usize;
        let v0 = model::spin_up(&params, cfg.base_seed, cfg.spinup_t, cfg.dt)?;
        let mut truth = Vec::with_capacity(steps + 1);
        truth.push(v0.clone());
        for k in 0..steps {
            let next = model::flow(&truth[k], cfg.h, cfg.dt, &params)?;
            truth.push(next);
        }
        let times = (0..=steps).map(|k| k as f64 * cfg.h).collect();
        let mut r = rng::stream(cfg.base_seed, rng::MISMATCH_STREAM);
        let initial_mean =
            StateVector::new(v0.as_vector().map(|x| x + cfg.mismatch * r.sample::<f64, _>(StandardNormal)));
        let (fixed_operator, adaptive_rank) = match cfg.observation {
            OperatorKind::Adaptive => (None, Some(cfg.observed_dim()?)),
            kind => (Some(ObservationOperator::fixed(kind, params.dim())?), None),
        };
        Ok(Self {
            params,
            filter,
            truth,
            times,
            initial_mean,
            fixed_operator,
            adaptive_rank,
            noise: NoiseModel::new(cfg.epsilon, cfg.base_seed)?,
        })
    }

    pub fn steps(&self) -> usize {
        self.truth.len() - 1
    }
}

/// Why and when a realization stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub realization: u64,
    pub step: usize,
    pub message: String,
}

/// Per-step diagnostics of one filter run.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationTrace {
    pub id: u64,
    /// `|m_k − v_k|`.
    pub errors: Vec<f64>,
    /// `|H_k(m_k − v_k)|`, `NaN` before the first adaptive operator exists.
    pub observed_errors: Vec<f64>,
    /// Numerical rank of `C_k` for covariance-carrying filters.
    pub cov_rank: Option<Vec<usize>>,
    pub diverged: Option<Divergence>,
}

enum Cov {
    None,
    Full(DMatrix<f64>),
    Factor(DMatrix<f64>),
}

fn factor_rank(s: &DMatrix<f64>) -> Result<usize> {
    let eig = ordered_symmetric_eigen(&s.tr_mul(s))?;
    Ok(numerical_rank(&eig.values, RANK_THRESHOLD))
}

/// Filters realization `id` against the shared truth. Errors end the run
/// and are recorded as a divergence.
pub fn run_realization(setup: &TwinSetup, id: u64) -> RealizationTrace {
    let cfg = &setup.filter;
    let n = setup.params.dim();
    let noise = setup.noise.for_realization(id);
    let mut trace = RealizationTrace {
        id,
        errors: Vec::with_capacity(setup.truth.len()),
        observed_errors: Vec::with_capacity(setup.truth.len()),
        cov_rank: None,
        diverged: None,
    };
    let mut mean = setup.initial_mean.clone();
    let mut cov = match cfg.kind {
        FilterKind::ThreeDVar => Cov::None,
        FilterKind::ExKf => Cov::Full(cfg.model_covariance()),
        FilterKind::Aus => {
            let r = cfg.aus_rank.unwrap_or(n);
            Cov::Factor(DMatrix::identity(n, r) * cfg.sigma)
        }
    };
    let delta0 = mean.as_vector() - setup.truth[0].as_vector();
    trace.errors.push(delta0.norm());
    trace
        .observed_errors
        .push(setup.fixed_operator.as_ref().map_or(f64::NAN, |op| op.project(&delta0).norm()));
    match &cov {
        Cov::Full(_) => trace.cov_rank = Some(vec![n]),
        Cov::Factor(s) => trace.cov_rank = Some(vec![s.ncols()]),
        Cov::None => {}
    }

    for k in 0..setup.steps() {
        let step = k + 1;
        let outcome = (|| -> Result<(StateVector, Cov, f64, Option<usize>)> {
            let need_full_tangent = setup.adaptive_rank.is_some() || cfg.kind == FilterKind::ExKf;
            let (f, tangent) = if need_full_tangent {
                let (f, l) = forecast_with_tangent(&mean, cfg)?;
                (f, Some(l))
            } else if let Cov::Factor(s) = &cov {
                let (f, s_hat) = model::propagate_basis(&mean, s, cfg.h, cfg.dt, &cfg.model)?;
                (f, Some(crate::model::TangentPropagator::new(s_hat, (0.0, cfg.h))))
            } else {
                (forecast(&mean, cfg)?, None)
            };
            let adaptive;
            let op = match (&setup.fixed_operator, setup.adaptive_rank) {
                (Some(op), _) => op,
                (None, Some(m)) => {
                    adaptive = adaptive_operator(tangent.as_ref().expect("tangent computed"), m)?;
                    &adaptive
                }
                (None, None) => unreachable!("setup has an operator"),
            };
            let truth = &setup.truth[step];
            let y = observe(op, truth, &noise, step as u64)?;
            let (next, next_cov, rank) = match &cov {
                Cov::None => (threedvar_analysis(&f, &y, op, cfg)?, Cov::None, None),
                Cov::Full(c) => {
                    let l = tangent.as_ref().expect("tangent computed");
                    let a = exkf_analysis(&f, l.matrix(), c, &y, op, cfg, step)?;
                    let rank = numerical_rank(&a.eigenvalues, RANK_THRESHOLD);
                    (a.mean, Cov::Full(a.covariance), Some(rank))
                }
                Cov::Factor(s) => {
                    let t = tangent.as_ref().expect("tangent computed");
                    // Without a full propagator the tangent already holds `L·S`.
                    let s_hat = if need_full_tangent { t.matrix() * s } else { t.matrix().clone() };
                    let (m, posterior) = aus_analysis(&f, &s_hat, &y, op, cfg, step)?;
                    let rank = factor_rank(&posterior)?;
                    let factor = aus_reorthonormalize(&posterior, cfg.sigma, step)?;
                    (m, Cov::Factor(factor), Some(rank))
                }
            };
            if !next.is_finite() {
                return Err(Error::BlowUp {
                    step,
                    time: step as f64 * cfg.h,
                    norm: f64::NAN,
                });
            }
            let delta = next.as_vector() - truth.as_vector();
            Ok((next, next_cov, op.apply(&delta)?.norm(), rank))
        })();
        match outcome {
            Ok((next, next_cov, observed, rank)) => {
                trace.errors.push((next.as_vector() - setup.truth[step].as_vector()).norm());
                trace.observed_errors.push(observed);
                if let (Some(ranks), Some(r)) = (trace.cov_rank.as_mut(), rank) {
                    ranks.push(r);
                }
                mean = next;
                cov = next_cov;
            }
            Err(e) => {
                trace.diverged = Some(Divergence {
                    realization: id,
                    step,
                    message: e.to_string(),
                });
                break;
            }
        }
    }
    trace
}

/// `RMSE(t_k)` and its time average over `t_k > 40`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Mean of `values` over `t_k > 40`.
    pub average: f64,
    /// Realizations entering the average (diverged ones are excluded).
    pub realizations: usize,
    pub config_hash: String,
}

/// Mean of `values[k]` over `times[k] > TRANSIENT_END`.
pub fn time_average(times: &[f64], values: &[f64]) -> f64 {
    let cut = TRANSIENT_END * (1.0 + 1e-12);
    let (sum, count) = times
        .iter()
        .zip(values)
        .filter(|(&t, _)| t > cut)
        .fold((0.0, 0usize), |(s, c), (_, &v)| (s + v, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

impl RmseSeries {
    /// `RMSE(t_k) = (1/I) Σ_i √(|m_k⁽ⁱ⁾ − v_k|²/J)` over the realizations that
    /// completed, summed in realization order.
    pub fn from_traces(times: &[f64], traces: &[RealizationTrace], dim: usize, config_hash: String) -> Self {
        let done: Vec<&RealizationTrace> = traces.iter().filter(|t| t.diverged.is_none()).collect();
        let scale = 1.0 / (dim as f64).sqrt();
        let values: Vec<f64> = (0..times.len())
            .map(|k| {
                if done.is_empty() {
                    return f64::NAN;
                }
                let sum: f64 = done.iter().map(|t| t.errors[k] * scale).sum();
                sum / done.len() as f64
            })
            .collect();
        Self {
            times: times.to_vec(),
            average: time_average(times, &values),
            values,
            realizations: done.len(),
            config_hash,
        }
    }
}

/// Covariance rank over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSeries {
    pub times: Vec<f64>,
    /// Rank in the first completed realization.
    pub ranks: Vec<usize>,
    /// Mean rank across completed realizations.
    pub mean_ranks: Vec<f64>,
    pub threshold: f64,
}

/// Rank statistics from covariance-carrying traces; `None` for 3DVAR.
pub fn rank_series(times: &[f64], traces: &[RealizationTrace]) -> Option<RankSeries> {
    let done: Vec<&Vec<usize>> = traces
        .iter()
        .filter(|t| t.diverged.is_none())
        .filter_map(|t| t.cov_rank.as_ref())
        .collect();
    let first = done.first()?;
    let mean_ranks = (0..times.len())
        .map(|k| done.iter().map(|r| r[k] as f64).sum::<f64>() / done.len() as f64)
        .collect();
    Some(RankSeries {
        times: times.to_vec(),
        ranks: first.to_vec(),
        mean_ranks,
        threshold: RANK_THRESHOLD,
    })
}

/// Everything a twin experiment produces.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub rmse: RmseSeries,
    pub rank: Option<RankSeries>,
    pub traces: Vec<RealizationTrace>,
    pub divergences: Vec<Divergence>,
}

/// Runs `cfg.realizations` independent filters in parallel against one truth.
pub fn run_twin_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let setup = TwinSetup::new(cfg)?;
    let traces: Vec<RealizationTrace> = with_thread_cap(|| {
        (0..cfg.realizations as u64)
            .into_par_iter()
            .map(|id| run_realization(&setup, id))
            .collect()
    });
    let rmse = RmseSeries::from_traces(&setup.times, &traces, setup.params.dim(), cfg.config_hash());
    let rank = rank_series(&setup.times, &traces);
    let divergences = traces.iter().filter_map(|t| t.diverged.clone()).collect();
    Ok(ExperimentResult {
        config: cfg.clone(),
        rmse,
        rank,
        traces,
        divergences,
    })
}

/// One row of an averaged-RMSE table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub filter: FilterKind,
    pub observation: OperatorKind,
    pub m: usize,
    pub aus_rank: Option<usize>,
    pub avg_rmse: f64,
    pub divergences: usize,
}

/// One experiment variant: filter kind, operator kind and observed dimension
/// (ignored for fixed operators).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepEntry {
    pub filter: FilterKind,
    pub observation: OperatorKind,
    pub m: Option<usize>,
    pub aus_rank: Option<usize>,
}

/// Runs `base` once per entry and tabulates the averaged RMSE.
pub fn sweep(base: &ExperimentConfig, entries: &[SweepEntry]) -> Result<Vec<SweepRow>> {
    entries
        .iter()
        .map(|e| {
            let mut cfg = base.clone();
            cfg.filter = e.filter;
            cfg.observation = e.observation;
            cfg.obs_rank = if e.observation == OperatorKind::Adaptive { e.m } else { None };
            cfg.aus_rank = e.aus_rank.or(cfg.aus_rank);
            let res = run_twin_experiment(&cfg)?;
            Ok(SweepRow {
                filter: e.filter,
                observation: e.observation,
                m: cfg.observed_dim()?,
                aus_rank: cfg.aus_rank,
                avg_rmse: res.rmse.average,
                divergences: res.divergences.len(),
            })
        })
        .collect()
}

/// `|m − v|/√J` per step for a single trace.
pub fn rmse_contributions(trace: &RealizationTrace, dim: usize) -> DVector<f64> {
    DVector::from_iterator(trace.errors.len(), trace.errors.iter().map(|e| e / (dim as f64).sqrt()))
}
