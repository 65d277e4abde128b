//! Continuous-time 3DVAR: the SDE
//! `dm = [𝓕(m) + η⁻¹P(v − m)] dt + (ε/η) P dW`
//! driven by a noise-free truth, integrated by Euler–Maruyama.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, blow_up, check_dim, rhs_into, ModelParams, StateVector};
use crate::observations::ObservationOperator;
use crate::rng;

/// Settings for [`continuous_3dvar_run`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Continuous3dvarConfig {
    pub eta: f64,
    pub epsilon: f64,
    pub t_end: f64,
    /// Euler–Maruyama step; defaults to `min(1e-3, η/10)`.
    pub dt: Option<f64>,
    pub seed: u64,
    pub realizations: usize,
    /// Sample the mean-square error every this many steps.
    pub record_every: usize,
}

impl Continuous3dvarConfig {
    pub fn new(eta: f64, epsilon: f64, t_end: f64, seed: u64) -> Self {
        Self {
            eta,
            epsilon,
            t_end,
            dt: None,
            seed,
            realizations: 1,
            record_every: 100,
        }
    }

    pub fn step(&self) -> f64 {
        self.dt.unwrap_or_else(|| model::DEFAULT_DT.min(self.eta / 10.0))
    }

    fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if !(self.t_end >= 0.0) {
            return Err(Error::InvalidParameter(format!("t_end must be >= 0, got {}", self.t_end)));
        }
        if self.realizations == 0 {
            return Err(Error::InvalidParameter("need at least one realization".into()));
        }
        let dt = self.step();
        if !(dt > 0.0 && dt < self.eta) {
            return Err(Error::InvalidParameter(format!(
                "Euler-Maruyama step {dt} must be positive and below eta = {}",
                self.eta
            )));
        }
        Ok(())
    }
}

/// Ensemble mean of `|m(t) − v(t)|²` on a uniform sampling grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanSquareSeries {
    pub times: Vec<f64>,
    pub mean_sq: Vec<f64>,
    pub realizations: usize,
}

/// Runs `cfg.realizations` independent realizations from the same `(v0, m0)`
/// and averages `|m − v|²` in realization order.
///
/// The truth advances with the same explicit Euler step as the filter so that
/// with `ε = 0` and `η → 0` the two schemes coincide on the observed space.
pub fn continuous_3dvar_run(
    v0: &StateVector,
    m0: &StateVector,
    op: &ObservationOperator,
    cfg: &Continuous3dvarConfig,
    p: &ModelParams,
) -> Result<MeanSquareSeries> {
    check_dim(v0.len(), p.dim())?;
    check_dim(m0.len(), p.dim())?;
    check_dim(op.dim(), p.dim())?;
    cfg.validate()?;
    let runs: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..cfg.realizations)
        .into_par_iter()
        .map(|id| single_run(v0, m0, op, cfg, p, rng::realization_seed(cfg.seed, id as u64)))
        .collect();
    let mut times = Vec::new();
    let mut sum: Vec<f64> = Vec::new();
    for run in runs {
        let (t, e) = run?;
        if sum.is_empty() {
            times = t;
            sum = e;
        } else {
            sum.iter_mut().zip(e).for_each(|(s, x)| *s += x);
        }
    }
    let n = cfg.realizations as f64;
    Ok(MeanSquareSeries {
        times,
        mean_sq: sum.into_iter().map(|s| s / n).collect(),
        realizations: cfg.realizations,
    })
}

fn single_run(
    v0: &StateVector,
    m0: &StateVector,
    op: &ObservationOperator,
    cfg: &Continuous3dvarConfig,
    p: &ModelParams,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = p.dim();
    let forcing = p.forcing();
    let dt = cfg.step();
    let (steps, _) = model::step_plan(cfg.t_end, dt);
    let record_every = cfg.record_every.max(1);
    let noise_scale = cfg.epsilon / cfg.eta * dt.sqrt();
    let mut rng = rng::stream(seed, 0);

    let mut v = v0.as_vector().clone();
    let mut m = m0.as_vector().clone();
    let mut fv = DVector::zeros(n);
    let mut fm = DVector::zeros(n);
    let mut times = vec![0.0];
    let mut errs = vec![(&m - &v).norm_squared()];
    for step in 0..steps {
        rhs_into(v.as_slice(), forcing, fv.as_mut_slice());
        rhs_into(m.as_slice(), forcing, fm.as_mut_slice());
        let nudge = op.project(&(&v - &m)) / cfg.eta;
        let mut dm = (&fm + nudge) * dt;
        if noise_scale > 0.0 {
            let dw = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            dm += op.project(&dw) * noise_scale;
        }
        v.axpy(dt, &fv, 1.0);
        m += dm;
        let t = (step + 1) as f64 * dt;
        if m.iter().any(|x| !x.is_finite()) {
            return Err(blow_up(step + 1, t, m.as_slice()));
        }
        if (step + 1) % record_every == 0 || step + 1 == steps {
            times.push(t);
            errs.push((&m - &v).norm_squared());
        }
    }
    Ok((times, errs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_must_stay_below_eta() {
        let p = ModelParams::new(6, 8.0).unwrap();
        let op = ObservationOperator::p(6).unwrap();
        let v0 = p.fixed_point();
        let mut cfg = Continuous3dvarConfig::new(1e-3, 0.0, 0.1, 1);
        cfg.dt = Some(2e-3);
        assert!(continuous_3dvar_run(&v0, &v0, &op, &cfg, &p).is_err());
        cfg.dt = None;
        assert!((cfg.step() - 1e-4).abs() < 1e-18);
    }

    #[test]
    fn identical_start_without_noise_stays_exact() {
        let p = ModelParams::new(12, 8.0).unwrap();
        let op = ObservationOperator::p(12).unwrap();
        let v0 = model::spin_up(&p, 2, 2.0, 1e-3).unwrap();
        let cfg = Continuous3dvarConfig::new(0.1, 0.0, 1.0, 1);
        let s = continuous_3dvar_run(&v0, &v0, &op, &cfg, &p).unwrap();
        assert!(s.mean_sq.iter().all(|&e| e == 0.0));
        assert_eq!(s.times.len(), 11);
    }

    #[test]
    fn realizations_are_reproducible() {
        let p = ModelParams::new(6, 8.0).unwrap();
        let op = ObservationOperator::p(6).unwrap();
        let v0 = model::spin_up(&p, 2, 2.0, 1e-3).unwrap();
        let mut cfg = Continuous3dvarConfig::new(0.5, 0.1, 0.5, 9);
        cfg.realizations = 4;
        let a = continuous_3dvar_run(&v0, &v0, &op, &cfg, &p).unwrap();
        let b = continuous_3dvar_run(&v0, &v0, &op, &cfg, &p).unwrap();
        assert_eq!(a, b);
        assert!(a.mean_sq.last().unwrap() > &0.0);
    }
}
