//! Lyapunov spectrum by repeated QR re-orthonormalization of a full tangent
//! frame carried along a trajectory.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::fmt_f64;
use crate::model::{self, ModelParams};

/// Exponents above this count as positive; the flow direction sits near 0.
pub const POSITIVITY_TOL: f64 = 0.01;

/// Tangent-frame growth allowed between re-orthonormalizations.
const MAX_FRAME_NORM: f64 = 1e12;

/// Integration settings for [`lyapunov_spectrum`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSettings {
    /// Averaging length after the transient.
    pub t_total: f64,
    pub renorm_interval: f64,
    pub transient: f64,
    pub dt: f64,
}

impl Default for LyapunovSettings {
    fn default() -> Self {
        Self {
            t_total: 2000.0,
            renorm_interval: 0.5,
            transient: 100.0,
            dt: crate::model::DEFAULT_DT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovResult {
    /// Non-increasing.
    pub exponents: Vec<f64>,
    pub n_positive: usize,
    pub tolerance: f64,
    pub settings: LyapunovSettings,
    pub seed: u64,
}

impl LyapunovResult {
    pub fn sum(&self) -> f64 {
        self.exponents.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.exponents.first().copied().unwrap_or(f64::NAN)
    }

    /// Exponent of smallest magnitude (the flow direction when chaotic).
    pub fn closest_to_zero(&self) -> f64 {
        self.exponents
            .iter()
            .copied()
            .min_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(f64::NAN)
    }

    /// `index,value` rows with a 1-based index.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,value\n");
        for (i, x) in self.exponents.iter().enumerate() {
            let _ = writeln!(out, "{},{}", i + 1, fmt_f64(*x));
        }
        out
    }

    pub fn summary(&self, p: &ModelParams) -> Value {
        json!({
            "n_positive": self.n_positive,
            "sum": self.sum(),
            "max": self.max(),
            "params": {
                "J": p.dim(),
                "F": p.forcing(),
                "seed": self.seed,
                "t_total": self.settings.t_total,
                "renorm_interval": self.settings.renorm_interval,
                "transient": self.settings.transient,
                "dt": self.settings.dt,
                "tolerance": self.tolerance,
            }
        })
    }
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {x}")))
    }
}

/// Starts from a seeded spin-up of length `transient`, then carries an
/// identity tangent frame for `t_total`, re-orthonormalizing by QR every
/// `renorm_interval` and averaging `ln|R_ii|`.
pub fn lyapunov_spectrum(p: &ModelParams, settings: &LyapunovSettings, seed: u64) -> Result<LyapunovResult> {
    let s = settings;
    positive("t_total", s.t_total)?;
    positive("renorm_interval", s.renorm_interval)?;
    positive("dt", s.dt)?;
    if !(s.transient >= 0.0) {
        return Err(Error::InvalidParameter(format!("transient must be >= 0, got {}", s.transient)));
    }
    let n = p.dim();
    let windows = (s.t_total / s.renorm_interval).round().max(1.0) as usize;
    let mut u = model::spin_up(p, seed, s.transient, s.dt)?;
    let mut frame = DMatrix::identity(n, n);
    let mut log_sums = vec![0.0; n];
    for w in 0..windows {
        let (next, grown) = model::propagate_basis(&u, &frame, s.renorm_interval, s.dt, p)?;
        if grown.amax() > MAX_FRAME_NORM {
            return Err(Error::DegenerateQr(format!(
                "tangent frame reached {:e} in window {w}; shorten the renormalization interval",
                grown.amax()
            )));
        }
        let qr = grown.qr();
        let r = qr.r();
        for (i, acc) in log_sums.iter_mut().enumerate() {
            let d = r[(i, i)].abs();
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::DegenerateQr(format!("R[{i},{i}] = {d} in window {w}")));
            }
            *acc += d.ln();
        }
        frame = qr.q();
        u = next;
    }
    let elapsed = windows as f64 * s.renorm_interval;
    let mut exponents: Vec<f64> = log_sums.iter().map(|l| l / elapsed).collect();
    exponents.sort_by(|a, b| b.total_cmp(a));
    let n_positive = exponents.iter().filter(|&&x| x > POSITIVITY_TOL).count();
    Ok(LyapunovResult {
        exponents,
        n_positive,
        tolerance: POSITIVITY_TOL,
        settings: *s,
        seed,
    })
}

/// Independent runs for several seeds, in parallel, returned in seed order.
pub fn lyapunov_seeds(p: &ModelParams, settings: &LyapunovSettings, seeds: &[u64]) -> Result<Vec<LyapunovResult>> {
    seeds
        .par_iter()
        .map(|&seed| lyapunov_spectrum(p, settings, seed))
        .collect()
}
