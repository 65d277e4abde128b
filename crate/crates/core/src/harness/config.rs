//! Experiment configuration: flat dotted keys, from JSON or `key = value`
//! lines. Unknown keys are rejected.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::filters::{FilterConfig, FilterKind};
use crate::lyapunov::LyapunovSettings;
use crate::model::{ModelParams, DEFAULT_DT};
use crate::observations::{ObservationOperator, OperatorKind};

/// Every accepted key, in canonical order.
pub const KEYS: &[&str] = &[
    "model.J",
    "model.F",
    "assimilation.h",
    "assimilation.epsilon",
    "assimilation.eta",
    "assimilation.sigma",
    "assimilation.T_end",
    "assimilation.dt",
    "observation.kind",
    "observation.M",
    "filter.kind",
    "filter.aus_rank",
    "monte_carlo.I",
    "monte_carlo.base_seed",
    "init.spinup_T",
    "init.mismatch",
    "output.path",
    "lyapunov.t_total",
    "lyapunov.renorm_interval",
    "lyapunov.transient",
    "lyapunov.dt",
];

/// Twin-experiment settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub forcing: f64,
    pub h: f64,
    /// Observation noise standard deviation.
    pub epsilon: f64,
    /// `ε²/σ²`.
    pub eta: f64,
    pub t_end: f64,
    pub dt: f64,
    pub observation: OperatorKind,
    /// Observed dimension; required for adaptive operators.
    pub obs_rank: Option<usize>,
    pub filter: FilterKind,
    pub aus_rank: Option<usize>,
    pub realizations: usize,
    pub base_seed: u64,
    pub spinup_t: f64,
    /// Standard deviation of the initial mean's per-component offset.
    pub mismatch: f64,
    pub output: Option<PathBuf>,
    pub lyapunov: LyapunovSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dim: 60,
            forcing: 8.0,
            h: 0.1,
            epsilon: 0.01,
            eta: 0.01,
            t_end: 100.0,
            dt: DEFAULT_DT,
            observation: OperatorKind::P,
            obs_rank: None,
            filter: FilterKind::ThreeDVar,
            aus_rank: None,
            realizations: 100,
            base_seed: 2024,
            spinup_t: 100.0,
            mismatch: 1.0,
            output: None,
            lyapunov: LyapunovSettings::default(),
        }
    }
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
    .ok_or_else(|| Error::Config(format!("{key}: expected a number, got {v}")))
}

fn as_usize(key: &str, v: &Value) -> Result<usize> {
    match v {
        Value::Number(n) => n.as_u64().map(|x| x as usize),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
    .ok_or_else(|| Error::Config(format!("{key}: expected a non-negative integer, got {v}")))
}

fn as_u64(key: &str, v: &Value) -> Result<u64> {
    match v {
        Value::Number(n) => n.as_u64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
    .ok_or_else(|| Error::Config(format!("{key}: expected a non-negative integer, got {v}")))
}

fn as_string(key: &str, v: &Value) -> Result<String> {
    match v {
        Value::String(s) => Ok(s.trim().to_string()),
        Value::Number(n) => Ok(n.to_string()),
        _ => Err(Error::Config(format!("{key}: expected a string, got {v}"))),
    }
}

/// Parses a `key = value` line body into a JSON value: numbers stay
/// numeric, quoted or bare words become strings.
fn scalar(raw: &str) -> Value {
    let raw = raw.trim();
    if let Some(s) = raw.strip_prefix('"').and_then(|r| r.strip_suffix('"')) {
        return Value::String(s.to_string());
    }
    serde_json::from_str::<Value>(raw)
        .ok()
        .filter(|v| v.is_number() || v.is_null())
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

impl ExperimentConfig {
    /// Reads a JSON object (flat dotted keys) or `key = value` lines.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Applies the settings in `text` on top of `self` without validating.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let trimmed = text.trim_start();
        let mut pairs: Vec<(String, Value)> = Vec::new();
        if trimmed.starts_with('{') {
            let map: Map<String, Value> = serde_json::from_str(trimmed)
                .map_err(|e| Error::Config(format!("invalid JSON config: {e}")))?;
            pairs.extend(map);
        } else {
            for (i, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
                pairs.push((k.trim().to_string(), scalar(v)));
            }
        }
        // σ is converted to η with the final ε, whatever the key order.
        pairs.sort_by_key(|(k, _)| k == "assimilation.sigma");
        let has_eta = pairs.iter().any(|(k, _)| k == "assimilation.eta");
        for (k, v) in &pairs {
            if has_eta && k == "assimilation.sigma" {
                // Both given (as in canonical output): they must agree, η is kept.
                let sigma = as_f64(k, v)?;
                let implied = self.epsilon * self.epsilon / (sigma * sigma);
                if !((implied - self.eta).abs() <= 1e-9 * self.eta.abs()) {
                    return Err(Error::Config(format!(
                        "assimilation.sigma = {sigma} conflicts with assimilation.eta = {}",
                        self.eta
                    )));
                }
                continue;
            }
            self.set(k, v)?;
        }
        Ok(())
    }

    /// `key=value` override as given on a command line.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got '{assignment}'")))?;
        self.set(k.trim(), &scalar(v))
    }

    /// Sets a single dotted key. `null` clears optional keys.
    pub fn set(&mut self, key: &str, v: &Value) -> Result<()> {
        let opt = |v: &Value| !v.is_null();
        match key {
            "model.J" => self.dim = as_usize(key, v)?,
            "model.F" => self.forcing = as_f64(key, v)?,
            "assimilation.h" => self.h = as_f64(key, v)?,
            "assimilation.epsilon" => self.epsilon = as_f64(key, v)?,
            "assimilation.eta" => self.eta = as_f64(key, v)?,
            "assimilation.sigma" => {
                let sigma = as_f64(key, v)?;
                if !(sigma > 0.0) {
                    return Err(Error::Config(format!("{key}: must be positive, got {sigma}")));
                }
                self.eta = self.epsilon * self.epsilon / (sigma * sigma);
            }
            "assimilation.T_end" => self.t_end = as_f64(key, v)?,
            "assimilation.dt" => self.dt = as_f64(key, v)?,
            "observation.kind" => self.observation = as_string(key, v)?.parse()?,
            "observation.M" => self.obs_rank = if opt(v) { Some(as_usize(key, v)?) } else { None },
            "filter.kind" => self.filter = as_string(key, v)?.parse()?,
            "filter.aus_rank" => self.aus_rank = if opt(v) { Some(as_usize(key, v)?) } else { None },
            "monte_carlo.I" => self.realizations = as_usize(key, v)?,
            "monte_carlo.base_seed" => self.base_seed = as_u64(key, v)?,
            "init.spinup_T" => self.spinup_t = as_f64(key, v)?,
            "init.mismatch" => self.mismatch = as_f64(key, v)?,
            "output.path" => {
                self.output = if opt(v) {
                    Some(PathBuf::from(as_string(key, v)?))
                } else {
                    None
                }
            }
            "lyapunov.t_total" => self.lyapunov.t_total = as_f64(key, v)?,
            "lyapunov.renorm_interval" => self.lyapunov.renorm_interval = as_f64(key, v)?,
            "lyapunov.transient" => self.lyapunov.transient = as_f64(key, v)?,
            "lyapunov.dt" => self.lyapunov.dt = as_f64(key, v)?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.model_params()?;
        self.filter_config()?;
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {x}")))
            }
        };
        positive("assimilation.eta", self.eta)?;
        positive("assimilation.T_end", self.t_end)?;
        if !(self.spinup_t >= 0.0 && self.mismatch >= 0.0) {
            return Err(Error::Config("init.spinup_T and init.mismatch must be >= 0".into()));
        }
        if self.realizations == 0 {
            return Err(Error::Config("monte_carlo.I must be at least 1".into()));
        }
        match self.observation {
            OperatorKind::Custom => {
                return Err(Error::Config("observation.kind = custom cannot be configured from a file".into()))
            }
            OperatorKind::Adaptive => match self.obs_rank {
                Some(m) if (1..=p.dim()).contains(&m) => {}
                other => {
                    return Err(Error::Config(format!(
                        "adaptive observation needs observation.M in 1..={}, got {other:?}",
                        p.dim()
                    )))
                }
            },
            kind => {
                let op = ObservationOperator::fixed(kind, p.dim())?;
                if let Some(m) = self.obs_rank {
                    if m != op.rank() {
                        return Err(Error::Config(format!(
                            "observation.M = {m} does not match {kind} (rank {}) at J = {}",
                            op.rank(),
                            p.dim()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        ModelParams::new(self.dim, self.forcing).map_err(|e| Error::Config(e.to_string()))
    }

    /// `σ = ε/√η`.
    pub fn sigma(&self) -> f64 {
        self.epsilon / self.eta.sqrt()
    }

    pub fn filter_config(&self) -> Result<FilterConfig> {
        if !(self.eta > 0.0) {
            return Err(Error::Config(format!("assimilation.eta must be positive, got {}", self.eta)));
        }
        let cfg = FilterConfig {
            model: self.model_params()?,
            h: self.h,
            sigma: self.sigma(),
            epsilon: self.epsilon,
            kind: self.filter,
            aus_rank: self.aus_rank,
            dt: self.dt,
        };
        cfg.validate().map_err(|e| {
            Error::Config(format!(
                "invalid assimilation settings (h={}, eta={}, epsilon={}): {e}",
                self.h, self.eta, self.epsilon
            ))
        })?;
        Ok(cfg)
    }

    /// Observed dimension `M`.
    pub fn observed_dim(&self) -> Result<usize> {
        match self.observation {
            OperatorKind::Adaptive => self
                .obs_rank
                .ok_or_else(|| Error::Config("adaptive observation needs observation.M".into())),
            kind => Ok(ObservationOperator::fixed(kind, self.dim)?.rank()),
        }
    }

    /// Canonical flat JSON with every key present.
    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        let mut put = |k: &str, v: Value| {
            m.insert(k.to_string(), v);
        };
        put("model.J", self.dim.into());
        put("model.F", self.forcing.into());
        put("assimilation.h", self.h.into());
        put("assimilation.epsilon", self.epsilon.into());
        put("assimilation.eta", self.eta.into());
        put("assimilation.sigma", self.sigma().into());
        put("assimilation.T_end", self.t_end.into());
        put("assimilation.dt", self.dt.into());
        put("observation.kind", self.observation.as_str().into());
        put("observation.M", self.obs_rank.map_or(Value::Null, Value::from));
        put("filter.kind", self.filter.as_str().into());
        put("filter.aus_rank", self.aus_rank.map_or(Value::Null, Value::from));
        put("monte_carlo.I", self.realizations.into());
        put("monte_carlo.base_seed", self.base_seed.into());
        put("init.spinup_T", self.spinup_t.into());
        put("init.mismatch", self.mismatch.into());
        put(
            "output.path",
            self.output
                .as_ref()
                .map_or(Value::Null, |p| p.display().to_string().into()),
        );
        put("lyapunov.t_total", self.lyapunov.t_total.into());
        put("lyapunov.renorm_interval", self.lyapunov.renorm_interval.into());
        put("lyapunov.transient", self.lyapunov.transient.into());
        put("lyapunov.dt", self.lyapunov.dt.into());
        Value::Object(m)
    }

    /// FNV-1a of the canonical JSON, excluding the output path.
    pub fn config_hash(&self) -> String {
        let mut v = self.to_json();
        if let Value::Object(m) = &mut v {
            m.remove("output.path");
        }
        let text = v.to_string();
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in text.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        let mut s = String::with_capacity(16);
        let _ = write!(s, "{h:016x}");
        s
    }
}
