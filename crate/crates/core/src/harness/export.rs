//! File outputs: CSV series with full-precision floats and a JSON summary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::harness::experiment::{ExperimentResult, RankSeries, RealizationTrace, RmseSeries};
use crate::linalg::fmt_f64;
use crate::model::StateVector;

/// `git describe` of the build, or `unknown` outside a checkout.
pub fn git_describe() -> &'static str {
    option_env!("CHAOSFILT_GIT_DESCRIBE").unwrap_or("unknown")
}

/// Writes `contents`, creating parent directories.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn fmt_opt(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        fmt_f64(x)
    }
}

pub fn rmse_csv(s: &RmseSeries) -> String {
    let mut out = String::from("t,rmse\n");
    for (t, v) in s.times.iter().zip(&s.values) {
        let _ = writeln!(out, "{},{}", fmt_f64(*t), fmt_f64(*v));
    }
    out
}

pub fn rank_csv(s: &RankSeries) -> String {
    let mut out = String::from("t,rank,mean_rank\n");
    for ((t, r), m) in s.times.iter().zip(&s.ranks).zip(&s.mean_ranks) {
        let _ = writeln!(out, "{},{r},{}", fmt_f64(*t), fmt_f64(*m));
    }
    out
}

/// Per-step diagnostics of one realization; columns after a divergence are
/// absent and an unobserved quantity is left empty.
pub fn trace_csv(trace: &RealizationTrace, times: &[f64], dim: usize) -> String {
    let mut out = String::from("k,t,rmse_contrib,observed_error,error,cov_rank\n");
    let scale = 1.0 / (dim as f64).sqrt();
    for (k, (e, o)) in trace.errors.iter().zip(&trace.observed_errors).enumerate() {
        let rank = trace
            .cov_rank
            .as_ref()
            .and_then(|r| r.get(k))
            .map_or(String::new(), |r| r.to_string());
        let _ = writeln!(
            out,
            "{k},{},{},{},{},{rank}",
            fmt_f64(times[k]),
            fmt_f64(e * scale),
            fmt_opt(*o),
            fmt_f64(*e)
        );
    }
    out
}

/// `t,u1,…,uJ` rows.
pub fn trajectory_csv(times: &[f64], states: &[StateVector]) -> String {
    let dim = states.first().map_or(0, |s| s.as_vector().len());
    let mut out = String::from("t");
    for j in 1..=dim {
        let _ = write!(out, ",u{j}");
    }
    out.push('\n');
    for (t, s) in times.iter().zip(states) {
        out.push_str(&fmt_f64(*t));
        for x in s.as_vector().iter() {
            out.push(',');
            out.push_str(&fmt_f64(*x));
        }
        out.push('\n');
    }
    out
}

pub fn summary_json(res: &ExperimentResult) -> Value {
    json!({
        "avg_rmse": res.rmse.average,
        "I": res.config.realizations,
        "completed": res.rmse.realizations,
        "divergences": res.divergences.len(),
        "divergence_log": res.divergences,
        "config": res.config.to_json(),
        "git_describe": git_describe(),
        "seed": res.config.base_seed,
        "config_hash": res.rmse.config_hash,
    })
}

/// Writes `rmse.csv`, `summary.json` and, for covariance filters,
/// `rank.csv` into `dir`. Returns the written paths.
pub fn write_experiment(res: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut put = |name: &str, text: String| -> Result<()> {
        let path = dir.join(name);
        write_text(&path, &text)?;
        written.push(path);
        Ok(())
    };
    put("rmse.csv", rmse_csv(&res.rmse))?;
    put("summary.json", serde_json::to_string_pretty(&summary_json(res))? + "\n")?;
    if let Some(rank) = &res.rank {
        put("rank.csv", rank_csv(rank))?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::experiment::Divergence;

    #[test]
    fn trace_leaves_missing_values_empty() {
        let trace = RealizationTrace {
            id: 0,
            errors: vec![2.0, 1.0],
            observed_errors: vec![f64::NAN, 0.5],
            cov_rank: None,
            diverged: Some(Divergence {
                realization: 0,
                step: 2,
                message: "x".into(),
            }),
        };
        let csv = trace_csv(&trace, &[0.0, 0.1, 0.2], 4);
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows.len(), 3);
        assert!(rows[1].starts_with("0,0.0000000000000000e0,1.0000000000000000e0,,2.0"));
        assert!(rows[2].ends_with(','));
    }

    #[test]
    fn write_text_creates_directories() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a/b/c.txt");
        write_text(&path, "x").unwrap();
        assert_eq!(fs::read_to_string(path).unwrap(), "x");
    }
}
