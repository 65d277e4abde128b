//! Command-line front end. Exit codes: 0 success, 1 usage or configuration
//! error, 2 numerical failure, 3 failed verification.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use chaosfilt::filters::FilterKind;
use chaosfilt::harness::experiment::{run_realization, SweepEntry, TwinSetup};
use chaosfilt::harness::export::{self, trace_csv, trajectory_csv, write_text};
use chaosfilt::harness::{run_twin_experiment, sweep, ExperimentConfig};
use chaosfilt::lyapunov::lyapunov_spectrum;
use chaosfilt::observations::OperatorKind;
use chaosfilt::theory;

#[derive(Parser)]
#[command(name = "chaosfilt", version, about = "Filtering experiments for the Lorenz '96 model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Config file: flat JSON with dotted keys, or `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed (overrides monte_carlo.base_seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides output.path).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Monte Carlo realizations (overrides monte_carlo.I).
    #[arg(long)]
    realizations: Option<usize>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn load(&self) -> chaosfilt::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_path(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.base_seed = s;
        }
        if let Some(i) = self.realizations {
            cfg.realizations = i;
        }
        if let Some(o) = &self.out {
            cfg.output = Some(o.clone());
        }
        for s in &self.set {
            cfg.apply_override(s)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output.clone().unwrap_or_else(|| PathBuf::from("out"))
}

#[derive(Subcommand)]
enum Command {
    /// Truth trajectory at the assimilation times.
    Simulate(Common),
    /// Lyapunov spectrum of the configured model.
    Lyapunov(Common),
    /// Single-realization filter trace.
    Filter {
        #[command(flatten)]
        common: Common,
        /// Realization index whose noise stream is used.
        #[arg(long, default_value_t = 0)]
        realization: u64,
    },
    /// Monte Carlo twin experiment.
    Experiment(Common),
    /// Executable stability checks.
    Verify {
        #[arg(long, default_value = "all")]
        theorem: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the reports as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Averaged RMSE over a grid of filter kinds and observed dimensions.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated filter kinds.
        #[arg(long, value_delimiter = ',', default_value = "3dvar")]
        filters: Vec<FilterKind>,
        /// Comma-separated observed dimensions for adaptive operators.
        #[arg(long = "m", value_delimiter = ',')]
        adaptive_m: Vec<usize>,
        /// Comma-separated fixed operator kinds.
        #[arg(long, value_delimiter = ',')]
        fixed: Vec<OperatorKind>,
    },
}

fn announce(paths: &[PathBuf]) {
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
}

fn write_one(dir: &Path, name: &str, text: &str) -> chaosfilt::Result<PathBuf> {
    let path = dir.join(name);
    write_text(&path, text)?;
    Ok(path)
}

fn run(command: Command) -> chaosfilt::Result<ExitCode> {
    match command {
        Command::Simulate(common) => {
            let cfg = common.load()?;
            let setup = TwinSetup::new(&cfg)?;
            let dir = out_dir(&cfg);
            let path = write_one(&dir, "truth.csv", &trajectory_csv(&setup.times, &setup.truth))?;
            announce(&[path]);
        }
        Command::Lyapunov(common) => {
            let cfg = common.load()?;
            let p = cfg.model_params()?;
            let res = lyapunov_spectrum(&p, &cfg.lyapunov, cfg.base_seed)?;
            let summary = res.summary(&p);
            let dir = out_dir(&cfg);
            let a = write_one(&dir, "lyapunov.csv", &res.to_csv())?;
            let b = write_one(&dir, "lyapunov.json", &(serde_json::to_string_pretty(&summary)? + "\n"))?;
            announce(&[a, b]);
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Filter { common, realization } => {
            let cfg = common.load()?;
            let setup = TwinSetup::new(&cfg)?;
            let trace = run_realization(&setup, realization);
            let dir = out_dir(&cfg);
            let path = write_one(&dir, "trace.csv", &trace_csv(&trace, &setup.times, setup.params.dim()))?;
            announce(&[path]);
            let contrib: Vec<f64> = trace.errors.iter().map(|e| e / (setup.params.dim() as f64).sqrt()).collect();
            let avg = chaosfilt::harness::time_average(&setup.times[..contrib.len()], &contrib);
            println!(
                "{}",
                serde_json::to_string_pretty(&json!({
                    "realization": realization,
                    "avg_rmse": avg,
                    "diverged": trace.diverged,
                    "config_hash": cfg.config_hash(),
                }))?
            );
            if trace.diverged.is_some() {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Experiment(common) => {
            let cfg = common.load()?;
            let res = run_twin_experiment(&cfg)?;
            let written = export::write_experiment(&res, &out_dir(&cfg))?;
            announce(&written);
            println!("{}", serde_json::to_string_pretty(&export::summary_json(&res))?);
        }
        Command::Verify { theorem, seed, out } => {
            let reports = theory::verify_named(&theorem, seed)?;
            for r in &reports {
                println!("{} {} margin={:.3e} at={}", if r.pass { "PASS" } else { "FAIL" }, r.name, r.margin, r.worst_at);
            }
            if let Some(dir) = out {
                let path = write_one(&dir, "verify.json", &(serde_json::to_string_pretty(&reports)? + "\n"))?;
                announce(&[path]);
            }
            if reports.iter().any(|r| !r.pass) {
                return Ok(ExitCode::from(3));
            }
        }
        Command::Sweep {
            common,
            filters,
            adaptive_m,
            fixed,
        } => {
            let cfg = common.load()?;
            let mut entries = Vec::new();
            for &filter in &filters {
                for &observation in &fixed {
                    entries.push(SweepEntry {
                        filter,
                        observation,
                        m: None,
                        aus_rank: None,
                    });
                }
                for &m in &adaptive_m {
                    entries.push(SweepEntry {
                        filter,
                        observation: OperatorKind::Adaptive,
                        m: Some(m),
                        aus_rank: None,
                    });
                }
            }
            if entries.is_empty() {
                entries.push(SweepEntry {
                    filter: cfg.filter,
                    observation: cfg.observation,
                    m: cfg.obs_rank,
                    aus_rank: None,
                });
            }
            let rows = sweep(&cfg, &entries)?;
            let mut csv = String::from("filter,observation,M,avg_rmse,divergences\n");
            for r in &rows {
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.filter,
                    r.observation,
                    r.m,
                    chaosfilt::linalg::fmt_f64(r.avg_rmse),
                    r.divergences
                ));
                println!("{:>6} {:>9} M={:<3} avg_rmse={:.3e} divergences={}", r.filter, r.observation, r.m, r.avg_rmse, r.divergences);
            }
            let path = write_one(&out_dir(&cfg), "sweep.csv", &csv)?;
            announce(&[path]);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
