//! Runs a twin experiment from a config file and writes `rmse.csv`,
//! `summary.json` and (for covariance filters) `rank.csv`.
//!
//! `cargo run --release --example twin_experiment -- configs/3dvar_M40.json [out_dir]`

use std::path::PathBuf;

use chaosfilt::harness::export::write_experiment;
use chaosfilt::harness::{run_twin_experiment, ExperimentConfig};

fn main() -> chaosfilt::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = PathBuf::from(args.next().unwrap_or_else(|| "configs/3dvar_M40.json".into()));
    let cfg = ExperimentConfig::from_path(&path)?;
    let out = args
        .next()
        .map(PathBuf::from)
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let res = run_twin_experiment(&cfg)?;
    for p in write_experiment(&res, &out)? {
        println!("wrote {}", p.display());
    }
    println!(
        "averaged RMSE {:.4e}, {} of {} realizations completed, config {}",
        res.rmse.average, res.rmse.realizations, cfg.realizations, res.rmse.config_hash
    );
    Ok(())
}
