//! 3DVAR with fixed observation operators: full, every third component
//! unobserved (P), and the sparser P36 and P24 patterns.
//!
//! `cargo run --release --example fixed_3dvar`

use chaosfilt::harness::{run_twin_experiment, ExperimentConfig};
use chaosfilt::observations::OperatorKind;

fn main() -> chaosfilt::Result<()> {
    for kind in [OperatorKind::Identity, OperatorKind::P, OperatorKind::P36, OperatorKind::P24] {
        let cfg = ExperimentConfig {
            observation: kind,
            realizations: 10,
            ..ExperimentConfig::default()
        };
        let res = run_twin_experiment(&cfg)?;
        println!(
            "M = {:>2}: averaged RMSE {:.3e} over {} realizations",
            cfg.observed_dim()?,
            res.rmse.average,
            res.rmse.realizations
        );
    }
    Ok(())
}
