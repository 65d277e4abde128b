//! Analysis confined to a tracked r-dimensional subspace. Too small an r
//! leaves growing directions uncorrected and the filter loses the truth.
//!
//! `cargo run --release --example aus_subspace`

use chaosfilt::filters::FilterKind;
use chaosfilt::harness::{run_twin_experiment, ExperimentConfig};
use chaosfilt::observations::OperatorKind;

fn main() -> chaosfilt::Result<()> {
    for r in [10, 19, 21, 25, 40] {
        let cfg = ExperimentConfig {
            filter: FilterKind::Aus,
            aus_rank: Some(r),
            observation: OperatorKind::Identity,
            realizations: 4,
            dt: 0.01,
            ..ExperimentConfig::default()
        };
        let res = run_twin_experiment(&cfg)?;
        println!("r = {r:>2}: averaged RMSE {:.3e}", res.rmse.average);
    }
    Ok(())
}
