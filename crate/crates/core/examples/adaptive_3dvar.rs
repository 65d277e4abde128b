//! 3DVAR observing the M most strongly stretched directions of each
//! window's tangent propagator. Tracking is lost when M drops below the
//! number of unstable directions a single window resolves.
//!
//! `cargo run --release --example adaptive_3dvar`

use chaosfilt::harness::{run_twin_experiment, ExperimentConfig};
use chaosfilt::observations::OperatorKind;

fn main() -> chaosfilt::Result<()> {
    for m in [5, 7, 9, 12, 20] {
        let cfg = ExperimentConfig {
            observation: OperatorKind::Adaptive,
            obs_rank: Some(m),
            realizations: 5,
            dt: 0.01,
            ..ExperimentConfig::default()
        };
        let res = run_twin_experiment(&cfg)?;
        println!(
            "M = {m:>2}: averaged RMSE {:.3e} ({} diverged)",
            res.rmse.average,
            res.divergences.len()
        );
    }
    Ok(())
}
