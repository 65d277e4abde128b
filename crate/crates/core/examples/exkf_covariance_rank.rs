//! Extended Kalman filter with full observation: the analysis covariance
//! loses rank until roughly the unstable directions remain.
//!
//! `cargo run --release --example exkf_covariance_rank`

use chaosfilt::filters::FilterKind;
use chaosfilt::harness::{run_twin_experiment, ExperimentConfig};
use chaosfilt::observations::OperatorKind;

fn main() -> chaosfilt::Result<()> {
    let cfg = ExperimentConfig {
        filter: FilterKind::ExKf,
        observation: OperatorKind::Identity,
        realizations: 2,
        dt: 0.01,
        ..ExperimentConfig::default()
    };
    let res = run_twin_experiment(&cfg)?;
    println!("averaged RMSE {:.3e}", res.rmse.average);
    let rank = res.rank.expect("ExKF records covariance rank");
    for (t, r) in rank.times.iter().zip(&rank.ranks).step_by(100) {
        println!("t = {t:>5.1}  rank {r}");
    }
    println!("final rank {}", rank.ranks.last().copied().unwrap_or_default());
    Ok(())
}
