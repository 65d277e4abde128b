//! Continuous-time 3DVAR as a nudged stochastic differential equation,
//! with the Monte Carlo mean-square error compared to its envelope.
//!
//! `cargo run --release --example continuous_3dvar`

use chaosfilt::filters::{continuous_3dvar_run, Continuous3dvarConfig};
use chaosfilt::model::{spin_up, ModelParams, StateVector};
use chaosfilt::observations::ObservationOperator;
use chaosfilt::theory::{continuous_3dvar_envelope, TheoryConstants};

fn main() -> chaosfilt::Result<()> {
    let p = ModelParams::new(6, 0.05)?;
    let op = ObservationOperator::p(6)?;
    let v0 = spin_up(&p, 3, 20.0, 1e-3)?;
    let m0 = StateVector::new(v0.as_vector().map(|x| x + 0.01));
    let (eta, eps) = (1.0, 1e-3);
    let mut cfg = Continuous3dvarConfig::new(eta, eps, 20.0, 11);
    cfg.realizations = 100;
    cfg.record_every = 2000;
    let series = continuous_3dvar_run(&v0, &m0, &op, &cfg, &p)?;
    let lambda = TheoryConstants::new(&p, 0.0).lambda(eta);
    let d0 = series.mean_sq[0];
    for (t, ms) in series.times.iter().zip(&series.mean_sq) {
        let bound = continuous_3dvar_envelope(*t, d0, 6, eta, eps, lambda);
        println!("t = {t:>4.1}: E|error|^2 = {ms:.3e}  bound {bound:.3e}");
    }
    Ok(())
}
