//! Noise-free synchronization: the unobserved third of the state is
//! recovered from the observed two thirds.
//!
//! `cargo run --release --example synchronization`

use chaosfilt::filters::{sync_continuous_run, sync_discrete_run};
use chaosfilt::model::{spin_up, ModelParams, StateVector};
use chaosfilt::observations::ObservationOperator;

fn main() -> chaosfilt::Result<()> {
    let p = ModelParams::new(60, 8.0)?;
    let op = ObservationOperator::p(60)?;
    let v0 = spin_up(&p, 7, 100.0, 1e-3)?;
    let m0 = StateVector::new(v0.as_vector().map(|x| x + 1.0));

    // Continuous: the error decays exactly like e^{-t}.
    let series = sync_continuous_run(&v0, &m0, &op, 5.0, 1e-3, 500, &p)?;
    let d0 = series[0].1;
    for (t, d) in &series {
        println!("continuous t = {t:.1}: |error| = {d:.3e}, ratio to e^-t = {:.8}", d / (d0 * (-t).exp()));
    }

    // Discrete: resetting the observed part every h also converges for small h.
    let errs = sync_discrete_run(&v0, &m0, &op, 0.01, 5.0, 1e-3, &p)?;
    for k in (0..errs.len()).step_by(100) {
        println!("discrete t = {:.1}: |error| = {:.3e}", k as f64 * 0.01, errs[k]);
    }
    Ok(())
}
