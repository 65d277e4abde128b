//! Stability constants and the executable checks of the accuracy bounds at
//! a small-forcing configuration where their hypotheses hold.
//!
//! `cargo run --release --example theory_bounds`

use chaosfilt::model::ModelParams;
use chaosfilt::theory::{b1, find_discrete_params, find_h_star, verify_named, TheoryConstants};

fn main() -> chaosfilt::Result<()> {
    let standard = TheoryConstants::new(&ModelParams::new(60, 8.0)?, 1.0);
    println!(
        "J=60, F=8: K = {}, largest eta with a positive rate = {:.3e} (experiments use 0.01)",
        standard.k,
        standard.eta_max()
    );

    let tc = TheoryConstants::new(&ModelParams::new(6, 0.05)?, 0.1);
    println!("J=6, F=0.05: K = {:.3}, beta = {:.3}, lambda(1) = {:.3}", tc.k, tc.beta, tc.lambda(1.0));
    let h_star = find_h_star(&tc)?;
    println!("synchronization window bound h* = {h_star:.4}, B1(h*) = {:.6}", b1(h_star, tc.k, tc.beta, tc.c, tc.r0)?);
    let d = find_discrete_params(&tc)?;
    println!("3DVAR contraction: h = {:.4e}, eta = {:.4e}, alpha = {:.6}", d.h, d.eta, d.alpha);

    for r in verify_named("all", None)? {
        println!("{:<17} {} margin {:.3e}", r.name, if r.pass { "pass" } else { "FAIL" }, r.margin);
    }
    Ok(())
}
