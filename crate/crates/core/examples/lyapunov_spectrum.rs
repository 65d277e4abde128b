//! Lyapunov spectrum of Lorenz '96 at J = 60, F = 8.
//!
//! `cargo run --release --example lyapunov_spectrum [t_total]`
//! The default averaging length is shortened to 200; pass 2000 for a
//! converged count.

use chaosfilt::lyapunov::{lyapunov_spectrum, LyapunovSettings};
use chaosfilt::model::ModelParams;

fn main() -> chaosfilt::Result<()> {
    let t_total = std::env::args().nth(1).map_or(200.0, |s| s.parse().expect("t_total must be a number"));
    let p = ModelParams::new(60, 8.0)?;
    let settings = LyapunovSettings {
        t_total,
        ..LyapunovSettings::default()
    };
    let res = lyapunov_spectrum(&p, &settings, 1)?;
    println!("positive exponents: {}", res.n_positive);
    println!("largest: {:.4}, sum: {:.3} (volume contraction gives -60)", res.max(), res.sum());
    println!("closest to zero: {:.4}", res.closest_to_zero());
    for (i, x) in res.exponents.iter().enumerate().take(22) {
        println!("{:>3} {:+.4}", i + 1, x);
    }
    Ok(())
}
