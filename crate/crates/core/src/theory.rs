//! Constants and bound functions behind the stability results for the
//! filters, plus executable checks of those results on concrete runs.
//!
//! `K = 2JF²` is the absorbing-ball radius squared, `c = 2√5` bounds
//! `|⟨B(u,u),ṽ⟩| ≤ c|u||ṽ||Pu|` for the period-3 projector, and
//! `β = 2(2√K − 1)` is the forecast growth rate `|δ(t)|² ≤ |δ(0)|²e^{βt}`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::filters::{
    continuous_3dvar_run, sync_continuous_run, sync_discrete_run, threedvar_step, Continuous3dvarConfig,
    FilterConfig, FilterKind, FilterState,
};
use crate::model::{self, check_dim, ModelParams, StateVector};
use crate::observations::ObservationOperator;
use crate::rng;

/// `c = 2√5`.
pub fn projection_constant() -> f64 {
    2.0 * 5f64.sqrt()
}

/// `β = 2(2√K − 1)`.
pub fn growth_rate(k: f64) -> f64 {
    2.0 * (2.0 * k.sqrt() - 1.0)
}

/// Bundle of the constants entering the bound functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryConstants {
    pub k: f64,
    pub c: f64,
    pub beta: f64,
    /// Size of the initial error in whichever norm the result uses.
    pub r0: f64,
}

impl TheoryConstants {
    pub fn new(p: &ModelParams, r0: f64) -> Self {
        let k = p.absorbing_radius_sq();
        Self {
            k,
            c: projection_constant(),
            beta: growth_rate(k),
            r0,
        }
    }

    /// `λ(η) = 2(1 − c²ηK/4)`.
    pub fn lambda(&self, eta: f64) -> f64 {
        2.0 * (1.0 - self.c * self.c * eta * self.k / 4.0)
    }

    /// `4/(c²K)`: `λ(η) > 0` exactly below this.
    pub fn eta_max(&self) -> f64 {
        4.0 / (self.c * self.c * self.k)
    }
}

/// `(e^x − 1)/x`, equal to 1 at 0.
fn exprel(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.exp_m1() / x
    }
}

fn finite(name: &str, t: f64, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Overflow(format!("{name}({t}) is not representable")))
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("time must be finite and >= 0, got {t}")))
    }
}

/// `A₁(t) = (16K/β)(e^{βt} − 1) + (4R₀²/2β)(e^{2βt} − 1)`.
pub fn a1(t: f64, k: f64, beta: f64, r0: f64) -> Result<f64> {
    check_time(t)?;
    let v = 16.0 * k * t * exprel(beta * t) + 4.0 * r0 * r0 * t * exprel(2.0 * beta * t);
    finite("A1", t, v)
}

/// `S_n(t) = e^{−t}∫₀ᵗ τⁿe^τ dτ / n!` for `n = 0..=6`.
fn weighted_moments(t: f64) -> [f64; 7] {
    let mut s = [0.0; 7];
    if t <= 2.0 {
        // S_n = Σ_{j>n} (−1)^{j−n−1} t^j / j!
        let mut powers = [0.0; 40];
        let mut term = 1.0;
        for (j, p) in powers.iter_mut().enumerate() {
            if j > 0 {
                term *= t / j as f64;
            }
            *p = term;
        }
        for (n, out) in s.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in (n + 1..40).rev() {
                let sign = if (j - n - 1) % 2 == 0 { 1.0 } else { -1.0 };
                acc += sign * powers[j];
            }
            *out = acc;
        }
    } else {
        // S_n = tⁿ/n! − S_{n−1}; amplification n!/tⁿ stays small for t > 2.
        s[0] = -(-t).exp_m1();
        let mut term = 1.0;
        for n in 1..7 {
            term *= t / n as f64;
            s[n] = term - s[n - 1];
        }
    }
    s
}

/// `(1/a)[(e^{at} − e^{−t})/(a + 1) − (1 − e^{−t})]`, continuous in `a`
/// with the `a → 0` limit `t − 1 + e^{−t}`.
fn gronwall_bracket(a: f64, t: f64) -> f64 {
    if (a * t).abs() < 1e-2 {
        // Σ_{n≥1} a^{n−1} S_n(t); the dropped terms are O((at)⁶/7!).
        let s = weighted_moments(t);
        return s[1..].iter().rev().fold(0.0, |acc, &sn| acc * a + sn);
    }
    let first = (-t).exp() * t * exprel((a + 1.0) * t);
    (first + (-t).exp_m1()) / a
}

/// `B₁(t)`; the growth-free terms use the `β → 0` limits automatically.
pub fn b1(t: f64, k: f64, beta: f64, c: f64, r0: f64) -> Result<f64> {
    check_time(t)?;
    let c2k = c * c * k;
    let v = 16.0 * c2k * k * gronwall_bracket(beta, t)
        + (-t).exp()
        + 4.0 * c2k * r0 * r0 * gronwall_bracket(2.0 * beta, t);
    finite("B1", t, v)
}

/// `B₂(t) = c²K(1 − e^{−t})`.
pub fn b2(t: f64, k: f64, c: f64) -> f64 {
    -c * c * k * (-t).exp_m1()
}

/// `M₁(t) = (2η/(1+η))√A₁(t) + √B₁(t)`.
pub fn m1(t: f64, eta: f64, tc: &TheoryConstants) -> Result<f64> {
    let w = 2.0 * eta / (1.0 + eta);
    let a = a1(t, tc.k, tc.beta, tc.r0)?;
    let b = b1(t, tc.k, tc.beta, tc.c, tc.r0)?;
    if b < 0.0 {
        return Err(Error::Infeasible(format!("B1({t}) = {b} is negative")));
    }
    Ok(w * a.sqrt() + b.sqrt())
}

/// `M₂(t) = 2η/(1+η) + √B₂(t)`.
pub fn m2(t: f64, eta: f64, tc: &TheoryConstants) -> f64 {
    2.0 * eta / (1.0 + eta) + b2(t, tc.k, tc.c).sqrt()
}

/// Cap on the synchronization window search.
pub const H_STAR_CAP: f64 = 10.0;

fn b1_contracts(h: f64, tc: &TheoryConstants) -> bool {
    matches!(b1(h, tc.k, tc.beta, tc.c, tc.r0), Ok(b) if b > 0.0 && b < 1.0)
}

/// Largest `h ≤ 10` with `B₁(h') ∈ (0,1)` on all of `(0, h]`, located by a
/// scan on a `1e-3` grid followed by bisection to `1e-10`.
pub fn find_h_star(tc: &TheoryConstants) -> Result<f64> {
    const GRID: f64 = 1e-3;
    let steps = (H_STAR_CAP / GRID).round() as usize;
    let mut good = 0.0;
    let mut bad = None;
    for i in 1..=steps {
        let h = i as f64 * GRID;
        if b1_contracts(h, tc) {
            good = h;
        } else {
            bad = Some(h);
            break;
        }
    }
    let Some(mut hi) = bad else {
        return Ok(H_STAR_CAP);
    };
    let mut lo = good;
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if b1_contracts(mid, tc) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo <= 0.0 {
        return Err(Error::Infeasible("B1 leaves (0,1) immediately".into()));
    }
    Ok(lo)
}

/// Window and variance ratio for which discrete 3DVAR contracts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscreteParams {
    pub h: f64,
    pub eta: f64,
    /// `α = M₁(h)`.
    pub alpha: f64,
    pub m2: f64,
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

fn contraction_at(h: f64, eta: f64, tc: &TheoryConstants) -> Option<DiscreteParams> {
    let alpha = m1(h, eta, tc).ok()?;
    let second = m2(h, eta, tc);
    (second < alpha && alpha < 1.0).then_some(DiscreteParams {
        h,
        eta,
        alpha,
        m2: second,
    })
}

fn best_on(hs: &[f64], etas: &[f64], tc: &TheoryConstants) -> Option<DiscreteParams> {
    let mut best: Option<DiscreteParams> = None;
    for &h in hs {
        for &eta in etas {
            if let Some(c) = contraction_at(h, eta, tc) {
                if best.is_none_or(|b| c.alpha < b.alpha) {
                    best = Some(c);
                }
            }
        }
    }
    best
}

/// Searches `h ∈ (0, 1]`, `η ∈ (1e-6, 1]` for `M₂(h) < M₁(h) = α < 1`,
/// minimizing `α`: a 200×200 logarithmic grid, then three rounds of local
/// 21×21 refinement around the incumbent.
pub fn find_discrete_params(tc: &TheoryConstants) -> Result<DiscreteParams> {
    const H_BOX: (f64, f64) = (1e-6, 1.0);
    const ETA_BOX: (f64, f64) = (1e-6, 1.0);
    let hs = log_grid(H_BOX.0, H_BOX.1, 200);
    let etas = log_grid(ETA_BOX.0, ETA_BOX.1, 200);
    let mut best = best_on(&hs, &etas, tc).ok_or_else(|| {
        Error::Infeasible(format!(
            "no (h, eta) in (0,1]x(1e-6,1] with M2(h) < M1(h) < 1 for K={}, beta={}, R0={}",
            tc.k, tc.beta, tc.r0
        ))
    })?;
    let mut h_step = (H_BOX.1 / H_BOX.0).ln() / 199.0;
    let mut e_step = (ETA_BOX.1 / ETA_BOX.0).ln() / 199.0;
    for _ in 0..3 {
        let hs = log_grid(
            (best.h * (-h_step).exp()).max(H_BOX.0),
            (best.h * h_step.exp()).min(H_BOX.1),
            21,
        );
        let etas = log_grid(
            (best.eta * (-e_step).exp()).max(ETA_BOX.0),
            (best.eta * e_step.exp()).min(ETA_BOX.1),
            21,
        );
        if let Some(c) = best_on(&hs, &etas, tc) {
            if c.alpha < best.alpha {
                best = c;
            }
        }
        h_step /= 10.0;
        e_step /= 10.0;
    }
    Ok(best)
}

/// Result of checking the forecast growth bound along one pair of solutions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub pass: bool,
    pub beta: f64,
    /// Largest observed `ln(|δ(t)|²/|δ(0)|²)/t`.
    pub max_rate: f64,
    /// `β − max_rate`.
    pub slack: f64,
}

/// Integrates `u` and `v` over `[0, h]` and checks
/// `|u(t) − v(t)|² ≤ |u(0) − v(0)|² e^{βt}` after every inner step.
pub fn verify_lemma_growth(v0: &StateVector, u0: &StateVector, h: f64, p: &ModelParams) -> Result<GrowthReport> {
    check_dim(v0.len(), p.dim())?;
    check_dim(u0.len(), p.dim())?;
    let beta = growth_rate(p.absorbing_radius_sq());
    let d0 = (u0.as_vector() - v0.as_vector()).norm_squared();
    let dt = model::DEFAULT_DT.min(h);
    let (full, rest) = model::step_plan(h, dt);
    let mut u = u0.clone();
    let mut v = v0.clone();
    let mut t = 0.0;
    let mut pass = true;
    let mut max_rate = f64::NEG_INFINITY;
    for i in 0..full + usize::from(rest > 0.0) {
        let step = if i < full { dt } else { rest };
        u = model::rk4_step(&u, step, p)?;
        v = model::rk4_step(&v, step, p)?;
        t += step;
        let d = (u.as_vector() - v.as_vector()).norm_squared();
        if d > d0 * (beta * t).exp() * (1.0 + 1e-12) {
            pass = false;
        }
        if d0 > 0.0 {
            max_rate = max_rate.max((d / d0).ln() / t);
        }
    }
    if d0 == 0.0 {
        max_rate = 0.0;
    }
    Ok(GrowthReport {
        pass,
        beta,
        max_rate,
        slack: beta - max_rate,
    })
}

/// Outcome of an executable check of a stability result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub name: String,
    pub config: Value,
    pub pass: bool,
    /// Smallest relative slack `(bound − measured)/bound`; negative on failure.
    pub margin: f64,
    /// Time (or step) of the tightest comparison.
    pub worst_at: f64,
    /// Extra diagnostics.
    pub notes: Value,
}

fn tightest(pairs: impl Iterator<Item = (f64, f64, f64)>) -> (f64, f64) {
    // (where, measured, bound)
    let mut margin = f64::INFINITY;
    let mut at = 0.0;
    for (w, measured, bound) in pairs {
        let m = if bound > 0.0 {
            (bound - measured) / bound
        } else if measured <= 0.0 {
            0.0
        } else {
            f64::NEG_INFINITY
        };
        if m < margin {
            margin = m;
            at = w;
        }
    }
    (margin, at)
}

fn mismatched(v0: &StateVector, rho: f64, seed: u64) -> StateVector {
    let mut r = rng::stream(seed, 1);
    StateVector::new(v0.as_vector().map(|x| x + rho * r.sample::<f64, _>(StandardNormal)))
}

/// Continuous synchronization: `|δ(t)|² = |δ(0)|²e^{−2t}` to relative
/// tolerance `tol` on `[0, t_end]`.
pub fn verify_thm_continuous_sync(p: &ModelParams, seed: u64, t_end: f64, dt: f64, tol: f64) -> Result<TheoremReport> {
    let op = ObservationOperator::p(p.dim())?;
    let v0 = model::spin_up(p, seed, 100.0, model::DEFAULT_DT)?;
    let q0 = mismatched(&v0, 1.0, seed);
    let series = sync_continuous_run(&v0, &q0, &op, t_end, dt, 10, p)?;
    let d0 = series[0].1 * series[0].1;
    let mut worst = 0.0_f64;
    let mut at = 0.0;
    for &(t, d) in &series {
        let dev = (d * d / (d0 * (-2.0 * t).exp()) - 1.0).abs();
        if dev > worst {
            worst = dev;
            at = t;
        }
    }
    Ok(TheoremReport {
        name: "continuous-sync".into(),
        config: json!({"J": p.dim(), "F": p.forcing(), "seed": seed, "t_end": t_end, "dt": dt, "tol": tol}),
        pass: worst <= tol,
        margin: (tol - worst) / tol,
        worst_at: at,
        notes: json!({"max_relative_deviation": worst, "initial_error_sq": d0}),
    })
}

/// Discrete synchronization: with `h ≤ h*` each window contracts the
/// squared error by at least `γ = B₁(h)`.
pub fn verify_thm_discrete_sync(p: &ModelParams, seed: u64, steps: usize, rho: f64) -> Result<TheoremReport> {
    let op = ObservationOperator::p(p.dim())?;
    let v0 = model::spin_up(p, seed, 100.0, model::DEFAULT_DT)?;
    let m0 = mismatched(&v0, rho, seed);
    let r0 = (m0.as_vector() - v0.as_vector()).norm();
    let tc = TheoryConstants::new(p, r0);
    let h_star = find_h_star(&tc)?;
    let h = h_star.min(1.0);
    let gamma = b1(h, tc.k, tc.beta, tc.c, tc.r0)?;
    let errs = sync_discrete_run(&v0, &m0, &op, h, h * steps as f64, model::DEFAULT_DT, p)?;
    // Below this the error is integrator round-off, not dynamics.
    let floor = 1e-10 * (1.0 + v0.norm());
    let (margin, at) = tightest(
        errs.windows(2)
            .enumerate()
            .filter(|(_, w)| w[0] > floor)
            .map(|(k, w)| ((k + 1) as f64, w[1] * w[1], gamma * w[0] * w[0])),
    );
    Ok(TheoremReport {
        name: "discrete-sync".into(),
        config: json!({"J": p.dim(), "F": p.forcing(), "seed": seed, "steps": steps, "rho": rho}),
        pass: margin >= -1e-9,
        margin,
        worst_at: at,
        notes: json!({"h_star": h_star, "h": h, "gamma": gamma, "R0": r0, "final_error": errs.last()}),
    })
}

/// Settings for the continuous 3DVAR mean-square envelope check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Continuous3dvarCheck {
    pub model: ModelParams,
    pub eta: f64,
    pub epsilon: f64,
    pub t_end: f64,
    pub realizations: usize,
    pub seed: u64,
    /// Standard deviation of the initial mismatch per component.
    pub rho: f64,
}

impl Continuous3dvarCheck {
    /// `F = 0.05`, `J = 6`, `η = 1`, `ε = 1e-3`, 200 realizations on `[0, 20]`.
    pub fn small_forcing() -> Self {
        Self {
            model: ModelParams::new(6, 0.05).expect("valid"),
            eta: 1.0,
            epsilon: 1e-3,
            t_end: 20.0,
            realizations: 200,
            seed: 11,
            rho: 0.01,
        }
    }
}

/// `e^{−λt}|δ₀|² + (2Jε²/(3λη²))(1 − e^{−λt})`.
pub fn continuous_3dvar_envelope(t: f64, d0_sq: f64, j: usize, eta: f64, epsilon: f64, lambda: f64) -> f64 {
    let stationary = 2.0 * j as f64 * epsilon * epsilon / (3.0 * lambda * eta * eta);
    (-lambda * t).exp() * d0_sq - stationary * (-lambda * t).exp_m1()
}

/// Monte Carlo `E|δ(t)|²` of continuous 3DVAR against its envelope.
pub fn verify_thm_continuous_3dvar(check: &Continuous3dvarCheck) -> Result<TheoremReport> {
    let p = &check.model;
    let tc = TheoryConstants::new(p, 0.0);
    if !(check.eta < tc.eta_max()) {
        return Err(Error::InvalidParameter(format!(
            "eta = {} must be below 4/(c^2 K) = {}",
            check.eta,
            tc.eta_max()
        )));
    }
    let lambda = tc.lambda(check.eta);
    let op = ObservationOperator::p(p.dim())?;
    let v0 = model::spin_up(p, check.seed, 100.0, model::DEFAULT_DT)?;
    let m0 = mismatched(&v0, check.rho, check.seed);
    let d0 = (m0.as_vector() - v0.as_vector()).norm_squared();
    let mut cfg = Continuous3dvarConfig::new(check.eta, check.epsilon, check.t_end, check.seed);
    cfg.realizations = check.realizations;
    cfg.record_every = 100;
    let series = continuous_3dvar_run(&v0, &m0, &op, &cfg, p)?;
    let (margin, at) = tightest(series.times.iter().zip(&series.mean_sq).skip(1).map(|(&t, &e)| {
        (t, e, continuous_3dvar_envelope(t, d0, p.dim(), check.eta, check.epsilon, lambda))
    }));
    let stationary = continuous_3dvar_envelope(f64::INFINITY, 0.0, p.dim(), check.eta, check.epsilon, lambda);
    Ok(TheoremReport {
        name: "continuous-3dvar".into(),
        config: serde_json::to_value(check)?,
        pass: margin >= 0.0,
        margin,
        worst_at: at,
        notes: json!({
            "lambda": lambda,
            "eta_max": tc.eta_max(),
            "stationary_bound": stationary,
            "final_mean_sq": series.mean_sq.last(),
            "dt": cfg.step(),
        }),
    })
}

/// `‖z‖ = |z| + |Pz|`.
pub fn combined_norm(z: &nalgebra::DVector<f64>, op: &ObservationOperator) -> f64 {
    z.norm() + op.project(z).norm()
}

/// Settings for the discrete 3DVAR contraction check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discrete3dvarCheck {
    pub model: ModelParams,
    pub epsilon: f64,
    pub steps: usize,
    pub seed: u64,
    pub rho: f64,
}

impl Discrete3dvarCheck {
    /// `F = 0.05`, `J = 6`, `ε = 1e-4`, 200 steps.
    pub fn small_forcing() -> Self {
        Self {
            model: ModelParams::new(6, 0.05).expect("valid"),
            epsilon: 1e-4,
            steps: 200,
            seed: 5,
            rho: 0.05,
        }
    }
}

/// Runs discrete 3DVAR with `H = P` at the `(h, η)` returned by
/// [`find_discrete_params`] with noise bounded by `ε` and checks
/// `‖δ_{k+1}‖ ≤ α‖δ_k‖ + 2ε` at every step.
pub fn verify_thm_discrete_3dvar(check: &Discrete3dvarCheck) -> Result<TheoremReport> {
    let p = &check.model;
    let op = ObservationOperator::p(p.dim())?;
    let v0 = model::spin_up(p, check.seed, 100.0, model::DEFAULT_DT)?;
    let m0 = mismatched(&v0, check.rho, check.seed);
    let r0 = combined_norm(&(m0.as_vector() - v0.as_vector()), &op);
    let tc = TheoryConstants::new(p, r0);
    let params = find_discrete_params(&tc)?;
    let eps = check.epsilon;
    if !(params.alpha * r0 + 2.0 * eps < r0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon = {eps} too large: need alpha*R0 + 2 eps < R0 (alpha={}, R0={r0})",
            params.alpha
        )));
    }
    let cfg = FilterConfig::with_eta(*p, params.h, params.eta, eps, FilterKind::ThreeDVar)?;
    let mut state = FilterState::initial(&cfg, m0)?;
    let mut v = v0;
    let mut norms = vec![r0];
    for k in 1..=check.steps {
        v = model::flow(&v, params.h, cfg.dt, p)?;
        let mut r = rng::stream(check.seed, k as u64);
        let g = nalgebra::DVector::from_fn(p.dim(), |_, _| r.sample::<f64, _>(StandardNormal));
        let pg = op.project(&g);
        let scale = eps * r.random::<f64>() / pg.norm();
        let nu = pg * scale;
        let y = op.apply(&(v.as_vector() + nu))?;
        state = threedvar_step(&state, &y, &op, &cfg)?;
        norms.push(combined_norm(&(state.mean.as_vector() - v.as_vector()), &op));
    }
    let (margin, at) = tightest(
        norms
            .windows(2)
            .enumerate()
            .map(|(k, w)| ((k + 1) as f64, w[1], params.alpha * w[0] + 2.0 * eps)),
    );
    let tail = &norms[norms.len() / 2..];
    let limsup = tail.iter().copied().fold(0.0, f64::max);
    Ok(TheoremReport {
        name: "discrete-3dvar".into(),
        config: serde_json::to_value(check)?,
        pass: margin >= -1e-12,
        margin,
        worst_at: at,
        notes: json!({
            "h": params.h,
            "eta": params.eta,
            "alpha": params.alpha,
            "m2": params.m2,
            "R0": r0,
            "limsup_over_epsilon": limsup / eps,
        }),
    })
}

/// Forecast growth bound on random pairs around a spun-up truth.
pub fn verify_lemma_growth_batch(p: &ModelParams, pairs: usize, h: f64, seed: u64) -> Result<TheoremReport> {
    let v0 = model::spin_up(p, seed, 100.0, model::DEFAULT_DT)?;
    let mut pass = true;
    let mut worst_slack = f64::INFINITY;
    let mut at = 0.0;
    for i in 0..pairs {
        let u0 = mismatched(&v0, 1.0, rng::realization_seed(seed, i as u64));
        let r = verify_lemma_growth(&v0, &u0, h, p)?;
        pass &= r.pass;
        if r.slack < worst_slack {
            worst_slack = r.slack;
            at = i as f64;
        }
    }
    let beta = growth_rate(p.absorbing_radius_sq());
    Ok(TheoremReport {
        name: "lemma-growth".into(),
        config: json!({"J": p.dim(), "F": p.forcing(), "pairs": pairs, "h": h, "seed": seed}),
        pass,
        margin: worst_slack / beta,
        worst_at: at,
        notes: json!({"beta": beta, "max_rate": beta - worst_slack}),
    })
}

/// Names accepted by [`verify_named`], in run order.
pub const CHECKS: &[&str] = &[
    "continuous-sync",
    "discrete-sync",
    "continuous-3dvar",
    "discrete-3dvar",
    "lemma-growth",
];

/// Runs one named check (or `all`) at its default configuration.
pub fn verify_named(name: &str, seed: Option<u64>) -> Result<Vec<TheoremReport>> {
    let small = ModelParams::new(6, 0.05)?;
    let one = |n: &str| -> Result<TheoremReport> {
        match n {
            "continuous-sync" => {
                verify_thm_continuous_sync(&ModelParams::new(60, 8.0)?, seed.unwrap_or(1), 5.0, model::DEFAULT_DT, 1e-5)
            }
            "discrete-sync" => verify_thm_discrete_sync(&small, seed.unwrap_or(3), 50, 0.1),
            "continuous-3dvar" => {
                let mut check = Continuous3dvarCheck::small_forcing();
                check.seed = seed.unwrap_or(check.seed);
                verify_thm_continuous_3dvar(&check)
            }
            "discrete-3dvar" => {
                let mut check = Discrete3dvarCheck::small_forcing();
                check.seed = seed.unwrap_or(check.seed);
                verify_thm_discrete_3dvar(&check)
            }
            "lemma-growth" => verify_lemma_growth_batch(&ModelParams::new(12, 8.0)?, 20, 0.05, seed.unwrap_or(9)),
            other => Err(Error::InvalidParameter(format!(
                "unknown check '{other}'; expected one of {} or all",
                CHECKS.join(", ")
            ))),
        }
    };
    if name == "all" {
        CHECKS.iter().map(|n| one(n)).collect()
    } else {
        Ok(vec![one(name)?])
    }
}
