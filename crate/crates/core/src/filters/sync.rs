//! Synchronization: observed components are copied from the truth without
//! noise and only the unobserved ones are filtered.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::{self, blow_up, check_dim, check_dt, rhs_into, ModelParams, StateVector};
use crate::observations::ObservationOperator;

fn check_pair(v0: &StateVector, m0: &StateVector, op: &ObservationOperator, p: &ModelParams) -> Result<()> {
    check_dim(v0.len(), p.dim())?;
    check_dim(m0.len(), p.dim())?;
    check_dim(op.dim(), p.dim())
}

/// Discrete synchronization `m_k = P v_k + Q Ψ(m_{k−1})`.
///
/// Returns `|m_k − v_k|` for `k = 0..=n` with `n = round(t_end / h)`.
pub fn sync_discrete_run(
    v0: &StateVector,
    m0: &StateVector,
    op: &ObservationOperator,
    h: f64,
    t_end: f64,
    dt: f64,
    p: &ModelParams,
) -> Result<Vec<f64>> {
    check_pair(v0, m0, op, p)?;
    check_dt(dt)?;
    if !(h > 0.0) || !(t_end >= 0.0) {
        return Err(Error::InvalidParameter(format!("need h > 0 and t_end >= 0, got h={h}, t_end={t_end}")));
    }
    let steps = (t_end / h).round() as usize;
    let mut v = v0.clone();
    let mut m = m0.clone();
    let mut out = Vec::with_capacity(steps + 1);
    out.push((m.as_vector() - v.as_vector()).norm());
    for _ in 0..steps {
        v = model::flow(&v, h, dt, p)?;
        let mf = model::flow(&m, h, dt, p)?;
        let pv = op.project(v.as_vector());
        let qm = mf.as_vector() - op.project(mf.as_vector());
        m = StateVector::new(pv + qm);
        out.push((m.as_vector() - v.as_vector()).norm());
    }
    Ok(out)
}

/// Continuous synchronization: `v` solves the model, and the unobserved part
/// `q` solves `dq/dt + q + QB(Pv + q, Pv + q) = Qf`; the estimate is
/// `m = Pv + q`. Both are advanced by a joint RK4 with step `dt`.
///
/// `q0` is projected onto the range of `Q`. Returns `(t, |m − v|)` every
/// `record_every` steps, including `t = 0` and the final time.
pub fn sync_continuous_run(
    v0: &StateVector,
    q0: &StateVector,
    op: &ObservationOperator,
    t_end: f64,
    dt: f64,
    record_every: usize,
    p: &ModelParams,
) -> Result<Vec<(f64, f64)>> {
    check_pair(v0, q0, op, p)?;
    check_dt(dt)?;
    let n = p.dim();
    let forcing = p.forcing();
    let project_q = |x: &DVector<f64>| x - op.project(x);
    let f_q = project_q(&DVector::from_element(n, forcing));

    // Joint right-hand side on (v, q); B(w,w) = f − w − 𝓕(w).
    let rhs = |v: &DVector<f64>, q: &DVector<f64>| -> (DVector<f64>, DVector<f64>) {
        let mut dv = DVector::zeros(n);
        rhs_into(v.as_slice(), forcing, dv.as_mut_slice());
        let w = op.project(v) + q;
        let mut fw = DVector::zeros(n);
        rhs_into(w.as_slice(), forcing, fw.as_mut_slice());
        let b = DVector::from_element(n, forcing) - &w - fw;
        let dq = -q - project_q(&b) + &f_q;
        (dv, dq)
    };

    let (full, rest) = model::step_plan(t_end, dt);
    let record_every = record_every.max(1);
    let mut v = v0.as_vector().clone();
    let mut q = project_q(q0.as_vector());
    let err = |v: &DVector<f64>, q: &DVector<f64>| (op.project(v) + q - v).norm();
    let mut out = vec![(0.0, err(&v, &q))];
    let total = full + usize::from(rest > 0.0);
    for step in 0..total {
        let h = if step < full { dt } else { rest };
        let (k1v, k1q) = rhs(&v, &q);
        let (k2v, k2q) = rhs(&(&v + &k1v * (0.5 * h)), &(&q + &k1q * (0.5 * h)));
        let (k3v, k3q) = rhs(&(&v + &k2v * (0.5 * h)), &(&q + &k2q * (0.5 * h)));
        let (k4v, k4q) = rhs(&(&v + &k3v * h), &(&q + &k3q * h));
        v += (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
        q += (k1q + k2q * 2.0 + k3q * 2.0 + k4q) * (h / 6.0);
        let t = if step < full { (step + 1) as f64 * dt } else { t_end };
        if v.iter().chain(q.iter()).any(|x| !x.is_finite()) {
            return Err(blow_up(step + 1, t, q.as_slice()));
        }
        if (step + 1) % record_every == 0 || step + 1 == total {
            out.push((t, err(&v, &q)));
        }
    }
    Ok(out)
}
