//! Algebraic invariants of the model, the operators and the analysis steps,
//! each checked against an independent formulation.

mod common;

use chaosfilt::filters::{aus_analysis, exkf_analysis, threedvar_analysis, threedvar_gain, FilterConfig, FilterKind};
use chaosfilt::model::{bilinear, flow, vector_field, ModelParams, StateVector, TangentPropagator};
use chaosfilt::observations::{adaptive_operator, ObservationOperator};
use chaosfilt::theory::projection_constant;
use common::{bilinear_oracle, gaussian, p_square, rng, vector_field_oracle};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn sv(v: &DVector<f64>) -> StateVector {
    StateVector::new(v.clone())
}

fn b(u: &DVector<f64>, v: &DVector<f64>, p: &ModelParams) -> DVector<f64> {
    bilinear(&sv(u), &sv(v), p).unwrap().into_inner()
}

fn fixed_operators(n: usize) -> Vec<ObservationOperator> {
    vec![
        ObservationOperator::identity(n),
        ObservationOperator::p(n).unwrap(),
        ObservationOperator::p36(n).unwrap(),
        ObservationOperator::p24(n).unwrap(),
    ]
}

proptest! {
    #[test]
    fn bilinear_matches_stencil(seed in any::<u64>(), n in 4usize..40, scale in 0.1f64..20.0) {
        let p = ModelParams::new(n, 8.0).unwrap();
        let mut r = rng(seed);
        let (u, v) = (gaussian(&mut r, n, scale), gaussian(&mut r, n, scale));
        let err = (b(&u, &v, &p) - bilinear_oracle(&u, &v)).amax();
        prop_assert!(err <= 1e-13 * scale * scale * n as f64);
        let f = vector_field(&sv(&u), &p).unwrap().into_inner();
        prop_assert!((f - vector_field_oracle(&u, 8.0)).amax() <= 1e-12 * (1.0 + scale * scale));
    }

    #[test]
    fn linear_part_is_the_identity(seed in any::<u64>(), n in 4usize..40) {
        // A u = f − 𝓕(u) − B(u, u), and ⟨Au, u⟩ = |u|².
        let p = ModelParams::new(n, 3.0).unwrap();
        let u = gaussian(&mut rng(seed), n, 2.0);
        let au = DVector::from_element(n, 3.0) - vector_field(&sv(&u), &p).unwrap().into_inner() - b(&u, &u, &p);
        prop_assert!((au.dot(&u) - u.norm_squared()).abs() <= 1e-12 * u.norm_squared());
    }

    #[test]
    fn nonlinear_term_conserves_energy(seed in any::<u64>(), n in 4usize..60) {
        let p = ModelParams::new(n, 8.0).unwrap();
        let u = gaussian(&mut rng(seed), n, 5.0);
        prop_assert!(b(&u, &u, &p).dot(&u).abs() <= 1e-10 * u.norm().powi(3));
    }

    #[test]
    fn bilinear_is_symmetric_and_bounded(seed in any::<u64>(), n in 4usize..60) {
        let p = ModelParams::new(n, 8.0).unwrap();
        let mut r = rng(seed);
        let (u, v) = (gaussian(&mut r, n, 3.0), gaussian(&mut r, n, 0.5));
        prop_assert_eq!(b(&u, &v, &p), b(&v, &u, &p));
        prop_assert!(b(&u, &v, &p).norm() <= 2.0 * u.norm() * v.norm());
        let lhs = 2.0 * b(&u, &v, &p).dot(&u);
        let rhs = -b(&u, &u, &p).dot(&v);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * u.norm_squared() * v.norm());
    }

    #[test]
    fn unobserved_part_has_no_self_interaction(seed in any::<u64>(), third in 2usize..20) {
        let n = 3 * third;
        let p = ModelParams::new(n, 8.0).unwrap();
        let mut r = rng(seed);
        let (u, v) = (gaussian(&mut r, n, 4.0), gaussian(&mut r, n, 1.0));
        let pm = p_square(n);
        let qu = &u - &pm * &u;
        prop_assert!(b(&qu, &qu, &p).amax() <= 1e-12 * u.norm_squared());
        let c = projection_constant();
        prop_assert!((c - 2.0 * 5f64.sqrt()).abs() < 1e-15);
        prop_assert!(b(&u, &u, &p).dot(&v).abs() <= c * u.norm() * v.norm() * (&pm * &u).norm());
    }

    #[test]
    fn fixed_operators_are_orthonormal_projections(k in 1usize..5) {
        let n = 30 * k;
        for op in fixed_operators(n) {
            let h = op.matrix();
            prop_assert_eq!(h * h.transpose(), DMatrix::identity(op.rank(), op.rank()));
            let pm = op.projector();
            let q = op.complement();
            prop_assert_eq!(&pm * &pm, pm.clone());
            prop_assert_eq!(q.matrix() * q.matrix(), q.matrix().clone());
            prop_assert_eq!(&pm * q.matrix(), DMatrix::zeros(n, n));
            prop_assert_eq!(q.matrix() * &pm, DMatrix::zeros(n, n));
            prop_assert_eq!(&pm + q.matrix(), DMatrix::identity(n, n));
        }
        prop_assert_eq!(ObservationOperator::p(n).unwrap().projector(), p_square(n));
    }

    #[test]
    fn threedvar_gain_is_scaled_transpose(seed in any::<u64>(), eta in 1e-4f64..10.0, m in 1usize..12) {
        let n = 30;
        let p = ModelParams::new(n, 8.0).unwrap();
        let cfg = FilterConfig::with_eta(p, 0.1, eta, 0.3, FilterKind::ThreeDVar).unwrap();
        let l = DMatrix::from_iterator(n, n, gaussian(&mut rng(seed), n * n, 1.0).iter().copied());
        let mut ops = fixed_operators(n);
        ops.push(adaptive_operator(&TangentPropagator::new(l, (0.0, 0.1)), m).unwrap());
        for op in ops {
            let g = threedvar_gain(&op, &cfg).unwrap();
            let want = op.matrix().transpose() / (1.0 + eta);
            prop_assert!((g.matrix() - want).amax() <= 1e-12);
        }
    }

    #[test]
    fn threedvar_analysis_minimizes_its_objective(seed in any::<u64>(), eps in 0.01f64..1.0, sigma in 0.1f64..3.0) {
        let n = 30;
        let p = ModelParams::new(n, 8.0).unwrap();
        let cfg = FilterConfig::new(p, 0.1, sigma, eps, FilterKind::ThreeDVar).unwrap();
        let mut r = rng(seed);
        let f = gaussian(&mut r, n, 3.0);
        for op in fixed_operators(n) {
            let y = gaussian(&mut r, op.rank(), 3.0);
            let m = threedvar_analysis(&sv(&f), &y, &op, &cfg).unwrap().into_inner();
            let h = op.matrix();
            let grad = (&m - &f) / (sigma * sigma) - h.transpose() * (&y - h * &m) / (eps * eps);
            let scale = (&m - &f).norm() / (sigma * sigma) + (h.transpose() * &y).norm() / (eps * eps);
            prop_assert!(grad.norm() <= 1e-8 * scale.max(1.0));
        }
    }

    #[test]
    fn exkf_covariance_equals_joseph_form(seed in any::<u64>(), eps in 0.05f64..2.0) {
        let n = 6;
        let p = ModelParams::new(n, 8.0).unwrap();
        let cfg = FilterConfig::new(p, 0.1, 1.0, eps, FilterKind::ExKf).unwrap();
        let mut r = rng(seed);
        let l = DMatrix::from_iterator(n, n, gaussian(&mut r, n * n, 1.0).iter().copied());
        let a = DMatrix::from_iterator(n, n, gaussian(&mut r, n * n, 1.0).iter().copied());
        let c = &a * a.transpose();
        let op = ObservationOperator::p(n).unwrap();
        let f = gaussian(&mut r, n, 2.0);
        let y = gaussian(&mut r, op.rank(), 2.0);
        let res = exkf_analysis(&sv(&f), &l, &c, &y, &op, &cfg, 1).unwrap();

        // Gain through an explicit inverse rather than a Cholesky solve.
        let h = op.matrix();
        let c_hat = &l * &c * l.transpose();
        let gamma = DMatrix::identity(op.rank(), op.rank()) * (eps * eps);
        let s_inv = (h * &c_hat * h.transpose() + &gamma).try_inverse().unwrap();
        let g = &c_hat * h.transpose() * s_inv;
        let i_gh = DMatrix::identity(n, n) - &g * h;
        let joseph = &i_gh * &c_hat * i_gh.transpose() + &g * &gamma * g.transpose();
        prop_assert!((&res.covariance - &joseph).amax() <= 1e-8 * (1.0 + joseph.amax()));
        let mean = &f + &g * (&y - h * &f);
        prop_assert!((res.mean.as_vector() - &mean).amax() <= 1e-8 * (1.0 + mean.amax()));
    }

    #[test]
    fn full_rank_subspace_analysis_is_the_kalman_analysis(seed in any::<u64>(), sigma in 0.2f64..2.0) {
        let n = 6;
        let p = ModelParams::new(n, 8.0).unwrap();
        let mut r = rng(seed);
        let l = DMatrix::identity(n, n) + DMatrix::from_iterator(n, n, gaussian(&mut r, n * n, 0.3).iter().copied());
        let op = ObservationOperator::p(n).unwrap();
        let f = gaussian(&mut r, n, 2.0);
        let y = gaussian(&mut r, op.rank(), 2.0);
        let ekf = FilterConfig::new(p, 0.1, sigma, 0.4, FilterKind::ExKf).unwrap();
        let aus = FilterConfig { kind: FilterKind::Aus, aus_rank: Some(n), ..ekf };
        let full = exkf_analysis(&sv(&f), &l, &ekf.model_covariance(), &y, &op, &ekf, 1).unwrap();
        let (mean, factor) = aus_analysis(&sv(&f), &(&l * sigma), &y, &op, &aus, 1).unwrap();
        prop_assert!((mean.as_vector() - full.mean.as_vector()).amax() <= 1e-8);
        prop_assert!((&factor * factor.transpose() - &full.covariance).amax() <= 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn trajectories_stay_in_the_absorbing_ball(seed in any::<u64>(), n in 4usize..24, f in 0.5f64..10.0) {
        let p = ModelParams::new(n, f).unwrap();
        let k = 2.0 * n as f64 * f * f;
        let u0 = gaussian(&mut rng(seed), n, 1.0);
        let u0 = &u0 * (k.sqrt() / u0.norm()) * 0.999;
        let mut u = sv(&u0);
        for _ in 0..100 {
            u = flow(&u, 0.1, 1e-3, &p).unwrap();
            prop_assert!(u.as_vector().norm_squared() <= k);
        }
    }
}
