//! Independent oracles shared by the integration tests. Nothing here calls
//! the library's numerics.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ 0x0bad_5eed_0f_0dd5)
}

pub fn gaussian(r: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| scale * r.sample::<f64, _>(StandardNormal))
}

/// Component `j` (1-based) of the symmetric bilinear form, written out from
/// its periodic stencil: `−½(ṽ_{j−1}u_{j+1} + u_{j−1}ṽ_{j+1} − ṽ_{j−2}u_{j−1} − u_{j−2}ṽ_{j−1})`.
pub fn bilinear_oracle(u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let n = u.len() as i64;
    let at = |x: &DVector<f64>, j: i64| x[((j - 1).rem_euclid(n)) as usize];
    DVector::from_fn(u.len(), |i, _| {
        let j = i as i64 + 1;
        -0.5 * (at(v, j - 1) * at(u, j + 1) + at(u, j - 1) * at(v, j + 1)
            - at(v, j - 2) * at(u, j - 1)
            - at(u, j - 2) * at(v, j - 1))
    })
}

/// `f − u − B(u, u)`.
pub fn vector_field_oracle(u: &DVector<f64>, forcing: f64) -> DVector<f64> {
    DVector::from_element(u.len(), forcing) - u - bilinear_oracle(u, u)
}

/// Square projector that zeroes every third component (1-based indices 3, 6, …).
pub fn p_square(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if i == j && (i + 1) % 3 != 0 { 1.0 } else { 0.0 })
}

/// Composite five-node Gauss–Legendre quadrature on `[a, b]`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    const X: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let h = (b - a) / panels as f64;
    let mut sum = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for (x, w) in X.iter().zip(W) {
            sum += w * f(mid + 0.5 * h * x);
        }
    }
    0.5 * h * sum
}

/// `∫₀ᵗ (16K e^{βτ} + 4R₀² e^{2βτ}) dτ`.
pub fn a1_quadrature(t: f64, k: f64, beta: f64, r0: f64) -> f64 {
    integrate(|s| 16.0 * k * (beta * s).exp() + 4.0 * r0 * r0 * (2.0 * beta * s).exp(), 0.0, t, 400)
}

/// `e^{−t} + c²K ∫₀ᵗ e^{−(t−s)} A₁(s) ds` with `A₁` itself by quadrature.
pub fn b1_quadrature(t: f64, k: f64, beta: f64, c: f64, r0: f64) -> f64 {
    let inner = integrate(|s| (-(t - s)).exp() * a1_quadrature(s, k, beta, r0), 0.0, t, 200);
    (-t).exp() + c * c * k * inner
}

/// Matrix exponential by scaling and squaring of a degree-18 Taylor sum.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let norm = a.abs().row_sum().max();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = a / 2f64.powi(squarings as i32);
    let n = a.nrows();
    let mut term = DMatrix::identity(n, n);
    let mut sum = DMatrix::identity(n, n);
    for i in 1..=18 {
        term = &term * &scaled / i as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Eigenvalues of a symmetric matrix from sign changes of its characteristic
/// polynomial, counted by Sylvester's law on `A − xI = LDLᵀ`.
pub fn eigenvalues_by_bisection(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let below = |x: f64| -> usize {
        // Count negative pivots of Gaussian elimination on A − xI.
        let mut m = a.clone();
        for i in 0..n {
            m[(i, i)] -= x;
        }
        let mut negatives = 0;
        for k in 0..n {
            let mut piv = m[(k, k)];
            if piv == 0.0 {
                piv = 1e-300;
            }
            if piv < 0.0 {
                negatives += 1;
            }
            for i in k + 1..n {
                let f = m[(i, k)] / piv;
                for j in k + 1..n {
                    m[(i, j)] -= f * m[(k, j)];
                }
            }
        }
        negatives
    };
    let bound = a.abs().row_sum().max() + 1.0;
    (0..n)
        .map(|idx| {
            // Smallest x with more than idx eigenvalues below it.
            let (mut lo, mut hi) = (-bound, bound);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if below(mid) > idx {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}
