//! `log |θ₁(w | τ)|` from the Jacobi triple product.
//!
//! `θ₁(w|τ) = 2 q^{1/8} sin(πw) ∏_{n≥1} (1 - qⁿ)(1 - qⁿ e^{2πiw})(1 - qⁿ e^{-2πiw})`
//! with `q = e^{2πiτ}`. The argument is first reduced into the centered
//! fundamental parallelogram using
//! `log|θ₁(w + τ)| = log|θ₁(w)| + π Im τ + 2π Im w` and `|θ₁(w + 1)| = |θ₁(w)|`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

const TAIL_TOL: f64 = 1e-17;

/// `log |θ₁(w | τ)|`.
pub fn log_abs_theta1(w: Complex64, tau: Complex64) -> Result<f64> {
    if !(tau.im > 0.0) {
        return Err(Error::DegenerateLattice(tau.im));
    }
    // w = w0 + k τ with Im w0 / Im τ in [-1/2, 1/2)
    let k = (w.im / tau.im + 0.5).floor();
    let w0 = w - tau * k;
    let w0 = w0 - (w0.re - tau.re * (w0.im / tau.im) + 0.5).floor();
    if w0.norm() < 1e-14 {
        return Err(Error::LogarithmicPole);
    }
    let shift = PI * k * k * tau.im + 2.0 * PI * k * w0.im;
    Ok(log_abs_theta1_reduced(w0, tau) + shift)
}

fn log_abs_theta1_reduced(w: Complex64, tau: Complex64) -> f64 {
    let i = Complex64::i();
    let q = (2.0 * PI * i * tau).exp();
    let qabs = q.norm();
    let e_plus = (2.0 * PI * i * w).exp();
    let e_minus = e_plus.inv();
    let grow = e_plus.norm().max(e_minus.norm());
    // log|2 q^{1/8}| = log 2 - π Im τ / 4
    let mut acc = 2f64.ln() - 0.25 * PI * tau.im + (PI * w).sin().norm().ln();
    let mut qn = Complex64::new(1.0, 0.0);
    let mut qn_abs = 1.0;
    for _ in 0..10_000 {
        qn *= q;
        qn_abs *= qabs;
        let factor = (Complex64::new(1.0, 0.0) - qn)
            * (Complex64::new(1.0, 0.0) - qn * e_plus)
            * (Complex64::new(1.0, 0.0) - qn * e_minus);
        acc += factor.norm().ln();
        if qn_abs * grow < TAIL_TOL {
            break;
        }
    }
    acc
}
