//! The regularization `χ(ε² + s) = β ∫₀^s ((ε² + r)^β - ε^{2β}) / r dr`.
//!
//! Substituting `r = ε² (eᵛ - 1)` turns the two-scale integrand into
//! `β ε^{2β} ∫₀^V (e^{βv} - 1) / (1 - e^{-v}) dv` with `V = ln(1 + s/ε²)`,
//! which is smooth and integrated by adaptive Gauss–Kronrod.

use crate::error::{Error, Result};

const ABS_TOL: f64 = 1e-12;
const SERIES_CUTOFF: f64 = 1e-3;

// Gauss–Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, &x) in XGK.iter().take(7).enumerate() {
        let s = f(c - h * x) + f(c + h * x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    let (val, err) = gk15(f, a, b);
    if err <= tol || depth == 0 {
        return val;
    }
    let m = 0.5 * (a + b);
    adaptive(f, a, m, 0.5 * tol, depth - 1) + adaptive(f, m, b, 0.5 * tol, depth - 1)
}

/// `χ(ε² + s)` for `s ≥ 0`, `ε ≥ 0`, `β ∈ (0, 1]`.
pub fn chi_eval(beta: f64, eps: f64, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::NegativeArgument(s));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::OutOfRange(format!("beta {beta} outside (0,1]")));
    }
    if eps < 0.0 {
        return Err(Error::NegativeArgument(eps));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    if beta == 1.0 {
        return Ok(s);
    }
    if eps == 0.0 {
        return Ok(s.powf(beta));
    }
    let e2 = eps * eps;
    let x = s / e2;
    let pref = beta * e2.powf(beta);
    if x < SERIES_CUTOFF {
        // ((1+y)^β - 1)/y = β + β(β-1)/2 y + β(β-1)(β-2)/6 y² + ..., integrated over y ∈ [0, x]
        let c1 = beta;
        let c2 = beta * (beta - 1.0) / 2.0;
        let c3 = beta * (beta - 1.0) * (beta - 2.0) / 6.0;
        let c4 = c3 * (beta - 3.0) / 4.0;
        let series = x * (c1 + x * (c2 / 2.0 + x * (c3 / 3.0 + x * c4 / 4.0)));
        return Ok(pref * series);
    }
    let upper = x.ln_1p();
    let integrand = |v: f64| (beta * v).exp_m1() / -(-v).exp_m1();
    let tol = ABS_TOL / pref.max(1e-300);
    Ok(pref * adaptive(&integrand, 0.0, upper, tol, 40))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closed form at β = 1/2: with w = sqrt(1 + r/ε²),
    /// χ = ε (2w - 2 ln(1 + w)) evaluated from w = 1 to sqrt(1 + s/ε²), times 1/2.
    fn chi_half_closed(eps: f64, s: f64) -> f64 {
        let w = (1.0 + s / (eps * eps)).sqrt();
        let prim = |w: f64| 2.0 * w - 2.0 * (1.0 + w).ln();
        0.5 * eps * (prim(w) - prim(1.0))
    }

    /// Composite Simpson in the original variable, refined until stable.
    fn chi_simpson(beta: f64, eps: f64, s: f64) -> f64 {
        let e2b = (eps * eps).powf(beta);
        let f = |r: f64| {
            if r == 0.0 {
                beta * (eps * eps).powf(beta - 1.0)
            } else {
                ((eps * eps + r).powf(beta) - e2b) / r
            }
        };
        let mut n = 1 << 10;
        let mut prev = f64::NAN;
        loop {
            let h = s / n as f64;
            let mut acc = f(0.0) + f(s);
            for i in 1..n {
                acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
            }
            let val = beta * acc * h / 3.0;
            if (val - prev).abs() < 1e-13 || n > 1 << 22 {
                return val;
            }
            prev = val;
            n *= 2;
        }
    }

    #[test]
    fn beta_one_is_identity() {
        for &s in &[0.0, 1e-9, 0.3, 1.0] {
            assert_eq!(chi_eval(1.0, 0.37, s).unwrap(), s);
        }
    }

    #[test]
    fn eps_zero_is_power() {
        for &s in &[1e-6, 0.2, 1.0] {
            assert!((chi_eval(0.5, 0.0, s).unwrap() - s.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn half_beta_unit_eps_matches_closed_form() {
        let v = chi_eval(0.5, 1.0, 1.0).unwrap();
        let exact = 2f64.sqrt() - 1.0 - ((1.0 + 2f64.sqrt()) / 2.0).ln();
        assert!((v - exact).abs() < 1e-13, "{v} vs {exact}");
        assert!((exact - 0.225_987_162).abs() < 1e-8);
        assert!(v <= 1.0);
    }

    #[test]
    fn matches_closed_form_across_scales() {
        for &eps in &[0.025, 0.05, 0.2, 1.0] {
            for &s in &[1e-8, 1e-5, 3e-4, 0.01, 0.3, 1.0] {
                let v = chi_eval(0.5, eps, s).unwrap();
                let e = chi_half_closed(eps, s);
                assert!((v - e).abs() < 1e-12, "eps={eps} s={s}: {v} vs {e}");
            }
        }
    }

    #[test]
    fn matches_simpson_for_other_betas() {
        for &beta in &[0.2, 0.75] {
            for &(eps, s) in &[(0.1, 0.5), (0.3, 1.0), (0.05, 0.02)] {
                let v = chi_eval(beta, eps, s).unwrap();
                let e = chi_simpson(beta, eps, s);
                assert!((v - e).abs() < 1e-10, "beta={beta} eps={eps} s={s}: {v} vs {e}");
            }
        }
    }

    #[test]
    fn rejects_negative_argument() {
        assert!(matches!(chi_eval(0.5, 0.1, -1.0), Err(Error::NegativeArgument(_))));
    }

    #[test]
    fn bounded_by_power_and_monotone_in_eps() {
        for &s in &[1e-4f64, 0.1, 0.7, 1.0] {
            let mut last: f64 = s.powf(0.4) + 1e-15;
            for &eps in &[0.0, 0.025, 0.05, 0.1, 0.2] {
                let v = chi_eval(0.4, eps, s).unwrap();
                assert!(v >= 0.0 && v <= last + 1e-12, "s={s} eps={eps}");
                last = v;
            }
        }
    }
}
