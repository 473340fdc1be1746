//! Coefficients of the second-order Runge–Kutta–Chebyshev method with damping `2/13`.

const DAMPING: f64 = 2.0 / 13.0;

/// Chebyshev values T_j(w0) and first two derivatives, j = 0..=s.
fn chebyshev(s: usize, w0: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut t = vec![0.0; s + 1];
    let mut dt = vec![0.0; s + 1];
    let mut ddt = vec![0.0; s + 1];
    t[0] = 1.0;
    t[1] = w0;
    dt[1] = 1.0;
    for j in 2..=s {
        t[j] = 2.0 * w0 * t[j - 1] - t[j - 2];
        dt[j] = 2.0 * t[j - 1] + 2.0 * w0 * dt[j - 1] - dt[j - 2];
        ddt[j] = 4.0 * dt[j - 1] + 2.0 * w0 * ddt[j - 1] - ddt[j - 2];
    }
    (t, dt, ddt)
}

fn w0_for(s: usize) -> f64 {
    1.0 + DAMPING / (s * s) as f64
}

/// Length of the real stability interval for `s` stages: the argument
/// `w0 + w1 z` of T_s reaches -1.
pub(super) fn stability_bound(s: usize) -> f64 {
    let w0 = w0_for(s);
    let (_, dt, ddt) = chebyshev(s, w0);
    (1.0 + w0) * ddt[s] / dt[s]
}

#[derive(Debug, Clone)]
pub(super) struct RkcTableau {
    pub(super) mu_tilde1: f64,
    /// Per stage `j = 2..=s`: (μ, ν, μ̃, γ̃).
    pub(super) stages: Vec<(f64, f64, f64, f64)>,
    /// Stage abscissae `c_j`, `j = 0..=s`.
    pub(super) c: Vec<f64>,
}

/// Stage count needed for a real spectral radius `lambda` and step `dt`.
pub(super) fn stage_count(dt: f64, lambda: f64) -> usize {
    let need = 1.2 * dt * lambda;
    let mut s = 2;
    while stability_bound(s) < need {
        s += 1;
    }
    s
}

impl RkcTableau {
    pub(super) fn new(s: usize) -> Self {
        assert!(s >= 2);
        let w0 = w0_for(s);
        let (t, dt, ddt) = chebyshev(s, w0);
        let w1 = dt[s] / ddt[s];
        let mut b = vec![0.0; s + 1];
        for j in 2..=s {
            b[j] = ddt[j] / (dt[j] * dt[j]);
        }
        b[0] = b[2];
        b[1] = b[2];
        let a: Vec<f64> = (0..=s).map(|j| 1.0 - b[j] * t[j]).collect();
        let mu_tilde1 = b[1] * w1;
        let mut stages = Vec::with_capacity(s - 1);
        let mut c = vec![0.0; s + 1];
        c[1] = mu_tilde1;
        for j in 2..=s {
            let mu = 2.0 * b[j] * w0 / b[j - 1];
            let nu = -b[j] / b[j - 2];
            let mt = 2.0 * b[j] * w1 / b[j - 1];
            let gt = -a[j - 1] * mt;
            c[j] = mu * c[j - 1] + nu * c[j - 2] + mt + gt;
            stages.push((mu, nu, mt, gt));
        }
        RkcTableau { mu_tilde1, stages, c }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Applies the scheme to y' = λ y and returns the amplification factor.
    fn amplification(s: usize, z: f64) -> f64 {
        let tab = RkcTableau::new(s);
        let (mut y2, mut y1) = (1.0, 1.0 + tab.mu_tilde1 * z);
        for &(mu, nu, mt, gt) in &tab.stages {
            let y = (1.0 - mu - nu) + mu * y1 + nu * y2 + mt * z * y1 + gt * z;
            y2 = y1;
            y1 = y;
        }
        y1
    }

    #[test]
    fn final_abscissa_is_one_and_second_order() {
        for s in [2, 3, 7, 40, 150] {
            let tab = RkcTableau::new(s);
            assert!((tab.c[s] - 1.0).abs() < 1e-12, "s={s}: {}", tab.c[s]);
            // R(z) = 1 + z + z²/2 + O(z³)
            let z = 1e-3;
            let r = amplification(s, z);
            let taylor = 1.0 + z + z * z / 2.0;
            assert!((r - taylor).abs() < 10.0 * z * z * z * (s * s) as f64, "s={s}");
        }
    }

    #[test]
    fn stage_count_covers_spectrum() {
        for &(dt, lam) in &[(0.02, 1e5), (0.1, 3.0), (1e-4, 1.0)] {
            let s = stage_count(dt, lam);
            assert!(stability_bound(s) >= dt * lam);
        }
    }

    #[test]
    fn stable_on_the_claimed_interval() {
        for s in [2, 5, 20, 90] {
            let edge = stability_bound(s);
            for i in 0..=400 {
                let z = -edge * i as f64 / 400.0;
                assert!(amplification(s, z).abs() <= 1.0 + 1e-9, "s={s} z={z}");
            }
        }
    }
}
