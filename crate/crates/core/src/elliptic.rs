//! The elliptic comparison family
//! `(ω_r + i∂∂̄ξ) = e^{-(n-κ)r} e^ξ Ω / (‖S‖²+ε²)^{1-β}` and the blended barrier `Q`.

use crate::cone::{ConeModel, DIM_KAPPA, DIM_N};
use crate::error::{Error, Result};
use crate::torus::{ScalarField, TorusDomain};

pub const NEWTON_TOL: f64 = 1e-10;
const MAX_NEWTON: usize = 60;
const MAX_HALVINGS: usize = 30;
const MAX_CG: usize = 1000;

#[derive(Debug, Clone)]
pub struct EllipticSolution {
    pub r: f64,
    pub eps: f64,
    pub xi: ScalarField,
    pub residual_sup: f64,
    /// `sup|F|` after each accepted Newton iterate, starting with the initial guess.
    pub history: Vec<f64>,
}

impl EllipticSolution {
    pub fn iterations(&self) -> usize {
        self.history.len() - 1
    }
}

/// `F(ξ) = log((ω + ¼Δξ)/f) - ξ`, together with `ω + ¼Δξ`; `None` if that density is not positive.
fn residual(
    domain: &TorusDomain,
    omega: &ScalarField,
    log_f: &ScalarField,
    xi: &ScalarField,
) -> Result<Option<(ScalarField, ScalarField)>> {
    let mut g = domain.ddbar_density(xi)?.into_field();
    g.zip_apply(omega, |a, b| a + b);
    if !(g.inf() > 0.0) {
        return Ok(None);
    }
    let vals = g
        .values()
        .iter()
        .zip(log_f.values())
        .zip(xi.values())
        .map(|((&gv, &lf), &x)| gv.ln() - lf - x)
        .collect();
    Ok(Some((ScalarField::from_vec(xi.n(), vals), g)))
}

fn dot(a: &ScalarField, b: &ScalarField) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum()
}

/// Preconditioned CG for `(G - ¼Δ) δ = b` with preconditioner `(mean G - ¼Δ)⁻¹`.
fn pcg(domain: &TorusDomain, g: &ScalarField, b: &ScalarField) -> Result<ScalarField> {
    let shift = g.mean();
    let apply = |v: &ScalarField| -> Result<ScalarField> {
        let mut out = domain.ddbar_density(v)?.into_field();
        for ((o, &gv), &vv) in out.values_mut().iter_mut().zip(g.values()).zip(v.values()) {
            *o = gv * vv - *o;
        }
        Ok(out)
    };
    let mut x = domain.solve_shifted(shift, b)?;
    let mut r = b.clone();
    r.axpy(-1.0, &apply(&x)?);
    let bnorm = dot(b, b).sqrt();
    let tol = 1e-14 * bnorm.max(1e-300);
    let mut z = domain.solve_shifted(shift, &r)?;
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for _ in 0..MAX_CG {
        if dot(&r, &r).sqrt() <= tol {
            break;
        }
        let ap = apply(&p)?;
        let alpha = rz / dot(&p, &ap);
        x.axpy(alpha, &p);
        r.axpy(-alpha, &ap);
        z = domain.solve_shifted(shift, &r)?;
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pv, &zv) in p.values_mut().iter_mut().zip(z.values()) {
            *pv = zv + beta * *pv;
        }
    }
    Ok(x)
}

/// Damped Newton for `log((ω + ¼Δξ)/f) = ξ` given `ω > 0` and `log f`.
pub fn solve_monge_ampere(
    domain: &TorusDomain,
    omega: &ScalarField,
    log_f: &ScalarField,
    initial: Option<ScalarField>,
) -> Result<(ScalarField, Vec<f64>)> {
    if !(omega.inf() > 0.0) {
        return Err(Error::NotAMetric { min: omega.inf() });
    }
    // A constant start keeps ω + ¼Δξ = ω positive.
    let mut xi = initial.unwrap_or_else(|| {
        let c = omega.mean().ln() - log_f.map(f64::exp).mean().ln();
        ScalarField::constant(omega.n(), c)
    });
    let (mut f, mut g) = residual(domain, omega, log_f, &xi)?
        .ok_or(Error::NotAMetric { min: f64::NAN })?;
    let mut history = vec![f.sup_abs()];
    for _ in 0..MAX_NEWTON {
        let current = *history.last().unwrap();
        if current <= NEWTON_TOL {
            // One undamped polishing step down to roundoff, kept only if it helps.
            if current > 1e-14 {
                let rhs = g.zip_map(&f, |a, b| a * b);
                let mut trial = xi.clone();
                trial.axpy(1.0, &pcg(domain, &g, &rhs)?);
                if let Some((ft, _)) = residual(domain, omega, log_f, &trial)? {
                    if ft.sup_abs() < current {
                        history.push(ft.sup_abs());
                        xi = trial;
                    }
                }
            }
            return Ok((xi, history));
        }
        let rhs = g.zip_map(&f, |a, b| a * b);
        let delta = pcg(domain, &g, &rhs)?;
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let mut trial = xi.clone();
            trial.axpy(lambda, &delta);
            if let Some((ft, gt)) = residual(domain, omega, log_f, &trial)? {
                let s = ft.sup_abs();
                if s.is_finite() && (s < (1.0 - 1e-4 * lambda) * current || s <= NEWTON_TOL) {
                    accepted = Some((trial, ft, gt, s));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((x, ft, gt, s)) => {
                xi = x;
                f = ft;
                g = gt;
                history.push(s);
            }
            None => return Err(Error::NewtonFailed(history)),
        }
    }
    if *history.last().unwrap() <= NEWTON_TOL {
        Ok((xi, history))
    } else {
        Err(Error::NewtonFailed(history))
    }
}

/// `log f_r = -(n-κ) r + log Ω + (β-1) log(‖S‖²+ε²)`.
pub fn log_forcing(model: &ConeModel, r: f64) -> ScalarField {
    let beta = model.beta();
    let shift = -(DIM_N - DIM_KAPPA) * r;
    model
        .log_reg()
        .zip_map(model.geometry().volume_form_field(), |l, o| {
            shift + o.ln() + (beta - 1.0) * l
        })
}

/// `ξ_{r,ε}` for the model's ε.
pub fn solve_xi(model: &ConeModel, r: f64) -> Result<EllipticSolution> {
    solve_xi_from(model, r, None)
}

pub fn solve_xi_from(model: &ConeModel, r: f64, initial: Option<ScalarField>) -> Result<EllipticSolution> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::OutOfRange(format!("r = {r} must be non-negative")));
    }
    let omega = model.omega_r_field(r);
    let log_f = log_forcing(model, r);
    let (xi, history) = solve_monge_ampere(model.domain(), &omega, &log_f, initial)?;
    Ok(EllipticSolution {
        r,
        eps: model.eps(),
        xi,
        residual_sup: *history.last().unwrap(),
        history,
    })
}

/// Maximum-principle witness at the grid argmax `x₀` of `ξ - kχ`:
/// returns `(ξ(x₀), log(ω_{r,ε}/f_r)(x₀))`, where the first must not exceed the second.
pub fn max_principle_witness(model: &ConeModel, sol: &EllipticSolution) -> (f64, f64) {
    let k = model.k();
    let shifted = sol.xi.zip_map(model.chi(), |x, c| x - k * c);
    let i = shifted.argmax();
    let omega_eps = model.omega_r_field(sol.r).values()[i] + k * model.ddbar_chi().values()[i];
    let log_f = log_forcing(model, sol.r).values()[i];
    (sol.xi.values()[i], omega_eps.ln() - log_f)
}

fn bump(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

/// Smooth cutoff equal to 1 on `[0, 1/3]`, 0 on `[2/3, 1]`, non-increasing.
pub fn rho_eval(t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfRange(format!("rho argument {t} outside [0,1]")));
    }
    let s = 3.0 * (t - 1.0 / 3.0);
    let (a, b) = (bump(1.0 - s), bump(s));
    Ok(a / (a + b))
}

/// The two solutions blended on `[m, m+1]`.
#[derive(Debug, Clone)]
pub struct BlendBarrier {
    pub m: usize,
    pub xi_a: EllipticSolution,
    pub xi_b: EllipticSolution,
}

/// `Q(·, t) = ρ(t-m) ξ_{m+1} + (1-ρ(t-m)) ξ_{m+2}` for `t ∈ [m, m+1]`.
pub fn blend_q(barrier: &BlendBarrier, t: f64) -> Result<ScalarField> {
    let m = barrier.m as f64;
    if !(t >= m && t <= m + 1.0) {
        return Err(Error::OutOfRange(format!("t = {t} outside [{m}, {}]", m + 1.0)));
    }
    let rho = rho_eval(t - m)?;
    Ok(barrier
        .xi_a
        .xi
        .zip_map(&barrier.xi_b.xi, |a, b| rho * a + (1.0 - rho) * b))
}

pub fn blend_q_at(barrier: &BlendBarrier, idx: usize, t: f64) -> Result<f64> {
    let m = barrier.m as f64;
    if !(t >= m && t <= m + 1.0) {
        return Err(Error::OutOfRange(format!("t = {t} outside [{m}, {}]", m + 1.0)));
    }
    let rho = rho_eval(t - m)?;
    Ok(rho * barrier.xi_a.xi.values()[idx] + (1.0 - rho) * barrier.xi_b.xi.values()[idx])
}

/// `ξ_{r,ε}` for `r = 1..=⌊T⌋+2`, enough to evaluate `Q` on `[0, T]`.
#[derive(Debug, Clone)]
pub struct BarrierFamily {
    pub solutions: Vec<EllipticSolution>,
}

impl BarrierFamily {
    pub fn build(model: &ConeModel, t_end: f64) -> Result<Self> {
        let top = t_end.floor() as usize + 2;
        let mut solutions: Vec<EllipticSolution> = Vec::with_capacity(top);
        for r in 1..=top {
            let init = solutions.last().map(|s| s.xi.clone());
            solutions.push(solve_xi_from(model, r as f64, init)?);
        }
        Ok(BarrierFamily { solutions })
    }

    /// Barrier for the interval `[⌊t⌋, ⌊t⌋+1]`.
    pub fn barrier(&self, t: f64) -> Result<BlendBarrier> {
        if !(t >= 0.0) {
            return Err(Error::OutOfRange(format!("t = {t} must be non-negative")));
        }
        let m = t.floor() as usize;
        if m + 2 > self.solutions.len() {
            return Err(Error::OutOfRange(format!("t = {t} beyond the barrier family")));
        }
        Ok(BlendBarrier {
            m,
            xi_a: self.solutions[m].clone(),
            xi_b: self.solutions[m + 1].clone(),
        })
    }

    pub fn q(&self, t: f64) -> Result<ScalarField> {
        blend_q(&self.barrier(t)?, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::{suggest_k, ConeGeometry, DivisorSpec};
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use std::sync::Arc;

    fn model(n: usize, eps: f64) -> ConeModel {
        let domain = TorusDomain::new(Complex64::new(0.0, 1.0), n).unwrap();
        let divisor = DivisorSpec::new(
            vec![Complex64::new(0.25, 0.25), Complex64::new(0.75, 0.5)],
            0.5,
        )
        .unwrap();
        let g = Arc::new(ConeGeometry::build(domain, divisor, 1.0, None).unwrap());
        let k = suggest_k(&g, &[eps]).unwrap().sufficient;
        ConeModel::build(g, k, eps).unwrap()
    }

    #[test]
    fn constant_forcing_is_exact() {
        let domain = TorusDomain::new(Complex64::new(0.3, 0.9), 32).unwrap();
        let omega = ScalarField::constant(32, 1.7);
        let log_f = ScalarField::constant(32, 0.4f64.ln());
        let exact = (1.7f64 / 0.4).ln();
        let mut near = domain.sample(|x, y| 1e-4 * (2.0 * std::f64::consts::PI * (x - 2.0 * y)).sin());
        near.add_scalar(exact);
        for start in [None, Some(near)] {
            let (xi, hist) = solve_monge_ampere(&domain, &omega, &log_f, start).unwrap();
            assert!(hist.len() - 1 <= 3, "{hist:?}");
            assert!(xi.values().iter().all(|&v| (v - exact).abs() < 1e-12));
        }
    }

    #[test]
    fn residual_small_and_decreasing() {
        let m = model(32, 0.1);
        for r in [1.0, 3.0] {
            let sol = solve_xi(&m, r).unwrap();
            assert!(sol.residual_sup <= NEWTON_TOL);
            for w in sol.history.windows(2) {
                assert!(w[1] < w[0], "{:?}", sol.history);
            }
            let g = m
                .domain()
                .ddbar_density(&sol.xi)
                .unwrap()
                .into_field()
                .zip_map(&m.omega_r_field(r), |a, b| a + b);
            assert!(g.inf() > 0.0);
            let (at, bound) = max_principle_witness(&m, &sol);
            assert!(at <= bound + 1e-8, "{at} {bound}");
        }
    }

    #[test]
    fn two_initial_guesses_agree() {
        let m = model(32, 0.1);
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let mut sols = Vec::new();
        for _ in 0..2 {
            let (a, b, c): (f64, f64, f64) = (rng.gen_range(-0.5..0.5), rng.gen_range(-0.02..0.02), rng.gen_range(-0.02..0.02));
            let init = m.domain().sample(|x, y| {
                let tp = 2.0 * std::f64::consts::PI;
                a + b * (tp * x).cos() + c * (tp * (x + y)).sin()
            });
            sols.push(solve_xi_from(&m, 2.0, Some(init)).unwrap());
        }
        assert!(sols[0].xi.max_abs_diff(&sols[1].xi) < 1e-9);
    }

    #[test]
    fn rho_plateaus_and_symmetry() {
        assert_eq!(rho_eval(0.2).unwrap(), 1.0);
        assert_eq!(rho_eval(0.9).unwrap(), 0.0);
        assert_eq!(rho_eval(1.0 / 3.0).unwrap(), 1.0);
        assert_eq!(rho_eval(2.0 / 3.0).unwrap(), 0.0);
        let mid = rho_eval(0.5).unwrap();
        assert!(mid > 0.0 && mid < 1.0);
        assert!((mid + (1.0 - rho_eval(1.0 - 0.5).unwrap()) - 1.0).abs() < 1e-15);
        let mut last = 1.0;
        for i in 0..=1000 {
            let t = i as f64 / 1000.0;
            let v = rho_eval(t).unwrap();
            assert!(v <= last);
            assert!((v + rho_eval(1.0 - t).unwrap() - 1.0).abs() < 1e-14);
            last = v;
        }
        assert!(rho_eval(-0.1).is_err() && rho_eval(1.2).is_err());
    }

    #[test]
    fn blend_endpoints_and_bound() {
        let m = model(32, 0.2);
        let fam = BarrierFamily::build(&m, 2.0).unwrap();
        assert_eq!(fam.solutions.len(), 4);
        let b = fam.barrier(1.0).unwrap();
        assert_eq!(b.m, 1);
        assert_eq!(blend_q(&b, 1.0).unwrap().values(), fam.solutions[1].xi.values());
        assert_eq!(blend_q(&b, 2.0).unwrap().values(), fam.solutions[2].xi.values());
        let cap = fam.solutions[1].xi.sup_abs().max(fam.solutions[2].xi.sup_abs());
        for t in [1.2, 1.5, 1.7] {
            assert!(blend_q(&b, t).unwrap().sup_abs() <= cap + 1e-15);
        }
        assert!(blend_q(&b, 2.5).is_err());
        // Continuity across the integer time.
        let left = blend_q(&fam.barrier(0.0).unwrap(), 1.0).unwrap();
        assert_eq!(left.values(), fam.q(1.0).unwrap().values());
    }
}
