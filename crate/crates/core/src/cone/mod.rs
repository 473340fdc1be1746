//! Reference objects of the regularized conical flow on the torus.
//!
//! The divisor is a set of `m` points. The Hermitian section norm is the
//! exponential of a periodic Green's-function combination of theta functions,
//! normalized to `sup ‖S‖² = 1`; its curvature `R_h` is the constant density
//! `π m / Im τ` (so `∫ R_h = 2π m`). The limit form is
//! `ω̂_∞ = (1-β) R_h + i∂∂̄ρ`, and the volume form is `Ω = c e^ρ`.

mod chi;

pub use chi::chi_eval;

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::torus::theta::log_abs_theta1;
use crate::torus::{Density11, ScalarField, TorusDomain};

/// Stored in place of `log‖S‖²` at samples that coincide with a divisor point.
pub const LOG_S2_SENTINEL: f64 = -1.0e3;

/// Complex dimension `n` and Kodaira dimension `κ` of the torus model.
pub const DIM_N: f64 = 1.0;
pub const DIM_KAPPA: f64 = 1.0;

/// Divisor points and cone angle `2πβ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DivisorSpec {
    points: Vec<Complex64>,
    beta: f64,
}

impl DivisorSpec {
    pub fn new(points: Vec<Complex64>, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidDivisor(format!("beta {beta} out of (0,1)")));
        }
        if points.is_empty() {
            return Err(Error::InvalidDivisor("at least one divisor point required".into()));
        }
        if points.iter().any(|p| !p.re.is_finite() || !p.im.is_finite()) {
            return Err(Error::InvalidDivisor("non-finite divisor point".into()));
        }
        Ok(DivisorSpec { points, beta })
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn m(&self) -> usize {
        self.points.len()
    }

    /// Smallest pairwise torus distance between divisor points (infinite for `m = 1`).
    pub fn min_spacing(&self, domain: &TorusDomain) -> f64 {
        let mut best = f64::INFINITY;
        for (a, &p) in self.points.iter().enumerate() {
            for &q in &self.points[a + 1..] {
                best = best.min(domain.distance(p, q));
            }
        }
        best
    }

    fn validate_on(&self, domain: &TorusDomain) -> Result<()> {
        let d = self.min_spacing(domain);
        if d <= 4.0 * domain.spacing() {
            return Err(Error::InvalidDivisor(format!(
                "divisor points must be distinct (min spacing {d:e} <= 4h)"
            )));
        }
        Ok(())
    }
}

/// `log‖S‖²` on the grid, normalized so the grid supremum is zero.
///
/// Samples that land exactly on a divisor point hold [`LOG_S2_SENTINEL`].
pub fn build_section_norm(domain: &TorusDomain, divisor: &DivisorSpec) -> Result<ScalarField> {
    divisor.validate_on(domain)?;
    let n = domain.n();
    let tau = domain.tau();
    let b = tau.im;
    let mut values = Vec::with_capacity(n * n);
    let mut on_divisor = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let z = domain.point(i, j);
            let mut acc = 0.0;
            let mut pole = false;
            for &p in divisor.points() {
                let w = domain.reduce(z - p);
                match log_abs_theta1(w, tau) {
                    Ok(l) => acc += 2.0 * l - 2.0 * PI * w.im * w.im / b,
                    Err(Error::LogarithmicPole) => pole = true,
                    Err(e) => return Err(e),
                }
            }
            if pole {
                on_divisor.push(values.len());
            }
            values.push(acc);
        }
    }
    for &idx in &on_divisor {
        values[idx] = f64::NEG_INFINITY;
    }
    let c = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for v in values.iter_mut() {
        *v = if v.is_finite() { *v - c } else { LOG_S2_SENTINEL };
    }
    Ok(ScalarField::from_vec(n, values))
}

/// Everything that does not depend on `ε` or `k`.
#[derive(Debug, Clone)]
pub struct ConeGeometry {
    domain: TorusDomain,
    divisor: DivisorSpec,
    a0: f64,
    rho: ScalarField,
    log_s2: ScalarField,
    s2: ScalarField,
    dist: ScalarField,
    dens_rh: f64,
    omega_hat: ScalarField,
    omega: ScalarField,
}

impl ConeGeometry {
    /// `rho = None` means `ρ ≡ 0`.
    pub fn build(
        domain: TorusDomain,
        divisor: DivisorSpec,
        a0: f64,
        rho: Option<ScalarField>,
    ) -> Result<Self> {
        if !(a0 > 0.0 && a0.is_finite()) {
            return Err(Error::OutOfRange(format!("a0 = {a0} must be positive")));
        }
        let n = domain.n();
        let rho = rho.unwrap_or_else(|| ScalarField::zeros(n));
        if rho.len() != domain.len() {
            return Err(Error::ShapeMismatch {
                expected: domain.len(),
                got: rho.len(),
            });
        }
        let log_s2 = build_section_norm(&domain, &divisor)?;
        let s2 = log_s2.map(f64::exp);
        let dist = domain.distance_field(divisor.points());
        let dens_rh = PI * divisor.m() as f64 / domain.area();
        let beta = divisor.beta();
        let mut omega_hat = domain.ddbar_density(&rho)?.into_field();
        omega_hat.add_scalar((1.0 - beta) * dens_rh);
        let min_hat = omega_hat.inf();
        if !(min_hat > 0.0) {
            return Err(Error::TwistNotKahler { min: min_hat });
        }
        let e_rho = rho.map(f64::exp);
        let c = a0 / e_rho.mean();
        let omega = e_rho.map(|v| c * v);
        Ok(ConeGeometry {
            domain,
            divisor,
            a0,
            rho,
            log_s2,
            s2,
            dist,
            dens_rh,
            omega_hat,
            omega,
        })
    }

    pub fn domain(&self) -> &TorusDomain {
        &self.domain
    }

    pub fn divisor(&self) -> &DivisorSpec {
        &self.divisor
    }

    pub fn beta(&self) -> f64 {
        self.divisor.beta
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn rho(&self) -> &ScalarField {
        &self.rho
    }

    pub fn log_s2(&self) -> &ScalarField {
        &self.log_s2
    }

    /// `‖S‖²_h`
    pub fn s2(&self) -> &ScalarField {
        &self.s2
    }

    /// Flat distance from each sample to the divisor.
    pub fn divisor_distance(&self) -> &ScalarField {
        &self.dist
    }

    /// Samples farther than `radius` from every divisor point.
    pub fn mask_beyond(&self, radius: f64) -> Vec<bool> {
        self.dist.values().iter().map(|&d| d > radius).collect()
    }

    /// Constant density of the curvature form `R_h`.
    pub fn dens_rh(&self) -> f64 {
        self.dens_rh
    }

    pub fn omega_hat(&self) -> Density11 {
        Density11::new(self.omega_hat.clone())
    }

    pub fn omega_hat_field(&self) -> &ScalarField {
        &self.omega_hat
    }

    /// Density of the volume form `Ω`.
    pub fn volume_form(&self) -> Density11 {
        Density11::new(self.omega.clone())
    }

    pub fn volume_form_field(&self) -> &ScalarField {
        &self.omega
    }

    pub fn omega0(&self) -> Density11 {
        Density11::new(ScalarField::constant(self.domain.n(), self.a0))
    }

    /// `χ(‖S‖² + ε²)` on the grid.
    pub fn chi_field(&self, eps: f64) -> Result<ScalarField> {
        let beta = self.beta();
        let mut values = Vec::with_capacity(self.s2.len());
        for &s in self.s2.values() {
            values.push(chi_eval(beta, eps, s)?);
        }
        Ok(ScalarField::from_vec(self.domain.n(), values))
    }

    /// `C₀ = max |R_h / ω̂_∞|` and `C₁ = max(max ω̂_∞/ω₀, 1 + 1e-9)`.
    pub fn positivity_constants(&self) -> (f64, f64) {
        let c0 = self
            .omega_hat
            .values()
            .iter()
            .fold(0.0f64, |m, &h| m.max((self.dens_rh / h).abs()));
        let c1 = (self.omega_hat.sup() / self.a0).max(1.0 + 1e-9);
        (c0, c1)
    }
}

/// Sufficient and measured thresholds for the smoothing strength `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KSuggestion {
    pub c0: f64,
    pub c1: f64,
    /// `1 / (3 β C₀ C₁)`
    pub sufficient: f64,
    /// Largest `k` keeping every `ω_{t,ε}` on the ladder positive.
    pub empirical_max: f64,
}

/// The sufficient positivity bound on `k` together with the measured threshold.
///
/// The reference densities are affine in `k`, so the empirical threshold is
/// the exact root of the positivity constraint rather than a bisection.
pub fn suggest_k(geom: &ConeGeometry, eps_ladder: &[f64]) -> Result<KSuggestion> {
    let (c0, c1) = geom.positivity_constants();
    let sufficient = 1.0 / (3.0 * geom.beta() * c0 * c1);
    let mut empirical_max = f64::INFINITY;
    for &eps in eps_ladder {
        let chi = geom.chi_field(eps)?;
        let dd = geom.domain.ddbar_density(&chi)?.into_field();
        for (&d, &h) in dd.values().iter().zip(geom.omega_hat.values()) {
            if d < 0.0 {
                empirical_max = empirical_max.min(geom.a0.min(h) / -d);
            }
        }
    }
    Ok(KSuggestion {
        c0,
        c1,
        sufficient,
        empirical_max,
    })
}

/// One rung: the geometry specialized to a smoothing strength `k` and regularization `ε`.
#[derive(Debug, Clone)]
pub struct ConeModel {
    geom: Arc<ConeGeometry>,
    k: f64,
    eps: f64,
    chi: ScalarField,
    ddbar_chi: ScalarField,
    omega0_eps: ScalarField,
    hat_eps: ScalarField,
    log_reg: ScalarField,
    theta: ScalarField,
}

impl ConeModel {
    pub fn build(geom: Arc<ConeGeometry>, k: f64, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::OutOfRange(format!("eps = {eps} must be positive")));
        }
        if !(k >= 0.0 && k.is_finite()) {
            return Err(Error::OutOfRange(format!("k = {k} must be non-negative")));
        }
        let domain = &geom.domain;
        let beta = geom.beta();
        let chi = geom.chi_field(eps)?;
        let ddbar_chi = domain.ddbar_density(&chi)?.into_field();
        let omega0_eps = ddbar_chi.map(|d| geom.a0 + k * d);
        let hat_eps = ddbar_chi.zip_map(&geom.omega_hat, |d, h| h + k * d);
        for (t, f) in [(0.0, &omega0_eps), (f64::INFINITY, &hat_eps)] {
            let min = f.inf();
            if !(min > 0.0) {
                return Err(Error::KTooLarge { min, t });
            }
        }
        let e2 = eps * eps;
        let log_reg = geom.s2.map(|s| (s + e2).ln());
        let mut theta = domain.ddbar_density(&log_reg)?.into_field();
        theta.add_scalar(geom.dens_rh);
        theta.scale(1.0 - beta);
        Ok(ConeModel {
            geom,
            k,
            eps,
            chi,
            ddbar_chi,
            omega0_eps,
            hat_eps,
            log_reg,
            theta,
        })
    }

    pub fn geometry(&self) -> &ConeGeometry {
        &self.geom
    }

    pub fn geometry_arc(&self) -> &Arc<ConeGeometry> {
        &self.geom
    }

    pub fn domain(&self) -> &TorusDomain {
        &self.geom.domain
    }

    pub fn beta(&self) -> f64 {
        self.geom.beta()
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn chi(&self) -> &ScalarField {
        &self.chi
    }

    /// Density of `i∂∂̄χ`.
    pub fn ddbar_chi(&self) -> &ScalarField {
        &self.ddbar_chi
    }

    /// `log(‖S‖² + ε²)`
    pub fn log_reg(&self) -> &ScalarField {
        &self.log_reg
    }

    /// Density of `ω_{0,ε}`.
    pub fn omega0_eps(&self) -> &ScalarField {
        &self.omega0_eps
    }

    /// Density of `ω̂_∞ + k i∂∂̄χ`, the `t → ∞` limit of `ω_{t,ε}`.
    pub fn hat_eps(&self) -> &ScalarField {
        &self.hat_eps
    }

    /// Density of `ω_{t,ε} = e^{-t} ω_{0,ε} + (1 - e^{-t})(ω̂_∞ + k i∂∂̄χ)`.
    pub fn omega_t_eps_field(&self, t: f64) -> ScalarField {
        let a = (-t).exp();
        self.omega0_eps.zip_map(&self.hat_eps, |o, h| a * o + (1.0 - a) * h)
    }

    pub fn omega_t_eps(&self, t: f64) -> Result<Density11> {
        if !(t >= 0.0) {
            return Err(Error::OutOfRange(format!("t = {t} must be non-negative")));
        }
        let f = self.omega_t_eps_field(t);
        let min = f.inf();
        if !(min > 0.0) {
            return Err(Error::KTooLarge { min, t });
        }
        Ok(Density11::new(f))
    }

    /// Density of the reference metric `ω_r = e^{-r} ω₀ + (1 - e^{-r}) ω̂_∞` (no smoothing term).
    pub fn omega_r_field(&self, r: f64) -> ScalarField {
        let a = (-r).exp();
        let a0 = self.geom.a0;
        self.geom.omega_hat.map(|h| a * a0 + (1.0 - a) * h)
    }

    /// `Θ_ε = (1-β)(i∂∂̄ log(‖S‖² + ε²) + R_h)` by spectral differentiation.
    pub fn theta_eps_spectral(&self) -> Density11 {
        Density11::new(self.theta.clone())
    }

    pub fn theta_field(&self) -> &ScalarField {
        &self.theta
    }

    /// `Θ_ε = (1-β) ε²/(‖S‖²+ε²) (|∇S|²/(‖S‖²+ε²) + R_h)` with `|∇S|² = |∂_z‖S‖²|² / ‖S‖²`.
    ///
    /// Within two grid spacings of a divisor point the spectral value is used.
    pub fn theta_eps_closed(&self) -> Result<Density11> {
        let g = &self.geom;
        let beta = g.beta();
        let e2 = self.eps * self.eps;
        let grad = g.domain.grad_sq_flat(&g.s2)?;
        let near = 2.0 * g.domain.spacing();
        let mut out = Vec::with_capacity(g.s2.len());
        for idx in 0..g.s2.len() {
            let s = g.s2.values()[idx];
            if g.dist.values()[idx] <= near || s <= 0.0 {
                out.push(self.theta.values()[idx]);
                continue;
            }
            let nabla_s = grad.values()[idx] / s;
            out.push((1.0 - beta) * e2 / (s + e2) * (nabla_s / (s + e2) + g.dens_rh));
        }
        Ok(Density11::new(ScalarField::from_vec(g.domain.n(), out)))
    }

    /// Forcing of the smooth equation independent of `φ`:
    /// `(n-κ)t + (1-β) log(‖S‖²+ε²) - k χ - log Ω`.
    pub fn forcing(&self, t: f64) -> ScalarField {
        let beta = self.beta();
        let k = self.k;
        let shift = (DIM_N - DIM_KAPPA) * t;
        let mut f = self.log_reg.zip_map(&self.chi, |l, c| shift + (1.0 - beta) * l - k * c);
        f.zip_apply(&self.geom.omega, |a, o| a - o.ln());
        f
    }

    /// `min dens(ω_{0,ε}) / a0`.
    pub fn gamma(&self) -> f64 {
        self.omega0_eps.inf() / self.geom.a0
    }

    /// Range of `dens(ω_{0,ε}) (‖S‖²+ε²)^{1-β} / dens(Ω)`.
    pub fn shen_ratio_range(&self) -> (f64, f64) {
        let beta = self.beta();
        let e2 = self.eps * self.eps;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for ((&o, &s), &om) in self
            .omega0_eps
            .values()
            .iter()
            .zip(self.geom.s2.values())
            .zip(self.geom.omega.values())
        {
            let r = o * (s + e2).powf(1.0 - beta) / om;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        (lo, hi)
    }

    /// `max dens(ω_{t,ε}) / dens(ω_{0,ε})`.
    pub fn comparison_constant(&self, t: f64) -> f64 {
        self.omega_t_eps_field(t)
            .zip_map(&self.omega0_eps, |a, b| a / b)
            .sup()
    }
}
