//! Maximum-principle quantities along a flow and the checks built on them.

use crate::cone::{ConeModel, DIM_KAPPA, DIM_N};
use crate::elliptic::BarrierFamily;
use crate::error::{Error, Result};
use crate::flow::Record;
use crate::torus::{Density11, ScalarField, TorusDomain};

/// Tolerances of the monotonicity and identity checks.
pub const MONOTONE_TOL: f64 = 1e-6;
pub const IDENTITY_TOL: f64 = 1e-7;

/// `u = φ + φ̇ + kχ`
pub fn compute_u(model: &ConeModel, rec: &Record) -> ScalarField {
    let k = model.k();
    let mut u = rec.state.phi.zip_map(&rec.dphi, |a, b| a + b);
    u.axpy(k, model.chi());
    u
}

/// `ψ = tr_{ω_φ} ω̂_∞`
pub fn compute_psi(model: &ConeModel, g: &Density11) -> ScalarField {
    model.geometry().omega_hat_field().zip_map(g.dens(), |h, g| h / g)
}

/// `R = -(¼Δ log g) / g`
pub fn scalar_curvature(domain: &TorusDomain, g: &Density11) -> Result<ScalarField> {
    g.ensure_metric()?;
    let mut r = domain.ddbar_density(&g.dens().map(f64::ln))?.into_field();
    r.zip_apply(g.dens(), |l, g| -l / g);
    Ok(r)
}

/// `Q̃ = R - tr_{ω_φ} Θ_ε`
pub fn q_tilde(model: &ConeModel, g: &Density11) -> Result<ScalarField> {
    let mut q = scalar_curvature(model.domain(), g)?;
    for ((qv, &t), &gv) in q
        .values_mut()
        .iter_mut()
        .zip(model.theta_field().values())
        .zip(g.dens().values())
    {
        *qv -= t / gv;
    }
    Ok(q)
}

/// `Δ_φ u = ¼Δu / g`
pub fn laplace_u(domain: &TorusDomain, u: &ScalarField, g: &Density11) -> Result<ScalarField> {
    let mut l = domain.ddbar_density(u)?.into_field();
    l.zip_apply(g.dens(), |a, b| a / b);
    Ok(l)
}

fn check_barrier(b: f64, u: &ScalarField) -> Result<()> {
    let sup_u = u.sup();
    if !(b > sup_u) {
        return Err(Error::BarrierTooSmall { b, sup_u });
    }
    Ok(())
}

/// `Ψ = |∇u|²_{ω_φ} / (B - u)`
pub fn grad_quantity(domain: &TorusDomain, u: &ScalarField, g: &Density11, b: f64) -> Result<ScalarField> {
    check_barrier(b, u)?;
    let mut out = domain.grad_sq_metric(u, g)?;
    out.zip_apply(u, |gr, uv| gr / (b - uv));
    Ok(out)
}

/// `Φ = (B - Δ_φ u - ψ) / (B - u)`
pub fn laplace_quantity(
    domain: &TorusDomain,
    u: &ScalarField,
    g: &Density11,
    psi: &ScalarField,
    b: f64,
) -> Result<ScalarField> {
    check_barrier(b, u)?;
    let lap = laplace_u(domain, u, g)?;
    let vals = (0..u.len())
        .map(|i| (b - lap.values()[i] - psi.values()[i]) / (b - u.values()[i]))
        .collect();
    Ok(ScalarField::from_vec(u.n(), vals))
}

/// `H = φ̇ + 2φ + 2kχ - Q`
pub fn barrier_h(model: &ConeModel, rec: &Record, q: &ScalarField) -> ScalarField {
    let k = model.k();
    let vals = (0..q.len())
        .map(|i| {
            rec.dphi.values()[i] + 2.0 * rec.state.phi.values()[i] + 2.0 * k * model.chi().values()[i]
                - q.values()[i]
        })
        .collect();
    ScalarField::from_vec(q.n(), vals)
}

/// `e^t φ̇ - φ̇ - φ - kχ - κt - e^t(n-κ)`, non-increasing in `t` along the flow.
pub fn decreasing_composite(model: &ConeModel, rec: &Record) -> ScalarField {
    let t = rec.state.t;
    let et = t.exp();
    let k = model.k();
    let shift = -DIM_KAPPA * t - et * (DIM_N - DIM_KAPPA);
    let vals = (0..rec.dphi.len())
        .map(|i| {
            let d = rec.dphi.values()[i];
            et * d - d - rec.state.phi.values()[i] - k * model.chi().values()[i] + shift
        })
        .collect();
    ScalarField::from_vec(rec.dphi.n(), vals)
}

/// Masked sup of `|Ric(ω_φ) - Θ_ε - (-i∂∂̄u - ω̂_∞)|` as densities.
pub fn identity_residual(model: &ConeModel, rec: &Record, mask: &[bool]) -> Result<f64> {
    let d = model.domain();
    let g = &rec.state.g_phi;
    let ric = d.ddbar_density(&g.dens().map(f64::ln))?.into_field();
    let u = compute_u(model, rec);
    let ddu = d.ddbar_density(&u)?.into_field();
    let hat = model.geometry().omega_hat_field();
    let vals = (0..u.len())
        .map(|i| {
            let lhs = -ric.values()[i] - model.theta_field().values()[i];
            let rhs = -ddu.values()[i] - hat.values()[i];
            (lhs - rhs).abs()
        })
        .collect();
    Ok(ScalarField::from_vec(u.n(), vals).masked_sup(mask))
}

/// Constants frozen before the diagnostics pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierConstants {
    pub b: f64,
    pub a: f64,
}

/// Run-level facts the constants are chosen from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pilot {
    pub sup_u: f64,
    pub sup_lap_u_plus_psi: f64,
    /// `max |Δ sup ψ| / Δt` between records.
    pub psi_drift: f64,
}

pub fn pilot(model: &ConeModel, records: &[Record]) -> Result<Pilot> {
    let d = model.domain();
    let mut sup_u = f64::NEG_INFINITY;
    let mut sup_lp = f64::NEG_INFINITY;
    let mut drift: f64 = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for rec in records {
        let u = compute_u(model, rec);
        let psi = compute_psi(model, &rec.state.g_phi);
        let lap = laplace_u(d, &u, &rec.state.g_phi)?;
        sup_u = sup_u.max(u.sup());
        sup_lp = sup_lp.max(lap.zip_map(&psi, |a, b| a + b).sup());
        let sp = psi.sup();
        if let Some((t0, s0)) = prev {
            drift = drift.max((sp - s0).abs() / (rec.state.t - t0));
        }
        prev = Some((rec.state.t, sp));
    }
    Ok(Pilot {
        sup_u,
        sup_lap_u_plus_psi: sup_lp,
        psi_drift: drift,
    })
}

impl BarrierConstants {
    /// `B = max(2, 2 sup u + 1, 2 sup(Δu + ψ) + 1)`, `A = 1 + ψ-drift`, maximized over all pilots.
    pub fn from_pilots(pilots: &[Pilot]) -> Self {
        let mut b: f64 = 2.0;
        let mut a: f64 = 1.0;
        for p in pilots {
            b = b
                .max(2.0 * p.sup_u + 1.0)
                .max(2.0 * p.sup_lap_u_plus_psi + 1.0);
            a = a.max(1.0 + p.psi_drift);
        }
        BarrierConstants { b, a }
    }
}

/// One row of the diagnostics series.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub eps: f64,
    pub sup_phi: f64,
    pub inf_phi: f64,
    pub sup_dphi: f64,
    pub inf_dphi: f64,
    pub sup_u: f64,
    pub inf_u: f64,
    pub sup_psi: f64,
    pub sup_gradu: f64,
    pub sup_psi_grad: f64,
    pub sup_phi_lap: f64,
    pub inf_h: f64,
    pub masked_sup_rminus: f64,
    pub min_q_tilde: f64,
    pub min_exp_monotone: f64,
    pub max_decreasing: f64,
    pub sup_schwarz: f64,
    pub identity_residual: f64,
    pub volume: f64,
    pub gamma_measured: f64,
    pub shen_ratio_min: f64,
    pub shen_ratio_max: f64,
    pub comparison_c: f64,
    pub barrier_b: f64,
    pub schwarz_a: f64,
}

impl DiagnosticsRecord {
    pub const COLUMNS: [&'static str; 26] = [
        "t",
        "eps",
        "sup_phi",
        "inf_phi",
        "sup_dphi",
        "inf_dphi",
        "sup_u",
        "inf_u",
        "sup_psi",
        "sup_gradu",
        "sup_Psi",
        "sup_Phi",
        "inf_H",
        "masked_sup_Rminus",
        "min_Qtilde",
        "min_exp_monotone",
        "max_decreasing",
        "sup_schwarz",
        "identity_residual",
        "volume",
        "gamma_measured",
        "shen_ratio_min",
        "shen_ratio_max",
        "comparison_C",
        "B",
        "A",
    ];

    pub fn values(&self) -> [f64; 26] {
        [
            self.t,
            self.eps,
            self.sup_phi,
            self.inf_phi,
            self.sup_dphi,
            self.inf_dphi,
            self.sup_u,
            self.inf_u,
            self.sup_psi,
            self.sup_gradu,
            self.sup_psi_grad,
            self.sup_phi_lap,
            self.inf_h,
            self.masked_sup_rminus,
            self.min_q_tilde,
            self.min_exp_monotone,
            self.max_decreasing,
            self.sup_schwarz,
            self.identity_residual,
            self.volume,
            self.gamma_measured,
            self.shen_ratio_min,
            self.shen_ratio_max,
            self.comparison_c,
            self.barrier_b,
            self.schwarz_a,
        ]
    }

    pub fn from_values(v: &[f64]) -> Result<Self> {
        if v.len() != Self::COLUMNS.len() {
            return Err(Error::ShapeMismatch {
                expected: Self::COLUMNS.len(),
                got: v.len(),
            });
        }
        Ok(DiagnosticsRecord {
            t: v[0],
            eps: v[1],
            sup_phi: v[2],
            inf_phi: v[3],
            sup_dphi: v[4],
            inf_dphi: v[5],
            sup_u: v[6],
            inf_u: v[7],
            sup_psi: v[8],
            sup_gradu: v[9],
            sup_psi_grad: v[10],
            sup_phi_lap: v[11],
            inf_h: v[12],
            masked_sup_rminus: v[13],
            min_q_tilde: v[14],
            min_exp_monotone: v[15],
            max_decreasing: v[16],
            sup_schwarz: v[17],
            identity_residual: v[18],
            volume: v[19],
            gamma_measured: v[20],
            shen_ratio_min: v[21],
            shen_ratio_max: v[22],
            comparison_c: v[23],
            barrier_b: v[24],
            schwarz_a: v[25],
        })
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }
}

/// Masks used by the diagnostics: `dist > δ` for the curvature statistic and
/// `dist > 2h` for the identity check.
#[derive(Debug, Clone)]
pub struct Masks {
    pub delta: Vec<bool>,
    pub adjacent: Vec<bool>,
}

impl Masks {
    pub fn new(model: &ConeModel, delta: f64) -> Self {
        let geom = model.geometry();
        Masks {
            delta: geom.mask_beyond(delta),
            adjacent: geom.mask_beyond(2.0 * model.domain().spacing()),
        }
    }
}

/// Full diagnostics row for one record.
pub fn diagnose_record(
    model: &ConeModel,
    rec: &Record,
    family: &BarrierFamily,
    consts: BarrierConstants,
    masks: &Masks,
) -> Result<DiagnosticsRecord> {
    let d = model.domain();
    let g = &rec.state.g_phi;
    let t = rec.state.t;
    let u = compute_u(model, rec);
    let psi = compute_psi(model, g);
    let gradu = d.grad_sq_metric(&u, g)?;
    let big_psi = grad_quantity(d, &u, g, consts.b)?;
    let big_phi = laplace_quantity(d, &u, g, &psi, consts.b)?;
    let q = family.q(t)?;
    let h = barrier_h(model, rec, &q);
    let qt = q_tilde(model, g)?;
    let rminus = qt.map(f64::abs).masked_sup(&masks.delta);
    let et = t.exp();
    let min_exp = et * (qt.inf() + DIM_N);
    let schwarz = psi.zip_map(&u, |p, uv| p.ln() - consts.a * uv).sup();
    let (lo, hi) = model.shen_ratio_range();
    let row = DiagnosticsRecord {
        t,
        eps: model.eps(),
        sup_phi: rec.state.phi.sup(),
        inf_phi: rec.state.phi.inf(),
        sup_dphi: rec.dphi.sup(),
        inf_dphi: rec.dphi.inf(),
        sup_u: u.sup(),
        inf_u: u.inf(),
        sup_psi: psi.sup(),
        sup_gradu: gradu.sup(),
        sup_psi_grad: big_psi.sup(),
        sup_phi_lap: big_phi.sup(),
        inf_h: h.inf(),
        masked_sup_rminus: rminus,
        min_q_tilde: qt.inf(),
        min_exp_monotone: min_exp,
        max_decreasing: decreasing_composite(model, rec).sup(),
        sup_schwarz: schwarz,
        identity_residual: identity_residual(model, rec, &masks.adjacent)?,
        volume: d.integrate(g),
        gamma_measured: model.gamma(),
        shen_ratio_min: lo,
        shen_ratio_max: hi,
        comparison_c: model.comparison_constant(t),
        barrier_b: consts.b,
        schwarz_a: consts.a,
    };
    if !row.is_finite() {
        return Err(Error::NonFinite("diagnostics record"));
    }
    Ok(row)
}

pub fn diagnose_series(
    model: &ConeModel,
    records: &[Record],
    family: &BarrierFamily,
    consts: BarrierConstants,
    masks: &Masks,
) -> Result<Vec<DiagnosticsRecord>> {
    records
        .iter()
        .map(|r| diagnose_record(model, r, family, consts, masks))
        .collect()
}

/// Outcome of a monotonicity or bound check over a series.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub passed: bool,
    /// Largest violation found (0 when none).
    pub worst: f64,
    /// Index of the first violating record pair or record.
    pub first_violation: Option<usize>,
}

impl CheckReport {
    fn from_violations(v: impl Iterator<Item = (usize, f64)>) -> Self {
        let mut worst: f64 = 0.0;
        let mut first = None;
        for (i, x) in v {
            if x > 0.0 {
                first.get_or_insert(i);
                worst = worst.max(x);
            }
        }
        CheckReport {
            passed: first.is_none(),
            worst,
            first_violation: first,
        }
    }
}

/// `min e^t(Q̃+n)` non-decreasing between consecutive records.
pub fn check_lower_monotone(series: &[DiagnosticsRecord]) -> CheckReport {
    CheckReport::from_violations(series.windows(2).enumerate().map(|(i, w)| {
        let (a, b) = (w[0].min_exp_monotone, w[1].min_exp_monotone);
        (i, a - b - MONOTONE_TOL * (1.0 + a.abs()))
    }))
}

/// `Q̃(t) ≥ -n + e^{-t}(n + inf Q̃(0))` at every record.
pub fn check_lower_bound(series: &[DiagnosticsRecord]) -> CheckReport {
    let Some(first) = series.first() else {
        return CheckReport::from_violations(std::iter::empty());
    };
    let q0 = first.min_q_tilde;
    CheckReport::from_violations(series.iter().enumerate().map(|(i, r)| {
        let bound = -DIM_N + (-r.t).exp() * (DIM_N + q0);
        (i, bound - r.min_q_tilde - MONOTONE_TOL * (1.0 + bound.abs()))
    }))
}

/// The composite of [`decreasing_composite`] is non-increasing and at most 0.
pub fn check_decreasing(series: &[DiagnosticsRecord]) -> CheckReport {
    let steps = series.windows(2).enumerate().map(|(i, w)| {
        let (a, b) = (w[0].max_decreasing, w[1].max_decreasing);
        (i, b - a - MONOTONE_TOL * (1.0 + a.abs()))
    });
    let tops = series
        .iter()
        .enumerate()
        .map(|(i, r)| (i, r.max_decreasing - MONOTONE_TOL));
    CheckReport::from_violations(steps.chain(tops))
}

/// Curvature-identity residual within tolerance at every record.
pub fn check_identity(series: &[DiagnosticsRecord]) -> CheckReport {
    CheckReport::from_violations(
        series
            .iter()
            .enumerate()
            .map(|(i, r)| (i, r.identity_residual - IDENTITY_TOL)),
    )
}

/// Schwarz-lemma echo: `sup_t sup(log ψ - Au)`, the record attaining it, and the
/// maximum-principle bound `max(S(0), log(sup ψ) - A inf u)` it must respect.
#[derive(Debug, Clone, PartialEq)]
pub struct SchwarzReport {
    pub sup: f64,
    pub argmax_record: usize,
    pub bound: f64,
    pub passed: bool,
}

pub fn schwarz_witness(series: &[DiagnosticsRecord], a: f64) -> SchwarzReport {
    let mut sup = f64::NEG_INFINITY;
    let mut arg = 0;
    for (i, r) in series.iter().enumerate() {
        if r.sup_schwarz > sup {
            sup = r.sup_schwarz;
            arg = i;
        }
    }
    let sup_psi = series.iter().map(|r| r.sup_psi).fold(f64::NEG_INFINITY, f64::max);
    let inf_u = series.iter().map(|r| r.inf_u).fold(f64::INFINITY, f64::min);
    let s0 = series.first().map_or(f64::NEG_INFINITY, |r| r.sup_schwarz);
    let bound = s0.max(sup_psi.ln() - a * inf_u);
    SchwarzReport {
        sup,
        argmax_record: arg,
        bound,
        passed: sup <= bound + MONOTONE_TOL,
    }
}

/// Ladder-level constants, measured per rung.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundLedger {
    pub eps: Vec<f64>,
    /// `(name, value per rung)`.
    pub quantities: Vec<(&'static str, Vec<f64>)>,
}

pub const LEDGER_QUANTITIES: [&str; 12] = [
    "sup_abs_phi",
    "sup_abs_dphi",
    "sup_psi",
    "sup_Psi",
    "sup_Phi",
    "neg_inf_H",
    "masked_sup_Rminus",
    "comparison_C",
    "density_C",
    "inv_gamma",
    "neg_inf_Qtilde0",
    "theta_lower_C",
];

/// Names of the quantities covered by the 20% ladder-uniformity criterion.
pub const UNIFORMITY_QUANTITIES: [&str; 7] = [
    "sup_abs_phi",
    "sup_abs_dphi",
    "sup_psi",
    "sup_Psi",
    "sup_Phi",
    "neg_inf_H",
    "masked_sup_Rminus",
];

fn fold_max<'a>(s: &'a [DiagnosticsRecord], f: impl Fn(&DiagnosticsRecord) -> f64 + 'a) -> f64 {
    s.iter().map(f).fold(f64::NEG_INFINITY, f64::max)
}

/// `max(-Θ_ε / ω̂_∞)`, the constant in `Θ_ε ≥ -C ω̂_∞`.
pub fn theta_lower_constant(model: &ConeModel) -> f64 {
    model
        .theta_field()
        .zip_map(model.geometry().omega_hat_field(), |t, h| -t / h)
        .sup()
}

impl BoundLedger {
    pub fn build(models: &[&ConeModel], series: &[&[DiagnosticsRecord]]) -> Self {
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); LEDGER_QUANTITIES.len()];
        let mut eps = Vec::new();
        for (m, s) in models.iter().zip(series) {
            eps.push(m.eps());
            let vals = [
                fold_max(s, |r| r.sup_phi.abs().max(r.inf_phi.abs())),
                fold_max(s, |r| r.sup_dphi.abs().max(r.inf_dphi.abs())),
                fold_max(s, |r| r.sup_psi),
                fold_max(s, |r| r.sup_psi_grad),
                fold_max(s, |r| r.sup_phi_lap),
                fold_max(s, |r| -r.inf_h),
                fold_max(s, |r| r.masked_sup_rminus),
                fold_max(s, |r| r.comparison_c),
                fold_max(s, |r| r.shen_ratio_max.max(1.0 / r.shen_ratio_min)),
                fold_max(s, |r| 1.0 / r.gamma_measured),
                s.first().map_or(f64::NAN, |r| -r.min_q_tilde),
                theta_lower_constant(m),
            ];
            for (c, v) in cols.iter_mut().zip(vals) {
                c.push(v);
            }
        }
        BoundLedger {
            eps,
            quantities: LEDGER_QUANTITIES.iter().copied().zip(cols).collect(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.quantities
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| v.as_slice())
    }

    /// Relative change `|c_{i+1} - c_i| / |c_i|` between successive rungs.
    pub fn drifts(&self, name: &str) -> Vec<f64> {
        self.get(name)
            .map(|v| v.windows(2).map(|w| relative_change(w[0], w[1])).collect())
            .unwrap_or_default()
    }
}

pub fn relative_change(a: f64, b: f64) -> f64 {
    (b - a).abs() / a.abs().max(1e-300)
}

/// `∫ f Θ_ε` against `2π(1-β) Σ f(p_j)` for each rung.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakConvergence {
    pub eps: Vec<f64>,
    pub integrals: Vec<f64>,
    pub target: f64,
    pub errors: Vec<f64>,
    /// `log2(e_i / e_{i+1})` between successive rungs.
    pub orders: Vec<f64>,
}

pub fn weak_convergence_test<F: Fn(f64, f64) -> f64>(models: &[&ConeModel], f: F) -> WeakConvergence {
    let first = models[0];
    let domain = first.domain();
    let field = domain.sample(&f);
    let beta = first.beta();
    let target = 2.0
        * std::f64::consts::PI
        * (1.0 - beta)
        * first
            .geometry()
            .divisor()
            .points()
            .iter()
            .map(|&p| {
                let (x, y) = domain.to_lattice(p);
                f(x.rem_euclid(1.0), y.rem_euclid(1.0))
            })
            .sum::<f64>();
    let mut eps = Vec::new();
    let mut integrals = Vec::new();
    for m in models {
        let w = Density11::new(m.theta_field().zip_map(&field, |a, b| a * b));
        eps.push(m.eps());
        integrals.push(m.domain().integrate(&w));
    }
    let errors: Vec<f64> = integrals.iter().map(|v| (v - target).abs()).collect();
    let orders = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    WeakConvergence {
        eps,
        integrals,
        target,
        errors,
        orders,
    }
}

#[cfg(test)]
mod tests;
