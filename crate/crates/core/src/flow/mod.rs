//! Time integration of the regularized parabolic Monge–Ampère equation
//!
//! `φ̇ = log(e^{(n-κ)t} (ω_{t,ε} + i∂∂̄φ) / Ω) + (1-β) log(‖S‖²+ε²) - φ - kχ`,
//! `φ(·, 0) = 0`, one run per ε of a ladder.

mod rkc;

use std::sync::Arc;

use crate::cone::{ConeModel, DIM_KAPPA, DIM_N};
use crate::error::{Error, Result};
use crate::torus::{Density11, ScalarField};

use rkc::RkcTableau;

/// RK4 steps closing each record interval of a Chebyshev run.
pub const SETTLE_STEPS: usize = 32;

/// Positivity retries before a step is declared failed.
pub const MAX_RETRIES: usize = 8;

#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    pub phi: ScalarField,
    pub eps: f64,
    /// Density of `ω_{t,ε} + i∂∂̄φ`.
    pub g_phi: Density11,
    pub steps: usize,
}

/// Time stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    /// Classical RK4 under the diffusive CFL limit.
    Rk4,
    /// Second-order Runge–Kutta–Chebyshev with a fixed step and adaptive stage count.
    Rkc,
}

impl std::str::FromStr for Integrator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rk4" => Ok(Integrator::Rk4),
            "rkc" => Ok(Integrator::Rkc),
            other => Err(Error::Config(format!("integrator: unknown scheme {other:?}"))),
        }
    }
}

impl Integrator {
    pub fn name(self) -> &'static str {
        match self {
            Integrator::Rk4 => "rk4",
            Integrator::Rkc => "rkc",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderPlan {
    pub eps_list: Vec<f64>,
    pub t_end: f64,
    pub dt_out: f64,
    pub cfl: f64,
    pub integrator: Integrator,
    /// Step size of the Chebyshev integrator (ignored by RK4).
    pub dt_max: f64,
}

impl LadderPlan {
    pub fn new(eps_list: Vec<f64>, t_end: f64, dt_out: f64, cfl: f64, integrator: Integrator) -> Result<Self> {
        if eps_list.is_empty() {
            return Err(Error::Config("eps_ladder: empty".into()));
        }
        if eps_list.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::Config("eps_ladder: entries must be positive".into()));
        }
        if eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("eps_ladder: must be strictly decreasing".into()));
        }
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::Config(format!("t_end: {t_end} must be positive")));
        }
        if !(dt_out > 0.0 && dt_out <= t_end) {
            return Err(Error::Config(format!("dt_out: {dt_out} must lie in (0, t_end]")));
        }
        if !(cfl > 0.0 && cfl.is_finite()) {
            return Err(Error::CflNotPositive);
        }
        Ok(LadderPlan {
            eps_list,
            t_end,
            dt_out,
            cfl,
            integrator,
            dt_max: (dt_out / 20.0).min(0.005),
        })
    }

    /// `ε₀ 2^{-i}`, `i = 0..=levels`.
    pub fn halving(eps0: f64, levels: usize) -> Vec<f64> {
        (0..=levels).map(|i| eps0 * 0.5f64.powi(i as i32)).collect()
    }

    /// Number of diagnostic records, `⌊T_end/dt_out⌋ + 1`.
    pub fn record_count(&self) -> usize {
        (self.t_end / self.dt_out + 1e-9).floor() as usize + 1
    }

    pub fn record_time(&self, i: usize) -> f64 {
        i as f64 * self.dt_out
    }

    /// Same schedule restricted to one ε.
    pub fn single(&self, eps: f64) -> LadderPlan {
        LadderPlan {
            eps_list: vec![eps],
            ..self.clone()
        }
    }
}

/// The parts of the equation that do not depend on `φ`, assembled once per run.
struct Operator<'a> {
    model: &'a ConeModel,
    /// `(1-β) log(‖S‖²+ε²) - kχ - log Ω` at `t = 0`.
    forcing0: ScalarField,
}

impl<'a> Operator<'a> {
    fn new(model: &'a ConeModel) -> Self {
        Operator {
            model,
            forcing0: model.forcing(0.0),
        }
    }

    fn metric(&self, t: f64, phi: &ScalarField) -> Result<Density11> {
        let mut g = self.model.domain().ddbar_density(phi)?.into_field();
        let a = (-t).exp();
        for ((gv, &o), &h) in g
            .values_mut()
            .iter_mut()
            .zip(self.model.omega0_eps().values())
            .zip(self.model.hat_eps().values())
        {
            *gv += a * o + (1.0 - a) * h;
        }
        let min = g.inf();
        if !(min > 0.0) {
            return Err(Error::MetricDegenerated { t, min });
        }
        Ok(Density11::new(g))
    }

    fn rhs_with(&self, t: f64, phi: &ScalarField, g: &Density11) -> ScalarField {
        let shift = (DIM_N - DIM_KAPPA) * t;
        let vals = g
            .dens()
            .values()
            .iter()
            .zip(&self.forcing0.values()[..])
            .zip(phi.values())
            .map(|((&gv, &f), &p)| gv.ln() + f + shift - p)
            .collect();
        ScalarField::from_vec(phi.n(), vals)
    }

    fn eval(&self, t: f64, phi: &ScalarField) -> Result<(ScalarField, Density11)> {
        let g = self.metric(t, phi)?;
        Ok((self.rhs_with(t, phi, &g), g))
    }

    fn state(&self, t: f64, phi: ScalarField, steps: usize) -> Result<FlowState> {
        let g_phi = self.metric(t, &phi)?;
        Ok(FlowState {
            t,
            phi,
            eps: self.model.eps(),
            g_phi,
            steps,
        })
    }
}

pub fn initial_state(model: &ConeModel) -> Result<FlowState> {
    let g_phi = model.omega_t_eps(0.0)?;
    Ok(FlowState {
        t: 0.0,
        phi: ScalarField::zeros(model.domain().n()),
        eps: model.eps(),
        g_phi,
        steps: 0,
    })
}

/// `φ̇` at the state's time.
pub fn rhs(model: &ConeModel, state: &FlowState) -> Result<ScalarField> {
    let min = state.g_phi.dens().inf();
    if !(min > 0.0) {
        return Err(Error::MetricDegenerated { t: state.t, min });
    }
    Ok(Operator::new(model).rhs_with(state.t, &state.phi, &state.g_phi))
}

/// Diffusive CFL step `cfl · h² · 2 min g_φ`, capped by `dt_out`.
pub fn adaptive_dt(model: &ConeModel, state: &FlowState, cfl: f64, dt_out: f64) -> Result<f64> {
    if !(cfl > 0.0) {
        return Err(Error::CflNotPositive);
    }
    let h = model.domain().spacing();
    Ok((cfl * h * h * 2.0 * state.g_phi.dens().inf()).min(dt_out))
}

fn rk4_once(op: &Operator, state: &FlowState, dt: f64) -> Result<FlowState> {
    let t = state.t;
    let k1 = op.rhs_with(t, &state.phi, &state.g_phi);
    let stage = |k: &ScalarField, c: f64| -> Result<ScalarField> {
        let mut y = state.phi.clone();
        y.axpy(c * dt, k);
        let (r, _) = op.eval(t + c * dt, &y)?;
        Ok(r)
    };
    let k2 = stage(&k1, 0.5)?;
    let k3 = stage(&k2, 0.5)?;
    let k4 = stage(&k3, 1.0)?;
    let mut phi = state.phi.clone();
    for (i, p) in phi.values_mut().iter_mut().enumerate() {
        *p += dt / 6.0
            * (k1.values()[i] + 2.0 * k2.values()[i] + 2.0 * k3.values()[i] + k4.values()[i]);
    }
    op.state(t + dt, phi, state.steps + 1)
}

fn rkc_once(op: &Operator, state: &FlowState, dt: f64) -> Result<FlowState> {
    let domain = op.model.domain();
    let lambda = domain.max_wavenumber_sq() / (4.0 * state.g_phi.dens().inf()) + 1.0;
    let s = rkc::stage_count(dt, lambda);
    let tab = RkcTableau::new(s);
    let t = state.t;
    let y0 = &state.phi;
    let f0 = op.rhs_with(t, y0, &state.g_phi);
    // The recurrence runs on increments y_j - y0 to keep roundoff at the size of the update.
    let mut prev2 = ScalarField::constant(y0.n(), 0.0);
    let mut prev1 = f0.map(|f| tab.mu_tilde1 * dt * f);
    for (j, &(mu, nu, mt, gt)) in tab.stages.iter().enumerate() {
        let mut y = y0.clone();
        y.axpy(1.0, &prev1);
        let (fj, _) = op.eval(t + tab.c[j + 1] * dt, &y)?;
        let vals = (0..y0.len())
            .map(|i| {
                mu * prev1.values()[i]
                    + nu * prev2.values()[i]
                    + mt * dt * fj.values()[i]
                    + gt * dt * f0.values()[i]
            })
            .collect();
        prev2 = std::mem::replace(&mut prev1, ScalarField::from_vec(y0.n(), vals));
    }
    let mut phi = y0.clone();
    phi.axpy(1.0, &prev1);
    op.state(t + dt, phi, state.steps + 1)
}

fn with_retries<F>(state: &FlowState, dt: f64, mut attempt: F) -> Result<(FlowState, f64)>
where
    F: FnMut(&FlowState, f64) -> Result<FlowState>,
{
    let mut h = dt;
    let mut retries = 0;
    loop {
        match attempt(state, h) {
            Ok(next) if next.phi.is_finite() => return Ok((next, h)),
            Ok(_) | Err(Error::MetricDegenerated { .. }) | Err(Error::NonFinite(_)) => {
                if retries == MAX_RETRIES {
                    return Err(Error::StepFailed {
                        t: state.t,
                        dt: h,
                        retries,
                    });
                }
                retries += 1;
                h *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
}

/// One classical RK4 step; on loss of positivity the step is retried with `dt` halved.
pub fn step(model: &ConeModel, state: &FlowState, dt: f64) -> Result<FlowState> {
    let op = Operator::new(model);
    with_retries(state, dt, |s, h| rk4_once(&op, s, h)).map(|(s, _)| s)
}

/// One Runge–Kutta–Chebyshev step with the same retry policy.
pub fn step_rkc(model: &ConeModel, state: &FlowState, dt: f64) -> Result<FlowState> {
    let op = Operator::new(model);
    with_retries(state, dt, |s, h| rkc_once(&op, s, h)).map(|(s, _)| s)
}

/// State and time derivative at a diagnostics time.
#[derive(Debug, Clone)]
pub struct Record {
    pub state: FlowState,
    pub dphi: ScalarField,
}

/// Integrates to `t_end`, handing every record (at `i · dt_out`) to `on_record`.
///
/// Steps are shortened to land exactly on record times. With [`Integrator::Rkc`]
/// the last [`SETTLE_STEPS`] CFL-sized steps before each record are taken with
/// RK4: a long Chebyshev step leaves roundoff in the stiffest modes, and
/// the curvature diagnostics differentiate those modes four times. On failure the
/// records already delivered stay with the caller.
pub fn run_flow<F>(model: &ConeModel, plan: &LadderPlan, mut on_record: F) -> Result<()>
where
    F: FnMut(Record) -> Result<()>,
{
    let op = Operator::new(model);
    let mut state = initial_state(model)?;
    let dphi = op.rhs_with(0.0, &state.phi, &state.g_phi);
    on_record(Record {
        state: state.clone(),
        dphi,
    })?;
    for i in 1..plan.record_count() {
        let target = plan.record_time(i);
        while target - state.t > 1e-12 * target.max(1.0) {
            let remaining = target - state.t;
            let cfl_dt = adaptive_dt(model, &state, plan.cfl, plan.dt_out)?;
            let settle = SETTLE_STEPS as f64 * cfl_dt;
            let chebyshev = plan.integrator == Integrator::Rkc && remaining > settle;
            let (nominal, horizon) = if chebyshev {
                (plan.dt_max, remaining - settle)
            } else {
                (cfl_dt, remaining)
            };
            // Avoid a sliver step right before the record or switch time.
            let dt = if nominal >= horizon {
                horizon
            } else if nominal * 1.5 > horizon {
                0.5 * horizon
            } else {
                nominal
            };
            let (mut next, taken) = if chebyshev {
                with_retries(&state, dt, |s, h| rkc_once(&op, s, h))?
            } else {
                with_retries(&state, dt, |s, h| rk4_once(&op, s, h))?
            };
            if taken == remaining {
                next.t = target;
            }
            state = next;
        }
        let dphi = op.rhs_with(state.t, &state.phi, &state.g_phi);
        on_record(Record {
            state: state.clone(),
            dphi,
        })?;
    }
    Ok(())
}

/// Rebuilds the record at time `t` from a stored potential.
pub fn record_from(model: &ConeModel, t: f64, phi: ScalarField) -> Result<Record> {
    let op = Operator::new(model);
    let state = op.state(t, phi, 0)?;
    let dphi = op.rhs_with(t, &state.phi, &state.g_phi);
    Ok(Record { state, dphi })
}

/// Collects all records of a run.
pub fn run_flow_collect(model: &ConeModel, plan: &LadderPlan) -> Result<Vec<Record>> {
    let mut out = Vec::with_capacity(plan.record_count());
    run_flow(model, plan, |r| {
        out.push(r);
        Ok(())
    })?;
    Ok(out)
}

/// One ladder member: its model and either the full record series or the failure
/// together with the records completed before it.
#[derive(Debug)]
pub struct LadderMember {
    pub model: Arc<ConeModel>,
    pub records: Vec<Record>,
    pub failure: Option<Error>,
}

impl LadderMember {
    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }

    /// Record nearest to time `t`, if the run reached it.
    pub fn at_time(&self, t: f64) -> Option<&Record> {
        self.records
            .iter()
            .min_by(|a, b| (a.state.t - t).abs().total_cmp(&(b.state.t - t).abs()))
            .filter(|r| (r.state.t - t).abs() < 1e-9)
    }
}

/// Runs every rung of the plan; `make_model` builds the rung model for each ε.
pub fn run_ladder<M>(plan: &LadderPlan, mut make_model: M) -> Result<Vec<LadderMember>>
where
    M: FnMut(f64) -> Result<ConeModel>,
{
    let mut members = Vec::with_capacity(plan.eps_list.len());
    for &eps in &plan.eps_list {
        let model = Arc::new(make_model(eps)?);
        let mut records = Vec::new();
        let failure = run_flow(&model, plan, |r| {
            records.push(r);
            Ok(())
        })
        .err();
        members.push(LadderMember {
            model,
            records,
            failure,
        });
    }
    Ok(members)
}

/// `‖φ_{ε_i} − φ_{ε_{i+1}}‖∞` on the mask at time `t`, for successive complete rungs.
pub fn masked_distances(members: &[LadderMember], mask: &[bool], t: f64) -> Vec<Option<f64>> {
    members
        .windows(2)
        .map(|w| {
            let a = w[0].at_time(t)?;
            let b = w[1].at_time(t)?;
            Some(
                a.state
                    .phi
                    .zip_map(&b.state.phi, |x, y| (x - y).abs())
                    .masked_sup(mask),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests;
