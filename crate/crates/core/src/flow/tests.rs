use super::*;
use crate::cone::{suggest_k, ConeGeometry, DivisorSpec};
use crate::torus::TorusDomain;
use num_complex::Complex64;

fn geometry(n: usize, a0: f64) -> Arc<ConeGeometry> {
    let domain = TorusDomain::new(Complex64::new(0.0, 1.0), n).unwrap();
    let divisor = DivisorSpec::new(
        vec![Complex64::new(0.25, 0.25), Complex64::new(0.75, 0.5)],
        0.5,
    )
    .unwrap();
    Arc::new(ConeGeometry::build(domain, divisor, a0, None).unwrap())
}

fn model(n: usize, eps: f64) -> ConeModel {
    let g = geometry(n, 1.0);
    let k = suggest_k(&g, &[eps]).unwrap().sufficient;
    ConeModel::build(g, k, eps).unwrap()
}

fn plan(t_end: f64, integrator: Integrator) -> LadderPlan {
    LadderPlan::new(vec![0.2], t_end, 0.1, 0.2, integrator).unwrap()
}

#[test]
fn initial_state_and_derivative() {
    let m = model(32, 0.2);
    let s = initial_state(&m).unwrap();
    assert!(s.phi.values().iter().all(|&p| p == 0.0));
    let d = m.domain();
    let vol = d.integrate(&s.g_phi);
    let v0 = d.integrate(&m.geometry().omega0());
    assert!((vol - v0).abs() < 1e-12 * v0);
    let dphi = rhs(&m, &s).unwrap();
    let e2 = 0.04;
    for i in 0..d.len() {
        let o = m.omega0_eps().values()[i];
        let sn = m.geometry().s2().values()[i];
        let om = m.geometry().volume_form_field().values()[i];
        let expect = (o * (sn + e2).powf(0.5) / om).ln() - m.k() * m.chi().values()[i];
        assert!((dphi.values()[i] - expect).abs() < 1e-12);
    }
}

#[test]
fn rhs_shifts_by_constant() {
    let m = model(32, 0.2);
    let mut s = initial_state(&m).unwrap();
    s.phi = m.domain().sample(|x, y| 0.01 * (2.0 * std::f64::consts::PI * (x + y)).cos());
    s.g_phi = Operator::new(&m).metric(0.0, &s.phi).unwrap();
    let base = rhs(&m, &s).unwrap();
    s.phi.add_scalar(0.7);
    let shifted = rhs(&m, &s).unwrap();
    for (a, b) in base.values().iter().zip(shifted.values()) {
        assert!((a - 0.7 - b).abs() < 1e-12);
    }
}

#[test]
fn cfl_step_scaling() {
    // k = 0 and no twist: ω_{0,ε} is the constant a0, so min g is grid independent.
    let coarse = ConeModel::build(geometry(32, 1.0), 0.0, 0.2).unwrap();
    let fine = ConeModel::build(geometry(64, 1.0), 0.0, 0.2).unwrap();
    let dc = adaptive_dt(&coarse, &initial_state(&coarse).unwrap(), 0.2, 1.0).unwrap();
    let df = adaptive_dt(&fine, &initial_state(&fine).unwrap(), 0.2, 1.0).unwrap();
    assert!((dc / df - 4.0).abs() < 1e-12);

    let mut s = initial_state(&coarse).unwrap();
    let halved = s.g_phi.dens().map(|g| 0.5 * g);
    s.g_phi = Density11::new(halved);
    let dh = adaptive_dt(&coarse, &s, 0.2, 1.0).unwrap();
    assert!((dc / dh - 2.0).abs() < 1e-12);
    assert!(matches!(
        adaptive_dt(&coarse, &s, 0.0, 1.0),
        Err(Error::CflNotPositive)
    ));
    assert!(adaptive_dt(&coarse, &s, 1e6, 0.1).unwrap() == 0.1);
}

#[test]
fn one_step_preserves_cohomology_and_is_consistent() {
    let m = model(32, 0.2);
    let s0 = initial_state(&m).unwrap();
    let d = m.domain();
    let dphi = rhs(&m, &s0).unwrap();
    let dt = adaptive_dt(&m, &s0, 0.2, 0.1).unwrap();
    let s1 = step(&m, &s0, dt).unwrap();
    let expect = d.integrate(&m.omega_t_eps(s1.t).unwrap());
    assert!((d.integrate(&s1.g_phi) - expect).abs() < 1e-8);
    assert_eq!(s1.steps, 1);

    let mut errs = Vec::new();
    for &h in &[1e-4, 5e-5] {
        let s = step(&m, &s0, h).unwrap();
        let fd = s.phi.zip_map(&s0.phi, |a, b| (a - b) / h);
        errs.push(fd.max_abs_diff(&dphi));
    }
    assert!(errs[1] < 0.6 * errs[0] && errs[0] < 1e-2, "{errs:?}");
}

#[test]
fn rkc_matches_rk4_on_short_horizon() {
    let m = model(32, 0.2);
    let a = run_flow_collect(&m, &plan(0.3, Integrator::Rk4)).unwrap();
    let b = run_flow_collect(&m, &plan(0.3, Integrator::Rkc)).unwrap();
    assert_eq!(a.len(), 4);
    assert_eq!(b.len(), 4);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.state.t, y.state.t);
        let diff = x.state.phi.max_abs_diff(&y.state.phi);
        assert!(diff < 1e-5, "t={} diff={diff}", x.state.t);
    }
}

#[test]
fn rkc_is_second_order_in_time() {
    let m = model(32, 0.2);
    let s0 = initial_state(&m).unwrap();
    let reference = {
        let mut s = s0.clone();
        let h = adaptive_dt(&m, &s, 0.2, 0.1).unwrap();
        let n = (0.1 / h).ceil() as usize;
        for _ in 0..n {
            s = step(&m, &s, 0.1 / n as f64).unwrap();
        }
        s
    };
    let mut errs = Vec::new();
    for &n in &[2usize, 4] {
        let mut s = s0.clone();
        for _ in 0..n {
            s = step_rkc(&m, &s, 0.1 / n as f64).unwrap();
        }
        errs.push(s.phi.max_abs_diff(&reference.phi));
    }
    assert!(errs[1] < 0.35 * errs[0], "{errs:?}");
}

#[test]
fn flat_flow_settles_and_volume_follows_cohomology() {
    let g = geometry(32, 1.0);
    let m = ConeModel::build(g.clone(), 0.0, 0.2).unwrap();
    let p = LadderPlan::new(vec![0.2], 8.0, 0.1, 0.2, Integrator::Rkc).unwrap();
    let recs = run_flow_collect(&m, &p).unwrap();
    assert_eq!(recs.len(), 81);
    let d = m.domain();
    let v0 = d.integrate(&g.omega0());
    let vinf = d.integrate(&g.omega_hat());
    for r in &recs {
        let t = r.state.t;
        let expect = (-t).exp() * v0 + (1.0 - (-t).exp()) * vinf;
        assert!((d.integrate(&r.state.g_phi) - expect).abs() <= 1e-6 * expect);
        assert!(r.state.g_phi.dens().inf() > 0.0);
    }
    assert!(recs.last().unwrap().dphi.sup_abs() < 1e-2);
}

#[test]
fn single_rung_ladder_equals_run() {
    let m = model(32, 0.2);
    let p = plan(0.2, Integrator::Rkc);
    let direct = run_flow_collect(&m, &p).unwrap();
    let ladder = run_ladder(&p, |_| Ok(m.clone())).unwrap();
    assert_eq!(ladder.len(), 1);
    assert!(ladder[0].is_complete());
    for (a, b) in direct.iter().zip(&ladder[0].records) {
        assert_eq!(a.state.phi.values(), b.state.phi.values());
        assert_eq!(a.dphi.values(), b.dphi.values());
    }
}

#[test]
fn plan_validation() {
    assert!(LadderPlan::new(vec![0.1, 0.2], 1.0, 0.1, 0.2, Integrator::Rk4).is_err());
    assert!(LadderPlan::new(vec![0.1, -0.05], 1.0, 0.1, 0.2, Integrator::Rk4).is_err());
    assert!(matches!(
        LadderPlan::new(vec![0.1], 1.0, 0.1, 0.0, Integrator::Rk4),
        Err(Error::CflNotPositive)
    ));
    let p = LadderPlan::new(vec![0.1], 8.0, 0.1, 0.2, Integrator::Rk4).unwrap();
    assert_eq!(p.record_count(), 81);
    assert_eq!(LadderPlan::halving(0.2, 3), vec![0.2, 0.1, 0.05, 0.025]);
}
