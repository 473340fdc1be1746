use super::*;
use crate::cone::{suggest_k, ConeGeometry, DivisorSpec};
use crate::flow::{initial_state, rhs, run_flow_collect, Integrator, LadderPlan};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::Arc;

fn model(n: usize, eps: f64) -> ConeModel {
    let domain = TorusDomain::new(Complex64::new(0.0, 1.0), n).unwrap();
    let divisor = DivisorSpec::new(
        vec![Complex64::new(0.25, 0.25), Complex64::new(0.75, 0.5)],
        0.5,
    )
    .unwrap();
    let g = Arc::new(ConeGeometry::build(domain, divisor, 1.0, None).unwrap());
    let k = suggest_k(&g, &[0.2, 0.1]).unwrap().sufficient;
    ConeModel::build(g, k, eps).unwrap()
}

fn record_at_zero(m: &ConeModel) -> Record {
    let state = initial_state(m).unwrap();
    let dphi = rhs(m, &state).unwrap();
    Record { state, dphi }
}

#[test]
fn u_at_time_zero_and_under_shift() {
    let m = model(32, 0.2);
    let rec = record_at_zero(&m);
    let u = compute_u(&m, &rec);
    let expect = rec.dphi.zip_map(m.chi(), |d, c| d + m.k() * c);
    assert!(u.max_abs_diff(&expect) == 0.0);

    let mut shifted = rec.clone();
    shifted.state.phi.add_scalar(0.3);
    shifted.dphi = rhs(&m, &shifted.state).unwrap();
    assert!(compute_u(&m, &shifted).max_abs_diff(&u) < 1e-12);
}

#[test]
fn psi_trace_and_scaling() {
    let m = model(32, 0.2);
    let hat = Density11::new(m.geometry().omega_hat_field().clone());
    assert!(compute_psi(&m, &hat).values().iter().all(|&v| (v - 1.0).abs() < 1e-15));
    let g = Density11::new(m.omega0_eps().clone());
    let g2 = Density11::new(m.omega0_eps().map(|v| 2.0 * v));
    let a = compute_psi(&m, &g);
    let b = compute_psi(&m, &g2);
    for (x, y) in a.values().iter().zip(b.values()) {
        assert!((x - 2.0 * y).abs() < 1e-15);
        assert!(*x >= 0.0);
    }
}

#[test]
fn curvature_of_flat_and_single_mode_metrics() {
    let d = TorusDomain::new(Complex64::new(0.0, 1.0), 64).unwrap();
    let flat = Density11::new(ScalarField::constant(64, 2.5));
    assert!(scalar_curvature(&d, &flat).unwrap().sup_abs() < 1e-12);

    // g = e^{-f}, f = a cos(2πx): ¼Δf = -π² a cos(2πx), R = (¼Δf)/g.
    let a = 0.3;
    let g = Density11::new(d.sample(|x, _| (-a * (2.0 * PI * x).cos()).exp()));
    let r = scalar_curvature(&d, &g).unwrap();
    let exact = d.sample(|x, _| -PI * PI * a * (2.0 * PI * x).cos() * (a * (2.0 * PI * x).cos()).exp());
    assert!(r.max_abs_diff(&exact) < 1e-9);
}

#[test]
fn gauss_bonnet() {
    let d = TorusDomain::new(Complex64::new(0.2, 1.1), 64).unwrap();
    let g = Density11::new(d.sample(|x, y| {
        let tp = 2.0 * PI;
        1.0 + 0.4 * (tp * x).sin() * (tp * 2.0 * y).cos() + 0.2 * (tp * (x + y)).cos()
    }));
    let r = scalar_curvature(&d, &g).unwrap();
    let total = d.integrate(&Density11::new(r.zip_map(g.dens(), |a, b| a * b)));
    assert!(total.abs() < 1e-8, "{total}");
}

#[test]
fn gradient_and_laplacian_quantities() {
    let m = model(32, 0.2);
    let d = m.domain();
    let g = Density11::new(m.omega0_eps().clone());
    let psi = compute_psi(&m, &g);
    let c = 0.7;
    let u = ScalarField::constant(32, c);
    let b = 3.0;
    assert!(grad_quantity(d, &u, &g, b).unwrap().sup_abs() == 0.0);
    let phi = laplace_quantity(d, &u, &g, &psi, b).unwrap();
    for (p, s) in phi.values().iter().zip(psi.values()) {
        assert!((p - (b - s) / (b - c)).abs() < 1e-12);
    }
    assert!(matches!(
        grad_quantity(d, &u, &g, 0.5),
        Err(Error::BarrierTooSmall { .. })
    ));

    let wavy = d.sample(|x, y| 0.2 * (2.0 * PI * (x + y)).sin());
    let huge = 1e12;
    assert!(grad_quantity(d, &wavy, &g, huge).unwrap().sup_abs() < 1e-10);
    let phi = laplace_quantity(d, &wavy, &g, &psi, huge).unwrap();
    assert!(phi.values().iter().all(|&v| (v - 1.0).abs() < 1e-10));
}

#[test]
fn identity_holds_along_short_flow() {
    let m = model(32, 0.2);
    let plan = LadderPlan::new(vec![0.2], 0.3, 0.1, 0.2, Integrator::Rkc).unwrap();
    let recs = run_flow_collect(&m, &plan).unwrap();
    let masks = Masks::new(&m, 0.05);
    for rec in &recs {
        let res = identity_residual(&m, rec, &masks.adjacent).unwrap();
        assert!(res < IDENTITY_TOL, "t={} res={res}", rec.state.t);
    }
}

#[test]
fn decreasing_composite_at_time_zero() {
    let m = model(32, 0.2);
    let rec = record_at_zero(&m);
    let c = decreasing_composite(&m, &rec);
    // At t = 0 the composite is -kχ - (n-κ) ≤ 0.
    let expect = m.chi().map(|x| -m.k() * x - (DIM_N - DIM_KAPPA));
    assert!(c.max_abs_diff(&expect) < 1e-12);
    assert!(c.sup() <= 0.0);
}

fn synthetic(ts: &[f64], f: impl Fn(f64) -> (f64, f64, f64)) -> Vec<DiagnosticsRecord> {
    ts.iter()
        .map(|&t| {
            let mut v = [1.0; 26];
            v[0] = t;
            let (mono, dec, qmin) = f(t);
            v[15] = mono;
            v[16] = dec;
            v[14] = qmin;
            v[18] = 0.0;
            DiagnosticsRecord::from_values(&v).unwrap()
        })
        .collect()
}

#[test]
fn series_checks_detect_violations() {
    let ts: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
    let good = synthetic(&ts, |t| (t, -t, -1.0 + (-t).exp() * 0.5));
    assert!(check_lower_monotone(&good).passed);
    assert!(check_decreasing(&good).passed);
    assert!(check_lower_bound(&good).passed);
    assert!(check_identity(&good).passed);

    let bad = synthetic(&ts, |t| (-t, t, -1.0 + (-t).exp() * 0.5 - t));
    let r = check_lower_monotone(&bad);
    assert!(!r.passed && r.first_violation == Some(0));
    assert!(!check_decreasing(&bad).passed);
    assert!(!check_lower_bound(&bad).passed);
}

#[test]
fn schwarz_witness_degenerate_cases() {
    let ts = [0.0, 0.1, 0.2];
    let mut s = synthetic(&ts, |_| (0.0, 0.0, 0.0));
    for r in &mut s {
        r.sup_schwarz = 0.0;
        r.sup_psi = 1.0;
        r.inf_u = 0.0;
    }
    let rep = schwarz_witness(&s, 0.0);
    assert_eq!(rep.sup, 0.0);
    assert!(rep.passed);
}

#[test]
fn weak_convergence_of_twist() {
    let domain = TorusDomain::new(Complex64::new(0.0, 1.0), 128).unwrap();
    let divisor = DivisorSpec::new(
        vec![Complex64::new(0.25, 0.25), Complex64::new(0.75, 0.5)],
        0.5,
    )
    .unwrap();
    let g = Arc::new(ConeGeometry::build(domain, divisor, 1.0, None).unwrap());
    let models: Vec<ConeModel> = [0.2, 0.1, 0.05]
        .iter()
        .map(|&e| ConeModel::build(g.clone(), 0.0, e).unwrap())
        .collect();
    let refs: Vec<&ConeModel> = models.iter().collect();

    let one = weak_convergence_test(&refs, |_, _| 1.0);
    assert!(one.errors.iter().all(|&e| e < 1e-8), "{:?}", one.errors);

    let mode = weak_convergence_test(&refs, |x, y| (2.0 * PI * x).cos() + 0.5 * (2.0 * PI * y).sin());
    for w in mode.errors.windows(2) {
        assert!(w[1] < w[0], "{:?}", mode.errors);
    }

    // Vanishes at both divisor points.
    let away = weak_convergence_test(&refs, |x, y| (2.0 * PI * (x - 0.25)).sin().powi(2) * (2.0 * PI * (y - 0.5)).cos().powi(2) * (2.0 * PI * (x - y)).sin().powi(2));
    assert!(away.target.abs() < 1e-12);
    for w in away.errors.windows(2) {
        assert!(w[1] < w[0], "{:?}", away.errors);
    }
}

#[test]
fn ledger_drifts() {
    let m1 = model(32, 0.2);
    let m2 = model(32, 0.1);
    let s1 = synthetic(&[0.0], |_| (0.0, 0.0, -0.5));
    let s2 = synthetic(&[0.0], |_| (0.0, 0.0, -0.6));
    let ledger = BoundLedger::build(&[&m1, &m2], &[&s1, &s2]);
    assert_eq!(ledger.eps, vec![0.2, 0.1]);
    let d = ledger.drifts("neg_inf_Qtilde0");
    assert!((d[0] - 0.2).abs() < 1e-12);
    assert_eq!(ledger.quantities.len(), LEDGER_QUANTITIES.len());
}
