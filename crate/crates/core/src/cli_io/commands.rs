use super::artifacts::{read_series, read_snapshot, ArtifactSet, SnapshotDesc};
use super::config::{KChoice, RunConfig};
use crate::cone::{chi_eval, ConeGeometry, ConeModel};
use crate::elliptic::{max_principle_witness, BarrierFamily};
use crate::estimates::{
    diagnose_record, pilot, scalar_curvature, BarrierConstants, BoundLedger, DiagnosticsRecord,
    Masks, Pilot,
};
use crate::flow::{masked_distances, record_from, run_flow, LadderMember, Record};
use crate::torus::ScalarField;
use crate::{Error, Result};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Exit status for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::OutOfRange(_)
        | Error::InvalidDivisor(_)
        | Error::DegenerateLattice(_)
        | Error::GridTooCoarse(_)
        | Error::TwistNotKahler { .. }
        | Error::CflNotPositive => 2,
        e if e.is_numerical() => 3,
        _ => 1,
    }
}

pub const EXIT_INCOMPLETE: i32 = 4;

/// Command-line overrides shared by the subcommands.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub eps: Option<f64>,
    pub grid: Option<usize>,
    pub quiet: bool,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub out: PathBuf,
    /// Members that ran to `T_end`; all of them for a successful command.
    pub complete: Vec<bool>,
}

impl Outcome {
    pub fn all_complete(&self) -> bool {
        self.complete.iter().all(|&c| c)
    }
}

fn note(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        eprintln!("{}", msg.as_ref());
    }
}

pub fn member_dir(eps: f64) -> PathBuf {
    PathBuf::from(format!("eps_{eps:?}"))
}

/// Applies overrides and freezes `k` to a number. For `single`, the ladder
/// shrinks to the one ε that will run.
pub fn effective_config(cfg: &RunConfig, ov: &Overrides, single: bool) -> Result<RunConfig> {
    let mut eff = cfg.clone();
    if let Some(n) = ov.grid {
        eff.n = n;
    }
    let mut resolve_against = eff.eps_ladder.clone();
    if single {
        let eps = ov.eps.unwrap_or(eff.eps_ladder[0]);
        if !resolve_against.contains(&eps) {
            resolve_against.push(eps);
        }
        eff.eps_ladder = vec![eps];
    } else if let Some(eps) = ov.eps {
        let len = eff.eps_ladder.len();
        eff.eps_ladder = (0..len).map(|i| eps / 2f64.powi(i as i32)).collect();
        resolve_against = eff.eps_ladder.clone();
    }
    eff.validate()?;
    if let KChoice::Named(_) = eff.k {
        let mut probe = eff.clone();
        probe.eps_ladder = resolve_against;
        probe.eps_ladder.sort_by(|a, b| b.total_cmp(a));
        eff.k = KChoice::Value(probe.resolve_k(&*eff.geometry()?)?);
    }
    eff.output = None;
    Ok(eff)
}

fn k_value(cfg: &RunConfig) -> Result<f64> {
    match cfg.k {
        KChoice::Value(k) => Ok(k),
        KChoice::Named(_) => Err(Error::Config("k must be resolved before running".into())),
    }
}

fn simulate(cfg: &RunConfig, geom: &Arc<ConeGeometry>, quiet: bool) -> Result<Vec<LadderMember>> {
    let k = k_value(cfg)?;
    let plan = cfg.plan(cfg.eps_ladder.clone())?;
    let models = cfg
        .eps_ladder
        .iter()
        .map(|&eps| ConeModel::build(geom.clone(), k, eps).map(Arc::new))
        .collect::<Result<Vec<_>>>()?;
    let run_one = |model: &Arc<ConeModel>| {
        let mut records = Vec::new();
        let failure = run_flow(model, &plan, |r| {
            records.push(r);
            Ok(())
        })
        .err();
        note(
            quiet,
            match &failure {
                None => format!("eps = {}: {} records", model.eps(), records.len()),
                Some(e) => format!("eps = {}: stopped after {} records: {e}", model.eps(), records.len()),
            },
        );
        LadderMember {
            model: model.clone(),
            records,
            failure,
        }
    };
    if cfg.deterministic {
        return Ok(models.iter().map(run_one).collect());
    }
    Ok(std::thread::scope(|s| {
        let handles: Vec<_> = models.iter().map(|m| s.spawn(|| run_one(m))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("ladder member thread panicked"))
            .collect()
    }))
}

struct Diagnosed {
    rows: Vec<DiagnosticsRecord>,
    failure: Option<Error>,
}

fn diagnose_member(
    member: &LadderMember,
    cfg: &RunConfig,
    consts: BarrierConstants,
) -> Diagnosed {
    let model = &member.model;
    let mut rows = Vec::with_capacity(member.records.len());
    let family = match BarrierFamily::build(model, cfg.t_end) {
        Ok(f) => f,
        Err(e) => return Diagnosed { rows, failure: Some(e) },
    };
    let masks = Masks::new(model, cfg.delta_mask);
    for rec in &member.records {
        match diagnose_record(model, rec, &family, consts, &masks) {
            Ok(r) => rows.push(r),
            Err(e) => return Diagnosed { rows, failure: Some(e) },
        }
    }
    Diagnosed { rows, failure: None }
}

fn desc(cfg: &RunConfig, field: &str, t: f64, eps: f64) -> SnapshotDesc {
    SnapshotDesc {
        field: field.into(),
        shape: (cfg.n, cfg.n),
        t,
        eps,
        tau: cfg.tau,
        n: cfg.n,
    }
}

fn write_member(
    set: &mut ArtifactSet,
    cfg: &RunConfig,
    member: &LadderMember,
    rows: &[DiagnosticsRecord],
) -> Result<()> {
    let eps = member.model.eps();
    let dir = member_dir(eps);
    set.write_series(&dir.join("series.csv"), rows)?;
    for (i, rec) in member.records.iter().enumerate() {
        let rel = dir.join("snapshots").join(format!("phi_{i:04}.f64"));
        set.write_snapshot(&rel, &desc(cfg, "phi", rec.state.t, eps), &rec.state.phi)?;
    }
    let geom = member.model.geometry();
    let fields = dir.join("fields");
    set.write_snapshot(&fields.join("s2.f64"), &desc(cfg, "s2", 0.0, eps), geom.s2())?;
    set.write_snapshot(
        &fields.join("theta.f64"),
        &desc(cfg, "theta", 0.0, eps),
        member.model.theta_field(),
    )?;
    if let Some(last) = member.records.last() {
        let t = last.state.t;
        set.write_snapshot(
            &fields.join("g_phi.f64"),
            &desc(cfg, "g_phi", t, eps),
            last.state.g_phi.dens(),
        )?;
        let r = scalar_curvature(member.model.domain(), &last.state.g_phi)?;
        set.write_snapshot(&fields.join("scalar_curvature.f64"), &desc(cfg, "scalar_curvature", t, eps), &r)?;
    }
    Ok(())
}

fn ladder_report(ledger: &BoundLedger) -> String {
    let mut out = String::from("quantity,eps,value,drift\n");
    for (name, vals) in &ledger.quantities {
        let drifts = ledger.drifts(name);
        for (i, (eps, v)) in ledger.eps.iter().zip(vals).enumerate() {
            let d = if i == 0 { String::new() } else { format!("{:?}", drifts[i - 1]) };
            let _ = writeln!(out, "{name},{eps:?},{v:?},{d}");
        }
    }
    out
}

fn convergence_report(cfg: &RunConfig, members: &[LadderMember]) -> String {
    let mut out = String::from("t,eps_a,eps_b,masked_distance\n");
    let mask = members[0].model.geometry().mask_beyond(cfg.delta_mask);
    for t in [2.0, 5.0, 8.0].into_iter().filter(|&t| t <= cfg.t_end) {
        for (w, d) in members.windows(2).zip(masked_distances(members, &mask, t)) {
            if let Some(d) = d {
                let _ = writeln!(out, "{t:?},{:?},{:?},{d:?}", w[0].model.eps(), w[1].model.eps());
            }
        }
    }
    out
}

/// Runs, diagnoses and writes every member; also returns the first member failure.
fn pipeline(cfg: &RunConfig, out: &Path, quiet: bool, ladder: bool) -> Result<(Outcome, Option<Error>)> {
    let geom = cfg.geometry()?;
    let mut set = ArtifactSet::new(out)?;
    set.write(Path::new("config.toml"), cfg.to_toml()?.as_bytes())?;
    let members = simulate(cfg, &geom, quiet)?;
    let pilots = members
        .iter()
        .filter(|m| !m.records.is_empty())
        .map(|m| pilot(&m.model, &m.records))
        .collect::<Result<Vec<Pilot>>>()?;
    let consts = BarrierConstants::from_pilots(&pilots);
    note(quiet, format!("B = {}, A = {}", consts.b, consts.a));

    let mut complete = Vec::new();
    let mut series = Vec::new();
    let mut held = Vec::new();
    let mut first_failure = None;
    for m in &members {
        let d = diagnose_member(m, cfg, consts);
        write_member(&mut set, cfg, m, &d.rows)?;
        let ok = m.failure.is_none() && d.failure.is_none();
        if let Some(e) = &d.failure {
            note(quiet, format!("eps = {}: diagnostics stopped: {e}", m.model.eps()));
        }
        if first_failure.is_none() {
            first_failure = d.failure;
        }
        if !ok {
            held.push(member_dir(m.model.eps()));
        }
        complete.push(ok);
        series.push(d.rows);
    }
    if ladder {
        let done: Vec<usize> = (0..members.len()).filter(|&i| complete[i]).collect();
        let models: Vec<&ConeModel> = done.iter().map(|&i| &*members[i].model).collect();
        let rows: Vec<&[DiagnosticsRecord]> = done.iter().map(|&i| series[i].as_slice()).collect();
        let ledger = BoundLedger::build(&models, &rows);
        set.write(Path::new("ladder_report.csv"), ladder_report(&ledger).as_bytes())?;
        set.write(Path::new("convergence.csv"), convergence_report(cfg, &members).as_bytes())?;
    }
    for dir in &held {
        set.hold(dir);
    }
    set.commit()?;
    let failure = members.into_iter().find_map(|m| m.failure).or(first_failure);
    Ok((
        Outcome {
            out: out.to_path_buf(),
            complete,
        },
        failure,
    ))
}

/// One flow at a single ε (`--eps`, else the first rung).
pub fn cmd_run(cfg: &RunConfig, ov: &Overrides, out: &Path) -> Result<Outcome> {
    let eff = effective_config(cfg, ov, true)?;
    match pipeline(&eff, out, ov.quiet, false)? {
        (_, Some(e)) => Err(e),
        (outcome, None) => Ok(outcome),
    }
}

/// The whole ε-ladder plus the ladder report. Incomplete members keep `.partial` files.
pub fn cmd_ladder(cfg: &RunConfig, ov: &Overrides, out: &Path) -> Result<Outcome> {
    let eff = effective_config(cfg, ov, false)?;
    pipeline(&eff, out, ov.quiet, true).map(|(o, _)| o)
}

/// Reference solutions `ξ_{r,ε}` for every rung and `r = 1..=⌊T⌋+2`.
pub fn cmd_elliptic(cfg: &RunConfig, ov: &Overrides, out: &Path) -> Result<Outcome> {
    let eff = effective_config(cfg, ov, false)?;
    let geom = eff.geometry()?;
    let k = k_value(&eff)?;
    let mut set = ArtifactSet::new(out)?;
    set.write(Path::new("config.toml"), eff.to_toml()?.as_bytes())?;
    let mut table =
        String::from("eps,r,iterations,residual_sup,sup_xi,inf_xi,witness_xi,witness_bound\n");
    for &eps in &eff.eps_ladder {
        let model = ConeModel::build(geom.clone(), k, eps)?;
        let family = BarrierFamily::build(&model, eff.t_end)?;
        for sol in &family.solutions {
            let (w, bound) = max_principle_witness(&model, sol);
            let _ = writeln!(
                table,
                "{eps:?},{:?},{},{:?},{:?},{:?},{w:?},{bound:?}",
                sol.r,
                sol.iterations(),
                sol.residual_sup,
                sol.xi.sup(),
                sol.xi.inf()
            );
            let rel = member_dir(eps).join(format!("xi_r{:02}.f64", sol.r as usize));
            set.write_snapshot(&rel, &desc(&eff, "xi", sol.r, eps), &sol.xi)?;
        }
        note(ov.quiet, format!("eps = {eps}: {} solutions", family.solutions.len()));
    }
    set.write(Path::new("elliptic.csv"), table.as_bytes())?;
    set.commit()?;
    Ok(Outcome {
        out: out.to_path_buf(),
        complete: vec![true; eff.eps_ladder.len()],
    })
}

/// `χ` sampled at `s = i/100`, `i = 0..=100`, next to `s^β`.
pub fn chi_table(beta: f64, eps: f64) -> Result<String> {
    let mut out = String::from("s,chi,s_pow_beta\n");
    for i in 0..=100 {
        let s = i as f64 / 100.0;
        let chi = chi_eval(beta, eps, s)?;
        let _ = writeln!(out, "{s:?},{chi:?},{:?}", s.powf(beta));
    }
    Ok(out)
}

pub fn cmd_chi_table(beta: f64, eps: f64, out: &Path) -> Result<Outcome> {
    let mut set = ArtifactSet::new(out)?;
    set.write(Path::new("chi_table.csv"), chi_table(beta, eps)?.as_bytes())?;
    set.commit()?;
    Ok(Outcome {
        out: out.to_path_buf(),
        complete: vec![true],
    })
}

fn snapshot_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == "f64")
                && p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("phi_"))
        })
        .collect();
    paths.sort();
    Ok(paths)
}

/// Recomputes every series row of a finished run from its `φ` snapshots.
///
/// `B` and `A` are taken from the stored series, everything else is rebuilt
/// from the run's frozen config.
pub fn cmd_diagnose(run_dir: &Path, out: &Path, quiet: bool) -> Result<Outcome> {
    if run_dir.canonicalize().ok() == out.canonicalize().ok() {
        return Err(Error::Config("diagnose output must differ from the run directory".into()));
    }
    let cfg = super::config::parse_config(&run_dir.join("config.toml"))?;
    let k = k_value(&cfg)?;
    let geom = cfg.geometry()?;
    let mut set = ArtifactSet::new(out)?;
    let mut complete = Vec::new();
    for &eps in &cfg.eps_ladder {
        let dir = member_dir(eps);
        let stored = read_series(&run_dir.join(&dir).join("series.csv"))?;
        let first = stored
            .first()
            .ok_or_else(|| Error::Artifact(format!("{} has an empty series", dir.display())))?;
        let consts = BarrierConstants {
            b: first.barrier_b,
            a: first.schwarz_a,
        };
        let model = ConeModel::build(geom.clone(), k, eps)?;
        let family = BarrierFamily::build(&model, cfg.t_end)?;
        let masks = Masks::new(&model, cfg.delta_mask);
        let mut rows = Vec::new();
        for path in snapshot_paths(&run_dir.join(&dir).join("snapshots"))? {
            let (d, phi) = read_snapshot(&path)?;
            if d.n != cfg.n || d.eps != eps {
                return Err(Error::Artifact(format!("{} does not match the run", path.display())));
            }
            let rec: Record = record_from(&model, d.t, phi)?;
            rows.push(diagnose_record(&model, &rec, &family, consts, &masks)?);
        }
        note(quiet, format!("eps = {eps}: {} rows", rows.len()));
        set.write_series(&dir.join("series.csv"), &rows)?;
        complete.push(true);
    }
    set.commit()?;
    Ok(Outcome {
        out: out.to_path_buf(),
        complete,
    })
}

/// `φ` snapshots of a run, in record order, for callers that post-process.
pub fn load_phi_series(run_dir: &Path, eps: f64) -> Result<Vec<(f64, ScalarField)>> {
    snapshot_paths(&run_dir.join(member_dir(eps)).join("snapshots"))?
        .iter()
        .map(|p| read_snapshot(p).map(|(d, f)| (d.t, f)))
        .collect()
}
