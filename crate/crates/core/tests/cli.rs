use std::fs;
use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_conical-flow");

const SMALL: &str = r#"
tau = [0.0, 1.0]
N = 32
beta = 0.5
k = "auto"
eps_ladder = [0.2, 0.1]
divisor = [[0.25, 0.25], [0.75, 0.5]]
T_end = 0.3
"#;

fn exec(dir: &Path, config: &str, args: &[&str]) -> (i32, String) {
    let path = dir.join("c.toml");
    fs::write(&path, config).unwrap();
    let out = Command::new(BIN)
        .args(&args[..1])
        .arg("--config")
        .arg(&path)
        .args(&args[1..])
        .arg("--quiet")
        .output()
        .unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn manifest_ok(root: &Path) -> bool {
    conical_flow::cli_io::verify_manifest(root).unwrap().is_empty()
}

#[test]
fn run_succeeds_and_diagnose_replays_it() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let (code, err) = exec(dir.path(), SMALL, &["run", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert!(manifest_ok(&out));

    let again = dir.path().join("d");
    let status = Command::new(BIN)
        .arg("diagnose")
        .arg(&out)
        .arg("--out")
        .arg(&again)
        .arg("--quiet")
        .status()
        .unwrap();
    assert!(status.success());
    let a = conical_flow::cli_io::read_series(&out.join("eps_0.2/series.csv")).unwrap();
    let b = conical_flow::cli_io::read_series(&again.join("eps_0.2/series.csv")).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        for (u, v) in x.values().iter().zip(y.values()) {
            assert!((u - v).abs() <= 1e-12 * (1.0 + u.abs()), "{u} vs {v}");
        }
    }
}

#[test]
fn bad_configs_exit_2() {
    let cases = [
        SMALL.replace("beta = 0.5", "beta = 1.5"),
        SMALL.replace("[0.75, 0.5]", "[0.25, 0.25]"),
        format!("{SMALL}colour = 3\n"),
        SMALL.replace("N = 32", ""),
        SMALL.replace("k = \"auto\"", "k = \"big\""),
    ];
    for text in cases {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("r");
        let (code, err) = exec(dir.path(), &text, &["run", "--out", out.to_str().unwrap()]);
        assert_eq!(code, 2, "{text}\n{err}");
        assert!(err.starts_with("error:"));
        assert!(!out.join("MANIFEST").exists());
    }
}

#[test]
fn blown_up_run_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let text = SMALL.replace("k = \"auto\"", "k = 50.0");
    let (code, _) = exec(dir.path(), &text, &["run", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 3);
    assert!(!out.join("MANIFEST").exists());
}

#[test]
fn failing_ladder_exits_4_and_keeps_partials() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("l");
    let text = format!("{SMALL}integrator = \"rk4\"\ncfl = 500.0\n");
    let (code, err) = exec(dir.path(), &text, &["ladder", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 4, "{err}");
    let partial = fs::read_dir(out.join("eps_0.2"))
        .unwrap()
        .any(|e| e.unwrap().file_name().to_string_lossy().ends_with(".partial"));
    assert!(partial);
    assert!(manifest_ok(&out));
}

#[test]
fn chi_table_for_beta_one_is_the_identity() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(BIN)
        .args(["chi-table", "--beta", "1", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let text = fs::read_to_string(dir.path().join("chi_table.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("s,chi,s_pow_beta"));
    let mut rows = 0;
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(v[1], v[0]);
        assert_eq!(v[2], v[0]);
        rows += 1;
    }
    assert_eq!(rows, 101);
    assert!(manifest_ok(dir.path()));
}
