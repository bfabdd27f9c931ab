use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn feec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_feec")).args(args).output().expect("binary runs")
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path
}

const TAIL: &str = "[pair]\npair_id = 1\nr = 1\n[mesh]\nm_list = [2, 4]\n";

#[test]
fn convergence_writes_csv_and_markdown() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("paper3d-1form.toml");
    let out = feec(&["--out-dir", dir.path().to_str().unwrap(), "convergence", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}{}", stdout(&out), stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("paper3d-1form.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "m,h,N,err_sigma,rate_sigma,err_dsigma,rate_dsigma,err_u,rate_u,err_du,rate_du");
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[1].split(',').count(), 11);
    let md = std::fs::read_to_string(dir.path().join("paper3d-1form.md")).unwrap();
    assert!(md.contains("| verdict |"));
    assert!(stdout(&out).contains("| 8 |"));
}

#[test]
fn preset_term_is_applied() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("paper3d-1form-l4.toml");
    let out = feec(&["--out-dir", dir.path().to_str().unwrap(), "convergence", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}{}", stdout(&out), stderr(&out));
    assert!(stdout(&out).contains("terms l4"));
}

#[test]
fn custom_coefficient_config_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("square2d-custom-l5.toml");
    let out = feec(&["--out-dir", dir.path().to_str().unwrap(), "convergence", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}{}", stdout(&out), stderr(&out));
    assert!(dir.path().join("square2d-1form-pair3-r1.csv").exists());
}

#[test]
fn malformed_expression_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!("[problem]\nname = \"square2d-1form\"\n[terms]\nl5 = [[\"sin(pi*w)\", \"0\"], [\"0\", \"1\"]]\n{TAIL}"),
    );
    let out = feec(&["convergence", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("[terms] l5[0][0]") && err.contains("`w`"), "{err}");
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (format!("[problem]\nname = \"square2d-1form\"\n[terms]\nl2 = [[\"1\"]]\n{TAIL}"), "[terms] l2"),
        (format!("[problem]\nname = \"square2d-1form\"\n[terms]\nl4 = [[\"1\", \"0\"]]\n{TAIL}"), "[terms] l4"),
        (format!("[problem]\nname = \"nope\"\n{TAIL}"), "[problem] name"),
        ("[problem]\nname = \"square2d-1form\"\n[pair]\npair_id = 5\nr = 1\n[mesh]\nm_list = [2]\n".into(), "[pair] pair_id"),
        ("[problem]\nname = \"square2d-1form\"\n[pair]\npair_id = 1\nr = 1\n[mesh]\nm_list = []\n".into(), "[mesh] m_list"),
    ];
    for (body, want) in cases {
        let cfg = write_config(dir.path(), &body);
        let out = feec(&["convergence", cfg.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{body}");
        assert!(stderr(&out).contains(want), "{}", stderr(&out));
    }
    let out = feec(&["convergence", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn properties_selectors() {
    let out = feec(&["properties", "mesh"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.lines().filter(|l| l.starts_with("PASS mesh ")).count() >= 3);
    assert!(text.contains("SUMMARY mesh checks="));
    assert!(!text.contains("FAIL"));

    let out = feec(&["--seed", "9", "properties", "perturbed"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("/adjoint"));

    assert_eq!(feec(&["properties", "bogus"]).status.code(), Some(2));
}

#[test]
fn infsup_is_deterministic_and_stable() {
    let cfg = config("infsup-square2d.toml");
    let a = feec(&["infsup", cfg.to_str().unwrap()]);
    let b = feec(&["infsup", cfg.to_str().unwrap()]);
    assert_eq!(a.status.code(), Some(0), "{}", stdout(&a));
    assert_eq!(stdout(&a), stdout(&b));
    assert_eq!(stdout(&a).lines().filter(|l| l.starts_with("m=")).count(), 4);
    assert!(stdout(&a).contains("slope="));
}

#[test]
fn resonance_scan_fails_the_verdict() {
    let cfg = config("resonance-square2d.toml");
    let out = feec(&["infsup", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", stdout(&out));
    assert!(stdout(&out).contains("collapsed"));
}

#[test]
fn tolerance_flag_tightens_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("infsup-square2d.toml");
    let out = feec(&["--tolerance", "0.001", "infsup", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", stdout(&out));
    let cfg = config("square2d-custom-l5.toml");
    let out = feec(&["--tolerance", "0.001", "--out-dir", dir.path().to_str().unwrap(), "convergence", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}
