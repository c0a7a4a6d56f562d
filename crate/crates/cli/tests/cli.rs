use std::path::Path;
use std::process::{Command, Output};

use charflow::scenario::ReportDocument;

fn charflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_charflow"))
        .args(args)
        .env("CHARFLOW_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

const TORUS_SCENARIO: &str = r#"
tasks = ["orbits", "ergodicity", "lk"]
[model]
kind = "t3_contact"
[quadrature]
scheme = "grid"
resolution = 12
[ergodicity]
horizons = [10.0, 20.0, 40.0]
space_resolution = 8
[orbits]
seeds = 4
"#;

#[test]
fn lk_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("lk");
    let o = charflow(&["lk", "t3_contact", "--resolution", "12", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("-248.05"), "{stdout}");
    let r = ReportDocument::from_json(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(r.schema_version, 1);
    assert!(r.checks_passed());
}

#[test]
fn bad_model_and_config_exit_2() {
    let o = charflow(&["lk", "magnetic_torus(-1)"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("epsilon must be positive"), "{}", stderr(&o));
    let o = charflow(&["lk", "klein_bottle"]);
    assert_eq!(code(&o), 2);

    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "[modle]\nkind = \"t3_contact\"\n");
    let o = charflow(&["scenario", &cfg]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("did you mean `model`"), "{}", stderr(&o));
}

#[test]
fn task_failure_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    // the diagnostic needs three horizons
    let cfg = write_config(
        dir.path(),
        "two.toml",
        "tasks = [\"ergodicity\"]\n[model]\nkind = \"t3_contact\"\n[ergodicity]\nhorizons = [10.0, 20.0]\n",
    );
    let out = dir.path().join("out");
    let o = charflow(&["scenario", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let r = ReportDocument::from_json(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(r.ergodicity.unwrap().failed());
}

#[test]
fn scenario_outputs_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "t3.toml", TORUS_SCENARIO);
    let mut reports = Vec::new();
    let out = dir.path().join("out");
    for _ in 0..2 {
        let o = charflow(&[
            "scenario",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--format",
            "json,csv,plotdata",
            "--normalize-timings",
            "--seed",
            "3",
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let csv = std::fs::read_to_string(out.join("orbits.csv")).unwrap();
        assert!(csv.starts_with("id,period,action,residual\n"), "{csv}");
        assert_eq!(csv.lines().count(), 2);
        let dat = std::fs::read_to_string(out.join("ue_curve.dat")).unwrap();
        let mut lines = dat.lines();
        assert_eq!(lines.next(), Some("# horizon max_deviation"));
        let horizons: Vec<f64> = lines.map(|l| l.split_whitespace().next().unwrap().parse().unwrap()).collect();
        assert_eq!(horizons, vec![10.0, 20.0, 40.0]);
        reports.push(std::fs::read(out.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let r = ReportDocument::from_json(std::str::from_utf8(&reports[0]).unwrap()).unwrap();
    assert_eq!(r.config.seeds.rng, 3);
    assert!(r.timings.values().all(|t| *t == 0.0));
}

#[test]
fn flow_writes_csv() {
    let o = charflow(&["flow", "sphere", "--start", "1,0,0,0", "--time", "1.0"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    let mut lines = stdout.lines();
    assert_eq!(lines.next(), Some("t,x0,x1,x2,x3,drift"));
    let last: Vec<f64> = stdout.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((last[0] - 1.0).abs() < 1e-12);
    // Hopf flow rotates z₁ at unit speed
    assert!((last[1] - 1f64.cos()).abs() < 1e-6 && (last[2] - 1f64.sin()).abs() < 1e-6, "{last:?}");

    let o = charflow(&["flow", "t3_contact", "--start", "1,2"]);
    assert_eq!(code(&o), 2);
}
