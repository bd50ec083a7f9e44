use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../../configs/{name}.toml"))
}

fn strata(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_strata"))
        .args(args)
        .env_remove("STRATA_THREADS")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

#[test]
fn critical_uniform_density_is_classical() {
    let o = strata(&["critical", "--config", s(&config("constant"))]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("F_cr = 1.000000\n"), "{}", stdout(&o));
    assert!(stdout(&o).contains("F_N = none"));
}

#[test]
fn critical_unit_gradient_reports_both_thresholds() {
    let o = strata(&["--json", "critical", "--config", s(&config("linear_unit"))]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let pi = std::f64::consts::PI;
    assert!((v["f_n"].as_f64().unwrap() - 2.0 / pi).abs() < 1e-6);
    assert!((v["f_d"].as_f64().unwrap() - 1.0 / pi).abs() < 1e-6);
    assert!(v["f_cr"].as_f64().unwrap() > 1.0);
}

#[test]
fn critical_writes_a_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("crit");
    let o = strata(&["--quiet", "critical", "--config", s(&config("linear")), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    for f in ["manifest.json", "spectrum.json", "phi_cr.csv", "background.csv"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    assert!(!out.join("run.lock").exists());
    // refuses to overwrite
    let again = strata(&["critical", "--config", s(&config("linear")), "--out", s(&out)]);
    assert_eq!(again.status.code(), Some(2));
}

#[test]
fn bad_inputs_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.toml");
    assert_eq!(strata(&["critical", "--config", s(&missing)]).status.code(), Some(2));
    let broken = tmp.path().join("broken.toml");
    std::fs::write(&broken, "[density]\nprofile = \"constant\"\n").unwrap();
    assert_eq!(strata(&["critical", "--config", s(&broken)]).status.code(), Some(2));
    for eps in ["0", "0.2", "-0.01", "NaN"] {
        let o = strata(&["solve", "--config", s(&config("constant")), "--epsilon", eps]);
        assert_eq!(o.status.code(), Some(2), "epsilon {eps}");
    }
    let empty = tmp.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    assert_eq!(strata(&["diagnose", s(&empty)]).status.code(), Some(2));
    assert_eq!(strata(&["export", s(&tmp.path().join("absent"))]).status.code(), Some(2));
}

#[test]
fn errors_are_reported_as_json() {
    let o = strata(&["--json", "solve", "--config", s(&config("constant")), "--epsilon", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let v = json(&o);
    assert_eq!(v["exit_code"], 2);
    assert!(v["error"].as_str().unwrap().contains("--epsilon"));
}

#[test]
fn solve_diagnose_export_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("wave");
    let o = strata(&["--json", "solve", "--config", s(&config("constant")), "--epsilon", "0.01", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert_eq!(v["all_pass"], true);
    assert!(v["F"].as_f64().unwrap() > 1.0);
    assert!(v["residual_norm"].as_f64().unwrap() < 1e-10);

    let d = strata(&["--json", "diagnose", s(&out)]);
    assert_eq!(d.status.code(), Some(0));
    assert_eq!(json(&d)["all_pass"], 1);
    let summary = std::fs::read_to_string(out.join("diagnostics/summary.csv")).unwrap();
    assert!(summary.lines().nth(1).unwrap().starts_with("wave,"));

    let e = strata(&["export", s(&out), "--format", "csv"]);
    assert_eq!(e.status.code(), Some(0));
    let surface = std::fs::read_to_string(out.join("export/wave_surface.csv")).unwrap();
    let mut rows = surface.lines().skip(1).map(|l| {
        let mut it = l.split(',').map(|x| x.parse::<f64>().unwrap());
        (it.next().unwrap(), it.next().unwrap())
    });
    let (x0, eta0) = rows.next().unwrap();
    assert_eq!(x0, 0.0);
    assert!((eta0 - 0.01).abs() < 2e-3, "crest {eta0}");
    assert!(rows.all(|(_, eta)| eta < eta0));
    let j = strata(&["export", s(&out), "--format", "json"]);
    assert_eq!(j.status.code(), Some(0));
    let exported: Value = serde_json::from_slice(&std::fs::read(out.join("export/wave.json")).unwrap()).unwrap();
    assert!(exported["max_surface_pressure"].as_f64().unwrap() < 1e-8);

    // a tampered output is detected before anything is recomputed
    std::fs::write(out.join("wave.csv"), "q,p,w\n").unwrap();
    assert_eq!(strata(&["diagnose", s(&out)]).status.code(), Some(2));
}

#[test]
fn continuation_stops_at_the_point_budget_and_resumes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("branch");
    let cfg = config("constant");
    let o = strata(&["--json", "continue", "--config", s(&cfg), "--out", s(&out), "--max-points", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&o)["status"]["termination_reason"], "user_limit");
    let curve = std::fs::read_to_string(out.join("curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 4);

    let r = strata(&["--quiet", "continue", "--config", s(&cfg), "--out", s(&out), "--max-points", "5", "--resume"]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let resumed = std::fs::read_to_string(out.join("curve.csv")).unwrap();
    assert_eq!(resumed.lines().count(), 6);
    assert!(resumed.starts_with(&curve));
    let straight = tmp.path().join("straight");
    let u = strata(&["--quiet", "continue", "--config", s(&cfg), "--out", s(&straight), "--max-points", "5"]);
    assert_eq!(u.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(straight.join("curve.csv")).unwrap(), resumed);

    // continuing a second time without --resume is refused
    let twice = strata(&["continue", "--config", s(&cfg), "--out", s(&out), "--max-points", "3"]);
    assert_eq!(twice.status.code(), Some(2));

    std::fs::write(out.join("curve.csv"), &curve).unwrap();
    let tampered = strata(&["continue", "--config", s(&cfg), "--out", s(&out), "--max-points", "6", "--resume"]);
    assert_eq!(tampered.status.code(), Some(2));
}

#[test]
fn resume_with_a_different_config_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("branch");
    let cfg = tmp.path().join("run.toml");
    std::fs::copy(config("constant"), &cfg).unwrap();
    let o = strata(&["--quiet", "continue", "--config", s(&cfg), "--out", s(&out), "--max-points", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let mut text = std::fs::read_to_string(&cfg).unwrap();
    text.push_str("\n# edited\n");
    std::fs::write(&cfg, text).unwrap();
    let r = strata(&["continue", "--config", s(&cfg), "--out", s(&out), "--max-points", "3", "--resume"]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn identical_runs_write_identical_data() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let out = tmp.path().join(name);
        let o = strata(&["--quiet", "--threads", threads, "continue", "--config", s(&config("linear")), "--out", s(&out), "--max-points", "3"]);
        assert_eq!(o.status.code(), Some(0));
        out
    };
    let a = run("a", "1");
    let b = run("b", "4");
    for f in ["curve.csv", "curve.json", "points/point_00002.csv", "points/point_00002.json", "spectrum.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn manifest_corpus_seeds_parse() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus/run_manifest");
    for e in std::fs::read_dir(dir).unwrap() {
        let path = e.unwrap().path();
        let m = strata_cli::manifest::RunManifest::parse(&std::fs::read(&path).unwrap());
        assert!(m.is_ok(), "{}: {:?}", path.display(), m.err());
    }
}
