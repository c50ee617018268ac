use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_shiftdyn"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn cfg(name: &str) -> String {
    configs().join(name).display().to_string()
}

#[test]
fn good_shift_criterion_exits_zero_with_halving_traces() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["criterion", "--config", &cfg("good_shift.json")], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("criterion.json")).unwrap()).unwrap();
    let rows = v["report"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 20);
    for (k, row) in rows.iter().enumerate() {
        let expect = (k + 1) as f64 * 0.5f64.ln();
        assert!((row["forward_log"].as_f64().unwrap() - expect).abs() <= 1e-12);
    }
    assert_eq!(v["report"]["verdict"], "satisfied_to_horizon");
}

#[test]
fn criterion_csv_has_documented_header() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["criterion", "--config", &cfg("good_shift.json"), "--format", "csv"], dir.path());
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(dir.path().join("criterion.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "k,n_k,forward_log,backward_log,invariant");
    assert_eq!(text.lines().count(), 21);
}

#[test]
fn overrides_echo_and_change_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["criterion", "--config", &cfg("good_shift.json"), "--horizon", "5", "--backward-index-convention", "thm13"], dir.path());
    // (1/2)^5 is far above the tolerance: violated.
    assert_eq!(code(&o), 1);
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("criterion.json")).unwrap()).unwrap();
    assert_eq!(v["overrides"]["horizon"], 5);
    assert_eq!(v["overrides"]["backward_index_convention"], "thm13");
    assert_eq!(v["report"]["rows"].as_array().unwrap().len(), 5);
}

#[test]
fn example32_writes_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["example32", "--horizon", "10000"], dir.path());
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("example32.json")).unwrap()).unwrap();
    assert!(v["report"]["certificate"]["min_forward_max_log"].as_f64().unwrap() >= 0.5f64.ln());
    let o = run(&["example32", "--horizon", "10"], dir.path());
    assert_eq!(code(&o), 64);
}

#[test]
fn malformed_config_exits_64_with_line_anchor() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"mode\": \"forward\",\n  \"shift\": 3\n}\n").unwrap();
    let o = run(&["criterion", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 64);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.json:3:"), "{err}");
}

#[test]
fn usage_errors_exit_64() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["orbit", "--bogus"], dir.path())), 64);
    assert_eq!(code(&run(&["orbit"], dir.path())), 64);
    assert_eq!(code(&run(&["experiment", "nope"], dir.path())), 64);
    assert_eq!(code(&run(&["criterion", "--config", "/nonexistent.json"], dir.path())), 64);
}

#[test]
fn unwritable_output_exits_73() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let o = run(&["criterion", "--config", &cfg("good_shift.json")], &blocker.join("sub"));
    assert_eq!(code(&o), 73);
}

#[test]
fn every_example_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, file) in [
        ("criterion", "direct_sum.json"),
        ("criterion", "subspace_criterion.json"),
        ("orbit", "orbit.json"),
        ("density", "density.json"),
        ("witness", "witness.json"),
        ("returnset", "returnset.json"),
    ] {
        for format in ["json", "csv"] {
            let o = run(&[cmd, "--config", &cfg(file), "--format", format], dir.path());
            assert_eq!(code(&o), 0, "{cmd} {file}: {}", String::from_utf8_lossy(&o.stderr));
        }
    }
    let density = std::fs::read_to_string(dir.path().join("density.csv")).unwrap();
    assert_eq!(density.lines().next().unwrap(), "target,best_distance,witness_step,covered");
    assert_eq!(density.lines().count(), 1 + 9);
}

#[test]
fn extraction_incomplete_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["experiment", "criterion_extraction", "--horizon", "0"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn experiment_reports_are_byte_identical_and_auditable() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("experiment_mixing.json");
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let o = run(&["experiment", "mixing", "--seed", "11", "--horizon", "400"], dir.path());
        assert_eq!(code(&o), 0);
        outputs.push(std::fs::read(&path).unwrap());
        std::fs::remove_file(&path).unwrap();
    }
    assert_eq!(outputs[0], outputs[1]);
    let x = outputs.swap_remove(0);
    let v: serde_json::Value = serde_json::from_slice(&x).unwrap();
    let report: shiftdyn::experiments::ExperimentReport = serde_json::from_value(v["report"].clone()).unwrap();
    assert_eq!(report.recompute_verdict(), report.verdict);
    assert_eq!(report.seed, 11);
}

#[test]
fn experiment_config_must_match_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("rolewicz.json");
    let cfg = shiftdyn::experiments::ExperimentConfig::default_for("rolewicz").unwrap();
    std::fs::write(&cfg_path, serde_json::to_vec(&cfg).unwrap()).unwrap();
    let o = run(&["experiment", "mixing", "--config", cfg_path.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 64);
}
