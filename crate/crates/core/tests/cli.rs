use std::fs;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_irs-swipt");

fn small_config(dir: &std::path::Path) -> std::path::PathBuf {
    let path = dir.join("small.toml");
    fs::write(&path, "num_users = 2\nnum_antennas = 3\nnum_elements = 2\nsinr_threshold = 1.0\nenergy_threshold = 1e-5\n").unwrap();
    path
}

#[test]
fn run_writes_trace_and_solution_that_check_accepts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    let status = Command::new(BIN)
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--seed", "4", "--algorithms", "JDBPR_OPT,NO_IRS", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&status.stdout);
    assert!(status.status.success(), "{stdout}\n{}", String::from_utf8_lossy(&status.stderr));
    assert!(stdout.contains("JDBPR_OPT draw 0"));
    assert!(stdout.contains("feasible true"));

    let trace = fs::read_to_string(out.join("trace_jdbpr_opt_0.csv")).unwrap();
    assert!(trace.lines().next().unwrap().starts_with("r,"));
    let solution = out.join("solution_no_irs_0.json");
    let check = Command::new(BIN).arg("check").arg(&solution).output().unwrap();
    assert!(check.status.success(), "{}", String::from_utf8_lossy(&check.stdout));

    // a tampered solution must be rejected with the infeasible exit code
    let mut json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&solution).unwrap()).unwrap();
    for b in json["beams"].as_array_mut().unwrap() {
        for z in b.as_array_mut().unwrap() {
            z[0] = serde_json::json!(z[0].as_f64().unwrap() * 0.1);
            z[1] = serde_json::json!(z[1].as_f64().unwrap() * 0.1);
        }
    }
    let bad = dir.path().join("bad.json");
    fs::write(&bad, serde_json::to_string(&json).unwrap()).unwrap();
    let check = Command::new(BIN).arg("check").arg(&bad).output().unwrap();
    assert_eq!(check.status.code(), Some(1));
}

#[test]
fn sweep_writes_results_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    small_config(dir.path());
    let spec = dir.path().join("sweep.toml");
    fs::write(&spec, "parameter = \"gamma_db\"\nvalues = [0.0, 3.0]\nalgorithms = [\"JDBPR_OPT\"]\nnum_draws = 2\nseed = 8\nbase_config = \"small.toml\"\n").unwrap();
    let out = dir.path().join("sweep");
    let res = Command::new(BIN).arg("sweep").arg(&spec).arg("--out").arg(&out).output().unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["aggregates"].as_array().unwrap().len(), 2);
}

#[test]
fn bad_input_exits_with_error_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "num_users = 2\nnot_a_field = 3\n").unwrap();
    let res = Command::new(BIN).args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(res.status.code(), Some(2));
    let res = Command::new(BIN).args(["run", "--algorithms", "BEST"]).output().unwrap();
    assert!(!res.status.success());
}
