use std::path::PathBuf;
use std::process::{Command, Output};

fn calabi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_calabi"))
        .args(args)
        .current_dir(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../.."))
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn linear_twist_verify_passes_from_threshold_three() {
    let o = calabi(&["verify", "--config", "configs/twist_linear.json", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["report"], "verify");
    assert_eq!(report["gap"], 0.5);
    assert_eq!(report["q_threshold"], 3);
    assert!(report["census"].as_array().unwrap().iter().all(|c| c["verdict"] == "PASS"));
}

#[test]
fn equal_measures_give_a_degenerate_gap() {
    let o = calabi(&["verify", "--config", "configs/empty_gap.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("degenerate action gap"));
}

#[test]
fn rigid_rotation_has_no_orbits() {
    let o = calabi(&["orbits", "--map", "rigid:a=0.618", "--q", "5", "--p", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("0 orbits"));
}

#[test]
fn usage_and_config_errors_exit_three() {
    assert_eq!(calabi(&["frobnicate"]).status.code(), Some(3));
    assert_eq!(calabi(&["verify"]).status.code(), Some(3));
    assert_eq!(calabi(&["action", "--map", "rigid:a=0.1", "--point", "0.5"]).status.code(), Some(3));
    let dir = std::env::temp_dir().join(format!("calabi-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.json");
    std::fs::write(&bad, "{\n  \"schema_version\": 1,\n  \"map\": {\"type\": \"twist\", \"profile\": \"linear\"},\n  \"colour\": 3\n}\n").unwrap();
    let o = calabi(&["action", "--config", bad.to_str().unwrap()]);
    std::fs::remove_dir_all(&dir).unwrap();
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("colour") && err.contains("line 4"), "{err}");
    assert_eq!(calabi(&["--help"]).status.code(), Some(0));
}

#[test]
fn action_reports_values_with_error_estimates() {
    let o = calabi(&["action", "--map", "twist:linear", "--point", "0.3,0.6", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let g = &report["points"][0]["action"];
    assert!((g["value"].as_f64().unwrap() - 0.18).abs() < 1e-12);
    assert!(g["error_estimate"].as_f64().unwrap() < 1e-10);
    assert!((report["calabi"]["value"].as_f64().unwrap() - 1.0 / 6.0).abs() < 1e-10);
}

#[test]
fn orbit_csv_has_the_documented_columns() {
    let dir = std::env::temp_dir().join(format!("calabi-csv-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let csv = dir.join("orbits.csv");
    let o = calabi(&["orbits", "--map", "twist:linear", "--q", "3", "--p", "1", "--grid", "8", "--csv", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    std::fs::remove_dir_all(&dir).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("orbit_id,j,x,y,x_lift,q,p,residual,action"));
    assert!(lines.count() >= 3);
}

#[test]
fn audit_passes() {
    let o = calabi(&["audit", "--seed", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}
