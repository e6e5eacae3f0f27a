use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn tpm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tpm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn params() -> String {
    fixture("reference.json").display().to_string()
}

#[test]
fn fk_reference_inputs() {
    let o = tpm(&["fk", "-p", &params(), "350", "-300", "-25", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let sols = v["solutions"].as_array().unwrap();
    assert_eq!(sols.len(), 8);
    for s in sols {
        assert_eq!(s["pose"]["y"].as_f64().unwrap(), 25.0);
    }
}

#[test]
fn fk_exit_codes() {
    let o = tpm(&["fk", "-p", &params(), "900", "-900", "0"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no real assembly"));
    let o = tpm(&["fk", "-p", &params(), "350", "210", "-25"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("self-motion"));
    assert_eq!(code(&tpm(&["fk", "1", "2"])), 1);
    assert_eq!(code(&tpm(&["fk", "-p", "/nonexistent.json", "1", "2", "3"])), 1);
}

#[test]
fn ik_round_trip_and_pair() {
    let fk = tpm(&["fk", "350", "-300", "-25", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&fk)).unwrap();
    let principal = v["solutions"]
        .as_array()
        .unwrap()
        .iter()
        .find(|s| s["branch"] == "++-")
        .unwrap()
        .clone();
    let pose = &principal["pose"];
    // full precision is needed for the round trip, so recompute the pose
    let p = tpm_core::MechanismParams::reference();
    let exact = tpm_core::fk::solve_branch(
        &tpm_core::ActuatorInput::new(350.0, -300.0, -25.0),
        tpm_core::FkBranch::parse("++-").unwrap(),
        &p,
    )
    .unwrap()
    .unwrap()
    .pose;
    assert!((pose["x"].as_f64().unwrap() - exact.x).abs() < 1e-6);
    let (x, y, z) = (format!("{:e}", exact.x), format!("{:e}", exact.y), format!("{:e}", exact.z));
    let o = tpm(&["ik", &x, &y, &z, "--format", "json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let sols = v["solutions"].as_array().unwrap();
    assert!(sols.len() <= 32);
    let inputs: Vec<[f64; 3]> = sols
        .iter()
        .map(|s| ["y_a1", "y_a2", "y_a3"].map(|k| s["input"][k].as_f64().unwrap()))
        .collect();
    assert!(inputs.iter().any(|q| (q[0] - 350.0).abs() < 1e-3 && (q[1] + 300.0).abs() < 1e-3 && (q[2] + 25.0).abs() < 1e-3));
    assert!(inputs.iter().any(|q| (q[0] + 160.0).abs() < 1e-3));

    assert_eq!(code(&tpm(&["ik", "200", "0", "0"])), 2);
}

#[test]
fn validate_exit_codes() {
    let o = tpm(&["validate", "--samples", "5", "--seed", "3"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let o = tpm(&["validate", "--samples", "0"]);
    assert_eq!(code(&o), 0);
    let o = tpm(&["validate", "--samples", "3", "--perturb", "0.001"]);
    assert_eq!(code(&o), 4);
    assert!(stdout(&o).contains("mismatch fk-vs-oracle"));
}

#[test]
fn validate_is_deterministic() {
    let a = tpm(&["validate", "--samples", "4", "--seed", "9", "--format", "json"]);
    let b = tpm(&["validate", "--samples", "4", "--seed", "9", "--format", "json"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn tables_report() {
    let o = tpm(&["tables", "-p", &params()]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert_eq!(text.matches("PASS").count(), 3);
    let o = tpm(&["tables", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rows = v["direct_rows"].as_array().unwrap();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r["violation"].as_f64().unwrap() > 0.0));
    assert_eq!(v["inverse_rows"].as_array().unwrap().len(), 32);
}

#[test]
fn topology_files() {
    let o = tpm(&["topology", fixture("mechanism.topo").to_str().unwrap(), "--format", "json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["dof"], 3);
    assert_eq!(v["coupling_degree"], 1);
    assert_eq!(v["platform"]["t_dim"], 3);
    assert_eq!(v["platform"]["r_dim"], 0);

    let o = tpm(&["topology", fixture("four_bar.topo").to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("DOF F = 1"));

    assert_eq!(code(&tpm(&["topology", fixture("not_akc.topo").to_str().unwrap()])), 4);
    assert_eq!(code(&tpm(&["topology", fixture("reference.json").to_str().unwrap()])), 1);
}

#[test]
fn workspace_full_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = tpm(&[
        "workspace",
        "--axis",
        "340:360:21",
        "-310:-290:21",
        "-35:-15:21",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "ix,iy,iz,q1,q2,q3,x,y,z,count,branch,min_margin,margin_name"
    );
    assert_eq!(lines.count(), 9261);
}

#[test]
fn workspace_locus_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("slice.json");
    let locus = dir.path().join("locus.csv");
    let o = tpm(&[
        "workspace",
        "--axis",
        "-600:600:41",
        "-600:600:41",
        "0",
        "--format",
        "json",
        "--out",
        out.to_str().unwrap(),
        "--locus",
        locus.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 41 * 41);
    let l = std::fs::read_to_string(&locus).unwrap();
    assert!(l.lines().any(|r| r.ends_with(",D_gamma")));

    let o = tpm(&["workspace", "--axis", "1:1:3", "0", "0"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("invalid grid"));
}

#[test]
fn check_accepts_degrees() {
    let o = tpm(&[
        "check", "350", "-300", "-25", "--gamma", "155deg", "--alpha", "-39deg", "--beta", "-105deg", "--format",
        "json",
    ]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["config"]["gamma"].as_f64().unwrap() - 155f64.to_radians()).abs() < 1e-8);
    let o = tpm(&["check", "350", "-300", "-25", "--branch", "++-", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["implicit_jacobian"]["j"][1][0].as_f64().unwrap(), 0.5);
    assert_eq!(code(&tpm(&["check", "350", "-300", "-25", "--branch", "xyz"])), 1);
}
