use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ecodeflect"))
}

fn scenario(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name).display().to_string()
}

fn first_line(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap_or_default().to_string()
}

#[test]
fn solve_writes_pinned_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["solve", "--scenario", &scenario("default.json"), "--ti", "0.9", "--nodes", "20", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(
        first_line(&dir.path().join("results.csv")),
        "ti_tp,regime,t_op_day,idle_day,energy_kw_day,dv_mps,residual_b_lu,status"
    );
    assert_eq!(first_line(&dir.path().join("plotdata/operational_angle.csv")), "ti_tp,regime,time_day,delta_deg");
    assert_eq!(first_line(&dir.path().join("plotdata/acceleration.csv")), "ti_tp,regime,time_day,accel_mps2");
    assert_eq!(first_line(&dir.path().join("plotdata/t_op_vs_ti.csv")), "ti_tp,regime,t_op_day");
    assert_eq!(first_line(&dir.path().join("plotdata/energy_vs_ti.csv")), "ti_tp,regime,energy_kw_day");
    let report = std::fs::read_to_string(dir.path().join("run_report.txt")).unwrap();
    assert!(report.contains("mass note"));
    let rows = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(rows.lines().count(), 2);
}

#[test]
fn lunar_and_impulsive_headers() {
    let dir = tempfile::tempdir().unwrap();
    let ok = bin().args(["lunar", "--out"]).arg(dir.path()).status().unwrap();
    assert!(ok.success());
    assert_eq!(first_line(&dir.path().join("results.csv")), "f_deg,miss_re,rel_error");
    assert_eq!(std::fs::read_to_string(dir.path().join("results.csv")).unwrap().lines().count(), 361);

    let dir = tempfile::tempdir().unwrap();
    let ok = bin().args(["impulsive", "--scenario", &scenario("bennu_like.json"), "--out"]).arg(dir.path()).status().unwrap();
    assert!(ok.success());
    assert_eq!(
        first_line(&dir.path().join("results.csv")),
        "case,lambda_deg,dv_cm_s,a_au,e,tp_yr,perigee_re,class,encounter,next_encounter_tp,encounter_distance_au"
    );
    assert_eq!(first_line(&dir.path().join("plotdata/separation.csv")), "case,time_tp,separation_au");
}

#[test]
fn repeated_runs_are_identical() {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let ok = bin()
            .args(["solve", "--regime", "variable", "--ti", "1.0", "--nodes", "20", "--seed", "7", "--out"])
            .arg(dir.path())
            .status()
            .unwrap();
        assert!(ok.success());
        let read = |p: &str| std::fs::read(dir.path().join(p)).unwrap();
        (read("results.csv"), read("plotdata/acceleration.csv"), read("results.json"))
    };
    assert_eq!(run(), run());
}

#[test]
fn validate_accepts_shipped_and_rejects_bad() {
    for name in ["default.json", "bennu_like.json"] {
        let out = bin().args(["validate", "--scenario", &scenario(name)]).output().unwrap();
        assert!(out.status.success(), "{name}");
    }
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("default.json")).unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, text.replace("\"a_au\": 1.2", "\"a_au\": 0.5").replace("\"e\": 0.6", "\"e\": 0.1")).unwrap();
    let out = bin().args(["validate", "--scenario"]).arg(&bad).output().unwrap();
    assert!(!out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["error"], "invalid_scenario");
    assert!(v["message"].as_str().unwrap().contains("does not cross"), "{v}");
}

#[test]
fn bad_arguments_report_json() {
    let out = bin().args(["solve", "--ti", "1:0:2"]).output().unwrap();
    assert!(!out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["error"], "bad_argument");
    let out = bin().args(["solve", "--regime", "bounded", "--profile", "const:2"]).output().unwrap();
    assert!(!out.status.success());
}
