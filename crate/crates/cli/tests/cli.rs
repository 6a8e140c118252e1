use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn fidvr(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fidvr"))
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .env_remove("FIDVR_SEED")
        .env_remove("FIDVR_OUT_DIR")
        .output()
        .expect("run fidvr")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(out: &Path, scenario: &Path) -> Output {
    let (network, areas) = (data("network.json"), data("areas.json"));
    fidvr(
        out,
        &["sim", "--scenario", s(scenario), "--network", s(&network), "--areas", s(&areas)],
    )
}

fn monitor(out: &Path) -> Output {
    let (csv, params) = (out.join("mupmu.csv"), data("params_census.json"));
    fidvr(out, &["monitor", "--csv", s(&csv), "--params", s(&params)])
}

fn mitigate(out: &Path, extra: &[&str]) -> Output {
    let (report, network, params) = (out.join("monitor.json"), data("network.json"), data("params_census.json"));
    let mut args = vec!["mitigate", "--report", s(&report), "--network", s(&network), "--params", s(&params)];
    args.extend_from_slice(extra);
    fidvr(out, &args)
}

fn reference_event(dir: &Path) {
    let o = simulate(dir, &data("scenarios/fault_701_80ms.json"));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = monitor(dir);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    reference_event(a.path());
    reference_event(b.path());
    for f in ["mupmu.csv", "states.csv", "sim_summary.json", "monitor.json"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f} differs"
        );
    }
    let m = json(&a.path().join("sim.manifest.json"));
    assert_eq!(m["command"], "sim");
    assert_eq!(m["seed"], 0);
    assert_eq!(m["outputs"].as_array().unwrap().len(), 3);
}

#[test]
fn seed_flag_overrides_scenario_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (scenario, network, areas) = (data("scenarios/fault_701_50ms.json"), data("network.json"), data("areas.json"));
    let o = fidvr(
        dir.path(),
        &["--seed", "11", "sim", "--scenario", s(&scenario), "--network", s(&network), "--areas", s(&areas)],
    );
    assert_eq!(code(&o), 0);
    assert_eq!(json(&dir.path().join("sim_summary.json"))["seed"], 11);
}

#[test]
fn malformed_scenario_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"fault": {"bus": 701, "start_s": 1.0, "duration_s": 0.08, "g_shunt": 40.0}}"#).unwrap();
    let o = simulate(dir.path(), &bad);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("g_shunt"), "{err}");
}

#[test]
fn unsupported_format_version_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("v9.json");
    let mut v = json(&data("scenarios/fault_701_80ms.json"));
    v["format_version"] = 9.into();
    std::fs::write(&bad, v.to_string()).unwrap();
    let o = simulate(dir.path(), &bad);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("format"));
}

#[test]
fn missing_input_file_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = simulate(dir.path(), &dir.path().join("absent.json"));
    assert_eq!(code(&o), 2);
}

#[test]
fn short_fault_gives_no_event() {
    let dir = tempfile::tempdir().unwrap();
    let quiet = dir.path().join("quiet.json");
    let mut v = json(&data("scenarios/fault_701_50ms.json"));
    v["fault"]["duration_s"] = 0.02.into();
    std::fs::write(&quiet, v.to_string()).unwrap();
    assert_eq!(code(&simulate(dir.path(), &quiet)), 0);
    assert_eq!(code(&monitor(dir.path())), 0);
    let report = json(&dir.path().join("monitor.json"));
    assert!(report["event"].is_null());

    // Nothing to mitigate without an event.
    assert_eq!(code(&mitigate(dir.path(), &[])), 2);
}

#[test]
fn zero_control_bounds_are_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    reference_event(dir.path());
    let o = mitigate(dir.path(), &["--ac-cap", "0", "--no-pv"]);
    assert_eq!(code(&o), 4);
    let plan = json(&dir.path().join("plan.json"));
    assert_eq!(plan["plan"]["lp_status"], "infeasible");
    assert!(plan["actions"].as_array().unwrap().is_empty());
}

#[test]
fn estimate_within_criterion_needs_no_control() {
    let dir = tempfile::tempdir().unwrap();
    reference_event(dir.path());
    let o = mitigate(dir.path(), &["--t-max", "30"]);
    assert_eq!(code(&o), 0);
    let plan = json(&dir.path().join("plan.json"));
    assert!(plan["actions"].as_array().unwrap().is_empty());
    assert_eq!(plan["shed_ac_kw"], 0.0);
}

#[test]
fn planned_control_shortens_the_replayed_run() {
    let dir = tempfile::tempdir().unwrap();
    reference_event(dir.path());
    let base = json(&dir.path().join("sim_summary.json"))["recovery_time_s"].as_f64().unwrap();
    assert_eq!(code(&mitigate(dir.path(), &["--t-max", "21"])), 0);

    let replay = tempfile::tempdir().unwrap();
    let (scenario, network, areas, plan) = (
        data("scenarios/fault_701_80ms.json"),
        data("network.json"),
        data("areas.json"),
        dir.path().join("plan.json"),
    );
    let o = fidvr(
        replay.path(),
        &["sim", "--scenario", s(&scenario), "--network", s(&network), "--areas", s(&areas), "--plan", s(&plan)],
    );
    assert_eq!(code(&o), 0);
    let controlled = json(&replay.path().join("sim_summary.json"));
    assert!(!controlled["controls"].as_array().unwrap().is_empty());
    assert!(controlled["recovery_time_s"].as_f64().unwrap() < base - 1.0);
}

#[test]
fn empty_suite_gives_empty_report() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite.json");
    std::fs::write(&suite, r#"{"format_version": 1, "scenarios": []}"#).unwrap();
    let o = fidvr(dir.path(), &["validate", "--suite", s(&suite)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&dir.path().join("validation.json"));
    assert!(report["scenarios"].as_array().unwrap().is_empty());
    assert!(report["control"].is_null());
}

#[test]
fn suite_records_failing_cases_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite.json");
    let text = format!(
        r#"{{
  "network": "{}",
  "areas": "{}",
  "scenarios": [
    {{"name": "reference", "fault": {{"bus": 701, "start_s": 1.0, "duration_s": 0.08, "g_shunt_pu": 40.0}}}},
    {{"name": "quiet", "fault": {{"bus": 701, "start_s": 1.0, "duration_s": 0.02, "g_shunt_pu": 40.0}}}}
  ]
}}"#,
        s(&data("network.json")),
        s(&data("areas.json"))
    );
    std::fs::write(&suite, text).unwrap();
    let o = fidvr(dir.path(), &["validate", "--suite", s(&suite)]);
    assert_eq!(code(&o), 3);
    let report = json(&dir.path().join("validation.json"));
    let rows = report["scenarios"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[0]["error"].is_null());
    assert!(rows[0]["abs_error_pct"].as_f64().unwrap() < 15.0);
    assert!(rows[1]["error"].as_str().unwrap().contains("no FIDVR event"));
    assert!(dir.path().join("plots/scenario_reference.csv").exists());
    let table = std::fs::read_to_string(dir.path().join("recovery_table.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
}

#[test]
fn reference_data_matches_the_checked_in_files() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&fidvr(dir.path(), &["reference"])), 0);
    for f in [
        "network.json",
        "areas.json",
        "sweep.json",
        "suite.json",
        "params_census.json",
        "scenarios/fault_701_80ms.json",
        "scenarios/fault_740_50ms.json",
    ] {
        assert_eq!(
            std::fs::read(dir.path().join(f)).unwrap(),
            std::fs::read(data(f)).unwrap(),
            "data/{f} is stale; regenerate with `fidvr --out-dir data reference`"
        );
    }
}
