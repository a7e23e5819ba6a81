use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn a2sl(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_a2sl"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn stderr_json_lines(o: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&o.stderr)
        .lines()
        .filter_map(|l| serde_json::from_str(l).ok())
        .collect()
}

fn error_of(o: &Output) -> Value {
    stderr_json_lines(o)
        .into_iter()
        .find(|v| v.get("error").is_some())
        .expect("an error report on stderr")
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

#[test]
fn validate_prints_a_report_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let o = a2sl(&["validate", "--scenario", "vi-a"], dir.path());
    assert_eq!(code(&o), 0);
    let report = stdout_json(&o);
    assert_eq!(report["valid"], true);
    assert_eq!(report["agents"], 10);
    assert_eq!(report["primitive"], true);
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn large_discount_is_reported_as_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    let o = a2sl(&["validate", "--override", "adaptation.delta=0.5"], dir.path());
    assert_eq!(code(&o), 0);
    let warnings = stdout_json(&o)["warnings"].as_array().unwrap().clone();
    assert!(warnings.iter().any(|w| w.as_str().unwrap().contains("delta = 0.5")));
}

#[test]
fn unknown_scenario_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = a2sl(&["simulate", "--scenario", "no-such-thing", "--out", "out"], dir.path());
    assert_eq!(code(&o), 2);
    let e = error_of(&o);
    assert_eq!(e["error"], "UnknownScenario");
    assert_eq!(e["exit_code"], 2);
    assert!(!dir.path().join("out").exists());
}

#[test]
fn invalid_overrides_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let o = a2sl(&["simulate", "--override", "adaptation.delta=1.5", "--out", "out"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(error_of(&o)["message"].as_str().unwrap().contains("delta"));

    let o = a2sl(&["validate", "--override", "agents.12.q_tr=0.5"], dir.path());
    assert_eq!(code(&o), 2);
    assert_eq!(error_of(&o)["error"], "Override");

    let o = a2sl(&["validate", "--override", "adaptation.delta=fast"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(error_of(&o)["message"].as_str().unwrap().contains("adaptation.delta"));
}

#[test]
fn non_primitive_graph_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = a2sl(
        &[
            "validate",
            "--override",
            r#"graph={"rule":"explicit","matrix":[[0,1,0,0,0,0,0,0,0,0],[1,0,0,0,0,0,0,0,0,0],[0,0,1,0,0,0,0,0,0,0],[0,0,0,1,0,0,0,0,0,0],[0,0,0,0,1,0,0,0,0,0],[0,0,0,0,0,1,0,0,0,0],[0,0,0,0,0,0,1,0,0,0],[0,0,0,0,0,0,0,1,0,0],[0,0,0,0,0,0,0,0,1,0],[0,0,0,0,0,0,0,0,0,1]]}"#,
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
    assert_eq!(error_of(&o)["error"], "NonPrimitive");
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("taken"), "x").unwrap();
    let o = a2sl(&["simulate", "--runs", "1", "--horizon", "5", "--out", "taken"], dir.path());
    assert_eq!(code(&o), 3);
    assert_eq!(error_of(&o)["exit_code"], 3);
}

#[test]
fn simulate_writes_csvs_and_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = a2sl(&["simulate", "--runs", "3", "--horizon", "40", "--seed", "5", "--out", "out"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    let manifest: Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["runs"], 3);
    assert_eq!(manifest["horizon"], 40);
    for entry in manifest["outputs"].as_array().unwrap() {
        let file = out.join(entry["file"].as_str().unwrap());
        assert!(file.is_file());
    }
    let header = fs::read_to_string(out.join("error_prob.csv")).unwrap();
    let mut lines = header.lines();
    assert_eq!(lines.next().unwrap(), "t,agent,p_hat,ci_lo,ci_hi");
    assert_eq!(lines.count(), 40 * 10);
    assert_eq!(stdout_json(&o)["steady_state"].as_array().unwrap().len(), 10);
}

#[test]
fn analyze_reports_identifiability() {
    let dir = tempfile::tempdir().unwrap();
    let o = a2sl(&["analyze", "--out", "out"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = stdout_json(&o);
    let beta = report["beta_net"].as_array().unwrap();
    assert!(beta[1].as_f64().unwrap() > 0.0 && beta[2].as_f64().unwrap() > 0.0);
    assert_eq!(report["globally_identifiable"], true);
    assert!(!report["locally_confused_agents"].as_array().unwrap().is_empty());
    assert!(dir.path().join("out/optimal_params.csv").is_file());
    assert!(dir.path().join("out/analysis.json").is_file());
}

#[test]
fn warm_start_from_saved_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let o = a2sl(&["simulate", "--runs", "1", "--horizon", "200", "--out", "first"], dir.path());
    assert_eq!(code(&o), 0);
    let params = dir.path().join("first/params.csv");
    let spec = format!(r#"initial.params={{"csv":"{}"}}"#, path_str(&params));
    let o = a2sl(&["simulate", "--runs", "1", "--horizon", "20", "--override", &spec, "--out", "second"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    // a file missing an agent's parameters is rejected
    let text = fs::read_to_string(&params).unwrap();
    let partial: Vec<&str> = text.lines().filter(|l| !l.starts_with("9,")).collect();
    fs::write(&params, partial.join("\n")).unwrap();
    let o = a2sl(&["validate", "--override", &spec], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn replays_recorded_features() {
    let dir = tempfile::tempdir().unwrap();
    let features = dir.path().join("features.csv");
    fs::write(
        &features,
        "agent,t,kind,label,f0,f1,f2,f3\n\
         0,1,train,1,1.0,1.1,0.9,1.0\n\
         0,2,pred,,1.0,1.0,1.0,1.0\n\
         3,2,train,3,3.0,2.9,3.1,3.0\n\
         3,3,pred,,2.9,3.0,3.0,3.1\n",
    )
    .unwrap();
    let spec = format!("features={}", path_str(&features));
    let o = a2sl(&["simulate", "--horizon", "3", "--override", &spec, "--out", "out"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: Value = serde_json::from_slice(&fs::read(dir.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["runs"], 1);
    assert_eq!(manifest["features"]["sha256"].as_str().unwrap().len(), 64);

    fs::write(&features, "agent,t,kind,label,f0\n0,1,train,7,1.0\n").unwrap();
    let o = a2sl(&["simulate", "--horizon", "3", "--override", &spec, "--out", "bad"], dir.path());
    assert_eq!(code(&o), 2);
    assert_eq!(error_of(&o)["error"], "UnknownLabel");
}

#[test]
fn plots_from_csv_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = a2sl(&["simulate", "--runs", "2", "--horizon", "30", "--out", "sim"], dir.path());
    assert_eq!(code(&o), 0);
    let o = a2sl(&["plot", "--in", "sim", "--agents", "0,1"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let svg = fs::read_to_string(dir.path().join("sim/error_prob.svg")).unwrap();
    assert!(svg.contains("<svg"));

    let o = a2sl(
        &["sweep", "--runs", "2", "--horizon", "30", "--deltas", "0.01", "--etas", "0.01,0.05", "--out", "sw"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = a2sl(&["plot", "--in", "sw"], dir.path());
    assert_eq!(code(&o), 0);
    assert!(dir.path().join("sw/sweep_agent0.svg").is_file());

    fs::create_dir(dir.path().join("empty")).unwrap();
    let o = a2sl(&["plot", "--in", "empty"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn published_schema_is_current() {
    let dir = tempfile::tempdir().unwrap();
    let o = a2sl(&["schema"], dir.path());
    assert_eq!(code(&o), 0);
    let published = concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/scenario.schema.json");
    let published: Value = serde_json::from_slice(&fs::read(published).unwrap()).unwrap();
    assert_eq!(stdout_json(&o), published);
}

#[test]
fn show_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = a2sl(&["show", "--scenario", "drift"], dir.path());
    assert_eq!(code(&o), 0);
    fs::write(dir.path().join("drift.json"), &o.stdout).unwrap();
    let again = a2sl(&["show", "--scenario", "drift.json"], dir.path());
    assert_eq!(code(&again), 0);
    assert_eq!(o.stdout, again.stdout);
}
