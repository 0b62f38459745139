use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lmpc_core::io::write_system;
use lmpc_core::model::LtiNetworkSystem;
use serde_json::Value;

fn lmpc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lmpc")).current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn chain_file(dir: &Path) -> String {
    write_system(&dir.join("chain.json"), &LtiNetworkSystem::three_node_chain(), None).unwrap();
    "chain.json".into()
}

#[test]
fn gen_writes_requested_size_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["gen", "--n", "5", "--edge-prob", "0.4", "--actuation", "1.0", "--seed", "7", "-o"];
    ok(&lmpc(dir.path(), &[&args[..], &["a.json"]].concat()));
    ok(&lmpc(dir.path(), &[&args[..], &["b.json"]].concat()));
    let a = fs::read(dir.path().join("a.json")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.json")).unwrap());
    let (sys, meta) = lmpc_core::io::read_system(&dir.path().join("a.json")).unwrap();
    assert_eq!((sys.n_subsystems(), sys.n_x(), sys.n_u()), (25, 50, 25));
    assert_eq!(meta.unwrap()["config"]["seed"], 7);
    let manifest = json(&dir.path().join("a.json.manifest.json"));
    assert_eq!(manifest["command"], "gen");
    assert_eq!(manifest["seeds"][0], 7);
}

#[test]
fn gen_small_mesh_to_stdout_is_connected() {
    let dir = tempfile::tempdir().unwrap();
    let out = lmpc(dir.path(), &["gen", "--n", "2", "--actuation", "1.0", "--seed", "1"]);
    ok(&out);
    let file: lmpc_core::io::SystemFile = serde_json::from_slice(&out.stdout).unwrap();
    let sys = file.to_system().unwrap();
    assert_eq!(sys.n_subsystems(), 4);
    assert!(lmpc_core::model::build_interconnection_graph(&sys).is_connected());
}

#[test]
fn manifest_reproduces_run() {
    let dir = tempfile::tempdir().unwrap();
    ok(&lmpc(dir.path(), &["gen", "--n", "3", "--seed", "11", "--objective-out", "obj.json", "-o", "sys.json"]));
    let first = fs::read(dir.path().join("sys.json")).unwrap();
    let first_obj = fs::read(dir.path().join("obj.json")).unwrap();
    let manifest = json(&dir.path().join("sys.json.manifest.json"));
    let outputs: Vec<&str> = manifest["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(outputs, ["sys.json", "obj.json"]);
    fs::remove_file(dir.path().join("sys.json")).unwrap();
    fs::remove_file(dir.path().join("obj.json")).unwrap();
    let argv: Vec<String> = serde_json::from_value(manifest["argv"].clone()).unwrap();
    let rest: Vec<&str> = argv[1..].iter().map(String::as_str).collect();
    ok(&lmpc(dir.path(), &rest));
    assert_eq!(fs::read(dir.path().join("sys.json")).unwrap(), first);
    assert_eq!(fs::read(dir.path().join("obj.json")).unwrap(), first_obj);
}

#[test]
fn select_chain_and_empty_range() {
    let dir = tempfile::tempdir().unwrap();
    let sys = chain_file(dir.path());
    ok(&lmpc(dir.path(), &["select", "--system", &sys, "--horizon", "1", "-o", "sel.json"]));
    let report = json(&dir.path().join("sel.json"));
    assert_eq!(report["d_optimal"], 1);
    assert!(report["per_d"][0]["wall_time_rank"].is_number());
    assert!(dir.path().join("sel.json.manifest.json").exists());

    let out = lmpc(dir.path(), &["select", "--system", &sys, "--horizon", "1", "--d-max", "0"]);
    ok(&out);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["d_optimal"].is_null());
    assert!(report["diagnostic"].is_string());
}

#[test]
fn select_mesh_certifies_one_hop() {
    let dir = tempfile::tempdir().unwrap();
    ok(&lmpc(dir.path(), &["gen", "--n", "4", "--seed", "2", "-o", "grid.json"]));
    let out = lmpc(dir.path(), &["select", "--system", "grid.json", "--horizon", "5"]);
    ok(&out);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["d_optimal"], 1);
}

#[test]
fn analyze_both_formulations() {
    let dir = tempfile::tempdir().unwrap();
    let sys = chain_file(dir.path());
    for formulation in ["dynamics-first", "locality-first"] {
        let out = lmpc(dir.path(), &["analyze", "--system", &sys, "--horizon", "1", "--d", "1", "--formulation", formulation]);
        ok(&out);
        let cert: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(cert["certified_optimal"], true);
        assert_eq!(cert["rank_found"], 2);
        assert_eq!(cert["formulation"], formulation);
    }
    let out = lmpc(dir.path(), &["analyze", "--system", &sys, "--horizon", "1", "--d", "0"]);
    ok(&out);
    let cert: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(cert["feasible"], false);
}

#[test]
fn sim_zero_state_and_full_pattern() {
    let dir = tempfile::tempdir().unwrap();
    ok(&lmpc(dir.path(), &["gen", "--n", "2", "--seed", "4", "--objective-out", "obj.json", "-o", "sys.json"]));
    ok(&lmpc(
        dir.path(),
        &["sim", "--system", "sys.json", "--objective", "obj.json", "--horizon", "4", "--steps", "5", "--x0", "zeros", "-o", "zero.json"],
    ));
    let cmp = json(&dir.path().join("zero.json"));
    assert_eq!(cmp["localized"]["realized_cost"], 0.0);
    assert_eq!(cmp["global"]["realized_cost"], 0.0);
    assert_eq!(cmp["relative_gap"], 0.0);

    ok(&lmpc(
        dir.path(),
        &["sim", "--system", "sys.json", "--horizon", "4", "--steps", "5", "--d", "full", "--seed", "3", "-o", "full.json"],
    ));
    let cmp = json(&dir.path().join("full.json"));
    assert!(cmp["relative_gap"].as_f64().unwrap() <= 1e-6);
    let trace = fs::read_to_string(dir.path().join("full.localized.csv")).unwrap();
    let mut lines = trace.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("tau,x0,") && header.ends_with(",u3,step_cost,cum_cost"));
    assert_eq!(lines.count(), 5);
    assert!(dir.path().join("full.global.csv").exists());
    let manifest = json(&dir.path().join("full.json.manifest.json"));
    assert_eq!(manifest["schemas"]["trace"], "lmpc-trace/1");
}

#[test]
fn sim_infeasible_step_exits_nonzero_with_partial_trace() {
    let dir = tempfile::tempdir().unwrap();
    let sys = chain_file(dir.path());
    fs::write(
        dir.path().join("tight.json"),
        r#"{"q":[1,1,1],"r":[1,1],"state_bounds":[[-1,1],[-1,1],[-1,1]],"input_bounds":[[-0.1,0.1],[-0.1,0.1]]}"#,
    )
    .unwrap();
    let out = lmpc(
        dir.path(),
        &["sim", "--system", &sys, "--objective", "tight.json", "--horizon", "1", "--x0", "5,5,5", "-o", "tight_out.json"],
    );
    assert_eq!(out.status.code(), Some(5));
    let cmp = json(&dir.path().join("tight_out.json"));
    assert_eq!(cmp["localized"]["status"]["kind"], "truncated");
    assert!(dir.path().join("tight_out.localized.csv").exists());
}

#[test]
fn sweep_grid_rows() {
    let dir = tempfile::tempdir().unwrap();
    ok(&lmpc(
        dir.path(),
        &["sweep", "--sizes", "2,3", "--actuation", "1.0", "--horizons", "3", "--seeds", "2", "-o", "sweep.csv"],
    ));
    let mut rdr = csv::Reader::from_path(dir.path().join("sweep.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let d_col = headers.iter().position(|h| h == "d_optimal").unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| &r[d_col] == "1"));
}

#[test]
fn bench_reports_phase_split() {
    let dir = tempfile::tempdir().unwrap();
    let out = lmpc(dir.path(), &["bench", "--sizes", "2", "--horizons", "3", "--reps", "2"]);
    ok(&out);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().contains("construct_per_subsystem_mean_s"));
    assert_eq!(lines.count(), 1);
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = lmpc(dir.path(), &["select", "--system", "missing.json", "--horizon", "1"]);
    assert_eq!(out.status.code(), Some(3));
    fs::write(dir.path().join("bad.json"), "{ nope").unwrap();
    let out = lmpc(dir.path(), &["select", "--system", "bad.json", "--horizon", "1"]);
    assert_eq!(out.status.code(), Some(4));
    let out = lmpc(dir.path(), &["gen", "--edge-prob", "0.4"]);
    assert_eq!(out.status.code(), Some(2));
    let out = lmpc(dir.path(), &["gen", "--n", "3", "--edge-prob", "1.5"]);
    assert!(!out.status.success());
}
