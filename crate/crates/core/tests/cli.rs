mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::fixture;
use platoon::lookup::ManeuverTable;
use platoon::scenario::{Scenario, ScenarioPair};

fn platoon(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_platoon")).args(args).current_dir(dir).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn plan_merge(dir: &Path) -> Output {
    platoon(&["plan", "--scenario", &fixture("scenario_c.json"), "--out", "merge.json"], dir)
}

#[test]
fn plan_decide_simulate_audit() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = plan_merge(d);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("split -> merged: 3 maneuvers"));

    let o = platoon(&["decide", "--table", "merge.json", "--pair", "split:merged"], d);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "selected index 1 rho 0.1");

    let blocked = fixture("traffic_blocked.json");
    let o = platoon(&["decide", "--table", "merge.json", "--traffic", &blocked, "--pair", "split:merged"], d);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stdout(&o).trim(), "infeasible");

    let o = platoon(&["simulate", "--table", "merge.json", "--pair", "split:merged", "--index", "2", "--out", "trace.csv"], d);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(summary["min_vehicle_distance"].as_f64().unwrap() >= 0.2 - 1e-3);
    assert!(summary["max_tracking_error"].as_f64().unwrap() < 0.05);
    let text = std::fs::read_to_string(d.join("trace.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,vehicle_id,x,y,psi,v,a,delta");

    let o = platoon(&["audit", "--table", "merge.json"], d);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).matches("PASS").count(), 3);

    // two rows of the same step on top of each other
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let first: Vec<&str> = lines[41].split(',').collect();
    let second: Vec<String> = lines[42].split(',').map(str::to_string).collect();
    let mut forged = second.clone();
    forged[2..6].clone_from_slice(&first[2..6].iter().map(|s| s.to_string()).collect::<Vec<_>>());
    lines[42] = forged.join(",");
    std::fs::write(d.join("bad.csv"), lines.join("\n") + "\n").unwrap();
    let o = platoon(&["audit", "--trace", "bad.csv", "--dmin", "0.2"], d);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("FAIL"));
    let t: usize = 41 / 3;
    assert!(stdout(&o).contains(&format!("t={t} vehicle pair")), "{}", stdout(&o));
}

#[test]
fn plan_is_byte_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(plan_merge(a.path()).status.code(), Some(0));
    let o = Command::new(env!("CARGO_BIN_EXE_platoon"))
        .args(["plan", "--scenario", &fixture("scenario_c.json"), "--out", "merge.json"])
        .current_dir(b.path())
        .env("PLATOON_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let x = std::fs::read(a.path().join("merge.json")).unwrap();
    let y = std::fs::read(b.path().join("merge.json")).unwrap();
    assert!(x == y);
}

#[test]
fn empty_pair_list_gives_empty_table() {
    let dir = tempfile::tempdir().unwrap();
    let mut sc = Scenario::load(fixture("scenario_c.json")).unwrap();
    sc.pairs.clear();
    sc.traffic = None;
    sc.save(dir.path().join("s.json")).unwrap();
    let o = platoon(&["plan", "--scenario", "s.json", "--out", "t.json"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let t = ManeuverTable::load(dir.path().join("t.json")).unwrap();
    assert!(t.entries.is_empty());
}

#[test]
fn overlapping_start_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut sc = Scenario::load(fixture("scenario_c.json")).unwrap();
    sc.fleet[2].initial.x = sc.fleet[1].initial.x - 2.0;
    sc.traffic = None;
    sc.save(dir.path().join("s.json")).unwrap();
    let o = platoon(&["plan", "--scenario", "s.json", "--out", "t.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("initial footprints of vehicles 2 and 3"));
    assert!(!dir.path().join("t.json").exists());
}

#[test]
fn hold_maneuver_is_tracked_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let mut sc = Scenario::load(fixture("scenario_c.json")).unwrap();
    sc.pairs = vec![ScenarioPair {
        initial: "split".into(),
        target: "split".into(),
        initial_ids: vec![1, 2, 3],
        target_ids: vec![1, 2, 3],
    }];
    sc.planner.steps = 40;
    sc.traffic = None;
    sc.save(dir.path().join("s.json")).unwrap();
    let d = dir.path();
    assert_eq!(platoon(&["plan", "--scenario", "s.json", "--out", "t.json"], d).status.code(), Some(0));
    let o = platoon(&["simulate", "--table", "t.json", "--pair", "split:split", "--scenario", "s.json", "--out", "h.csv"], d);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(summary["max_tracking_error"].as_f64().unwrap() < 1e-9, "{summary}");
}

#[test]
fn baseline_writes_a_trace_and_an_audit() {
    let dir = tempfile::tempdir().unwrap();
    let o = platoon(
        &["baseline", "--scenario", &fixture("scenario_c.json"), "--schedule", &fixture("schedule_merge.json"), "--out", "b.csv", "--plot-data", "plots"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("baseline: PASS"));
    let trace = platoon::trace::read_trace(dir.path().join("b.csv")).unwrap();
    assert_eq!(trace.vehicles.len(), 3);
    assert!((trace.dt - 0.1).abs() < 1e-12);
    for f in ["x", "y", "psi", "v", "a", "delta"] {
        assert!(dir.path().join("plots").join(format!("{f}.csv")).exists());
    }
}

#[test]
fn usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(platoon(&["decide", "--table", "x.json", "--pair", "nocolon"], dir.path()).status.code(), Some(1));
    assert_eq!(platoon(&["plan", "--scenario", "missing.json"], dir.path()).status.code(), Some(1));
    assert_eq!(platoon(&["audit", "--trace", "missing.csv"], dir.path()).status.code(), Some(1));
}
