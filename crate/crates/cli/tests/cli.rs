use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use roundabout_cli::output::RunManifest;
use roundabout_core::simulator::{EpisodeMetrics, ScenarioConfig};

fn roundabout(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roundabout"))
        .args(args)
        .env_remove("ROUNDABOUT_OUT")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = roundabout(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn files_below(root: &Path) -> BTreeSet<PathBuf> {
    let mut out = BTreeSet::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out
}

fn manifest(root: &Path) -> RunManifest {
    serde_json::from_slice(&fs::read(root.join("manifest.json")).unwrap()).unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn run_into(dir: &Path, seed: &str) {
    ok(&["run", "--preset", "two_vehicle", "--planner", "policy", "--seed", seed, "--sims", "100", "--out", dir.to_str().unwrap()]);
}

#[test]
fn run_writes_exactly_the_manifested_files() {
    let tmp = tempfile::tempdir().unwrap();
    run_into(tmp.path(), "7");
    let m = manifest(tmp.path());
    let listed: BTreeSet<_> = m.artifacts.iter().cloned().collect();
    assert_eq!(listed, files_below(tmp.path()));
    assert_eq!(m.artifacts.last().unwrap(), Path::new("manifest.json"));
    assert_eq!(m.seeds, Some((7, 7)));
    for f in ["trajectory.csv", "metrics.json"] {
        assert!(listed.contains(Path::new(f)));
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_into(a.path(), "3");
    run_into(b.path(), "3");
    let read = |d: &Path| fs::read(d.join("trajectory.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn trajectory_reproduces_the_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    run_into(tmp.path(), "1");
    let metrics: EpisodeMetrics = serde_json::from_slice(&fs::read(tmp.path().join("metrics.json")).unwrap()).unwrap();
    let (header, rows) = read_csv(&tmp.path().join("trajectory.csv"));
    assert_eq!(header.join(","), "t,vehicle_id,x,y,theta,v,a_applied,w,r_collision,r_gap,r_velocity,r_target,r_comfort,r_total");
    let ego: Vec<_> = rows.iter().filter(|r| r[1] == "0").collect();
    let totals: Vec<f64> = ego.iter().map(|r| r[13].parse().unwrap()).collect();
    let sum: f64 = totals.iter().sum();
    // each cell carries nine significant digits
    let slack: f64 = totals.iter().map(|x| x.abs() * 5e-9).sum::<f64>() + 1e-9;
    assert!((sum - metrics.total_reward).abs() <= slack, "{sum} vs {}", metrics.total_reward);
    if metrics.reached_target {
        assert!((ego.len() as f64 * 0.1 - metrics.travel_time).abs() < 1e-9);
    }
    let violations = ego.iter().filter(|r| r[8].parse::<f64>().unwrap() < 0.0).count();
    assert_eq!(violations as u32, metrics.safety_violations);
}

#[test]
fn bad_planner_name_lists_the_choices() {
    let tmp = tempfile::tempdir().unwrap();
    let out = roundabout(&["run", "--preset", "ego_only", "--planner", "greedy", "--out", tmp.path().to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("{policy, plain, baseline}"), "{err}");
    assert!(files_below(tmp.path()).is_empty());
}

#[test]
fn config_and_io_failures_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.json");
    let out = roundabout(&["run", "--scenario", missing.to_str().unwrap(), "--planner", "baseline"]);
    assert!(!out.status.success());

    let broken = tmp.path().join("broken.json");
    let mut cfg = ScenarioConfig::<f64>::ego_only();
    cfg.max_duration = -1.0;
    fs::write(&broken, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = roundabout(&["run", "--scenario", broken.to_str().unwrap(), "--planner", "baseline", "--out", tmp.path().to_str().unwrap()]);
    assert!(!out.status.success());

    let out = roundabout(&["batch", "--preset", "ego_only", "--seeds", "5..4", "--out", tmp.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty seed range"));
}

#[test]
fn scenario_files_round_trip_through_preset() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(&["preset", "multi_vehicle"]);
    let file = tmp.path().join("multi.json");
    fs::write(&file, &out.stdout).unwrap();
    let cfg = ScenarioConfig::<f64>::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(cfg, ScenarioConfig::multi_vehicle());
    let dir = tmp.path().join("run");
    ok(&["run", "--scenario", file.to_str().unwrap(), "--planner", "baseline", "--out", dir.to_str().unwrap()]);
    assert_eq!(manifest(&dir).scenario.as_deref(), Some(file.to_str().unwrap()));
}

#[test]
fn batch_writes_one_row_per_run() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    ok(&["batch", "--preset", "two_vehicle", "--planners", "plain,baseline", "--seeds", "0..2", "--sims", "50", "--jobs", "2", "--out", out]);
    let (header, rows) = read_csv(&tmp.path().join("summary.csv"));
    assert_eq!(header.join(","), "planner,seed,total_reward,travel_time,collisions,emergency_brakes,reached_target,safety_violations");
    assert_eq!(rows.len(), 6);
    let keys: BTreeSet<_> = rows.iter().map(|r| (r[0].clone(), r[1].clone())).collect();
    assert_eq!(keys.len(), 6);
    let m = manifest(tmp.path());
    assert_eq!(m.artifacts.iter().cloned().collect::<BTreeSet<_>>(), files_below(tmp.path()));
    assert_eq!(m.artifacts.len(), 6 * 2 + 2);
    for r in &rows {
        let run = tmp.path().join("runs").join(format!("{}-seed{}", r[0], r[1]));
        let metrics: EpisodeMetrics = serde_json::from_slice(&fs::read(run.join("metrics.json")).unwrap()).unwrap();
        assert_eq!(r[4], metrics.collision_events.to_string());
        let reward: f64 = r[2].parse().unwrap();
        assert!((reward - metrics.total_reward).abs() <= metrics.total_reward.abs() * 5e-9);
    }
}

#[test]
fn forward_sim_emits_three_full_trajectories() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["forward-sim", "--out", tmp.path().to_str().unwrap()]);
    let max_err = |name: &str, from: usize| {
        let (_, rows) = read_csv(&tmp.path().join(format!("{name}.csv")));
        assert_eq!(rows.len(), 101, "{name}");
        rows[from..].iter().map(|r| r[7].parse::<f64>().unwrap()).fold(0.0, f64::max)
    };
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("forward_sim.json")).unwrap()).unwrap();
    let entry = summary["ring_entry_step"].as_u64().unwrap() as usize;
    assert!(max_err("truth", 0) < 1e-6);
    assert!(max_err("policy", 0) < 0.5);
    assert!(max_err("constant", entry) > 5.0);
    assert_eq!(manifest(tmp.path()).artifacts.len(), 5);
}

#[test]
fn shipped_scenario_files_match_the_presets() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    for name in roundabout_cli::PRESETS {
        let text = fs::read_to_string(dir.join(format!("{name}.json"))).unwrap();
        assert_eq!(ScenarioConfig::<f64>::from_json(&text).unwrap(), ScenarioConfig::preset(name).unwrap(), "{name}");
    }
}
