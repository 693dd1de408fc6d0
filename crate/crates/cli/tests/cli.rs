use std::fs;
use std::path::Path;
use std::process::Command;

use proptest::prelude::*;
use serde_json::Value;

use espkit::commands::analyse_trajectory;
use espkit::io::trajectory_csv;
use espkit::{parse_override, parse_trajectory_csv};

const BIN: &str = env!("CARGO_BIN_EXE_espkit");

fn espkit(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(BIN).args(args).output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn evolve(dir: &Path, sets: &[&str]) -> (i32, String) {
    let mut args = vec!["evolve", "--out", dir.to_str().unwrap()];
    for s in sets {
        args.push("--set");
        args.push(s);
    }
    let (code, _, err) = espkit(&args);
    (code, err)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const W14_MINUS: [&str; 8] = [
    "model.j=[-0.5,-0.5,-1]",
    "state.kind=mixed_weighting",
    "state.weighting_id=W14",
    "state.epsilon=-0.01",
    "evolution.t_min=-1.5",
    "evolution.t_max=1.5",
    "evolution.n_steps=1500",
    "detection.threshold=1e-9",
];

#[test]
fn evolve_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let sets = ["model.j=[1,0.5,1]", "model.s_c=1", "evolution.t_max=5", "evolution.n_steps=500"];
    assert_eq!(evolve(a.path(), &sets).0, 0);
    assert_eq!(evolve(b.path(), &sets).0, 0);
    let x = fs::read(a.path().join("trajectory.csv")).unwrap();
    let y = fs::read(b.path().join("trajectory.csv")).unwrap();
    assert!(!x.is_empty());
    assert_eq!(x, y);
}

#[test]
fn singlet_without_coupling_gives_constant_rows() {
    let dir = tempfile::tempdir().unwrap();
    let sets = ["model.j=[0,0,0]", "state.kind=bell", "evolution.t_max=2", "evolution.n_steps=20"];
    assert_eq!(evolve(dir.path(), &sets).0, 0);
    let text = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let traj = parse_trajectory_csv(text.as_bytes(), "t").unwrap();
    assert_eq!(traj.len(), 21);
    for s in &traj.samples {
        assert!((s.negativity - 0.5).abs() < 1e-14);
        assert!((s.concurrence - 1.0).abs() < 1e-12);
        assert!((s.cne + 0.5).abs() < 1e-14);
        assert_eq!(s.negative_count, 1);
    }
}

#[test]
fn manifest_records_resolved_run() {
    let dir = tempfile::tempdir().unwrap();
    let sets = [
        "model.j=[-0.5,-0.5,-1]",
        "state.kind=mixed_weighting",
        "state.weighting_id=W9",
        "state.epsilon=0.01",
        "evolution.t_min=-1.5",
        "evolution.t_max=1.5",
        "evolution.n_steps=1500",
        "output.gnuplot_script=true",
    ];
    assert_eq!(evolve(dir.path(), &sets).0, 0);
    let m = read_json(&dir.path().join("manifest.json"));
    assert_eq!(m["tool"], "espkit");
    assert_eq!(m["command"], "evolve");
    assert_eq!(m["method"], "exact");
    assert_eq!(m["n_samples"], 3001);
    assert_eq!(m["config"]["model"]["j"], serde_json::json!([-0.5, -0.5, -1.0]));
    assert_eq!(m["config"]["state"]["weighting_id"], "W9");
    assert!(m["config"]["detection"]["min_duration"].as_f64().unwrap() > 0.0);
    assert!(m["invariants"]["max_trace_deviation"].as_f64().unwrap() < 1e-12);
    assert!(m["invariants"]["max_hermiticity_deviation"].as_f64().unwrap() < 1e-12);
    assert_eq!(m["detection"]["classification"]["label"], "p6");
    assert!(m["state_label"].as_str().unwrap().contains("W9"));
    assert!(dir.path().join("trajectory.gp").exists());
}

#[test]
fn detect_finds_single_tfd_for_w14() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(evolve(dir.path(), &W14_MINUS).0, 0);
    let csv = dir.path().join("trajectory.csv");
    let (code, out, err) = espkit(&["detect", "--traj", csv.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let report: Value = serde_json::from_str(&out).unwrap();
    let events = report["events"].as_array().unwrap();
    assert_eq!(events.len(), 1, "{out}");
    assert_eq!(events[0]["kind"], "TFD");
    assert_eq!(events[0]["trajectory_label"], "p4");
    let (d, b) = (events[0]["t_death"].as_f64().unwrap(), events[0]["t_birth"].as_f64().unwrap());
    assert!(d < 0.0 && b > 0.0 && (d + b).abs() < 1e-6, "{d} {b}");
}

#[test]
fn detection_survives_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(evolve(dir.path(), &W14_MINUS).0, 0);
    let text = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let traj = parse_trajectory_csv(text.as_bytes(), "a").unwrap();
    let again = parse_trajectory_csv(trajectory_csv(&traj).as_bytes(), "a").unwrap();
    let r1 = analyse_trajectory(&traj, 1e-9, None, 1.5, None).unwrap();
    let r2 = analyse_trajectory(&again, 1e-9, None, 1.5, None).unwrap();
    assert_eq!(r1, r2);
    let m = read_json(&dir.path().join("manifest.json"));
    assert_eq!(m["detection"]["events"].as_array().unwrap().len(), r1.events.len());
}

#[test]
fn synthetic_triangle_gives_one_tfd() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("t,negativity,concurrence,cne,negative_count\n");
    for i in 0..=100 {
        let t = i as f64 * 0.1;
        let n = ((t - 5.0).abs() - 2.0).max(0.0);
        text.push_str(&format!("{t:?},{n:?},{:?},{:?},{}\n", 2.0 * n, -n, (n > 0.0) as u8));
    }
    let path = dir.path().join("tri.csv");
    fs::write(&path, text).unwrap();
    let (code, out, err) = espkit(&["detect", "--traj", path.to_str().unwrap(), "--min-duration", "0.5"]);
    assert_eq!(code, 0, "{err}");
    let report: Value = serde_json::from_str(&out).unwrap();
    let events = report["events"].as_array().unwrap();
    assert_eq!(events.len(), 1);
    assert_eq!(events[0]["kind"], "TFD");
    assert!((events[0]["t_death"].as_f64().unwrap() - 3.0).abs() < 1e-8);
    assert!((events[0]["t_birth"].as_f64().unwrap() - 7.0).abs() < 1e-8);
}

#[test]
fn constant_zero_record_has_no_events() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("t,negativity,concurrence,cne,negative_count\n");
    for i in 0..50 {
        text.push_str(&format!("{:?},0.0,0.0,0.0,0\n", i as f64 * 0.1));
    }
    let path = dir.path().join("zero.csv");
    fs::write(&path, text).unwrap();
    let (code, out, _) = espkit(&["detect", "--traj", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    let report: Value = serde_json::from_str(&out).unwrap();
    assert!(report["events"].as_array().unwrap().is_empty());
}

#[test]
fn unknown_config_key_exits_with_usage_status() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"model": {"j": [1, 1, 1], "spin": 0.5}}"#).unwrap();
    let (code, _, err) = espkit(&["evolve", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("model"), "{err}");
    assert!(!dir.path().join("trajectory.csv").exists());
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(espkit(&["repro", "fig9"]).0, 2);
    assert_eq!(espkit(&["frobnicate"]).0, 2);
    assert_eq!(espkit(&["detect", "--traj", "/nonexistent/x.csv"]).0, 2);
    assert_eq!(espkit(&["fit", "--window", "1e-2:1e-3"]).0, 2);
}

#[test]
fn malformed_csv_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "t,negativity,concurrence,cne,negative_count\n0,0,0,0,0\n0.1,x,0,0,0\n").unwrap();
    let (code, _, err) = espkit(&["detect", "--traj", path.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn fit_reports_table_coefficient() {
    let (code, out, err) = espkit(&[
        "fit",
        "--set",
        "model.j=[-0.5,-0.5,-1]",
        "--set",
        "state.kind=mixed_weighting",
        "--set",
        "state.weighting_id=W2",
    ]);
    assert_eq!(code, 0, "{err}");
    let r: Value = serde_json::from_str(&out).unwrap();
    let c = r["coefficients"].as_array().unwrap();
    assert!((c[0].as_f64().unwrap() + 0.005).abs() < 1e-6);
    assert!((c[2].as_f64().unwrap() / 0.0025 - 1.0).abs() < 1e-3);
}

#[test]
fn repro_table2_passes_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = espkit(&["repro", "table2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0, "{out}{err}");
    assert!(dir.path().join("table2.csv").exists());
    let r = read_json(&dir.path().join("table2.json"));
    assert_eq!(r["pass"], true);
    assert_eq!(r["checks"].as_array().unwrap().len(), 14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn override_values_round_trip(x in -1e6f64..1e6, key in "[a-z_]{1,8}") {
        let (keys, v) = parse_override(&format!("evolution.{key}={x:?}")).unwrap();
        prop_assert_eq!(keys, vec!["evolution".to_string(), key]);
        prop_assert_eq!(v.as_f64(), Some(x));
    }

    #[test]
    fn csv_round_trip_preserves_detection(
        values in prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..1.0], 12..60),
    ) {
        let mut text = String::from("t,negativity,concurrence,cne,negative_count\n");
        for (i, n) in values.iter().enumerate() {
            text.push_str(&format!("{:?},{n:?},{:?},{:?},{}\n", i as f64 * 0.01, 2.0 * n, -n, (*n > 0.0) as u8));
        }
        let a = parse_trajectory_csv(text.as_bytes(), "p").unwrap();
        let b = parse_trajectory_csv(trajectory_csv(&a).as_bytes(), "p").unwrap();
        prop_assert_eq!(trajectory_csv(&b), text);
        let ra = analyse_trajectory(&a, 1e-9, Some(0.05), 1.5, None).unwrap();
        let rb = analyse_trajectory(&b, 1e-9, Some(0.05), 1.5, None).unwrap();
        prop_assert_eq!(ra, rb);
    }
}

#[test]
fn fuzz_corpus_seeds_do_not_panic() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus");
    let seeds = |name: &str| -> Vec<Vec<u8>> {
        fs::read_dir(root.join(name))
            .unwrap()
            .map(|e| fs::read(e.unwrap().path()).unwrap())
            .collect()
    };
    for data in seeds("parse_config") {
        let _ = espkit::parse_config(std::str::from_utf8(&data).unwrap());
    }
    for data in seeds("parse_trajectory_csv") {
        if let Ok(t) = parse_trajectory_csv(&data, "seed") {
            let _ = analyse_trajectory(&t, 1e-9, None, 1.5, None);
        }
    }
    for data in seeds("parse_override") {
        let _ = espkit::load_config(None, &[String::from_utf8(data).unwrap()]);
    }
    for data in seeds("parse_weighting_id") {
        let _ = std::str::from_utf8(&data).unwrap().parse::<espkit_core::states::WeightingId>();
    }
}
