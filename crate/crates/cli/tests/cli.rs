use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn iht(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iht"))
        .args(args)
        .current_dir(dir)
        .env_remove("IHT_PRESET")
        .env_remove("IHT_KAPPA")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = iht(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    iht(dir, args).status.code().expect("exited normally")
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

/// Data rows of a CSV (header dropped).
fn rows(text: &str) -> Vec<&str> {
    text.lines().skip(1).collect()
}

#[test]
fn toy_generation_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(d, &["generate-toy", "--p", "0.5", "--seed", "7", "--output", "a.csv", "--truth", "g.csv"]);
    ok(d, &["generate-toy", "--p", "0.5", "--seed", "7", "--output", "b.csv"]);
    assert_eq!(read(d, "a.csv"), read(d, "b.csv"));
    assert_eq!(rows(&read(d, "a.csv")).len(), 33);
    assert_eq!(rows(&read(d, "g.csv")).len(), 33);
    assert!(d.join("a.csv.manifest.json").exists());
    let other = ok(d, &["generate-toy", "--p", "0.5", "--seed", "8"]);
    assert_ne!(other, read(d, "a.csv"));
}

#[test]
fn bad_flags_are_usage_errors() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    assert_eq!(code(d, &["generate-toy", "--p", "1.1"]), 1);
    assert_eq!(code(d, &["generate-toy", "--bogus"]), 1);
    ok(d, &["generate-toy", "--output", "t.csv"]);
    assert_eq!(code(d, &["track", "--input", "t.csv", "--algo", "foo"]), 1);
    assert_eq!(code(d, &["track", "--input", "t.csv", "--algo", "ksp"]), 1);
    assert_eq!(code(d, &["track", "--input", "t.csv", "--set", "kapa=3"]), 1);
    assert_eq!(code(d, &["track", "--input", "t.csv", "--set", "kappa"]), 1);
    assert_eq!(code(d, &["sweep", "--sweep", "bogus=1", "--reps", "1"]), 1);
    assert_eq!(code(d, &["sweep", "--sweep", "p=0.5", "--dataset", "scene", "--reps", "1"]), 1);
    assert_eq!(code(d, &["sweep", "--sweep", "kappa=1", "--variants", "nope", "--reps", "1"]), 1);
}

#[test]
fn bad_inputs_are_input_errors() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    assert_eq!(code(d, &["track", "--input", "missing.csv"]), 2);
    fs::write(d.join("bad.csv"), "frame,x,f1\n0,1,2\n").unwrap();
    assert_eq!(code(d, &["track", "--input", "bad.csv"]), 2);
    fs::write(d.join("nan.csv"), "frame,x,f1,c1\n0,abc,0,0\n").unwrap();
    assert_eq!(code(d, &["track", "--input", "nan.csv"]), 2);
    fs::write(d.join("conf.csv"), "frame,x,f1,c1\n0,1,0,1.5\n").unwrap();
    assert_eq!(code(d, &["track", "--input", "conf.csv"]), 2);
}

#[test]
fn single_target_gives_one_track() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let mut text = String::from("frame,x,f1,c1\n");
    for f in 0..10 {
        text.push_str(&format!("{f},{},0,0\n", 2 * f));
    }
    fs::write(d.join("one.csv"), text).unwrap();
    for mode in ["offline", "incremental"] {
        let out = ok(d, &["track", "--input", "one.csv", "--mode", mode]);
        let tracks: Vec<&str> = rows(&out);
        assert_eq!(tracks.len(), 10, "{mode}");
        assert!(tracks.iter().all(|r| r.starts_with("0,")), "{mode}: {out}");
    }
}

#[test]
fn ksp_extracts_k_tracks() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(d, &["generate-toy", "--seed", "3", "--output", "t.csv"]);
    let out = ok(d, &["track", "--input", "t.csv", "--algo", "ksp", "--k", "3", "--set", "preset=toy"]);
    let mut ids: Vec<&str> = rows(&out).iter().map(|r| r.split(',').next().unwrap()).collect();
    ids.dedup();
    assert_eq!(ids, ["0", "1", "2"]);
}

#[test]
fn tracking_is_deterministic_and_replayable() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(d, &["generate-toy", "--p", "0.7", "--seed", "1", "--output", "t.csv", "--truth", "g.csv"]);
    let args = ["track", "--input", "t.csv", "--set", "preset=toy", "--set", "schedule=random", "--seed", "5"];
    ok(d, &[&args[..], &["--output", "a.csv", "--graph", "gr"]].concat());
    ok(d, &[&args[..], &["--output", "b.csv"]].concat());
    assert_eq!(read(d, "a.csv"), read(d, "b.csv"));
    assert!(!rows(&read(d, "gr.nodes.csv")).is_empty());

    let manifest: serde_json::Value = serde_json::from_str(&read(d, "a.csv.manifest.json")).unwrap();
    assert_eq!(manifest["command"], "track");
    assert_eq!(manifest["seed"], 5);
    assert!(manifest["config"].as_str().unwrap().contains("schedule = \"random\""));

    // The replay uses the recorded configuration, not the environment.
    let out = Command::new(env!("CARGO_BIN_EXE_iht"))
        .args(["replay", "--manifest", "a.csv.manifest.json"])
        .current_dir(d)
        .env("IHT_KAPPA", "9")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read(d, "a.csv"), read(d, "b.csv"));

    fs::write(d.join("a.csv"), "track_id,frame,x\n").unwrap();
    assert_eq!(code(d, &["replay", "--manifest", "a.csv.manifest.json"]), 3);
}

#[test]
fn evaluation_of_ground_truth_is_perfect() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(d, &["generate-scene", "--frames", "30", "--targets", "3", "--output", "s.csv", "--truth", "g.csv"]);
    // Ground truth doubles as a trajectory file once its columns are renamed.
    let gt = read(d, "g.csv").replacen("frame,target_id", "frame,track_id", 1);
    let traj: String = std::iter::once("track_id,frame,x,y".to_string())
        .chain(rows(&gt).iter().map(|r| {
            let f: Vec<&str> = r.split(',').collect();
            format!("{},{},{},{}", f[1], f[0], f[2], f[3])
        }))
        .collect::<Vec<_>>()
        .join("\n");
    fs::write(d.join("h.csv"), traj).unwrap();
    let report = ok(d, &["evaluate", "--truth", "g.csv", "--input", "h.csv", "--events", "ev.csv"]);
    let header: Vec<&str> = report.lines().next().unwrap().split(',').collect();
    let values: Vec<&str> = report.lines().nth(1).unwrap().split(',').collect();
    let get = |k: &str| values[header.iter().position(|h| *h == k).unwrap()];
    assert_eq!(get("mota"), "1.0");
    assert_eq!(get("motp"), "0.0");
    assert_eq!(get("gt_count"), "90");
    assert_eq!(rows(&read(d, "ev.csv")).len(), 90);
}

#[test]
fn sweeps_emit_one_row_per_value_and_variant() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let one = ok(d, &["sweep", "--sweep", "kappa=3", "--reps", "1", "--variants", "iht-aware"]);
    assert_eq!(rows(&one).len(), 1);
    assert!(one.starts_with("param,value,variant,runs,mota_mean,mota_std"));

    let args = ["sweep", "--sweep", "kappa=1,3,5,7", "--reps", "4", "--variants", "iht-aware,ksp-aware"];
    let serial = ok(d, &args);
    assert_eq!(rows(&serial).len(), 8);
    let parallel = ok(d, &[&args[..], &["--workers", "3"]].concat());
    assert_eq!(serial, parallel);

    let p = ok(d, &["sweep", "--sweep", "p=0,0.5,0.9", "--reps", "2"]);
    assert_eq!(rows(&p).len(), 12);

    let scene = ok(
        d,
        &["sweep", "--dataset", "scene", "--frames", "40", "--targets", "3", "--sweep", "tau_max=5", "--reps", "1", "--variants", "iht-aware"],
    );
    assert_eq!(rows(&scene).len(), 1);
}

#[test]
fn environment_overrides_config() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    fs::write(d.join("c.toml"), "preset = \"toy\"\nkappa = 3\n").unwrap();
    let base = ok(d, &["config", "--config", "c.toml"]);
    assert!(base.contains("kappa = 3.0") && base.contains("tau_max = 1"));
    let out = Command::new(env!("CARGO_BIN_EXE_iht"))
        .args(["config", "--config", "c.toml", "--set", "gamma=2"])
        .current_dir(d)
        .env("IHT_KAPPA", "6")
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("kappa = 6.0") && text.contains("gamma = 2.0") && text.contains("tau_max = 1"));
    fs::write(d.join("bad.toml"), "kapa = 3\n").unwrap();
    assert_eq!(code(d, &["config", "--config", "bad.toml"]), 1);
}
