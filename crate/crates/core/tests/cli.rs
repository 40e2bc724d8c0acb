use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn recom(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_recom"))
        .current_dir(dir)
        .env_remove("RECOM_OUT_DIR")
        .args(args)
        .output()
        .unwrap()
}

fn error_line(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|_| panic!("not a JSON error line: {text}"))
}

fn synth(dir: &Path) {
    let out = recom(dir, &["synth", "--out", "g.json", "--regions-out", "regions.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn subdirs(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn run_writes_manifest_and_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    let out = recom(d, &["run", "--graph", "g.json", "--k", "5", "--steps", "50", "--epsilon", "0.05", "--seed", "1", "--contests", "SYNTH", "--out", "r"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["manifest.json", "histogram_SYNTH.csv", "scale_grid_SYNTH.csv", "seats_votes.csv", "summary.csv", "vote_shares.csv", "seed_plan.json"] {
        assert!(d.join("r").join(f).exists(), "missing {f}");
    }
    let hist = fs::read_to_string(d.join("r/histogram_SYNTH.csv")).unwrap();
    assert!(hist.starts_with("k,seats,count,frequency\n"));
    let total: u64 = hist.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(total, 50);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(d.join("r/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["k_list"], serde_json::json!([5]));
    assert_eq!(manifest["graph_digest"].as_str().unwrap().len(), 64);
    assert!(manifest["seed_rule"].as_str().unwrap().contains("splitmix64"));
}

#[test]
fn out_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    let out = Command::new(env!("CARGO_BIN_EXE_recom"))
        .current_dir(d)
        .env("RECOM_OUT_DIR", "from_env")
        .args(["run", "--graph", "g.json", "--k", "2", "--steps", "5", "--seed", "3"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(d.join("from_env/manifest.json").exists());
}

#[test]
fn multiscale_makes_one_directory_per_k() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    let out = recom(
        d,
        &["multiscale", "--graph", "g.json", "--k-list", "2,5,10,20,50,100,203,220", "--steps", "2", "--epsilon", "0.5", "--seed", "5", "--out", "m"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(subdirs(&d.join("m")), ["k_10", "k_100", "k_2", "k_20", "k_203", "k_220", "k_5", "k_50"]);
    let grid = fs::read_to_string(d.join("m/scale_grid_SYNTH.csv")).unwrap();
    let mut flagged: Vec<&str> = grid.lines().filter(|l| l.ends_with(",true")).map(|l| l.split(',').next().unwrap()).collect();
    flagged.dedup();
    assert_eq!(flagged, ["50", "203"]);
}

#[test]
fn regions_produce_four_panels() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    let out = recom(
        d,
        &["regions", "--graph", "g.json", "--spec", "regions.json", "--kw", "6", "--ke", "12", "--kfull", "18", "--steps", "20", "--epsilon", "0.05", "--seed", "9", "--out", "reg"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(subdirs(&d.join("reg")), ["East", "West", "full", "pairs"]);
    let pairs = fs::read_to_string(d.join("reg/pairs/histogram_SYNTH.csv")).unwrap();
    let total: u64 = pairs.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(total, 400);
    assert!(pairs.lines().skip(1).all(|l| l.starts_with("18,")));
    let summary = fs::read_to_string(d.join("reg/summary.csv")).unwrap();
    let panels: Vec<&str> = summary.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(panels, ["West", "East", "Full", "Pairs"]);
    let votes = fs::read_to_string(d.join("reg/region_votes.csv")).unwrap();
    assert!(votes.contains("SYNTH,Full,90000,90000,0.500000"));
}

#[test]
fn stats_writes_svg() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    assert!(recom(d, &["multiscale", "--graph", "g.json", "--k-list", "2..4", "--steps", "5", "--seed", "1", "--epsilon", "0.05", "--out", "m"]).status.success());
    let before = fs::read(d.join("m/summary.csv")).unwrap();
    let out = recom(d, &["stats", "--dir", "m", "--svg"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::read_to_string(d.join("m/scale_grid_SYNTH.svg")).unwrap().starts_with("<svg"));
    assert!(d.join("m/seats_votes.svg").exists());
    assert_eq!(fs::read(d.join("m/summary.csv")).unwrap(), before);
}

#[test]
fn replay_reproduces_and_detects_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    assert!(recom(d, &["multiscale", "--graph", "g.json", "--k-list", "2..4", "--steps", "30", "--seed", "2", "--epsilon", "0.05", "--out", "m"]).status.success());
    let ok = recom(d, &["replay", "--manifest", "m/manifest.json", "--out", "again"]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    assert_eq!(fs::read(d.join("m/manifest.json")).unwrap(), fs::read(d.join("again/manifest.json")).unwrap());

    let victim = d.join("m/k_3/histogram_SYNTH.csv");
    let mut text = fs::read_to_string(&victim).unwrap();
    text.push_str("3,3,0,0.000000\n");
    fs::write(&victim, text).unwrap();
    let bad = recom(d, &["replay", "--manifest", "m/manifest.json", "--out", "again2"]);
    assert_eq!(bad.status.code(), Some(3));
    assert_eq!(error_line(&bad)["error"]["kind"], "ReplayMismatch");

    let g = fs::read_to_string(d.join("g.json")).unwrap().replacen("\"population\": 1", "\"population\": 2", 1);
    fs::write(d.join("g2.json"), g).unwrap();
    let bad = recom(d, &["replay", "--manifest", "m/manifest.json", "--graph", "g2.json", "--out", "again3"]);
    assert_eq!(error_line(&bad)["error"]["kind"], "DigestMismatch");
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);

    let out = recom(d, &["run", "--graph", "g.json", "--k", "2", "--steps", "5", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["error"]["exit_code"], 2);
    assert!(!d.join("x").exists());

    let out = recom(d, &["multiscale", "--graph", "g.json", "--k-list", "5..2", "--steps", "5", "--seed", "1", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));

    let out = recom(d, &["run", "--graph", "g.json", "--k", "2", "--steps", "5", "--seed", "1", "--epsilon", "-1", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));

    fs::write(
        d.join("split.json"),
        r#"{"schema_version":1,"metadata":{"contests":[]},
            "nodes":[{"id":"p1","population":1,"vap":1,"county":"c"},{"id":"p2","population":1,"vap":1,"county":"c"},
                     {"id":"island","population":1,"vap":1,"county":"c"}],
            "links":[{"source":"p1","target":"p2"}]}"#,
    )
    .unwrap();
    let out = recom(d, &["run", "--graph", "split.json", "--k", "2", "--steps", "5", "--seed", "1", "--out", "x"]);
    assert_eq!(out.status.code(), Some(3));
    let e = error_line(&out);
    assert_eq!(e["error"]["kind"], "DisconnectedGraph");
    assert!(e["error"]["message"].as_str().unwrap().contains("island"));

    let out = recom(d, &["run", "--graph", "g.json", "--k", "2", "--steps", "5", "--seed", "1", "--contests", "NOPE", "--out", "x"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_line(&out)["error"]["kind"], "SchemaMismatch");

    assert!(recom(d, &["synth", "--plain", "--rows", "4", "--cols", "4", "--out", "p.json"]).status.success());
    let out = recom(d, &["run", "--graph", "p.json", "--k", "3", "--steps", "5", "--seed", "1", "--epsilon", "0", "--out", "x"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_line(&out)["error"]["kind"], "SeedFailure");
}

#[test]
fn seed_command_matches_run_seed_plan() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    assert!(recom(d, &["seed", "--graph", "g.json", "--k", "4", "--seed", "11", "--epsilon", "0.05", "--out", "plan.json"]).status.success());
    assert!(recom(d, &["run", "--graph", "g.json", "--k", "4", "--steps", "1", "--seed", "11", "--epsilon", "0.05", "--out", "r"]).status.success());
    let a: Value = serde_json::from_slice(&fs::read(d.join("plan.json")).unwrap()).unwrap();
    let b: Value = serde_json::from_slice(&fs::read(PathBuf::from(d).join("r/seed_plan.json")).unwrap()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a["assignment"].as_object().unwrap().len(), 900);
}
