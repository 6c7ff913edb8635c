//! End-to-end runs of the `ipp` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ipp_core::config::Config;
use ipp_core::policy::Actor;

fn workspace_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn ipp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ipp")).args(args).output().expect("binary runs")
}

/// Smoke configuration shrunk to a couple of short blocks.
fn tiny_config(dir: &Path) -> PathBuf {
    let mut cfg = Config::load(&workspace_file("configs/smoke.cfg")).unwrap();
    cfg.train.missions = 4;
    cfg.train.rollout_block = 32;
    cfg.train.checkpoint_every = 1;
    let path = dir.join("tiny.cfg");
    std::fs::write(&path, cfg.to_text()).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn training_is_reproducible_and_writes_manifest_first() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = ipp(&["train", "--config", s(&cfg), "--seed", "7", "--out", s(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let log_a = std::fs::read(a.join("train_log.csv")).unwrap();
    assert_eq!(log_a, std::fs::read(b.join("train_log.csv")).unwrap());
    assert!(String::from_utf8(log_a).unwrap().starts_with("block,missions_done,env_interactions"));
    let manifest = std::fs::read_to_string(a.join("manifest.txt")).unwrap();
    assert!(manifest.contains("seed = 7"));
    // the recorded configuration reproduces the run
    let c = dir.path().join("c");
    let o = ipp(&["train", "--config", s(&a.join("config.cfg")), "--seed", "7", "--out", s(&c)]);
    assert!(o.status.success());
    assert_eq!(
        std::fs::read(a.join("train_log.csv")).unwrap(),
        std::fs::read(c.join("train_log.csv")).unwrap()
    );
    assert!(a.join("checkpoints/block_00000/actor.ckpt").exists());
    assert!(a.join("checkpoints/final/critic.ckpt").exists());
}

#[test]
fn state_value_variant_saves_value_network() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("qv");
    let o = ipp(&["train", "--config", s(&cfg), "--variant", "central-qv", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(out.join("config.cfg")).unwrap().contains("train.variant = central-qv"));
    assert!(out.join("checkpoints/final/value.ckpt").exists());
}

#[test]
fn missing_config_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(workspace_file("configs/smoke.cfg")).unwrap();
    let cut: String = text.lines().filter(|l| !l.starts_with("train.gamma")).map(|l| format!("{l}\n")).collect();
    let path = dir.path().join("cut.cfg");
    std::fs::write(&path, cut).unwrap();
    let o = ipp(&["train", "--config", s(&path), "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("train.gamma"));
}

#[test]
fn evaluate_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e");
    let o = ipp(&["evaluate", "--planner", "learned", "--missions", "2", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let o = ipp(&["evaluate", "--planner", "coverage", "--missions", "1", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let o = ipp(&["evaluate", "--planner", "nonsense", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn coverage_results_do_not_depend_on_communication() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = workspace_file("configs/smoke.cfg");
    let run = |radius: &str| {
        let out = dir.path().join(format!("r{radius}"));
        let o = ipp(&[
            "evaluate", "--config", s(&cfg), "--planner", "coverage", "--agents", "4", "--comm-radius", radius,
            "--missions", "4", "--out", s(&out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out.join("benchmark.csv")).unwrap()
    };
    let zero = run("0");
    assert_eq!(zero, run("25"));
    assert_eq!(zero, run("inf"));
    assert_eq!(String::from_utf8(zero).unwrap().lines().count(), 4);
}

#[test]
fn learned_planner_and_map_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let t = dir.path().join("t");
    assert!(ipp(&["train", "--config", s(&cfg), "--out", s(&t)]).status.success());
    let out = dir.path().join("e");
    let weights = t.join("checkpoints/final/actor.ckpt");
    let o = ipp(&[
        "evaluate", "--config", s(&cfg), "--planner", "learned,greedy-ig", "--actor-weights", s(&weights),
        "--missions", "2", "--dump-maps", "--out", s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("benchmark.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("learned,"));
    assert!(out.join("missions/00_learned_001_belief.pgm").exists());
    assert!(out.join("missions/01_greedy-ig_000_episode.csv").exists());
}

#[test]
fn ablation_removes_planes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("ab");
    let o = ipp(&[
        "ablate-features", "--config", s(&cfg), "--toggle", "entropy_map=off", "--missions", "2", "--out", s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let base = Actor::load(&out.join("base/checkpoints/final/actor.ckpt")).unwrap();
    let cut = Actor::load(&out.join("entropy_map-off/checkpoints/final/actor.ckpt")).unwrap();
    assert!(base.manifest.iter().any(|m| m == "entropy_map"));
    assert!(!cut.manifest.iter().any(|m| m == "entropy_map"));
    assert_eq!(cut.net.in_channels + 1, base.net.in_channels);
    assert_eq!(std::fs::read_to_string(out.join("ablation.csv")).unwrap().lines().count(), 3);

    let o = ipp(&["ablate-features", "--config", s(&cfg), "--toggle", "no_such_plane=off", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn ingest_thresholds_rasters() {
    let dir = tempfile::tempdir().unwrap();
    let raster = dir.path().join("r.txt");
    std::fs::write(&raster, "3 2 0.08\n20 26 25\n24.9 30 10\n").unwrap();
    let out = dir.path().join("i");
    let o = ipp(&["ingest", "--raster", s(&raster), "--threshold", "25", "--out", s(&out)]);
    assert!(o.status.success());
    let gt = std::fs::read_to_string(out.join("ground_truth.txt")).unwrap();
    assert_eq!(gt, "3 2 0.08\n0 1 1\n0 1 0\n");

    let o = ipp(&["ingest", "--raster", s(&raster), "--threshold", "99", "--out", s(&out)]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));

    std::fs::write(&raster, "3 2 0.08\n20 26 25\n24.9 30\n").unwrap();
    let o = ipp(&["ingest", "--raster", s(&raster), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn coverage_altitude_sweep_lists_every_level() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let o = ipp(&[
        "sweep-coverage-altitude", "--config", s(&workspace_file("configs/smoke.cfg")), "--missions", "3", "--out",
        s(&out),
    ]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(out.join("coverage_altitude.csv")).unwrap();
    let alts: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(alts, ["5", "10", "15"]);
}
