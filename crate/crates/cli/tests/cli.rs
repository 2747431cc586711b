use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gridsync::fixture_dir;

fn gridsync(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridsync"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn gridsync")
}

fn run_cfg(dir: &Path) -> PathBuf {
    let path = dir.join("run.json");
    let input = fixture_dir().join("grid8x8.cng1");
    let cfg = serde_json::json!({
        "input": { "path": input, "format": "binary" },
        "variable": "precip",
        "seasons": ["JJA", "DJF"],
        "seed": 42,
        "render": { "enabled": false }
    });
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_regenerates_committed_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture_dir().join("synth.json");
    let out = gridsync(&["synth", "--config", s(&cfg), "--out", s(tmp.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fresh = fs::read(tmp.path().join("grid8x8.cng1")).unwrap();
    let committed = fs::read(fixture_dir().join("grid8x8.cng1")).unwrap();
    assert!(fresh == committed, "regenerated fixture differs from the committed one");
    let manifest = fs::read_to_string(tmp.path().join("synth.manifest.json")).unwrap();
    assert!(manifest.contains("sha256"));
}

#[test]
fn stage_by_stage_matches_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = run_cfg(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let out = gridsync(&["pipeline", "-c", s(&cfg), "--out", s(&a)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for stage in ["events", "network", "metrics", "surrogate", "correct", "compare"] {
        let out = gridsync(&[stage, "-c", s(&cfg), "--out", s(&b), "--threads", "2"]);
        assert!(out.status.success(), "{stage}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let (fa, fb) = (files(&a), files(&b));
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (k, v) in &fa {
        assert!(fb[k] == *v, "{} differs", k.display());
    }
    let report: serde_json::Value = serde_json::from_slice(&fa[Path::new("report.json")]).unwrap();
    assert!(report["EPE"]["JJA"]["DC"]["paired_t"]["p"].is_number());
    // Temperature networks were not requested, so their cells are null.
    assert!(report["ETE"]["JJA"]["DC"].is_null());
    let manifest = String::from_utf8(fa[Path::new("compare.manifest.json")].clone()).unwrap();
    assert!(manifest.contains("report.json") && manifest.contains("sha256"));
}

#[test]
fn seed_override_changes_outputs_and_rerun_does_not() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = run_cfg(tmp.path());
    let run = |dir: &str, seed: &str| {
        let out_dir = tmp.path().join(dir);
        let out = gridsync(&["pipeline", "-c", s(&cfg), "--out", s(&out_dir), "--seed", seed]);
        assert!(out.status.success());
        files(&out_dir)
    };
    let first = run("x", "5");
    assert_eq!(first, run("y", "5"));
    let other = run("z", "6");
    assert_ne!(first[Path::new("JJA/network.csv")], other[Path::new("JJA/network.csv")]);
}

#[test]
fn render_writes_maps() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = run_cfg(tmp.path());
    let out_dir = tmp.path().join("r");
    assert!(gridsync(&["pipeline", "-c", s(&cfg), "--out", s(&out_dir)]).status.success());
    let out = gridsync(&["render", "-c", s(&cfg), "--out", s(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let maps: Vec<_> = fs::read_dir(out_dir.join("maps")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert!(maps.iter().any(|m| m.to_string_lossy() == "JJA_DC_divide.png"), "{maps:?}");
}

#[test]
fn invalid_config_exits_1_and_lists_every_problem() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    fs::write(
        &cfg,
        r#"{ "variable": "precip", "seasons": ["JJA"], "alpha": 2.0, "threshold": { "percentile": 140.0, "direction": "above", "support": "all" } }"#,
    )
    .unwrap();
    let out = gridsync(&["pipeline", "-c", s(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    for word in ["input", "seed", "alpha", "threshold"] {
        assert!(err.contains(word), "missing {word} in: {err}");
    }
}

#[test]
fn unknown_field_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    fs::write(&cfg, r#"{ "seed": 1, "bogus": true }"#).unwrap();
    let out = gridsync(&["events", "-c", s(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn missing_upstream_artifacts_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = run_cfg(tmp.path());
    let out = gridsync(&["metrics", "-c", s(&cfg), "--out", s(&tmp.path().join("empty"))]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bad_arguments_exit_1() {
    assert_eq!(gridsync(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(gridsync(&["--help"]).status.code(), Some(0));
}
