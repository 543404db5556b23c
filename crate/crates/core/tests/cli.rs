use std::process::{Command, Output};

fn imd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_imd"))
        .args(args)
        .output()
        .expect("spawn imd")
}

#[test]
fn missing_config_exits_2_and_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("absent.json");
    let out = imd(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.json"));
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"version": 1, "imd": {"steps": 0}}"#).unwrap();
    let out = imd(&[
        "bench",
        "--config",
        path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.json"));
}

#[test]
fn usage_errors_exit_2_and_help_exits_0() {
    assert_eq!(imd(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(imd(&["run", "--seed", "x"]).status.code(), Some(2));
    assert_eq!(imd(&["--help"]).status.code(), Some(0));
}

#[test]
fn gradcheck_and_selftest_succeed() {
    let dir = tempfile::tempdir().unwrap();
    let out = imd(&["gradcheck", "--quiet", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("gradcheck.json")).unwrap()).unwrap();
    assert_eq!(report["groups"].as_array().unwrap().len(), 13);
    assert_eq!(imd(&["selftest", "--trials", "50", "--quiet"]).status.code(), Some(0));
}

#[test]
fn bench_writes_scenes_at_the_target_rate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"version": 1, "scene_count": 6, "target_rate": 0.6}"#).unwrap();
    let out = imd(&[
        "bench",
        "--quiet",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let scenes = imd_core::harness::benchmark::load_benchmark(
        &std::fs::read_to_string(dir.path().join("benchmark.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(scenes.len(), 6);
    assert!(scenes.iter().all(|s| (s.occlusion_rate() - 0.6).abs() <= 0.02));
}

#[test]
fn seed_flag_changes_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let p = |s: &str| dir.path().join(s).to_string_lossy().into_owned();
    for (seed, d) in [("7", "a"), ("8", "b")] {
        assert_eq!(
            imd(&["run", "--quiet", "--seed", seed, "--out", &p(d)]).status.code(),
            Some(0)
        );
    }
    let read = |d: &str| std::fs::read(dir.path().join(d).join("complete.pgm")).unwrap();
    assert_ne!(read("a"), read("b"));
}
