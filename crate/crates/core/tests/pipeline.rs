use rhs_slam::config::{Mode, RunConfig};
use rhs_slam::io::RawDump;
use rhs_slam::pipeline::{load_or_build_bank, metrics_from_dir, prepare_beams, simulate_with, write_outcome};

// Small optimized surface: 12 elements, 15° slots, the full trajectory with
// few particles.
fn small(dir: &std::path::Path) -> RunConfig {
    let mut cfg: RunConfig = RunConfig::from_json(
        r#"{"aperture": {"elements": 12}, "grid": {"step_deg": 15.0},
            "scenario": {"cycles": 50}, "slam": {"particles": 10},
            "mode": "rhs-optimized", "dump_raw_cycles": [1]}"#,
    )
    .unwrap();
    cfg.output_dir = dir.join("out");
    cfg.bank_dir = Some(dir.join("banks"));
    cfg
}

#[test]
fn optimized_run_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());

    let (bank, rebuilt) = load_or_build_bank(&cfg).unwrap();
    assert!(rebuilt);
    assert_eq!(bank.slot_count, 6);
    assert!(!load_or_build_bank(&cfg).unwrap().1, "second load comes from the cache");

    let beams = prepare_beams(&cfg).unwrap();
    assert_eq!(beams.bank_key.as_deref(), Some(bank.geometry_hash.as_str()));
    let out = simulate_with(&cfg, beams).unwrap();
    let r = &out.report;
    assert_eq!(r.mode, Mode::RhsOptimized);
    assert_eq!(r.cycles, 50);
    assert_eq!(out.trajectory.len(), 50);
    assert!(r.trajectory_rmse.is_finite());
    assert!(r.points > 0);
    assert_eq!(out.raw.len(), 1);

    write_outcome(&out, &cfg.output_dir).unwrap();
    let raw = RawDump::load(&cfg.output_dir.join("raw"), "cycle_0001").unwrap();
    assert_eq!(raw, out.raw[0]);
    assert_eq!(raw.header.radars, 4);
    assert_eq!(raw.header.slots, 6);

    let m = metrics_from_dir(&cfg.output_dir, &cfg).unwrap();
    assert_eq!(m.cycles, 50);
    assert!((m.trajectory_rmse - r.trajectory_rmse).abs() < 1e-9);
    assert_eq!(m.obstacles_found, r.obstacles_found);
}

#[test]
fn identical_configs_give_identical_outcomes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.scenario.cycles = 6;
    let a = simulate_with(&cfg, prepare_beams(&cfg).unwrap()).unwrap();
    let b = simulate_with(&cfg, prepare_beams(&cfg).unwrap()).unwrap();
    assert_eq!(a.trajectory, b.trajectory);
    assert_eq!(a.clouds, b.clouds);
    assert!(a.clouds.iter().any(|c| !c.points.is_empty()));
    assert_eq!(serde_json::to_string(&a.report).unwrap(), serde_json::to_string(&b.report).unwrap());

    cfg.seed += 1;
    let c = simulate_with(&cfg, prepare_beams(&cfg).unwrap()).unwrap();
    assert_ne!(a.clouds, c.clouds, "the seed reaches the noise");
}
