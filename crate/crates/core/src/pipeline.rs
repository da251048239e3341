//! Cycle loop: sense every slot of every radar, extract the cycle's point
//! cloud, then localize and map. Also the baseline comparison and the
//! parameter sweep.

use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Mode, RunConfig};
use crate::error::{Error, Result};
use crate::frame::{wrap_angle, Pose2};
use crate::io::{self, MapRow, RawDump, TrajectoryRow};
use crate::metrics;
use crate::pattern::{build_pattern_bank, random_feasible_pair, PatternBank};
use crate::pointcloud::{build_dictionary, extract_points, Dictionary, ExtractorSettings, MatchedFilter, PointCloud};
use crate::rhs::{HolographicPattern, PhaseOnlyPattern, Point2, Role, SlotBeam};
use crate::scene::{slot_seed, visible_obstacles, EchoSynthesizer, FrontEnd, Scenario, RADAR_MOUNTS};
use crate::seed::{self, Stream};
use crate::slam::{registration_loss, MapLandmark, Slam};

pub const REPORT_SCHEMA: &str = "rhs-slam/report/1";
pub const COMPARISON_SCHEMA: &str = "rhs-slam/comparison/1";
pub const SWEEP_SCHEMA: &str = "rhs-slam/sweep/1";

/// Per-slot beams of one radar type; all four radars share them.
#[derive(Clone, Debug)]
pub struct Beams {
    pub front: FrontEnd,
    pub slots: Vec<SlotBeam>,
    /// Cache key of the optimized pattern bank, when one was used.
    pub bank_key: Option<String>,
}

/// File name of a cached bank inside `dir`.
pub fn bank_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("bank-{}.json", &key[..16]))
}

/// Loads the optimized bank for `cfg` from the cache directory, building
/// and storing it when missing or stale. Returns the bank and whether it
/// was rebuilt.
pub fn load_or_build_bank(cfg: &RunConfig) -> Result<(PatternBank, bool)> {
    let (tx, rx) = cfg.rhs_geometry()?;
    let grid = cfg.scan_grid()?;
    let (power, sigma) = (cfg.power.tx_watts(), cfg.power.sigma());
    let key = PatternBank::key(&tx, &rx, &grid, &cfg.solver, power, sigma);
    let dir = cfg.bank_dir();
    let path = bank_path(&dir, &key);
    if let Ok(bank) = PatternBank::load(&path) {
        if bank.geometry_hash == key && bank.slot_count == grid.slot_count() {
            return Ok((bank, false));
        }
    }
    let results = build_pattern_bank(&grid, &tx, &rx, power, sigma, &cfg.solver)?;
    let bank = PatternBank::from_results(key, &grid, &results);
    std::fs::create_dir_all(&dir)?;
    bank.save(&path)?;
    Ok((bank, true))
}

pub fn prepare_beams(cfg: &RunConfig) -> Result<Beams> {
    let grid = cfg.scan_grid()?;
    let power = cfg.power.tx_watts();
    match cfg.mode {
        Mode::RhsOptimized => {
            let (tx, rx) = cfg.rhs_geometry()?;
            let (bank, _) = load_or_build_bank(cfg)?;
            let slots = (0..grid.slot_count())
                .map(|i| {
                    let (t, r) = bank.patterns(i)?;
                    Ok(SlotBeam::from_patterns(&t, &r, &tx, &rx))
                })
                .collect::<Result<_>>()?;
            Ok(Beams {
                front: FrontEnd { tx, rx },
                slots,
                bank_key: Some(bank.geometry_hash),
            })
        }
        Mode::RhsRandom => {
            let (tx, rx) = cfg.rhs_geometry()?;
            let m = tx.element_count();
            let slots = (0..grid.slot_count())
                .map(|i| {
                    let mut rng = seed::rng(cfg.seed, Stream::RandomPattern, &[i as u64]);
                    let (t, r) = random_feasible_pair(&mut rng, m, m, power);
                    let t = HolographicPattern::new(t, Role::Transmit, i)?;
                    let r = HolographicPattern::new(r, Role::Receive, i)?;
                    Ok(SlotBeam::from_patterns(&t, &r, &tx, &rx))
                })
                .collect::<Result<_>>()?;
            Ok(Beams {
                front: FrontEnd { tx, rx },
                slots,
                bank_key: None,
            })
        }
        Mode::PhasedArray => {
            let geom = cfg.phased_geometry()?;
            let amp = (power / geom.element_count() as f64).sqrt();
            let slots = grid
                .slot_directions()
                .into_iter()
                .map(|az| {
                    let w = PhaseOnlyPattern::steered(&geom, az).weights();
                    SlotBeam {
                        tx: w.iter().map(|v| v * amp).collect(),
                        rx: w,
                    }
                })
                .collect();
            Ok(Beams {
                front: FrontEnd {
                    tx: geom.clone(),
                    rx: geom,
                },
                slots,
                bank_key: None,
            })
        }
    }
}

/// Everything needed to turn a cycle index into a point cloud.
pub struct Sensor {
    pub scenario: Scenario,
    pub beams: Beams,
    pub dictionary: Dictionary,
    synth: EchoSynthesizer,
    filter: MatchedFilter,
    settings: ExtractorSettings,
    energy: f64,
    seed: u64,
}

impl Sensor {
    pub fn new(cfg: &RunConfig, beams: Beams) -> Result<Self> {
        let scenario = cfg.scenario()?;
        let synth = EchoSynthesizer::new(&scenario.waveform, scenario.max_range);
        let filter = MatchedFilter::new(&scenario.waveform, synth.signal_len());
        let dictionary = build_dictionary(
            &beams.slots,
            &beams.front,
            scenario.grid.fine_directions(cfg.pointcloud.oversample),
        );
        let energy = scenario.waveform.energy();
        // Normalized matched filtering leaves noise of variance Σ|w_R|²σ²/E
        // in each slot's profile.
        let noise_energy: f64 =
            beams.slots.iter().map(|b| b.rx_power()).sum::<f64>() * scenario.sigma * scenario.sigma / energy;
        let settings = cfg.extractor_settings(&scenario.waveform, &scenario.grid, noise_energy);
        Ok(Self {
            scenario,
            beams,
            dictionary,
            synth,
            filter,
            settings,
            energy,
            seed: cfg.seed,
        })
    }

    /// Received signal of every slot of `radar` at `cycle`.
    pub fn slot_signals(&self, cycle: usize, radar: usize) -> Vec<Vec<Complex64>> {
        let echoes = self.synth.prepare(&visible_obstacles(&self.scenario, cycle, radar));
        self.beams
            .slots
            .iter()
            .enumerate()
            .map(|(i, beam)| {
                echoes.synthesize(
                    beam,
                    &self.beams.front,
                    self.scenario.sigma,
                    slot_seed(self.seed, cycle, radar, i),
                )
            })
            .collect()
    }

    pub fn radar_cloud(&self, cycle: usize, radar: usize, signals: &[Vec<Complex64>]) -> Result<PointCloud> {
        extract_points(
            cycle,
            radar,
            signals,
            &self.filter,
            self.energy,
            &self.dictionary,
            &self.settings,
        )
    }

    /// The cycle's merged cloud over all radars, plus the raw signals when
    /// `keep_raw` is set.
    pub fn sense(&self, cycle: usize, keep_raw: bool) -> Result<(PointCloud, Option<RawDump>)> {
        let per_radar = (0..RADAR_MOUNTS.len())
            .into_par_iter()
            .map(|r| {
                let signals = self.slot_signals(cycle, r);
                let cloud = self.radar_cloud(cycle, r, &signals)?;
                Ok((cloud, keep_raw.then_some(signals)))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut cloud = PointCloud {
            cycle,
            points: Vec::new(),
        };
        let mut raw = Vec::new();
        for (c, s) in per_radar {
            cloud.points.extend(c.points);
            raw.extend(s);
        }
        let dump = if keep_raw {
            Some(RawDump::new(cycle, self.scenario.waveform.sample_rate, raw)?)
        } else {
            None
        };
        Ok((cloud, dump))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle: usize,
    pub pose_error_m: f64,
    pub heading_error_rad: f64,
    pub points: usize,
    pub effective_sample_size: f64,
    pub resampled: bool,
    pub registration_confident: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub mode: Mode,
    pub seed: u64,
    pub cycles: usize,
    pub trajectory_rmse: f64,
    pub landmark_rmse: Option<f64>,
    pub pointcloud_rmse: Option<f64>,
    pub registration_loss: f64,
    /// True obstacles with a mapped landmark within the association gate.
    pub obstacles_found: usize,
    pub obstacles: usize,
    pub landmarks: usize,
    pub points: usize,
    pub bank_key: Option<String>,
    pub per_cycle: Vec<CycleRecord>,
    /// The run's config with its output and cache locations cleared, so the
    /// report depends only on what was simulated.
    pub config: RunConfig,
}

/// In-memory result of one run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub trajectory: Vec<TrajectoryRow>,
    pub map: Vec<MapLandmark>,
    pub clouds: Vec<PointCloud>,
    pub raw: Vec<RawDump>,
}

/// Sensing and point-cloud extraction only, for every cycle.
pub fn sense_all(cfg: &RunConfig, beams: Beams) -> Result<(Sensor, Vec<PointCloud>)> {
    let sensor = Sensor::new(cfg, beams)?;
    let clouds = (0..sensor.scenario.cycles())
        .map(|z| sensor.sense(z, false).map(|c| c.0).map_err(|e| cycle_error(z, e)))
        .collect::<Result<_>>()?;
    Ok((sensor, clouds))
}

fn cycle_error(cycle: usize, e: Error) -> Error {
    Error::Cycle {
        cycle,
        source: Box::new(e),
    }
}

/// Runs every cycle with prepared beams, without touching the filesystem.
pub fn simulate_with(cfg: &RunConfig, beams: Beams) -> Result<RunOutcome> {
    cfg.validate()?;
    let bank_key = beams.bank_key.clone();
    let sensor = Sensor::new(cfg, beams)?;
    let truth = sensor.scenario.trajectory.clone();
    let mut slam = Slam::new(cfg.slam, truth[0], cfg.seed);
    let mut trajectory = Vec::with_capacity(truth.len());
    let mut clouds = Vec::with_capacity(truth.len());
    let mut raw = Vec::new();
    let mut per_cycle = Vec::with_capacity(truth.len());
    let mut motions = Vec::new();
    let mut true_motions = Vec::new();
    for (z, true_pose) in truth.iter().enumerate() {
        let keep = cfg.dump_raw_cycles.contains(&z);
        let (cloud, dump) = sensor.sense(z, keep).map_err(|e| cycle_error(z, e))?;
        raw.extend(dump);
        let est = slam.step(&cloud).map_err(|e| cycle_error(z, e))?;
        if let Some(r) = &est.registration {
            motions.push(r.motion);
            true_motions.push(truth[z - 1].between(true_pose));
        }
        per_cycle.push(CycleRecord {
            cycle: z,
            pose_error_m: (est.pose.position() - true_pose.position()).norm(),
            heading_error_rad: wrap_angle(est.pose.heading - true_pose.heading),
            points: cloud.len(),
            effective_sample_size: est.effective_sample_size,
            resampled: est.resampled,
            registration_confident: est.registration.is_none_or(|r| r.confident),
        });
        trajectory.push(TrajectoryRow::new(z, est.pose, *true_pose));
        clouds.push(cloud);
    }
    let map = slam.map();
    let estimates: Vec<Pose2> = trajectory.iter().map(|r| r.estimate()).collect();
    let obstacles: Vec<Point2> = sensor.scenario.obstacles.iter().map(|o| o.position).collect();
    let lm: Vec<Point2> = map.iter().map(|l| l.mean).collect();
    let report = RunReport {
        schema: REPORT_SCHEMA.into(),
        mode: cfg.mode,
        seed: cfg.seed,
        cycles: truth.len(),
        trajectory_rmse: metrics::trajectory_rmse(&estimates, &truth)?,
        landmark_rmse: metrics::landmark_rmse(&lm, &obstacles),
        pointcloud_rmse: metrics::pointcloud_rmse(&clouds, &truth, &obstacles),
        registration_loss: registration_loss(&motions, &true_motions, cfg.slam.gamma_r)?,
        obstacles_found: metrics::obstacles_found(&lm, &obstacles, cfg.slam.gate),
        obstacles: obstacles.len(),
        landmarks: map.len(),
        points: clouds.iter().map(|c| c.len()).sum(),
        bank_key,
        per_cycle,
        config: RunConfig {
            output_dir: PathBuf::new(),
            bank_dir: None,
            ..cfg.clone()
        },
    };
    Ok(RunOutcome {
        report,
        trajectory,
        map,
        clouds,
        raw,
    })
}

pub fn simulate(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    simulate_with(cfg, prepare_beams(cfg)?)
}

fn json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("report serializes");
    s.push(b'\n');
    s
}

/// Writes `trajectory.csv`, `map.csv`, `clouds.csv`, `report.json` and any
/// raw dumps into `dir`. Nothing time dependent goes into these files.
pub fn write_outcome(outcome: &RunOutcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("trajectory.csv"), io::trajectory_csv(&outcome.trajectory)?)?;
    let rows: Vec<MapRow> = outcome.map.iter().map(MapRow::from).collect();
    std::fs::write(dir.join("map.csv"), io::map_csv(&rows)?)?;
    std::fs::write(dir.join("clouds.csv"), io::clouds_csv(&outcome.clouds)?)?;
    std::fs::write(dir.join("report.json"), json_bytes(&outcome.report))?;
    for d in &outcome.raw {
        d.save(&dir.join("raw"), &format!("cycle_{:04}", d.header.cycle))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Timing {
    wall_clock_s: f64,
}

/// Full run: simulate, then write all artifacts plus `timing.json` into
/// the configured output directory.
pub fn run_slam(cfg: &RunConfig) -> Result<RunReport> {
    let start = Instant::now();
    let outcome = simulate(cfg)?;
    write_outcome(&outcome, &cfg.output_dir)?;
    let timing = Timing {
        wall_clock_s: start.elapsed().as_secs_f64(),
    };
    std::fs::write(cfg.output_dir.join("timing.json"), json_bytes(&timing))?;
    Ok(outcome.report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub trajectory_rmse: f64,
    pub landmark_rmse: Option<f64>,
    pub pointcloud_rmse: Option<f64>,
    pub obstacles_found: usize,
}

impl From<&RunReport> for RunSummary {
    fn from(r: &RunReport) -> Self {
        Self {
            seed: r.seed,
            trajectory_rmse: r.trajectory_rmse,
            landmark_rmse: r.landmark_rmse,
            pointcloud_rmse: r.pointcloud_rmse,
            obstacles_found: r.obstacles_found,
        }
    }
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: Mode,
    pub mean_trajectory_rmse: f64,
    pub mean_landmark_rmse: Option<f64>,
    pub mean_pointcloud_rmse: Option<f64>,
    pub runs: Vec<RunSummary>,
}

impl ModeSummary {
    pub fn from_runs(mode: Mode, runs: Vec<RunSummary>) -> Self {
        Self {
            mode,
            mean_trajectory_rmse: mean(runs.iter().map(|r| r.trajectory_rmse)).unwrap_or(0.0),
            mean_landmark_rmse: mean(runs.iter().filter_map(|r| r.landmark_rmse)),
            mean_pointcloud_rmse: mean(runs.iter().filter_map(|r| r.pointcloud_rmse)),
            runs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub schema: String,
    pub seeds: Vec<u64>,
    pub modes: Vec<ModeSummary>,
}

pub fn seed_list(first: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|k| first.wrapping_add(k)).collect()
}

/// Runs `modes` on the shared scenario for each seed; per-run artifacts go
/// to `<output_dir>/<mode>/seed-<s>/` when `write` is set, the joint report
/// to `<output_dir>/comparison.json`.
pub fn run_comparison(cfg: &RunConfig, modes: &[Mode], seeds: &[u64], write: bool) -> Result<ComparisonReport> {
    cfg.validate()?;
    let mut summaries = Vec::new();
    for &mode in modes {
        let base = RunConfig { mode, ..cfg.clone() };
        // The optimized bank does not depend on the seed.
        let shared = if mode == Mode::RhsOptimized { Some(prepare_beams(&base)?) } else { None };
        let runs = seeds
            .par_iter()
            .map(|&s| {
                let c = RunConfig { seed: s, ..base.clone() };
                let beams = match &shared {
                    Some(b) => b.clone(),
                    None => prepare_beams(&c)?,
                };
                let out = simulate_with(&c, beams)?;
                if write {
                    write_outcome(&out, &cfg.output_dir.join(mode.as_str()).join(format!("seed-{s}")))?;
                }
                Ok(RunSummary::from(&out.report))
            })
            .collect::<Result<Vec<_>>>()?;
        summaries.push(ModeSummary::from_runs(mode, runs));
    }
    let report = ComparisonReport {
        schema: COMPARISON_SCHEMA.into(),
        seeds: seeds.to_vec(),
        modes: summaries,
    };
    if write {
        std::fs::create_dir_all(&cfg.output_dir)?;
        std::fs::write(cfg.output_dir.join("comparison.json"), json_bytes(&report))?;
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub elements: usize,
    pub step_deg: f64,
    pub mean_trajectory_rmse: f64,
    pub mean_landmark_rmse: Option<f64>,
    pub mean_pointcloud_rmse: Option<f64>,
    pub runs: Vec<RunSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema: String,
    pub mode: Mode,
    pub seeds: Vec<u64>,
    pub points: Vec<SweepPoint>,
}

/// Runs the configured mode over every `(elements, step)` pair of the
/// sweep section, each for `sweep.seeds` seeds starting at `cfg.seed`.
pub fn run_sweep(cfg: &RunConfig, write: bool) -> Result<SweepReport> {
    cfg.validate()?;
    let seeds = seed_list(cfg.seed, cfg.sweep.seeds);
    let mut points = Vec::new();
    for &m in &cfg.sweep.elements {
        for &step in &cfg.sweep.step_deg {
            let mut c = cfg.clone();
            c.aperture.elements = m;
            c.grid.step_deg = step;
            c.validate()?;
            let comparison = run_comparison(&c, &[cfg.mode], &seeds, false)?;
            let s = comparison.modes.into_iter().next().expect("one mode");
            points.push(SweepPoint {
                elements: m,
                step_deg: step,
                mean_trajectory_rmse: s.mean_trajectory_rmse,
                mean_landmark_rmse: s.mean_landmark_rmse,
                mean_pointcloud_rmse: s.mean_pointcloud_rmse,
                runs: s.runs,
            });
        }
    }
    let report = SweepReport {
        schema: SWEEP_SCHEMA.into(),
        mode: cfg.mode,
        seeds,
        points,
    };
    if write {
        std::fs::create_dir_all(&cfg.output_dir)?;
        std::fs::write(cfg.output_dir.join("sweep.json"), json_bytes(&report))?;
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub cycles: usize,
    pub trajectory_rmse: f64,
    pub final_pose_error_m: f64,
    pub landmarks: usize,
    pub landmark_rmse: Option<f64>,
    pub obstacles_found: usize,
}

/// Recomputes the headline metrics from a run's `trajectory.csv` and
/// `map.csv` against the obstacles of `cfg`.
pub fn metrics_from_dir(dir: &Path, cfg: &RunConfig) -> Result<MetricsSummary> {
    let traj = io::parse_trajectory_csv(&std::fs::read_to_string(dir.join("trajectory.csv"))?)?;
    let map = io::parse_map_csv(&std::fs::read_to_string(dir.join("map.csv"))?)?;
    let est: Vec<Pose2> = traj.iter().map(|r| r.estimate()).collect();
    let tru: Vec<Pose2> = traj.iter().map(|r| r.truth()).collect();
    let obstacles: Vec<Point2> = cfg.scenario.obstacles().iter().map(|o| o.position).collect();
    let lm: Vec<Point2> = map.iter().map(|r| r.position()).collect();
    Ok(MetricsSummary {
        cycles: traj.len(),
        trajectory_rmse: metrics::trajectory_rmse(&est, &tru)?,
        final_pose_error_m: traj.last().map_or(0.0, |r| (r.estimate().position() - r.truth().position()).norm()),
        landmarks: map.len(),
        landmark_rmse: metrics::landmark_rmse(&lm, &obstacles),
        obstacles_found: metrics::obstacles_found(&lm, &obstacles, cfg.slam.gate),
    })
}
