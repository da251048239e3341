//! Run configuration: JSON with every field optional, defaults matching the
//! reference scenario, unknown keys rejected.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::Pose2;
use crate::pattern::{ScanGrid, SolverConfig};
use crate::pointcloud::{DetectionThreshold, ExtractorSettings, MergeTolerance};
use crate::rhs::{ApertureGeometry, PhaseOnlyPattern, Point2};
use crate::scene::{make_fmcw, Obstacle, Scenario, Waveform};
use crate::slam::SlamConfig;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    RhsOptimized,
    RhsRandom,
    PhasedArray,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::RhsOptimized, Mode::PhasedArray, Mode::RhsRandom];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::RhsOptimized => "rhs-optimized",
            Mode::RhsRandom => "rhs-random",
            Mode::PhasedArray => "phased-array",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rhs-optimized" => Ok(Mode::RhsOptimized),
            "rhs-random" => Ok(Mode::RhsRandom),
            "phased-array" => Ok(Mode::PhasedArray),
            other => Err(Error::validation("mode", format!("unknown mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleConfig {
    pub x: f64,
    pub y: f64,
    /// Complex reflection coefficient as `[re, im]`.
    pub reflectivity: Complex64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub obstacles: Vec<ObstacleConfig>,
    /// Polyline followed at constant speed; the heading follows the segment.
    pub waypoints: Vec<[f64; 2]>,
    pub cycles: usize,
    pub max_range: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let refl = Complex64::new(0.02, 0.0);
        let obstacles = [(10.0, 65.0), (25.0, 10.0), (30.0, 65.0), (35.0, 10.0), (50.0, 65.0)]
            .into_iter()
            .map(|(x, y)| ObstacleConfig {
                x,
                y,
                reflectivity: refl,
            })
            .collect();
        Self {
            obstacles,
            waypoints: vec![[0.0, 37.5], [30.0, 39.0], [60.0, 37.5]],
            cycles: 50,
            max_range: 100.0,
        }
    }
}

impl ScenarioConfig {
    /// Vehicle pose at each cycle, spread evenly by arc length.
    pub fn trajectory(&self) -> Vec<Pose2> {
        let pts: Vec<Point2> = self.waypoints.iter().map(|w| Point2::new(w[0], w[1])).collect();
        let seg: Vec<f64> = pts.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
        let total: f64 = seg.iter().sum();
        let heading_of = |k: usize| {
            let d = pts[k + 1] - pts[k];
            d.y.atan2(d.x)
        };
        (0..self.cycles)
            .map(|z| {
                if pts.len() < 2 || total == 0.0 {
                    return Pose2::new(pts[0].x, pts[0].y, 0.0);
                }
                let frac = if self.cycles > 1 { z as f64 / (self.cycles - 1) as f64 } else { 0.0 };
                let mut s = frac * total;
                let mut k = 0;
                while k + 1 < seg.len() && s > seg[k] {
                    s -= seg[k];
                    k += 1;
                }
                let t = if seg[k] > 0.0 { (s / seg[k]).min(1.0) } else { 0.0 };
                let p = pts[k] + (pts[k + 1] - pts[k]) * t;
                Pose2::new(p.x, p.y, heading_of(k))
            })
            .collect()
    }

    pub fn obstacles(&self) -> Vec<Obstacle> {
        self.obstacles
            .iter()
            .map(|o| Obstacle {
                position: Point2::new(o.x, o.y),
                reflectivity: o.reflectivity,
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApertureConfig {
    pub elements: usize,
    /// Element spacing in wavelengths.
    pub spacing: f64,
    pub surface_index: f64,
    /// Feed the receive surface from the end opposite the transmit feed.
    pub rx_feed_opposite: bool,
    /// Cost of one phased-array element in holographic elements.
    pub phased_cost_ratio: f64,
    /// Phased-array element spacing in wavelengths.
    pub phased_spacing: f64,
}

impl Default for ApertureConfig {
    fn default() -> Self {
        Self {
            elements: 60,
            spacing: 0.25,
            surface_index: 1.73,
            rx_feed_opposite: true,
            phased_cost_ratio: 6.0,
            phased_spacing: 0.5,
        }
    }
}

impl ApertureConfig {
    pub fn phased_elements(&self) -> usize {
        PhaseOnlyPattern::element_count_for(self.elements, self.phased_cost_ratio)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveformConfig {
    pub center_frequency: f64,
    pub bandwidth: f64,
    pub chirp_duration: f64,
    pub sample_rate: f64,
}

impl Default for WaveformConfig {
    fn default() -> Self {
        Self {
            center_frequency: 24.125e9,
            bandwidth: 250e6,
            chirp_duration: 10e-6,
            sample_rate: 250e6,
        }
    }
}

impl WaveformConfig {
    /// `(low, high)` edges of the swept band in Hz.
    pub fn band(&self) -> (f64, f64) {
        (self.center_frequency - self.bandwidth / 2.0, self.center_frequency + self.bandwidth / 2.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub step_deg: f64,
    pub sector_deg: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            step_deg: 2.5,
            sector_deg: 90.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerConfig {
    /// Total radiated power `P_M`.
    pub tx_dbm: f64,
    /// Per-element noise power `σ²`.
    pub noise_dbm: f64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            tx_dbm: 30.0,
            noise_dbm: -40.0,
        }
    }
}

impl PowerConfig {
    pub fn tx_watts(&self) -> f64 {
        dbm_to_watts(self.tx_dbm)
    }

    pub fn sigma(&self) -> f64 {
        dbm_to_watts(self.noise_dbm).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointCloudConfig {
    /// Detection threshold as a multiple of the profile's median magnitude.
    pub threshold_factor: f64,
    /// Absolute detection floor on the normalized profile.
    pub threshold_floor: f64,
    /// OMP stops when the residual power drops below this share of the
    /// measurement power.
    pub residual_fraction: f64,
    /// OMP also stops once the residual power is below this multiple of the
    /// expected noise energy of a measurement vector.
    pub noise_floor_factor: f64,
    /// Dictionary directions per scan slot.
    pub oversample: usize,
    /// Points of one radar closer than this many range bins
    pub merge_range_bins: f64,
    /// and this many scan steps collapse into one.
    pub merge_angle_steps: f64,
}

impl Default for PointCloudConfig {
    fn default() -> Self {
        Self {
            threshold_factor: 8.0,
            threshold_floor: 1e-12,
            residual_fraction: 0.05,
            noise_floor_factor: 2.0,
            oversample: 4,
            merge_range_bins: 0.5,
            merge_angle_steps: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub elements: Vec<usize>,
    pub step_deg: Vec<f64>,
    pub seeds: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            elements: vec![20, 60],
            step_deg: vec![1.0, 5.0],
            seeds: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub aperture: ApertureConfig,
    pub waveform: WaveformConfig,
    pub grid: GridConfig,
    pub power: PowerConfig,
    pub solver: SolverConfig,
    pub pointcloud: PointCloudConfig,
    pub slam: SlamConfig,
    pub mode: Mode,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Pattern-bank cache; defaults to `<output_dir>/banks`.
    pub bank_dir: Option<PathBuf>,
    /// Cycles whose raw slot signals are written out.
    pub dump_raw_cycles: Vec<usize>,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            aperture: ApertureConfig::default(),
            waveform: WaveformConfig::default(),
            grid: GridConfig::default(),
            power: PowerConfig::default(),
            solver: SolverConfig::default(),
            pointcloud: PointCloudConfig::default(),
            slam: SlamConfig::default(),
            mode: Mode::RhsOptimized,
            seed: 1,
            output_dir: PathBuf::from("out"),
            bank_dir: None,
            dump_raw_cycles: Vec::new(),
            sweep: SweepConfig::default(),
        }
    }
}

fn positive(v: f64, field: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.scenario;
        if s.cycles == 0 {
            return Err(Error::validation("scenario.cycles", "must be at least 1"));
        }
        if s.waypoints.is_empty() {
            return Err(Error::validation("scenario.waypoints", "need at least one waypoint"));
        }
        if s.waypoints.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::validation("scenario.waypoints", "coordinates must be finite"));
        }
        for o in &s.obstacles {
            if !(o.x.is_finite() && o.y.is_finite() && o.reflectivity.re.is_finite() && o.reflectivity.im.is_finite()) {
                return Err(Error::validation("scenario.obstacles", "values must be finite"));
            }
        }
        positive(s.max_range, "scenario.max_range")?;

        let a = &self.aperture;
        if a.elements == 0 {
            return Err(Error::validation("aperture.elements", "must be at least 1"));
        }
        positive(a.spacing, "aperture.spacing")?;
        positive(a.phased_spacing, "aperture.phased_spacing")?;
        positive(a.phased_cost_ratio, "aperture.phased_cost_ratio")?;
        if !(a.surface_index >= 1.0 && a.surface_index.is_finite()) {
            return Err(Error::validation("aperture.surface_index", "must be at least 1"));
        }
        if self.mode == Mode::PhasedArray && a.phased_elements() == 0 {
            return Err(Error::validation("aperture.phased_cost_ratio", "leaves no phased-array element"));
        }

        let w = &self.waveform;
        positive(w.center_frequency, "waveform.center_frequency")?;
        positive(w.chirp_duration, "waveform.chirp_duration")?;
        positive(w.sample_rate, "waveform.sample_rate")?;
        if !(w.bandwidth >= 0.0 && w.bandwidth.is_finite()) {
            return Err(Error::validation("waveform.bandwidth", "must be non-negative"));
        }
        if w.sample_rate < w.bandwidth {
            return Err(Error::BadSampling {
                sample_rate: w.sample_rate,
                bandwidth: w.bandwidth,
            });
        }
        if w.chirp_duration * w.sample_rate > 1e7 {
            return Err(Error::validation("waveform.chirp_duration", "too many samples per chirp"));
        }

        positive(self.grid.step_deg, "grid.step_deg")?;
        positive(self.grid.sector_deg, "grid.sector_deg")?;
        if self.grid.sector_deg > 360.0 || self.grid.step_deg > self.grid.sector_deg {
            return Err(Error::validation("grid", "step must not exceed the sector and the sector 360°"));
        }

        if !self.power.tx_dbm.is_finite() || !self.power.noise_dbm.is_finite() {
            return Err(Error::validation("power", "values must be finite"));
        }
        let p = self.power.tx_watts();
        if !(p > 0.0 && p <= a.elements as f64) {
            return Err(Error::validation(
                "power.tx_dbm",
                format!("{p} W is not reachable by {} elements of unit amplitude", a.elements),
            ));
        }

        self.solver.validate()?;
        let pc = &self.pointcloud;
        positive(pc.threshold_factor, "pointcloud.threshold_factor")?;
        if !(pc.threshold_floor >= 0.0 && pc.threshold_floor.is_finite()) {
            return Err(Error::validation("pointcloud.threshold_floor", "must be non-negative"));
        }
        if !(pc.residual_fraction >= 0.0 && pc.residual_fraction < 1.0) {
            return Err(Error::validation("pointcloud.residual_fraction", "must lie in [0, 1)"));
        }
        if !(pc.noise_floor_factor >= 0.0 && pc.noise_floor_factor.is_finite()) {
            return Err(Error::validation("pointcloud.noise_floor_factor", "must be non-negative"));
        }
        if pc.oversample == 0 {
            return Err(Error::validation("pointcloud.oversample", "must be at least 1"));
        }
        if !(pc.merge_range_bins >= 0.0 && pc.merge_angle_steps >= 0.0) {
            return Err(Error::validation("pointcloud", "merge tolerances must be non-negative"));
        }
        self.slam.validate()?;
        if self.sweep.elements.contains(&0) {
            return Err(Error::validation("sweep.elements", "element counts must be positive"));
        }
        for &st in &self.sweep.step_deg {
            positive(st, "sweep.step_deg")?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn bank_dir(&self) -> PathBuf {
        self.bank_dir.clone().unwrap_or_else(|| self.output_dir.join("banks"))
    }

    pub fn waveform(&self) -> Result<Waveform> {
        let w = &self.waveform;
        make_fmcw(w.center_frequency, w.bandwidth, w.chirp_duration, w.sample_rate)
    }

    pub fn wavelength(&self) -> f64 {
        crate::scene::SPEED_OF_LIGHT / self.waveform.center_frequency
    }

    pub fn scan_grid(&self) -> Result<ScanGrid> {
        ScanGrid::from_degrees(self.grid.sector_deg, self.grid.step_deg)
    }

    /// Transmit and receive holographic apertures.
    pub fn rhs_geometry(&self) -> Result<(ApertureGeometry, ApertureGeometry)> {
        let l = self.wavelength();
        let tx = ApertureGeometry::uniform_linear(
            self.aperture.elements,
            self.aperture.spacing * l,
            l,
            self.aperture.surface_index,
        )?;
        let rx = if self.aperture.rx_feed_opposite { tx.with_opposite_feed() } else { tx.clone() };
        Ok((tx, rx))
    }

    pub fn phased_geometry(&self) -> Result<ApertureGeometry> {
        let l = self.wavelength();
        ApertureGeometry::uniform_linear(self.aperture.phased_elements(), self.aperture.phased_spacing * l, l, 1.0)
    }

    pub fn scenario(&self) -> Result<Scenario> {
        Ok(Scenario {
            obstacles: self.scenario.obstacles(),
            trajectory: self.scenario.trajectory(),
            sigma: self.power.sigma(),
            waveform: self.waveform()?,
            grid: self.scan_grid()?,
            max_range: self.scenario.max_range,
        })
    }

    /// `noise_energy` is the expected noise energy of one measurement
    /// vector after normalized matched filtering.
    pub fn extractor_settings(&self, waveform: &Waveform, grid: &ScanGrid, noise_energy: f64) -> ExtractorSettings {
        let pc = &self.pointcloud;
        ExtractorSettings {
            threshold: DetectionThreshold::MedianFactor {
                factor: pc.threshold_factor,
                floor: pc.threshold_floor,
            },
            residual_fraction: pc.residual_fraction,
            residual_floor: pc.noise_floor_factor * noise_energy,
            merge: MergeTolerance {
                range: pc.merge_range_bins * waveform.range_bin(),
                azimuth: pc.merge_angle_steps * grid.step,
            },
        }
    }
}
