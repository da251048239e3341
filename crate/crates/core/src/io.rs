//! Artifact formats: trajectory, map and cloud tables, raw slot dumps.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::Pose2;
use crate::pointcloud::{CloudPoint, PointCloud, CLOUD_CSV_HEADER};
use crate::rhs::Point2;
use crate::slam::MapLandmark;

pub const TRAJECTORY_HEADER: [&str; 7] = ["cycle", "x_m", "y_m", "heading_rad", "x_true", "y_true", "heading_true"];
pub const MAP_HEADER: [&str; 7] = ["landmark_id", "x_m", "y_m", "cov_xx", "cov_xy", "cov_yy", "hits"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub cycle: usize,
    pub x_m: f64,
    pub y_m: f64,
    pub heading_rad: f64,
    pub x_true: f64,
    pub y_true: f64,
    pub heading_true: f64,
}

impl TrajectoryRow {
    pub fn new(cycle: usize, estimate: Pose2, truth: Pose2) -> Self {
        Self {
            cycle,
            x_m: estimate.x,
            y_m: estimate.y,
            heading_rad: estimate.heading,
            x_true: truth.x,
            y_true: truth.y,
            heading_true: truth.heading,
        }
    }

    pub fn estimate(&self) -> Pose2 {
        Pose2 {
            x: self.x_m,
            y: self.y_m,
            heading: self.heading_rad,
        }
    }

    pub fn truth(&self) -> Pose2 {
        Pose2 {
            x: self.x_true,
            y: self.y_true,
            heading: self.heading_true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapRow {
    pub landmark_id: u64,
    pub x_m: f64,
    pub y_m: f64,
    pub cov_xx: f64,
    pub cov_xy: f64,
    pub cov_yy: f64,
    pub hits: u32,
}

impl From<&MapLandmark> for MapRow {
    fn from(l: &MapLandmark) -> Self {
        Self {
            landmark_id: l.id,
            x_m: l.mean.x,
            y_m: l.mean.y,
            cov_xx: l.cov[(0, 0)],
            cov_xy: l.cov[(0, 1)],
            cov_yy: l.cov[(1, 1)],
            hits: l.hits,
        }
    }
}

impl MapRow {
    pub fn position(&self) -> Point2 {
        Point2::new(self.x_m, self.y_m)
    }
}

fn write_rows<T: Serialize>(rows: &[T], header: &[&str]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn read_rows<T: for<'de> Deserialize<'de>>(text: &str, header: &[&str], what: &str) -> Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let found = r.headers()?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::Table(format!("{what}: unexpected header `{}`", found.iter().collect::<Vec<_>>().join(","))));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Table(format!("{what}: {e}"))))
        .collect()
}

pub fn trajectory_csv(rows: &[TrajectoryRow]) -> Result<Vec<u8>> {
    write_rows(rows, &TRAJECTORY_HEADER)
}

pub fn parse_trajectory_csv(text: &str) -> Result<Vec<TrajectoryRow>> {
    read_rows(text, &TRAJECTORY_HEADER, "trajectory")
}

pub fn map_csv(rows: &[MapRow]) -> Result<Vec<u8>> {
    write_rows(rows, &MAP_HEADER)
}

pub fn parse_map_csv(text: &str) -> Result<Vec<MapRow>> {
    read_rows(text, &MAP_HEADER, "map")
}

pub fn clouds_csv(clouds: &[PointCloud]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    writeln!(out, "{CLOUD_CSV_HEADER}")?;
    for c in clouds {
        c.write_csv(&mut out)?;
    }
    Ok(out)
}

#[derive(Deserialize)]
struct CloudRow {
    cycle: usize,
    radar: usize,
    range_m: f64,
    azimuth_rad: f64,
    amp_re: f64,
    amp_im: f64,
}

/// Reads a clouds table back, one cloud per distinct cycle in file order.
pub fn parse_clouds_csv(text: &str) -> Result<Vec<PointCloud>> {
    let header: Vec<&str> = CLOUD_CSV_HEADER.split(',').collect();
    let rows: Vec<CloudRow> = read_rows(text, &header, "clouds")?;
    let mut out: Vec<PointCloud> = Vec::new();
    for r in rows {
        if r.radar >= crate::scene::RADAR_MOUNTS.len() {
            return Err(Error::Table(format!("clouds: radar index {} out of range", r.radar)));
        }
        let p = CloudPoint {
            range: r.range_m,
            azimuth: r.azimuth_rad,
            amplitude: Complex64::new(r.amp_re, r.amp_im),
            radar: r.radar,
        };
        match out.last_mut() {
            Some(c) if c.cycle == r.cycle => c.points.push(p),
            _ => out.push(PointCloud {
                cycle: r.cycle,
                points: vec![p],
            }),
        }
    }
    Ok(out)
}

pub const RAW_DUMP_SCHEMA: &str = "rhs-slam/raw-dump/1";

/// Sidecar describing a raw dump: `radars × slots × samples` complex
/// values, stored as little-endian `f64` pairs (re, im) in that order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDumpHeader {
    pub schema: String,
    pub cycle: usize,
    pub radars: usize,
    pub slots: usize,
    pub samples: usize,
    pub sample_rate: f64,
    pub dtype: String,
}

const RAW_DTYPE: &str = "complex128-le";

#[derive(Clone, Debug, PartialEq)]
pub struct RawDump {
    pub header: RawDumpHeader,
    /// `signals[radar][slot]`.
    pub signals: Vec<Vec<Vec<Complex64>>>,
}

impl RawDump {
    pub fn new(cycle: usize, sample_rate: f64, signals: Vec<Vec<Vec<Complex64>>>) -> Result<Self> {
        let radars = signals.len();
        let slots = signals.first().map_or(0, |r| r.len());
        let samples = signals.first().and_then(|r| r.first()).map_or(0, |s| s.len());
        if signals.iter().any(|r| r.len() != slots || r.iter().any(|s| s.len() != samples)) {
            return Err(Error::RawDump("ragged signal array".into()));
        }
        Ok(Self {
            header: RawDumpHeader {
                schema: RAW_DUMP_SCHEMA.into(),
                cycle,
                radars,
                slots,
                samples,
                sample_rate,
                dtype: RAW_DTYPE.into(),
            },
            signals,
        })
    }

    pub fn encode(&self) -> (Vec<u8>, String) {
        let mut bin = Vec::with_capacity(self.header.radars * self.header.slots * self.header.samples * 16);
        for v in self.signals.iter().flatten().flatten() {
            bin.extend_from_slice(&v.re.to_le_bytes());
            bin.extend_from_slice(&v.im.to_le_bytes());
        }
        let sidecar = serde_json::to_string_pretty(&self.header).expect("header serializes");
        (bin, sidecar)
    }

    pub fn decode(bin: &[u8], sidecar: &str) -> Result<Self> {
        let header: RawDumpHeader =
            serde_json::from_str(sidecar).map_err(|e| Error::RawDump(format!("sidecar: {e}")))?;
        if header.schema != RAW_DUMP_SCHEMA {
            return Err(Error::RawDump(format!("unknown schema `{}`", header.schema)));
        }
        if header.dtype != RAW_DTYPE {
            return Err(Error::RawDump(format!("unsupported dtype `{}`", header.dtype)));
        }
        // A zero dimension would let the others claim any size for an empty file.
        if header.radars == 0 || header.slots == 0 || header.samples == 0 {
            return Err(Error::RawDump("zero-sized dimension".into()));
        }
        let expected = header
            .radars
            .checked_mul(header.slots)
            .and_then(|v| v.checked_mul(header.samples))
            .and_then(|v| v.checked_mul(16))
            .ok_or_else(|| Error::RawDump("dimensions overflow".into()))?;
        if bin.len() != expected {
            return Err(Error::RawDump(format!("expected {expected} bytes, found {}", bin.len())));
        }
        let mut values = bin.chunks_exact(16).map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        });
        let signals = (0..header.radars)
            .map(|_| {
                (0..header.slots)
                    .map(|_| values.by_ref().take(header.samples).collect())
                    .collect()
            })
            .collect();
        Ok(Self { header, signals })
    }

    /// Writes `<stem>.bin` and `<stem>.json` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        let (bin, sidecar) = self.encode();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{stem}.bin")), bin)?;
        std::fs::write(dir.join(format!("{stem}.json")), sidecar)?;
        Ok(())
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let bin = std::fs::read(dir.join(format!("{stem}.bin")))?;
        let sidecar = std::fs::read_to_string(dir.join(format!("{stem}.json")))?;
        Self::decode(&bin, &sidecar)
    }
}
