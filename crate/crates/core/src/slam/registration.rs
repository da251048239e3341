//! Grid maps and correlation registration between consecutive clouds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{wrap_angle, Pose2};
use crate::pointcloud::PointCloud;
use crate::rhs::Point2;

/// Dense grid of non-negative intensities. Cell `(i, j)` covers
/// `[origin.x + i·cell, origin.x + (i+1)·cell) × [origin.y + j·cell, …)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridMap {
    pub origin: Point2,
    pub cell: f64,
    pub nx: usize,
    pub ny: usize,
    data: Vec<f64>,
}

impl GridMap {
    pub fn new(origin: Point2, cell: f64, nx: usize, ny: usize) -> Self {
        Self {
            origin,
            cell,
            nx,
            ny,
            data: vec![0.0; nx * ny],
        }
    }

    /// Square grid covering `[−extent, extent]²`.
    pub fn centered(cell: f64, extent: f64) -> Self {
        let n = ((2.0 * extent / cell).ceil() as usize).max(1);
        Self::new(Point2::new(-extent, -extent), cell, n, n)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.nx + i]
    }

    pub fn cell_of(&self, p: Point2) -> Option<(usize, usize)> {
        let fx = ((p.x - self.origin.x) / self.cell).floor();
        let fy = ((p.y - self.origin.y) / self.cell).floor();
        (fx >= 0.0 && fy >= 0.0 && fx < self.nx as f64 && fy < self.ny as f64).then_some((fx as usize, fy as usize))
    }

    pub fn deposit(&mut self, p: Point2, value: f64) -> bool {
        match self.cell_of(p) {
            Some((i, j)) => {
                self.data[j * self.nx + i] += value;
                true
            }
            None => false,
        }
    }

    pub fn total(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn nonzero_cells(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(k, v)| (k % self.nx, k / self.nx, *v))
    }

    /// Bilinear interpolation between cell centres; zero outside.
    pub fn sample(&self, p: Point2) -> f64 {
        let u = (p.x - self.origin.x) / self.cell - 0.5;
        let v = (p.y - self.origin.y) / self.cell - 0.5;
        let (i0, j0) = (u.floor(), v.floor());
        let (fu, fv) = (u - i0, v - j0);
        let at = |i: f64, j: f64| {
            if i < 0.0 || j < 0.0 || i >= self.nx as f64 || j >= self.ny as f64 {
                0.0
            } else {
                self.data[j as usize * self.nx + i as usize]
            }
        };
        (1.0 - fu) * (1.0 - fv) * at(i0, j0)
            + fu * (1.0 - fv) * at(i0 + 1.0, j0)
            + (1.0 - fu) * fv * at(i0, j0 + 1.0)
            + fu * fv * at(i0 + 1.0, j0 + 1.0)
    }
}

/// Each point deposits `|amplitude|` into the cell holding its vehicle-frame
/// position. Points outside `[−extent, extent]²` are dropped.
pub fn cloud_to_grid(cloud: &PointCloud, cell: f64, extent: f64) -> GridMap {
    let mut g = GridMap::centered(cell, extent);
    for p in &cloud.points {
        g.deposit(p.vehicle_position(), p.amplitude.norm());
    }
    g
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegistrationConfig {
    /// Translation step and grid cell size, meters.
    pub cell: f64,
    pub max_translation: f64,
    pub max_rotation_deg: f64,
    pub rotation_step_deg: f64,
    /// Gaussian smoothing applied to the previous cloud, meters.
    pub blur: f64,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        Self {
            cell: 0.25,
            max_translation: 3.0,
            max_rotation_deg: 10.0,
            rotation_step_deg: 0.5,
            blur: 0.5,
        }
    }
}

impl RegistrationConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, f: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::validation(f, "must be positive"))
            }
        };
        pos(self.cell, "slam.registration.cell")?;
        pos(self.rotation_step_deg, "slam.registration.rotation_step_deg")?;
        pos(self.blur, "slam.registration.blur")?;
        if !(self.max_translation >= 0.0 && self.max_rotation_deg >= 0.0) {
            return Err(Error::validation("slam.registration", "search window must be non-negative"));
        }
        Ok(())
    }

    fn steps(max: f64, step: f64) -> Vec<f64> {
        let n = (max / step + 1e-9).floor() as i64;
        (-n..=n).map(|k| k as f64 * step).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Registration {
    /// Motion from the previous vehicle frame to the current one.
    pub motion: Pose2,
    pub score: f64,
    /// False when a cloud was empty and the prior motion was reused.
    pub confident: bool,
}

/// Previous cloud smoothed by a Gaussian of width `blur`: points bucketed
/// on a coarse grid so each lookup only visits nearby points.
struct Reference {
    origin: Point2,
    bucket: f64,
    nx: usize,
    ny: usize,
    starts: Vec<usize>,
    points: Vec<(Point2, f64)>,
    inv_two_var: f64,
}

impl Reference {
    fn new(cloud: &PointCloud, blur: f64) -> Self {
        let pts: Vec<(Point2, f64)> = cloud.points.iter().map(|p| (p.vehicle_position(), p.amplitude.norm())).collect();
        let bucket = 3.0 * blur;
        let (mut lo, mut hi) = (Point2::repeat(f64::INFINITY), Point2::repeat(f64::NEG_INFINITY));
        for (p, _) in &pts {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let nx = ((hi.x - lo.x) / bucket).floor() as usize + 1;
        let ny = ((hi.y - lo.y) / bucket).floor() as usize + 1;
        let key = |p: &Point2| {
            let i = ((p.x - lo.x) / bucket).floor() as usize;
            let j = ((p.y - lo.y) / bucket).floor() as usize;
            i.min(nx - 1) + nx * j.min(ny - 1)
        };
        let mut counts = vec![0usize; nx * ny + 1];
        for (p, _) in &pts {
            counts[key(p) + 1] += 1;
        }
        for k in 1..counts.len() {
            counts[k] += counts[k - 1];
        }
        let mut fill = counts.clone();
        let mut sorted = vec![(Point2::zeros(), 0.0); pts.len()];
        for &(p, w) in &pts {
            let k = key(&p);
            sorted[fill[k]] = (p, w);
            fill[k] += 1;
        }
        Self {
            origin: lo,
            bucket,
            nx,
            ny,
            starts: counts,
            points: sorted,
            inv_two_var: 1.0 / (2.0 * blur * blur),
        }
    }

    fn sample(&self, q: Point2) -> f64 {
        let fi = ((q.x - self.origin.x) / self.bucket).floor();
        let fj = ((q.y - self.origin.y) / self.bucket).floor();
        if fi < -1.0 || fj < -1.0 || fi > self.nx as f64 || fj > self.ny as f64 {
            return 0.0;
        }
        let (ci, cj) = (fi as i64, fj as i64);
        let mut acc = 0.0;
        for j in (cj - 1).max(0)..=(cj + 1).min(self.ny as i64 - 1) {
            for i in (ci - 1).max(0)..=(ci + 1).min(self.nx as i64 - 1) {
                let k = i as usize + self.nx * j as usize;
                for (p, w) in &self.points[self.starts[k]..self.starts[k + 1]] {
                    let d2 = (q - p).norm_squared();
                    acc += w * (-d2 * self.inv_two_var).exp();
                }
            }
        }
        acc
    }
}

/// Exhaustive search for the motion `(t, r)` maximizing the correlation of
/// the current cloud, mapped into the previous frame by `p ↦ R(r)p + t`,
/// with the smoothed previous grid. Equal scores resolve toward the smallest
/// `‖t‖`, then the smallest `|r|`.
pub fn register(current: &PointCloud, previous: &PointCloud, cfg: &RegistrationConfig) -> Result<Registration> {
    if current.is_empty() || previous.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let reference = Reference::new(previous, cfg.blur);
    let pts: Vec<(Point2, f64)> = current.points.iter().map(|p| (p.vehicle_position(), p.amplitude.norm())).collect();
    let shifts = RegistrationConfig::steps(cfg.max_translation, cfg.cell);
    let angles = RegistrationConfig::steps(cfg.max_rotation_deg, cfg.rotation_step_deg);
    let mut best: Option<(f64, f64, f64, Pose2)> = None;
    let mut rotated = Vec::with_capacity(pts.len());
    for &deg in &angles {
        let r = deg.to_radians();
        let rot = Pose2::new(0.0, 0.0, r);
        rotated.clear();
        rotated.extend(pts.iter().map(|(p, w)| (rot.rotate(*p), *w)));
        for &tx in &shifts {
            for &ty in &shifts {
                let t = Point2::new(tx, ty);
                let score: f64 = rotated.iter().map(|(p, w)| w * reference.sample(p + t)).sum();
                let tn = t.norm();
                let better = match best {
                    None => true,
                    Some((s, bn, br, _)) => score > s || (score == s && (tn < bn || (tn == bn && r.abs() < br))),
                };
                if better {
                    best = Some((score, tn, r.abs(), Pose2::new(tx, ty, r)));
                }
            }
        }
    }
    let (score, _, _, motion) = best.expect("search window holds at least the identity");
    Ok(Registration {
        motion,
        score,
        confident: true,
    })
}

/// `register`, falling back to `prior` (flagged low confidence) when a
/// cloud is empty.
pub fn register_or_prior(
    current: &PointCloud,
    previous: &PointCloud,
    prior: Pose2,
    cfg: &RegistrationConfig,
) -> Result<Registration> {
    match register(current, previous, cfg) {
        Err(Error::EmptyCloud) => Ok(Registration {
            motion: prior,
            score: 0.0,
            confident: false,
        }),
        other => other,
    }
}

/// `(1/N_b) Σ (‖t̂ − t‖² + γ_r (r̂ − r)²)`, rotation differences wrapped.
pub fn registration_loss(estimates: &[Pose2], truth: &[Pose2], gamma_r: f64) -> Result<f64> {
    if estimates.len() != truth.len() {
        return Err(Error::LengthMismatch {
            estimates: estimates.len(),
            truth: truth.len(),
        });
    }
    if estimates.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = estimates
        .iter()
        .zip(truth)
        .map(|(e, t)| {
            let dr = wrap_angle(e.heading - t.heading);
            (e.position() - t.position()).norm_squared() + gamma_r * dr * dr
        })
        .sum();
    Ok(sum / estimates.len() as f64)
}
