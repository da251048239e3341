//! Rao-Blackwellized particle filter: per-particle landmark EKFs, association,
//! weighting, resampling and the weighted estimate.

use std::collections::BTreeMap;

use nalgebra::{Matrix2, SymmetricEigen};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::frame::Pose2;
use crate::pointcloud::{CloudPoint, PointCloud};
use crate::rhs::Point2;
use crate::scene::RADAR_MOUNTS;
use crate::seed::{self, Stream};

#[derive(Clone, Debug, PartialEq)]
pub struct Landmark {
    /// Shared by every particle that inherited this landmark.
    pub id: u64,
    pub mean: Point2,
    pub cov: Matrix2<f64>,
    pub hits: u32,
    pub last_seen: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Particle {
    pub pose: Pose2,
    pub weight: f64,
    pub landmarks: Vec<Landmark>,
}

/// Map-frame positions of the cloud's points seen from `pose`.
pub fn compensate(cloud: &PointCloud, pose: &Pose2) -> Vec<Point2> {
    cloud.points.iter().map(|p| p.map_position(pose)).collect()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AssociationResult {
    /// `(point index, landmark index)`.
    pub matches: Vec<(usize, usize)>,
    pub unmatched: Vec<usize>,
}

/// Greedy one-to-one matching in ascending distance order; pairs farther
/// than `gate` are never matched.
pub fn associate(points: &[Point2], landmarks: &[Point2], gate: f64) -> AssociationResult {
    let mut pairs = Vec::new();
    for (u, p) in points.iter().enumerate() {
        for (l, m) in landmarks.iter().enumerate() {
            let d = (p - m).norm();
            if d <= gate {
                pairs.push((d, u, l));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut point_used = vec![false; points.len()];
    let mut lm_used = vec![false; landmarks.len()];
    let mut matches = Vec::new();
    for (_, u, l) in pairs {
        if !point_used[u] && !lm_used[l] {
            point_used[u] = true;
            lm_used[l] = true;
            matches.push((u, l));
        }
    }
    matches.sort_unstable();
    let unmatched = (0..points.len()).filter(|&u| !point_used[u]).collect();
    AssociationResult { matches, unmatched }
}

/// Symmetrizes and clamps negative eigenvalues to zero.
pub fn symmetric_psd(m: &Matrix2<f64>) -> Matrix2<f64> {
    let s = 0.5 * (m + m.transpose());
    let eig = SymmetricEigen::new(s);
    if eig.eigenvalues.iter().all(|&v| v >= 0.0) {
        return s;
    }
    let clamped = eig.eigenvalues.map(|v| v.max(0.0));
    eig.eigenvectors * Matrix2::from_diagonal(&clamped) * eig.eigenvectors.transpose()
}

fn checked_inverse(j: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    let scale = j.abs().max();
    let det = j.determinant();
    if !det.is_finite() || scale == 0.0 || det.abs() <= 1e-12 * scale * scale {
        return Err(Error::SingularInnovationCov);
    }
    j.try_inverse().ok_or(Error::SingularInnovationCov)
}

/// One EKF step with identity observation: `J = Λ + J_c`, `K = ΛJ⁻¹`,
/// `e ← e + K(z − e)`, `Λ ← (I − K)Λ`.
pub fn ekf_update(landmark: &Landmark, observed: Point2, obs_cov: &Matrix2<f64>) -> Result<Landmark> {
    let lambda = landmark.cov;
    let j_inv = checked_inverse(&(lambda + obs_cov))?;
    let k = lambda * j_inv;
    let mean = landmark.mean + k * (observed - landmark.mean);
    let cov = symmetric_psd(&(lambda - k * lambda));
    Ok(Landmark {
        mean,
        cov,
        ..landmark.clone()
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProcessNoise {
    /// Per-axis translation standard deviation, meters.
    pub sigma_t: f64,
    /// Rotation standard deviation, radians.
    pub sigma_r: f64,
}

/// Perturbation `(n_x, n_y, n_r)` drawn for particle `index` at `cycle`.
pub fn motion_perturbation(noise: &ProcessNoise, master_seed: u64, cycle: usize, index: usize) -> [f64; 3] {
    let mut rng = seed::rng(master_seed, Stream::Prediction, &[cycle as u64, index as u64]);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    [
        std.sample(&mut rng) * noise.sigma_t,
        std.sample(&mut rng) * noise.sigma_t,
        std.sample(&mut rng) * noise.sigma_r,
    ]
}

/// Moves every particle by the registered motion plus its own perturbation.
pub fn predict_particles(particles: &mut [Particle], motion: Pose2, noise: &ProcessNoise, master_seed: u64, cycle: usize) {
    for (c, p) in particles.iter_mut().enumerate() {
        let [nx, ny, nr] = motion_perturbation(noise, master_seed, cycle, c);
        let step = Pose2::new(motion.x + nx, motion.y + ny, motion.heading + nr);
        p.pose = p.pose.compose(&step);
    }
}

/// Multiplies each weight by `exp(log_likelihood[c])` and normalizes. Falls
/// back to uniform weights when nothing finite survives.
pub fn weight_particles(particles: &mut [Particle], log_likelihood: &[f64]) {
    assert_eq!(particles.len(), log_likelihood.len());
    let logs: Vec<f64> = particles.iter().zip(log_likelihood).map(|(p, l)| p.weight.ln() + l).collect();
    let top = logs.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    let n = particles.len() as f64;
    let raw: Vec<f64> = if top.is_finite() {
        logs.iter().map(|l| if l.is_finite() { (l - top).exp() } else { 0.0 }).collect()
    } else {
        vec![0.0; particles.len()]
    };
    let sum: f64 = raw.iter().sum();
    for (p, w) in particles.iter_mut().zip(raw) {
        p.weight = if sum > 0.0 && sum.is_finite() { w / sum } else { 1.0 / n };
    }
}

pub fn effective_sample_size(particles: &[Particle]) -> f64 {
    1.0 / particles.iter().map(|p| p.weight * p.weight).sum::<f64>()
}

/// Offspring parent indices under systematic resampling with offset `u0`
/// drawn from `[0, 1/N)`.
pub fn systematic_indices(weights: &[f64], u0: f64) -> Vec<usize> {
    let n = weights.len();
    let step = 1.0 / n as f64;
    let mut out = Vec::with_capacity(n);
    let mut cumulative = weights[0];
    let mut i = 0;
    for k in 0..n {
        let u = u0 + k as f64 * step;
        while u >= cumulative && i + 1 < n {
            i += 1;
            cumulative += weights[i];
        }
        out.push(i);
    }
    out
}

/// Systematic resampling; the result carries uniform weights.
pub fn resample(particles: &[Particle], seed: u64) -> Vec<Particle> {
    let n = particles.len();
    let mut rng = seed::rng(seed, Stream::Resampling, &[]);
    let u0 = rng.random::<f64>() / n as f64;
    let weights: Vec<f64> = particles.iter().map(|p| p.weight).collect();
    systematic_indices(&weights, u0)
        .into_iter()
        .map(|i| Particle {
            weight: 1.0 / n as f64,
            ..particles[i].clone()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapLandmark {
    pub id: u64,
    pub mean: Point2,
    pub cov: Matrix2<f64>,
    pub hits: u32,
    /// Total weight of the particles holding this landmark.
    pub presence: f64,
}

/// Weighted pose (circular mean for the heading) and the weighted map, with
/// landmarks paired across particles by id. Only landmarks whose presence
/// reaches `min_presence` are reported.
pub fn estimate(particles: &[Particle], min_presence: f64) -> (Pose2, Vec<MapLandmark>) {
    let (mut x, mut y, mut s, mut c) = (0.0, 0.0, 0.0, 0.0);
    for p in particles {
        x += p.weight * p.pose.x;
        y += p.weight * p.pose.y;
        s += p.weight * p.pose.heading.sin();
        c += p.weight * p.pose.heading.cos();
    }
    let heading = if s == 0.0 && c == 0.0 { 0.0 } else { s.atan2(c) };
    let mut acc: BTreeMap<u64, (f64, Point2, Matrix2<f64>, u32)> = BTreeMap::new();
    for p in particles {
        for l in &p.landmarks {
            let e = acc.entry(l.id).or_insert((0.0, Point2::zeros(), Matrix2::zeros(), 0));
            e.0 += p.weight;
            e.1 += p.weight * l.mean;
            e.2 += p.weight * l.cov;
            e.3 = e.3.max(l.hits);
        }
    }
    let map = acc
        .into_iter()
        .filter(|(_, (w, ..))| *w > 0.0 && *w >= min_presence)
        .map(|(id, (w, m, cov, hits))| MapLandmark {
            id,
            mean: m / w,
            cov: cov / w,
            hits,
            presence: w,
        })
        .collect();
    (Pose2::new(x, y, heading), map)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObservationNoise {
    pub range_std: f64,
    pub azimuth_std: f64,
}

/// Map-frame covariance of a point observed with independent range and
/// bearing errors.
pub fn observation_covariance(point: &CloudPoint, pose: &Pose2, noise: &ObservationNoise) -> Matrix2<f64> {
    let bearing = pose.heading + RADAR_MOUNTS[point.radar] + point.azimuth;
    let (s, c) = bearing.sin_cos();
    let rot = Matrix2::new(c, -s, s, c);
    let tangential = (point.range * noise.azimuth_std).max(1e-3);
    let d = Matrix2::new(noise.range_std * noise.range_std, 0.0, 0.0, tangential * tangential);
    rot * d * rot.transpose()
}

/// Settings of the per-cycle landmark update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateParams {
    pub gate: f64,
    pub observation: ObservationNoise,
    pub init_std: f64,
    pub unmatched_penalty: f64,
    pub prune_after: usize,
    pub min_hits: u32,
}

pub fn landmark_id(cycle: usize, point: usize) -> u64 {
    ((cycle as u64) << 32) | point as u64
}

/// Associates, updates and extends one particle's map with the cloud.
/// Returns the particle's observation log-likelihood: each matched point
/// contributes `−½ a Δᵀ(Λ + J_c)⁻¹Δ` and each point with no landmark inside
/// the gate `−½ a · penalty`, where `a` is the point's amplitude relative to
/// the strongest point of the cycle.
pub fn update_particle(particle: &mut Particle, cloud: &PointCloud, cycle: usize, params: &UpdateParams) -> Result<f64> {
    let pts = compensate(cloud, &particle.pose);
    let peak = cloud.points.iter().map(|p| p.amplitude.norm()).fold(0.0, f64::max);
    let amp = |u: usize| {
        if peak > 0.0 {
            cloud.points[u].amplitude.norm() / peak
        } else {
            1.0
        }
    };
    let means: Vec<Point2> = particle.landmarks.iter().map(|l| l.mean).collect();
    let assoc = associate(&pts, &means, params.gate);
    let mut ll = 0.0;
    for &(u, l) in &assoc.matches {
        let jc = observation_covariance(&cloud.points[u], &particle.pose, &params.observation);
        let lm = &particle.landmarks[l];
        let s_inv = checked_inverse(&(lm.cov + jc))?;
        let d = pts[u] - lm.mean;
        ll -= 0.5 * amp(u) * (d.transpose() * s_inv * d)[0];
        let mut updated = ekf_update(lm, pts[u], &jc)?;
        updated.hits += 1;
        updated.last_seen = cycle;
        particle.landmarks[l] = updated;
    }
    let init = Matrix2::from_diagonal_element(params.init_std * params.init_std);
    for &u in &assoc.unmatched {
        let near_old = means.iter().any(|m| (pts[u] - m).norm() <= params.gate);
        if !near_old {
            ll -= 0.5 * amp(u) * params.unmatched_penalty;
        }
        let near_any = near_old || particle.landmarks[means.len()..].iter().any(|l| (pts[u] - l.mean).norm() <= params.gate);
        if !near_any {
            particle.landmarks.push(Landmark {
                id: landmark_id(cycle, u),
                mean: pts[u],
                cov: init,
                hits: 1,
                last_seen: cycle,
            });
        }
    }
    particle
        .landmarks
        .retain(|l| cycle - l.last_seen < params.prune_after || l.hits >= params.min_hits);
    Ok(ll)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lm(mean: Point2, cov: Matrix2<f64>) -> Landmark {
        Landmark {
            id: 0,
            mean,
            cov,
            hits: 1,
            last_seen: 0,
        }
    }

    fn particle(pose: Pose2, weight: f64) -> Particle {
        Particle {
            pose,
            weight,
            landmarks: vec![],
        }
    }

    #[test]
    fn compensate_front_point_and_round_trip() {
        let cloud = PointCloud {
            cycle: 0,
            points: vec![CloudPoint {
                range: 7.0,
                azimuth: 0.0,
                amplitude: Complex64::new(1.0, 0.0),
                radar: 0,
            }],
        };
        let p = compensate(&cloud, &Pose2::new(2.0, 3.0, 0.0));
        assert_abs_diff_eq!((p[0] - Point2::new(9.0, 3.0)).norm(), 0.0, epsilon = 1e-12);
        let pose = Pose2::new(2.0, 3.0, std::f64::consts::FRAC_PI_2);
        let q = compensate(&cloud, &pose)[0];
        assert_abs_diff_eq!((q - Point2::new(2.0, 10.0)).norm(), 0.0, epsilon = 1e-12);
        let back = pose.inverse_transform_point(q);
        assert_abs_diff_eq!((back - cloud.points[0].vehicle_position()).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn association_cases() {
        let a = associate(&[Point2::new(1.0, 1.0)], &[Point2::new(1.0, 1.0)], 2.0);
        assert_eq!(a.matches, vec![(0, 0)]);
        let b = associate(&[Point2::new(5.0, 1.0)], &[Point2::new(1.0, 1.0)], 2.0);
        assert!(b.matches.is_empty());
        assert_eq!(b.unmatched, vec![0]);
        // Two points compete for one landmark; the closer one wins.
        let c = associate(&[Point2::new(0.0, 1.0), Point2::new(0.0, 0.5)], &[Point2::zeros()], 2.0);
        assert_eq!(c.matches, vec![(1, 0)]);
        assert_eq!(c.unmatched, vec![0]);
    }

    #[test]
    fn scalar_kalman_step() {
        let l = lm(Point2::new(1.0, 0.0), Matrix2::identity());
        let u = ekf_update(&l, Point2::new(3.0, 0.0), &Matrix2::identity()).unwrap();
        assert_abs_diff_eq!(u.cov[(0, 0)], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(u.mean.x, 2.0, epsilon = 1e-12);
        let same = ekf_update(&l, l.mean, &Matrix2::identity()).unwrap();
        assert_eq!(same.mean, l.mean);
        let singular = ekf_update(&lm(Point2::zeros(), Matrix2::zeros()), Point2::zeros(), &Matrix2::zeros());
        assert!(matches!(singular, Err(Error::SingularInnovationCov)));
    }

    #[test]
    fn psd_clamp() {
        let m = Matrix2::new(1.0, 2.0, 2.0, 1.0);
        let p = symmetric_psd(&m);
        let e = SymmetricEigen::new(p).eigenvalues;
        assert!(e.iter().all(|&v| v >= -1e-12));
        assert_abs_diff_eq!(p[(0, 1)], p[(1, 0)], epsilon = 0.0);
    }

    #[test]
    fn zero_noise_prediction_moves_rigidly() {
        let mut ps = vec![particle(Pose2::new(1.0, 2.0, 0.3), 0.5), particle(Pose2::new(1.0, 2.0, 0.3), 0.5)];
        let still = ps.clone();
        let zero = ProcessNoise {
            sigma_t: 0.0,
            sigma_r: 0.0,
        };
        predict_particles(&mut ps, Pose2::IDENTITY, &zero, 1, 1);
        assert_eq!(ps, still);
        predict_particles(&mut ps, Pose2::new(1.0, 0.0, 0.1), &zero, 1, 2);
        assert_eq!(ps[0].pose, ps[1].pose);
        assert_abs_diff_eq!(ps[0].pose.x, 1.0 + 0.3f64.cos(), epsilon = 1e-12);
    }

    #[test]
    fn weights_normalize_and_prefer_likelier() {
        let mut one = vec![particle(Pose2::IDENTITY, 1.0)];
        weight_particles(&mut one, &[-3.0]);
        assert_eq!(one[0].weight, 1.0);
        let mut two = vec![particle(Pose2::IDENTITY, 0.5), particle(Pose2::IDENTITY, 0.5)];
        weight_particles(&mut two, &[-1.0, -1.0]);
        assert_eq!(two[0].weight, 0.5);
        weight_particles(&mut two, &[f64::NEG_INFINITY, f64::NEG_INFINITY]);
        assert_eq!(two[1].weight, 0.5);
        weight_particles(&mut two, &[-0.1, -2.0]);
        assert!(two[0].weight > two[1].weight);
        assert_abs_diff_eq!(two[0].weight + two[1].weight, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn systematic_resampling_cases() {
        let mut ps: Vec<Particle> = (0..4).map(|i| particle(Pose2::new(i as f64, 0.0, 0.0), 0.0)).collect();
        ps[2].weight = 1.0;
        assert!(resample(&ps, 3).iter().all(|p| p.pose.x == 2.0));
        for p in ps.iter_mut() {
            p.weight = 0.25;
        }
        for s in 0..20 {
            let mut xs: Vec<f64> = resample(&ps, s).iter().map(|p| p.pose.x).collect();
            xs.sort_by(f64::total_cmp);
            assert_eq!(xs, vec![0.0, 1.0, 2.0, 3.0]);
        }
    }

    #[test]
    fn estimate_cases() {
        let mut a = particle(Pose2::new(1.0, 2.0, 0.5), 1.0);
        a.landmarks.push(lm(Point2::new(4.0, 4.0), Matrix2::identity()));
        let mut b = particle(Pose2::new(-3.0, 0.0, -2.0), 0.0);
        b.landmarks.push(lm(Point2::new(9.0, 9.0), Matrix2::identity()));
        let (pose, map) = estimate(&[a.clone(), b], 0.5);
        assert_eq!(pose, a.pose);
        assert_eq!(map.len(), 1);
        assert_eq!(map[0].mean, Point2::new(4.0, 4.0));
        let (p2, m2) = estimate(&[Particle { weight: 0.5, ..a.clone() }, Particle { weight: 0.5, ..a.clone() }], 0.5);
        assert_abs_diff_eq!(p2.x, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p2.heading, 0.5, epsilon = 1e-15);
        assert_eq!(m2[0].mean, Point2::new(4.0, 4.0));
    }

    #[test]
    fn update_creates_and_then_matches() {
        let cloud = PointCloud {
            cycle: 0,
            points: vec![CloudPoint {
                range: 10.0,
                azimuth: 0.1,
                amplitude: Complex64::new(1.0, 0.0),
                radar: 0,
            }],
        };
        let params = UpdateParams {
            gate: 2.0,
            observation: ObservationNoise {
                range_std: 0.5,
                azimuth_std: 0.02,
            },
            init_std: 1.0,
            unmatched_penalty: 9.0,
            prune_after: 10,
            min_hits: 2,
        };
        let mut p = particle(Pose2::IDENTITY, 1.0);
        let ll0 = update_particle(&mut p, &cloud, 0, &params).unwrap();
        assert_abs_diff_eq!(ll0, -4.5, epsilon = 1e-12);
        assert_eq!(p.landmarks.len(), 1);
        let ll1 = update_particle(&mut p, &cloud, 1, &params).unwrap();
        assert_abs_diff_eq!(ll1, 0.0, epsilon = 1e-12);
        assert_eq!(p.landmarks[0].hits, 2);
        assert!(p.landmarks[0].cov.trace() < 2.0);
    }

    #[test]
    fn random_psd_update_keeps_psd_and_shrinks_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let a = Matrix2::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let b = Matrix2::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let l = lm(Point2::zeros(), a * a.transpose());
            let jc = b * b.transpose() + Matrix2::identity() * 1e-3;
            let u = ekf_update(&l, Point2::new(1.0, -1.0), &jc).unwrap();
            assert_eq!(u.cov[(0, 1)], u.cov[(1, 0)]);
            assert!(SymmetricEigen::new(u.cov).eigenvalues.iter().all(|&v| v >= 0.0));
            assert!(u.cov.trace() <= l.cov.trace() + 1e-12);
        }
    }
}
