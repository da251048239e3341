//! Localization and mapping from per-cycle point clouds.

mod filter;
mod registration;

pub use filter::{
    associate, compensate, effective_sample_size, ekf_update, estimate, landmark_id, motion_perturbation,
    observation_covariance, predict_particles, resample, symmetric_psd, systematic_indices, update_particle,
    weight_particles, AssociationResult, Landmark, MapLandmark, ObservationNoise, Particle, ProcessNoise,
    UpdateParams,
};
pub use registration::{
    cloud_to_grid, register, register_or_prior, registration_loss, GridMap, Registration, RegistrationConfig,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::Pose2;
use crate::pointcloud::PointCloud;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlamConfig {
    pub particles: usize,
    /// Association gate δ_m, meters.
    pub gate: f64,
    /// Rotation weight γ_r of the registration loss.
    pub gamma_r: f64,
    pub process_sigma_t: f64,
    pub process_sigma_r_deg: f64,
    pub obs_range_std: f64,
    pub obs_azimuth_std_deg: f64,
    pub landmark_init_std: f64,
    pub unmatched_penalty: f64,
    pub prune_after: usize,
    pub min_hits: u32,
    /// Share of particle weight a landmark needs to appear in the map.
    pub min_presence: f64,
    pub registration: RegistrationConfig,
}

impl Default for SlamConfig {
    fn default() -> Self {
        Self {
            particles: 50,
            gate: 2.0,
            gamma_r: 10.0,
            process_sigma_t: 0.1,
            process_sigma_r_deg: 0.25,
            obs_range_std: 0.6,
            obs_azimuth_std_deg: 1.0,
            landmark_init_std: 1.0,
            unmatched_penalty: 9.0,
            prune_after: 10,
            min_hits: 2,
            min_presence: 0.5,
            registration: RegistrationConfig::default(),
        }
    }
}

impl SlamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(Error::validation("slam.particles", "must be at least 1"));
        }
        for (v, f) in [
            (self.gate, "slam.gate"),
            (self.obs_range_std, "slam.obs_range_std"),
            (self.obs_azimuth_std_deg, "slam.obs_azimuth_std_deg"),
            (self.landmark_init_std, "slam.landmark_init_std"),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(f, "must be positive"));
            }
        }
        for (v, f) in [
            (self.gamma_r, "slam.gamma_r"),
            (self.process_sigma_t, "slam.process_sigma_t"),
            (self.process_sigma_r_deg, "slam.process_sigma_r_deg"),
            (self.unmatched_penalty, "slam.unmatched_penalty"),
            (self.min_presence, "slam.min_presence"),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::validation(f, "must be non-negative"));
            }
        }
        self.registration.validate()
    }

    fn update_params(&self) -> UpdateParams {
        UpdateParams {
            gate: self.gate,
            observation: ObservationNoise {
                range_std: self.obs_range_std,
                azimuth_std: self.obs_azimuth_std_deg.to_radians(),
            },
            init_std: self.landmark_init_std,
            unmatched_penalty: self.unmatched_penalty,
            prune_after: self.prune_after,
            min_hits: self.min_hits,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CycleEstimate {
    pub cycle: usize,
    pub pose: Pose2,
    /// `None` on the first cycle.
    pub registration: Option<Registration>,
    pub effective_sample_size: f64,
    pub resampled: bool,
}

/// Filter state carried across cycles.
#[derive(Clone, Debug)]
pub struct Slam {
    config: SlamConfig,
    master_seed: u64,
    particles: Vec<Particle>,
    previous: Option<PointCloud>,
    last_motion: Pose2,
    cycle: usize,
}

impl Slam {
    pub fn new(config: SlamConfig, initial_pose: Pose2, master_seed: u64) -> Self {
        let n = config.particles;
        let particles = (0..n)
            .map(|_| Particle {
                pose: initial_pose,
                weight: 1.0 / n as f64,
                landmarks: Vec::new(),
            })
            .collect();
        Self {
            config,
            master_seed,
            particles,
            previous: None,
            last_motion: Pose2::IDENTITY,
            cycle: 0,
        }
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn cycle(&self) -> usize {
        self.cycle
    }

    /// Registers, predicts, updates and weights with one cycle's cloud.
    pub fn step(&mut self, cloud: &PointCloud) -> Result<CycleEstimate> {
        let cycle = self.cycle;
        let registration = match &self.previous {
            Some(prev) => {
                let r = register_or_prior(cloud, prev, self.last_motion, &self.config.registration)?;
                self.last_motion = r.motion;
                let noise = ProcessNoise {
                    sigma_t: self.config.process_sigma_t,
                    sigma_r: self.config.process_sigma_r_deg.to_radians(),
                };
                predict_particles(&mut self.particles, r.motion, &noise, self.master_seed, cycle);
                Some(r)
            }
            None => None,
        };
        let params = self.config.update_params();
        let ll = self
            .particles
            .iter_mut()
            .map(|p| update_particle(p, cloud, cycle, &params))
            .collect::<Result<Vec<f64>>>()?;
        weight_particles(&mut self.particles, &ll);
        let (pose, _) = estimate(&self.particles, self.config.min_presence);
        let ess = effective_sample_size(&self.particles);
        let resampled = ess < self.config.particles as f64 / 2.0;
        if resampled {
            let seed = crate::seed::derive(self.master_seed, crate::seed::Stream::Resampling, &[cycle as u64]);
            self.particles = resample(&self.particles, seed);
        }
        if !cloud.is_empty() || self.previous.is_none() {
            self.previous = Some(cloud.clone());
        }
        self.cycle += 1;
        Ok(CycleEstimate {
            cycle,
            pose,
            registration,
            effective_sample_size: ess,
            resampled,
        })
    }

    pub fn map(&self) -> Vec<MapLandmark> {
        estimate(&self.particles, self.config.min_presence).1
    }
}
