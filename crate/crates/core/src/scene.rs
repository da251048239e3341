//! Ground truth and synthetic received signals.
//!
//! Each slot signal is
//! `y(t) = Σ_d β'_d h(θ_d) x(t − τ_d) + q_Rᵀ Ψ_R ε(t)` with `τ_d = 2R_d/c` and
//! `β'_d = β_d e^{−j2π f_c τ_d} / R_d²`. Delays are applied in the frequency
//! domain so they are exact at sub-sample resolution for the sampled
//! (band-limited) chirp.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::frame::{wrap_angle, Pose2};
use crate::pattern::ScanGrid;
use crate::rhs::{ApertureGeometry, Point2, SlotBeam};
use crate::seed::{self, Stream};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Facing angles of the four radars relative to the vehicle heading.
pub const RADAR_MOUNTS: [f64; 4] = [0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2];

#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    pub center_frequency: f64,
    pub bandwidth: f64,
    pub chirp_duration: f64,
    pub sample_rate: f64,
    samples: Vec<Complex64>,
}

impl Waveform {
    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.center_frequency
    }

    /// Range covered by one delay bin, `c / (2 f_s)`.
    pub fn range_bin(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.sample_rate)
    }
}

/// Baseband linear chirp sweeping `−B/2 → +B/2` over `T_c`, unit amplitude.
pub fn make_fmcw(center_frequency: f64, bandwidth: f64, chirp_duration: f64, sample_rate: f64) -> Result<Waveform> {
    if !(sample_rate > 0.0) || sample_rate < bandwidth {
        return Err(Error::BadSampling {
            sample_rate,
            bandwidth,
        });
    }
    if !(chirp_duration > 0.0 && center_frequency > 0.0 && bandwidth >= 0.0) {
        return Err(Error::validation("waveform", "frequencies and chirp duration must be positive"));
    }
    let n = (chirp_duration * sample_rate).round().max(1.0) as usize;
    let rate = bandwidth / chirp_duration;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / sample_rate;
            Complex64::from_polar(1.0, 2.0 * PI * (-0.5 * bandwidth * t + 0.5 * rate * t * t))
        })
        .collect();
    Ok(Waveform {
        center_frequency,
        bandwidth,
        chirp_duration,
        sample_rate,
        samples,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Obstacle {
    pub position: Point2,
    pub reflectivity: Complex64,
}

/// An obstacle as seen by one radar.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Echo {
    pub range: f64,
    /// Azimuth in the radar frame.
    pub azimuth: f64,
    pub reflectivity: Complex64,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub obstacles: Vec<Obstacle>,
    /// Ground-truth vehicle pose for each cycle.
    pub trajectory: Vec<Pose2>,
    /// Per-element receiver noise standard deviation (√W).
    pub sigma: f64,
    pub waveform: Waveform,
    pub grid: ScanGrid,
    pub max_range: f64,
}

impl Scenario {
    pub fn cycles(&self) -> usize {
        self.trajectory.len()
    }

    /// Map-frame pose of radar `radar` at `cycle`.
    pub fn radar_pose(&self, cycle: usize, radar: usize) -> Pose2 {
        self.trajectory[cycle].compose(&Pose2::new(0.0, 0.0, RADAR_MOUNTS[radar]))
    }
}

/// Obstacles inside the radar's sector and maximum range, in radar coordinates.
pub fn visible_obstacles(scenario: &Scenario, cycle: usize, radar: usize) -> Vec<Echo> {
    let pose = scenario.radar_pose(cycle, radar);
    scenario
        .obstacles
        .iter()
        .filter_map(|o| {
            let local = pose.inverse_transform_point(o.position);
            let range = local.norm();
            let azimuth = wrap_angle(local.y.atan2(local.x));
            (range > 0.0 && range <= scenario.max_range && scenario.grid.contains(azimuth)).then_some(Echo {
                range,
                azimuth,
                reflectivity: o.reflectivity,
            })
        })
        .collect()
}

/// Tx and Rx apertures of one radar.
#[derive(Clone, Debug)]
pub struct FrontEnd {
    pub tx: ApertureGeometry,
    pub rx: ApertureGeometry,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlotSignal {
    pub cycle: usize,
    pub radar: usize,
    pub slot: usize,
    pub samples: Vec<Complex64>,
}

/// Reusable echo generator for one waveform; caches the zero-padded chirp
/// spectrum.
#[derive(Clone)]
pub struct EchoSynthesizer {
    signal_len: usize,
    fft_len: usize,
    sample_rate: f64,
    center_frequency: f64,
    spectrum: Vec<Complex64>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for EchoSynthesizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EchoSynthesizer")
            .field("signal_len", &self.signal_len)
            .field("fft_len", &self.fft_len)
            .finish()
    }
}

impl EchoSynthesizer {
    pub fn new(waveform: &Waveform, max_range: f64) -> Self {
        let max_delay = (2.0 * max_range / SPEED_OF_LIGHT * waveform.sample_rate).ceil() as usize;
        let signal_len = waveform.len() + max_delay + 2;
        let fft_len = (2 * signal_len).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);
        let mut spectrum = vec![Complex64::new(0.0, 0.0); fft_len];
        spectrum[..waveform.len()].copy_from_slice(waveform.samples());
        forward.process(&mut spectrum);
        Self {
            signal_len,
            fft_len,
            sample_rate: waveform.sample_rate,
            center_frequency: waveform.center_frequency,
            spectrum,
            inverse,
        }
    }

    pub fn signal_len(&self) -> usize {
        self.signal_len
    }

    /// Delayed, attenuated chirp of each echo, before the beam gain:
    /// `β'_d x(t − τ_d)`. Slot independent, so it is shared by every slot
    /// of a radar.
    pub fn prepare(&self, echoes: &[Echo]) -> PreparedEchoes {
        let n = self.fft_len;
        let copies = echoes
            .iter()
            .map(|e| {
                let tau = 2.0 * e.range / SPEED_OF_LIGHT;
                let carrier = Complex64::from_polar(1.0, -2.0 * PI * self.center_frequency * tau);
                let amp = e.reflectivity * carrier / (e.range * e.range);
                let d = tau * self.sample_rate;
                let mut buf: Vec<Complex64> = self
                    .spectrum
                    .iter()
                    .enumerate()
                    .map(|(k, x)| {
                        let kk = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
                        x * amp * Complex64::from_polar(1.0, -2.0 * PI * kk * d / n as f64)
                    })
                    .collect();
                self.inverse.process(&mut buf);
                let scale = 1.0 / n as f64;
                buf.truncate(self.signal_len);
                buf.iter_mut().for_each(|v| *v *= scale);
                (*e, buf)
            })
            .collect();
        PreparedEchoes {
            signal_len: self.signal_len,
            copies,
        }
    }

    /// Noiseless echo of `echoes` seen through `beam`.
    pub fn echo(&self, echoes: &[Echo], beam: &SlotBeam, front: &FrontEnd) -> Vec<Complex64> {
        self.prepare(echoes).echo(beam, front)
    }

    /// Echo plus receiver noise `q_Rᵀ Ψ_R ε(t)`; the noise sum over elements
    /// is drawn directly as one complex Gaussian of variance `Σ|w_R|² σ²`.
    pub fn synthesize(
        &self,
        echoes: &[Echo],
        beam: &SlotBeam,
        front: &FrontEnd,
        sigma: f64,
        noise_seed: u64,
    ) -> Vec<Complex64> {
        self.prepare(echoes).synthesize(beam, front, sigma, noise_seed)
    }
}

#[derive(Clone, Debug)]
pub struct PreparedEchoes {
    signal_len: usize,
    copies: Vec<(Echo, Vec<Complex64>)>,
}

impl PreparedEchoes {
    pub fn echo(&self, beam: &SlotBeam, front: &FrontEnd) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.signal_len];
        for (e, copy) in &self.copies {
            let g = beam.gain(&front.tx, &front.rx, e.azimuth);
            y.iter_mut().zip(copy).for_each(|(v, c)| *v += g * c);
        }
        y
    }

    pub fn synthesize(&self, beam: &SlotBeam, front: &FrontEnd, sigma: f64, noise_seed: u64) -> Vec<Complex64> {
        let mut y = self.echo(beam, front);
        let var = beam.rx_power() * sigma * sigma;
        if var > 0.0 {
            let std = (var / 2.0).sqrt();
            let mut rng = seed::rng(noise_seed, Stream::SlotNoise, &[]);
            for v in y.iter_mut() {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                *v += Complex64::new(re * std, im * std);
            }
        }
        y
    }
}

/// Per-slot noise seed derived from the master seed and the slot indices.
pub fn slot_seed(master: u64, cycle: usize, radar: usize, slot: usize) -> u64 {
    seed::derive(master, Stream::SlotNoise, &[cycle as u64, radar as u64, slot as u64])
}

pub fn synthesize_slot(
    scenario: &Scenario,
    cycle: usize,
    radar: usize,
    slot: usize,
    beam: &SlotBeam,
    front: &FrontEnd,
    master_seed: u64,
) -> SlotSignal {
    let synth = EchoSynthesizer::new(&scenario.waveform, scenario.max_range);
    let echoes = visible_obstacles(scenario, cycle, radar);
    SlotSignal {
        cycle,
        radar,
        slot,
        samples: synth.synthesize(
            &echoes,
            beam,
            front,
            scenario.sigma,
            slot_seed(master_seed, cycle, radar, slot),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rhs::{HolographicPattern, Role};
    use approx::assert_abs_diff_eq;

    fn waveform() -> Waveform {
        make_fmcw(24.125e9, 250e6, 2e-6, 250e6).unwrap()
    }

    fn front(m: usize, lambda: f64) -> FrontEnd {
        let g = ApertureGeometry::uniform_linear(m, lambda / 4.0, lambda, 1.73).unwrap();
        FrontEnd { tx: g.clone(), rx: g }
    }

    fn beam(front: &FrontEnd) -> SlotBeam {
        let m = front.tx.element_count();
        let t = HolographicPattern::new(vec![(1.0 / m as f64).sqrt(); m], Role::Transmit, 0).unwrap();
        let r = HolographicPattern::new(vec![1.0; m], Role::Receive, 0).unwrap();
        SlotBeam::from_patterns(&t, &r, &front.tx, &front.rx)
    }

    fn scenario(obstacles: Vec<Obstacle>, sigma: f64) -> Scenario {
        Scenario {
            obstacles,
            trajectory: vec![Pose2::IDENTITY],
            sigma,
            waveform: waveform(),
            grid: ScanGrid::from_degrees(90.0, 5.0).unwrap(),
            max_range: 100.0,
        }
    }

    #[test]
    fn zero_bandwidth_is_constant_tone() {
        let w = make_fmcw(24e9, 0.0, 1e-6, 100e6).unwrap();
        assert!(w.samples().iter().all(|s| (s.norm() - 1.0).abs() < 1e-12));
        assert!(w.samples().iter().all(|s| (s - w.samples()[0]).norm() < 1e-12));
        assert!(matches!(make_fmcw(24e9, 250e6, 1e-6, 100e6), Err(Error::BadSampling { .. })));
    }

    #[test]
    fn default_band_gives_quarter_gigahertz() {
        let (lo, hi) = (24.0e9, 24.25e9);
        let w = make_fmcw((lo + hi) / 2.0, hi - lo, 10e-6, hi - lo).unwrap();
        assert_abs_diff_eq!(w.bandwidth, 250e6, epsilon = 1e-3);
        assert_eq!(w.len(), 2500);
        assert_abs_diff_eq!(w.range_bin(), 0.5996, epsilon = 1e-4);
    }

    #[test]
    fn chirp_rate_from_phase_differences() {
        // Oversample so the unwrapped phase derivative is well resolved.
        let (b, tc, fs) = (250e6, 2e-6, 2e9);
        let w = make_fmcw(24e9, b, tc, fs).unwrap();
        let s = w.samples();
        let inst_freq: Vec<f64> = s
            .windows(2)
            .map(|p| (p[1] * p[0].conj()).arg() * fs / (2.0 * PI))
            .collect();
        let n = inst_freq.len();
        let slope = (inst_freq[n - 1] - inst_freq[0]) / ((n - 1) as f64 / fs);
        assert!((slope - b / tc).abs() / (b / tc) < 0.01, "slope {slope}");
        assert!((inst_freq[0] + b / 2.0).abs() < 0.01 * b);
    }

    #[test]
    fn front_obstacle_visible_rear_excluded() {
        let o = |x, y| Obstacle {
            position: Point2::new(x, y),
            reflectivity: Complex64::new(0.5, 0.0),
        };
        let s = scenario(vec![o(30.0, 0.0), o(-20.0, 0.0)], 0.0);
        let v = visible_obstacles(&s, 0, 0);
        assert_eq!(v.len(), 1);
        assert_abs_diff_eq!(v[0].range, 30.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[0].azimuth, 0.0, epsilon = 1e-12);
        assert_eq!(v[0].reflectivity, Complex64::new(0.5, 0.0));
        let rear = visible_obstacles(&s, 0, 2);
        assert_eq!(rear.len(), 1);
        assert_abs_diff_eq!(rear[0].range, 20.0, epsilon = 1e-12);
    }

    #[test]
    fn rotated_vehicle_matches_hand_rotation() {
        let mut s = scenario(
            vec![Obstacle {
                position: Point2::new(12.0, 25.0),
                reflectivity: Complex64::new(1.0, 0.0),
            }],
            0.0,
        );
        let (px, py, h) = (2.0, 5.0, 0.9);
        s.trajectory = vec![Pose2::new(px, py, h)];
        // Hand rotation: vehicle frame = R(-h) (p - t); left radar faces +90°.
        let (dx, dy) = (12.0 - px, 25.0 - py);
        let vx = h.cos() * dx + h.sin() * dy;
        let vy = -h.sin() * dx + h.cos() * dy;
        let az_vehicle = vy.atan2(vx);
        let expect_radar = if az_vehicle.abs() < PI / 4.0 { 0 } else { 1 };
        let v = visible_obstacles(&s, 0, expect_radar);
        assert_eq!(v.len(), 1);
        assert_abs_diff_eq!(v[0].range, (dx * dx + dy * dy).sqrt(), epsilon = 1e-12);
        let expect_az = wrap_angle(az_vehicle - RADAR_MOUNTS[expect_radar]);
        assert_abs_diff_eq!(v[0].azimuth, expect_az, epsilon = 1e-12);
    }

    #[test]
    fn empty_noiseless_slot_is_silent() {
        let f = front(4, waveform().wavelength());
        let s = scenario(vec![], 0.0);
        let sig = synthesize_slot(&s, 0, 0, 0, &beam(&f), &f, 1);
        assert!(sig.samples.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn echo_superposition_and_linearity() {
        let w = waveform();
        let f = front(4, w.wavelength());
        let b = beam(&f);
        let synth = EchoSynthesizer::new(&w, 100.0);
        let e1 = Echo {
            range: 30.0,
            azimuth: 0.1,
            reflectivity: Complex64::new(1.0, 0.0),
        };
        let e2 = Echo {
            range: 47.3,
            azimuth: -0.3,
            reflectivity: Complex64::new(0.2, 0.4),
        };
        let a = synth.echo(&[e1], &b, &f);
        let c = synth.echo(&[e2], &b, &f);
        let both = synth.echo(&[e1, e2], &b, &f);
        for i in 0..both.len() {
            assert!((both[i] - a[i] - c[i]).norm() < 1e-12);
        }
        let doubled = synth.echo(
            &[Echo {
                reflectivity: e1.reflectivity * 2.0,
                ..e1
            }],
            &b,
            &f,
        );
        for i in 0..a.len() {
            assert!((doubled[i] - a[i] * 2.0).norm() < 1e-12);
        }
    }

    #[test]
    fn same_seed_same_samples() {
        let f = front(4, waveform().wavelength());
        let s = scenario(
            vec![Obstacle {
                position: Point2::new(30.0, 1.0),
                reflectivity: Complex64::new(1.0, 0.0),
            }],
            1e-3,
        );
        let a = synthesize_slot(&s, 0, 0, 3, &beam(&f), &f, 42);
        let b = synthesize_slot(&s, 0, 0, 3, &beam(&f), &f, 42);
        let c = synthesize_slot(&s, 0, 0, 3, &beam(&f), &f, 43);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn noise_power_calibration() {
        let w = waveform();
        let f = front(4, w.wavelength());
        let b = beam(&f);
        let synth = EchoSynthesizer::new(&w, 100.0);
        let sigma = 0.3;
        let mut total = 0.0;
        let mut count = 0.0;
        for k in 0..1000u64 {
            let y = synth.synthesize(&[], &b, &f, sigma, k);
            total += y.iter().map(|v| v.norm_sqr()).sum::<f64>();
            count += y.len() as f64;
        }
        let ratio = total / (count * sigma * sigma * b.rx_power());
        assert!((ratio - 1.0).abs() < 0.05, "ratio {ratio}");
    }
}
