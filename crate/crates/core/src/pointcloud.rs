//! Point-cloud generation: matched-filter ranging per slot, then greedy
//! sparse recovery of the directions behind every detected delay.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::frame::Pose2;
use crate::rhs::{Point2, SlotBeam};
use crate::scene::{FrontEnd, Waveform, RADAR_MOUNTS, SPEED_OF_LIGHT};

/// Cross-correlation of one slot signal with the transmitted chirp.
#[derive(Clone, Debug, PartialEq)]
pub struct RangeProfile {
    pub slot: usize,
    /// `values[j]` holds lag `j as isize + first_lag`.
    pub values: Vec<Complex64>,
    pub first_lag: isize,
    /// Width of one delay bin in seconds.
    pub bin_width: f64,
}

impl RangeProfile {
    pub fn at_lag(&self, lag: isize) -> Option<Complex64> {
        let j = lag - self.first_lag;
        (j >= 0).then(|| self.values.get(j as usize).copied()).flatten()
    }

    pub fn last_lag(&self) -> isize {
        self.first_lag + self.values.len() as isize - 1
    }

    /// Divides by the waveform energy so that an echo of complex amplitude
    /// `c` peaks at `c`.
    pub fn normalized(mut self, energy: f64) -> Self {
        self.values.iter_mut().for_each(|v| *v /= energy);
        self
    }
}

/// Reusable FFT correlator for signals of one length.
#[derive(Clone)]
pub struct MatchedFilter {
    signal_len: usize,
    waveform_len: usize,
    fft_len: usize,
    bin_width: f64,
    template: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for MatchedFilter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MatchedFilter")
            .field("signal_len", &self.signal_len)
            .field("fft_len", &self.fft_len)
            .finish()
    }
}

impl MatchedFilter {
    pub fn new(waveform: &Waveform, signal_len: usize) -> Self {
        let n = waveform.len();
        let fft_len = (signal_len + n - 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);
        let mut template = vec![Complex64::new(0.0, 0.0); fft_len];
        template[..n].copy_from_slice(waveform.samples());
        forward.process(&mut template);
        template.iter_mut().for_each(|v| *v = v.conj());
        Self {
            signal_len,
            waveform_len: n,
            fft_len,
            bin_width: 1.0 / waveform.sample_rate,
            template,
            forward,
            inverse,
        }
    }

    /// `ι[k] = Σ_t y[t] x*[t − k]` for `k ∈ [−(N−1), L−1]`.
    pub fn apply(&self, slot: usize, signal: &[Complex64]) -> RangeProfile {
        assert_eq!(signal.len(), self.signal_len, "signal length differs from the planned length");
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft_len];
        buf[..signal.len()].copy_from_slice(signal);
        self.forward.process(&mut buf);
        buf.iter_mut().zip(&self.template).for_each(|(y, x)| *y *= x);
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.fft_len as f64;
        let n = self.waveform_len;
        let mut values = Vec::with_capacity(self.signal_len + n - 1);
        for k in (1..n).rev() {
            values.push(buf[self.fft_len - k] * scale);
        }
        for k in 0..self.signal_len {
            values.push(buf[k] * scale);
        }
        RangeProfile {
            slot,
            values,
            first_lag: -(n as isize - 1),
            bin_width: self.bin_width,
        }
    }
}

pub fn matched_filter(slot: usize, signal: &[Complex64], waveform: &Waveform) -> RangeProfile {
    MatchedFilter::new(waveform, signal.len()).apply(slot, signal)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DetectionThreshold {
    Fixed(f64),
    /// Multiple of the median of `|ι|` over each profile, but never below
    /// `floor`.
    MedianFactor { factor: f64, floor: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Detection {
    pub lag: isize,
    pub delay: f64,
    pub slot: usize,
    pub magnitude: f64,
}

impl Detection {
    pub fn range(&self) -> f64 {
        delay_to_range(self.delay)
    }
}

pub fn delay_to_range(delay: f64) -> f64 {
    delay * SPEED_OF_LIGHT / 2.0
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DetectionSet {
    pub entries: Vec<Detection>,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Local maxima of `|ι|` at positive lags that exceed the threshold. A peak
/// must rise strictly above its left neighbour and not fall below its right
/// one, so a two-sample plateau reports its earlier sample once.
pub fn detect_peaks(profiles: &[RangeProfile], threshold: DetectionThreshold) -> DetectionSet {
    let mut entries = Vec::new();
    for p in profiles {
        let mags: Vec<f64> = p.values.iter().map(|v| v.norm()).collect();
        let level = match threshold {
            DetectionThreshold::Fixed(t) => t,
            DetectionThreshold::MedianFactor { factor, floor } => (factor * median(mags.clone())).max(floor),
        };
        for j in 1..mags.len().saturating_sub(1) {
            let lag = j as isize + p.first_lag;
            if lag < 1 {
                continue;
            }
            let m = mags[j];
            if m > level && m > mags[j - 1] && m >= mags[j + 1] {
                entries.push(Detection {
                    lag,
                    delay: lag as f64 * p.bin_width,
                    slot: p.slot,
                    magnitude: m,
                });
            }
        }
    }
    DetectionSet { entries }
}

/// Collapses detections whose lags chain within one bin into a single
/// delay, keeping the strongest lag of each cluster.
pub fn merge_detections(set: &DetectionSet) -> Vec<Detection> {
    let mut sorted = set.entries.clone();
    sorted.sort_by(|a, b| a.lag.cmp(&b.lag).then(b.magnitude.total_cmp(&a.magnitude)));
    let mut out: Vec<Detection> = Vec::new();
    let mut last_lag = isize::MIN;
    for d in sorted {
        match out.last_mut() {
            Some(best) if d.lag - last_lag <= 1 => {
                if d.magnitude > best.magnitude {
                    *best = d;
                }
            }
            _ => out.push(d),
        }
        last_lag = d.lag;
    }
    out
}

/// `H[i][i'] = h_i(θ_{i'})`, stored column-wise.
#[derive(Clone, Debug, PartialEq)]
pub struct Dictionary {
    columns: Vec<Vec<Complex64>>,
    pub directions: Vec<f64>,
    rows: usize,
}

impl Dictionary {
    pub fn from_columns(columns: Vec<Vec<Complex64>>, directions: Vec<f64>) -> Self {
        let rows = columns.first().map_or(0, |c| c.len());
        debug_assert!(columns.iter().all(|c| c.len() == rows));
        debug_assert_eq!(columns.len(), directions.len());
        Self {
            columns,
            directions,
            rows,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[Complex64] {
        &self.columns[j]
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.columns[j][i]
    }

    /// Whether noiseless single-direction recovery is guaranteed for every
    /// column: `|h_jᴴ h_k| < ‖h_j‖²` for all `k ≠ j`.
    pub fn single_target_recoverable(&self) -> bool {
        (0..self.cols()).all(|j| {
            let nj = norm_sqr(&self.columns[j]);
            (0..self.cols()).all(|k| k == j || inner(&self.columns[k], &self.columns[j]).norm() < nj)
        })
    }
}

/// Dictionary over `directions` from the per-slot beams.
pub fn build_dictionary(beams: &[SlotBeam], front: &FrontEnd, directions: Vec<f64>) -> Dictionary {
    let columns = directions
        .iter()
        .map(|&theta| beams.iter().map(|b| b.gain(&front.tx, &front.rx, theta)).collect())
        .collect();
    Dictionary::from_columns(columns, directions)
}

/// Nearest lag to `delay`; exact half-bin ties go to the lower bin.
pub fn nearest_lag(delay: f64, bin_width: f64) -> isize {
    (delay / bin_width - 0.5).ceil() as isize
}

/// `(ι_1(τ), …, ι_I(τ))` sampled at the common bin nearest `delay`.
pub fn measurement_vector(delay: f64, profiles: &[RangeProfile]) -> Result<Vec<Complex64>> {
    profiles
        .iter()
        .map(|p| p.at_lag(nearest_lag(delay, p.bin_width)).ok_or(Error::OutOfRangeDelay { delay }))
        .collect()
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(a, b)| a.conj() * b).sum()
}

fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct OmpResult {
    pub coefficients: Vec<Complex64>,
    pub residual: Vec<Complex64>,
    pub iterations: usize,
    pub support: Vec<usize>,
}

/// Greedy pursuit: pick the column maximizing `|h_jᴴ r|`, set its
/// coefficient to the single-column least-squares value `h_jᴴ r / ‖h_j‖²`,
/// remove `h_j s_j` from the residual. Stops after `max_iter` iterations or
/// once `‖r‖² < residual_threshold`. A column chosen again accumulates.
pub fn omp_angles(
    measurement: &[Complex64],
    dictionary: &Dictionary,
    max_iter: usize,
    residual_threshold: f64,
) -> OmpResult {
    let norms: Vec<f64> = dictionary.columns.iter().map(|c| norm_sqr(c)).collect();
    let mut s = vec![Complex64::new(0.0, 0.0); dictionary.cols()];
    let mut r = measurement.to_vec();
    let mut support = Vec::new();
    let mut iterations = 0;
    while iterations < max_iter && norm_sqr(&r) >= residual_threshold {
        let mut best: Option<(usize, f64, Complex64)> = None;
        for (j, col) in dictionary.columns.iter().enumerate() {
            if norms[j] == 0.0 {
                continue;
            }
            let c = inner(col, &r);
            if best.is_none_or(|(_, m, _)| c.norm() > m) {
                best = Some((j, c.norm(), c));
            }
        }
        let Some((j, mag, c)) = best else { break };
        if mag == 0.0 {
            break;
        }
        let coef = c / norms[j];
        s[j] += coef;
        for (ri, hi) in r.iter_mut().zip(&dictionary.columns[j]) {
            *ri -= hi * coef;
        }
        if !support.contains(&j) {
            support.push(j);
        }
        iterations += 1;
    }
    OmpResult {
        coefficients: s,
        residual: r,
        iterations,
        support,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CloudPoint {
    pub range: f64,
    /// Azimuth in the radar frame.
    pub azimuth: f64,
    pub amplitude: Complex64,
    pub radar: usize,
}

impl CloudPoint {
    /// Position in the vehicle frame (radar mounting folded in).
    pub fn vehicle_position(&self) -> Point2 {
        let a = self.azimuth + RADAR_MOUNTS[self.radar];
        Point2::new(self.range * a.cos(), self.range * a.sin())
    }

    pub fn map_position(&self, pose: &Pose2) -> Point2 {
        pose.transform_point(self.vehicle_position())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub cycle: usize,
    pub points: Vec<CloudPoint>,
}

impl PointCloud {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                self.cycle, p.radar, p.range, p.azimuth, p.amplitude.re, p.amplitude.im
            )?;
        }
        Ok(())
    }
}

pub const CLOUD_CSV_HEADER: &str = "cycle,radar,range_m,azimuth_rad,amp_re,amp_im";

/// Tolerances for merging duplicate points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MergeTolerance {
    pub range: f64,
    pub azimuth: f64,
}

/// One point per nonzero coefficient per detection; points of the same radar
/// closer than the tolerances collapse onto the stronger one.
pub fn assemble_cloud(
    cycle: usize,
    radar: usize,
    recovered: &[(Detection, OmpResult)],
    dictionary: &Dictionary,
    tolerance: MergeTolerance,
) -> PointCloud {
    let mut points: Vec<CloudPoint> = Vec::new();
    for (det, omp) in recovered {
        for (j, s) in omp.coefficients.iter().enumerate() {
            if s.norm() == 0.0 {
                continue;
            }
            let candidate = CloudPoint {
                range: det.range(),
                azimuth: dictionary.directions[j],
                amplitude: *s,
                radar,
            };
            let dup = points.iter_mut().find(|p| {
                p.radar == radar
                    && (p.range - candidate.range).abs() <= tolerance.range
                    && (p.azimuth - candidate.azimuth).abs() <= tolerance.azimuth
            });
            match dup {
                Some(p) if candidate.amplitude.norm() > p.amplitude.norm() => *p = candidate,
                Some(_) => {}
                None => points.push(candidate),
            }
        }
    }
    PointCloud { cycle, points }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtractorSettings {
    pub threshold: DetectionThreshold,
    /// OMP stops once the residual power falls below this fraction of the
    /// measurement power.
    pub residual_fraction: f64,
    /// Absolute lower bound on the OMP stopping threshold, typically a
    /// multiple of the expected noise energy of a measurement vector.
    pub residual_floor: f64,
    pub merge: MergeTolerance,
}

/// Full per-radar chain from slot signals to the radar's points.
pub fn extract_points(
    cycle: usize,
    radar: usize,
    signals: &[Vec<Complex64>],
    filter: &MatchedFilter,
    waveform_energy: f64,
    dictionary: &Dictionary,
    settings: &ExtractorSettings,
) -> Result<PointCloud> {
    let profiles: Vec<RangeProfile> = signals
        .iter()
        .enumerate()
        .map(|(i, y)| filter.apply(i, y).normalized(waveform_energy))
        .collect();
    let detections = merge_detections(&detect_peaks(&profiles, settings.threshold));
    let mut recovered = Vec::with_capacity(detections.len());
    for d in detections {
        let iota = measurement_vector(d.delay, &profiles)?;
        let threshold = (settings.residual_fraction * norm_sqr(&iota)).max(settings.residual_floor);
        recovered.push((d, omp_angles(&iota, dictionary, dictionary.rows(), threshold)));
    }
    Ok(assemble_cloud(cycle, radar, &recovered, dictionary, settings.merge))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::make_fmcw;
    use rand::{Rng as _, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cplx(rng: &mut ChaCha8Rng) -> Complex64 {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    }

    fn direct_correlation(y: &[Complex64], x: &[Complex64], lag: isize) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (t, yt) in y.iter().enumerate() {
            let j = t as isize - lag;
            if j >= 0 && (j as usize) < x.len() {
                acc += yt * x[j as usize].conj();
            }
        }
        acc
    }

    #[test]
    fn autocorrelation_peaks_at_zero_with_energy() {
        let w = make_fmcw(24e9, 50e6, 1e-6, 50e6).unwrap();
        let p = matched_filter(0, w.samples(), &w);
        assert_eq!(p.values.len(), 2 * w.len() - 1);
        let (arg, peak) = p
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap();
        assert_eq!(arg as isize + p.first_lag, 0);
        assert!((peak - w.energy()).norm() < 1e-9 * w.energy());
    }

    #[test]
    fn delayed_copy_peaks_at_its_lag() {
        let w = make_fmcw(24e9, 50e6, 1e-6, 50e6).unwrap();
        for k0 in [1usize, 7, 23] {
            let mut y = vec![Complex64::new(0.0, 0.0); w.len() + 30];
            y[k0..k0 + w.len()].copy_from_slice(w.samples());
            let p = matched_filter(0, &y, &w);
            let arg = p.values.iter().enumerate().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm())).unwrap().0;
            assert_eq!(arg as isize + p.first_lag, k0 as isize);
        }
    }

    #[test]
    fn fft_correlation_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = make_fmcw(24e9, 20e6, 1e-6, 40e6).unwrap();
        let y: Vec<Complex64> = (0..77).map(|_| cplx(&mut rng)).collect();
        let p = matched_filter(0, &y, &w);
        assert_eq!(p.values.len(), y.len() + w.len() - 1);
        for (j, v) in p.values.iter().enumerate() {
            let d = direct_correlation(&y, w.samples(), j as isize + p.first_lag);
            assert!((v - d).norm() <= 1e-9 * d.norm().max(1.0));
        }
    }

    fn profile(mags: &[f64]) -> RangeProfile {
        RangeProfile {
            slot: 0,
            values: mags.iter().map(|&m| Complex64::new(m, 0.0)).collect(),
            first_lag: 0,
            bin_width: 200e-9,
        }
    }

    #[test]
    fn monotone_profile_has_no_peaks() {
        let p = profile(&[5.0, 4.0, 3.0, 2.0, 1.0]);
        assert!(detect_peaks(&[p], DetectionThreshold::Fixed(0.1)).entries.is_empty());
    }

    #[test]
    fn peak_delay_maps_to_range() {
        let p = profile(&[0.0, 0.1, 3.0, 0.1, 0.0]);
        let d = detect_peaks(&[p], DetectionThreshold::Fixed(1.0));
        assert_eq!(d.entries.len(), 1);
        assert_eq!(d.entries[0].lag, 2);
        let one_bin = Detection {
            lag: 1,
            delay: 200e-9,
            slot: 0,
            magnitude: 1.0,
        };
        assert!((one_bin.range() - 29.9792458).abs() < 1e-9);
        let plateau = profile(&[0.0, 2.0, 2.0, 0.0]);
        assert_eq!(detect_peaks(&[plateau], DetectionThreshold::Fixed(1.0)).entries.len(), 1);
    }

    #[test]
    fn nearest_lag_ties_go_low() {
        assert_eq!(nearest_lag(2.5, 1.0), 2);
        assert_eq!(nearest_lag(2.6, 1.0), 3);
        assert_eq!(nearest_lag(2.4, 1.0), 2);
        let p = profile(&[1.0, 2.0, 7.0]);
        assert_eq!(measurement_vector(2.0 * 200e-9, &[p.clone()]).unwrap(), vec![Complex64::new(7.0, 0.0)]);
        assert!(matches!(measurement_vector(9e-6, &[p]), Err(Error::OutOfRangeDelay { .. })));
    }

    #[test]
    fn merge_chains_adjacent_bins() {
        let d = |lag, mag| Detection {
            lag,
            delay: lag as f64,
            slot: 0,
            magnitude: mag,
        };
        let set = DetectionSet {
            entries: vec![d(10, 1.0), d(11, 3.0), d(10, 2.0), d(40, 1.0)],
        };
        let merged = merge_detections(&set);
        assert_eq!(merged.len(), 2);
        assert_eq!(merged[0].lag, 11);
        assert_eq!(merged[1].lag, 40);
    }

    fn random_dictionary(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Dictionary {
        let columns = (0..cols).map(|_| (0..rows).map(|_| cplx(rng)).collect()).collect();
        Dictionary::from_columns(columns, (0..cols).map(|j| j as f64).collect())
    }

    #[test]
    fn omp_exact_column_and_zero_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = random_dictionary(&mut rng, 6, 12);
        let r = omp_angles(h.column(5), &h, 6, 1e-20);
        assert_eq!(r.support[0], 5);
        assert!((r.coefficients[5] - 1.0).norm() < 1e-12);
        let zero = vec![Complex64::new(0.0, 0.0); 6];
        let r0 = omp_angles(&zero, &h, 6, 0.0);
        assert_eq!(r0.iterations, 0);
        assert!(r0.coefficients.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn omp_residual_strictly_decreases() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let h = random_dictionary(&mut rng, 8, 32);
            let y: Vec<Complex64> = (0..8).map(|_| cplx(&mut rng)).collect();
            let mut prev = norm_sqr(&y);
            for it in 1..=8 {
                let r = omp_angles(&y, &h, it, 0.0);
                assert!(r.iterations <= 8);
                let now = norm_sqr(&r.residual);
                assert!(now < prev, "iteration {it}: {now} !< {prev}");
                prev = now;
            }
        }
    }

    #[test]
    fn dictionary_entries_match_gains() {
        use crate::rhs::{ApertureGeometry, HolographicPattern, Role};
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let g = ApertureGeometry::uniform_linear(5, 0.0031, 0.0124, 1.73).unwrap();
        let front = FrontEnd { tx: g.clone(), rx: g.clone() };
        let pats: Vec<(HolographicPattern, HolographicPattern)> = (0..4)
            .map(|i| {
                let t = (0..5).map(|_| rng.random_range(0.0..1.0)).collect();
                let r = (0..5).map(|_| rng.random_range(0.0..1.0)).collect();
                (
                    HolographicPattern::new(t, Role::Transmit, i).unwrap(),
                    HolographicPattern::new(r, Role::Receive, i).unwrap(),
                )
            })
            .collect();
        let beams: Vec<SlotBeam> = pats.iter().map(|(t, r)| SlotBeam::from_patterns(t, r, &g, &g)).collect();
        let dirs: Vec<f64> = (0..8).map(|j| -0.7 + 0.2 * j as f64).collect();
        let h = build_dictionary(&beams, &front, dirs.clone());
        assert_eq!((h.rows(), h.cols()), (4, 8));
        for i in 0..4 {
            for (j, &d) in dirs.iter().enumerate() {
                let oracle = crate::rhs::overall_gain(&pats[i].0, &pats[i].1, &g, &g, d).unwrap();
                assert!((h.entry(i, j) - oracle).norm() <= 1e-12 * oracle.norm().max(1.0));
            }
        }
        let mut zero_beams = beams.clone();
        zero_beams[2].rx.iter_mut().for_each(|w| *w = Complex64::new(0.0, 0.0));
        let hz = build_dictionary(&zero_beams, &front, dirs);
        assert!((0..8).all(|j| hz.entry(2, j).norm() == 0.0));
    }

    #[test]
    fn assemble_merges_duplicates() {
        let d = Detection {
            lag: 100,
            delay: 100.0 * 4e-9,
            slot: 0,
            magnitude: 1.0,
        };
        let dict = Dictionary::from_columns(vec![vec![Complex64::new(1.0, 0.0)]; 3], vec![0.0, 0.01, 0.5]);
        let mut s = vec![Complex64::new(0.0, 0.0); 3];
        s[0] = Complex64::new(0.5, 0.0);
        s[1] = Complex64::new(0.9, 0.0);
        s[2] = Complex64::new(0.1, 0.0);
        let omp = OmpResult {
            coefficients: s,
            residual: vec![],
            iterations: 3,
            support: vec![1, 0, 2],
        };
        let tol = MergeTolerance {
            range: 0.3,
            azimuth: 0.02,
        };
        let cloud = assemble_cloud(3, 1, &[(d, omp)], &dict, tol);
        assert_eq!(cloud.len(), 2);
        assert_eq!(cloud.points[0].azimuth, 0.01);
        assert!(assemble_cloud(0, 0, &[], &dict, tol).is_empty());
    }
}
