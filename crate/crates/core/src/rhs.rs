//! Aperture geometry and the far-field radiation model of a series-fed
//! holographic surface, plus the phase-only array used as a baseline.
//!
//! Conventions (2D world, elevation fixed at broadside):
//! * the radar frame has its boresight along +x; azimuth is measured from +x
//!   towards +y;
//! * steering entry `a_m(θ) = exp(j k <p_m, u(θ)>)` with `u(θ) = (cos θ, sin θ)`;
//! * feed entry `q_m = exp(-j k n_s |p_m - feed|)` (surface-wave propagation).
//!
//! The one-way response of an aperture driven with complex element weights
//! `w` is `g(θ) = Σ_m w_m a_m(θ)`. A holographic pattern drives element `m`
//! with `w_m = ψ_m q_m`, so `g(θ) = aᵀ(θ) Ψ q`.

use nalgebra::Vector2;
use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type Point2 = Vector2<f64>;

#[derive(Clone, Debug, PartialEq)]
pub struct ApertureGeometry {
    element_positions: Vec<Point2>,
    feed_position: Point2,
    wavelength: f64,
    surface_index: f64,
}

impl ApertureGeometry {
    pub fn new(
        element_positions: Vec<Point2>,
        feed_position: Point2,
        wavelength: f64,
        surface_index: f64,
    ) -> Result<Self> {
        if element_positions.is_empty() {
            return Err(Error::InvalidGeometry("at least one element is required".into()));
        }
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::InvalidGeometry(format!("wavelength must be positive, got {wavelength}")));
        }
        if !(surface_index >= 1.0 && surface_index.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "surface-wave index must be >= 1, got {surface_index}"
            )));
        }
        if element_positions.iter().chain([&feed_position]).any(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(Error::InvalidGeometry("non-finite coordinate".into()));
        }
        for (i, a) in element_positions.iter().enumerate() {
            for b in &element_positions[i + 1..] {
                if (a - b).norm() <= 0.0 {
                    return Err(Error::InvalidGeometry("coincident elements (zero spacing)".into()));
                }
            }
        }
        Ok(Self {
            element_positions,
            feed_position,
            wavelength,
            surface_index,
        })
    }

    /// Uniform line of `count` elements along the y axis, centred on the
    /// origin, with the feed one spacing beyond the first element.
    pub fn uniform_linear(count: usize, spacing: f64, wavelength: f64, surface_index: f64) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidGeometry("at least one element is required".into()));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidGeometry(format!("element spacing must be positive, got {spacing}")));
        }
        let centre = (count as f64 - 1.0) / 2.0;
        let positions = (0..count)
            .map(|m| Point2::new(0.0, (m as f64 - centre) * spacing))
            .collect::<Vec<_>>();
        let feed = Point2::new(0.0, (-centre - 1.0) * spacing);
        Self::new(positions, feed, wavelength, surface_index)
    }

    /// Same elements with the feed reflected through their centroid, i.e.
    /// moved to the opposite end of a linear aperture.
    pub fn with_opposite_feed(&self) -> Self {
        let n = self.element_positions.len() as f64;
        let centroid = self.element_positions.iter().sum::<Point2>() / n;
        Self {
            feed_position: centroid * 2.0 - self.feed_position,
            ..self.clone()
        }
    }

    pub fn element_count(&self) -> usize {
        self.element_positions.len()
    }

    pub fn element_positions(&self) -> &[Point2] {
        &self.element_positions
    }

    pub fn feed_position(&self) -> Point2 {
        self.feed_position
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn surface_index(&self) -> f64 {
        self.surface_index
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength
    }

    /// Smallest distance between two elements; infinite for a single element.
    pub fn min_spacing(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.element_positions.iter().enumerate() {
            for b in &self.element_positions[i + 1..] {
                best = best.min((a - b).norm());
            }
        }
        best
    }

    pub(crate) fn digest_into(&self, hasher: &mut Sha256) {
        hasher.update((self.element_positions.len() as u64).to_le_bytes());
        for p in &self.element_positions {
            hasher.update(p.x.to_le_bytes());
            hasher.update(p.y.to_le_bytes());
        }
        hasher.update(self.feed_position.x.to_le_bytes());
        hasher.update(self.feed_position.y.to_le_bytes());
        hasher.update(self.wavelength.to_le_bytes());
        hasher.update(self.surface_index.to_le_bytes());
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SteeringVector {
    pub azimuth: f64,
    entries: Vec<Complex64>,
}

impl SteeringVector {
    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeedPhaseVector {
    entries: Vec<Complex64>,
}

impl FeedPhaseVector {
    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }
}

pub fn steering_vector(geometry: &ApertureGeometry, azimuth: f64) -> SteeringVector {
    let k = geometry.wavenumber();
    let u = Point2::new(azimuth.cos(), azimuth.sin());
    let entries = geometry
        .element_positions
        .iter()
        .map(|p| Complex64::from_polar(1.0, k * p.dot(&u)))
        .collect();
    SteeringVector { azimuth, entries }
}

pub fn feed_phase_vector(geometry: &ApertureGeometry) -> FeedPhaseVector {
    let beta = geometry.wavenumber() * geometry.surface_index;
    let entries = geometry
        .element_positions
        .iter()
        .map(|p| Complex64::from_polar(1.0, -beta * (p - geometry.feed_position).norm()))
        .collect();
    FeedPhaseVector { entries }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Transmit,
    Receive,
}

/// Per-element radiation amplitudes of one surface for one scan slot.
#[derive(Clone, Debug, PartialEq)]
pub struct HolographicPattern {
    psi: Vec<f64>,
    pub role: Role,
    pub slot: usize,
}

impl HolographicPattern {
    pub fn new(psi: Vec<f64>, role: Role, slot: usize) -> Result<Self> {
        if psi.is_empty() {
            return Err(Error::InvalidPattern("empty amplitude vector".into()));
        }
        if let Some((m, v)) = psi.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidPattern(format!("amplitude {m} = {v} outside [0, 1]")));
        }
        Ok(Self { psi, role, slot })
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    /// `Σ ψ_m²`, which equals `‖Ψ q‖²` for any unit-modulus feed vector.
    pub fn power(&self) -> f64 {
        self.psi.iter().map(|v| v * v).sum()
    }

    /// Complex drive `ψ_m q_m` seen by the free-space side of the surface.
    pub fn element_weights(&self, geometry: &ApertureGeometry) -> Vec<Complex64> {
        let q = feed_phase_vector(geometry);
        self.psi.iter().zip(q.entries()).map(|(&p, &q)| q * p).collect()
    }
}

/// One-way response `aᵀ(θ) w` of an aperture with complex element weights.
pub fn aperture_response(geometry: &ApertureGeometry, weights: &[Complex64], azimuth: f64) -> Complex64 {
    debug_assert_eq!(weights.len(), geometry.element_count());
    steering_vector(geometry, azimuth)
        .entries
        .iter()
        .zip(weights)
        .map(|(a, w)| a * w)
        .sum()
}

fn check_len(pattern: &HolographicPattern, geometry: &ApertureGeometry) -> Result<()> {
    if pattern.len() != geometry.element_count() {
        return Err(Error::InvalidPattern(format!(
            "pattern has {} amplitudes, geometry has {} elements",
            pattern.len(),
            geometry.element_count()
        )));
    }
    Ok(())
}

/// Two-way gain `h(θ) = q_Rᵀ Ψ_R a_R(θ) · a_Tᵀ(θ) Ψ_T q_T`.
pub fn overall_gain(
    pattern_tx: &HolographicPattern,
    pattern_rx: &HolographicPattern,
    geom_tx: &ApertureGeometry,
    geom_rx: &ApertureGeometry,
    azimuth: f64,
) -> Result<Complex64> {
    check_len(pattern_tx, geom_tx)?;
    check_len(pattern_rx, geom_rx)?;
    let rx = aperture_response(geom_rx, &pattern_rx.element_weights(geom_rx), azimuth);
    let tx = aperture_response(geom_tx, &pattern_tx.element_weights(geom_tx), azimuth);
    Ok(rx * tx)
}

/// Echo SNR towards `azimuth`: `|h|² / (Σ ψ_R² σ²)`.
pub fn snr(
    pattern_tx: &HolographicPattern,
    pattern_rx: &HolographicPattern,
    geom_tx: &ApertureGeometry,
    geom_rx: &ApertureGeometry,
    azimuth: f64,
    sigma: f64,
) -> Result<f64> {
    let noise = pattern_rx.power() * sigma * sigma;
    if pattern_rx.power() == 0.0 {
        return Err(Error::ZeroReceivePattern);
    }
    let h = overall_gain(pattern_tx, pattern_rx, geom_tx, geom_rx, azimuth)?;
    Ok(h.norm_sqr() / noise)
}

/// Phase-only weights of the cost-equivalent phased array. Amplitudes are 1.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseOnlyPattern {
    pub phases: Vec<f64>,
}

impl PhaseOnlyPattern {
    /// Number of phased-array elements that cost the same as `rhs_elements`
    /// holographic elements.
    pub fn element_count_for(rhs_elements: usize, cost_ratio: f64) -> usize {
        (rhs_elements as f64 / cost_ratio).floor() as usize
    }

    /// Conjugate-matched weights steering the array towards `azimuth`.
    pub fn steered(geometry: &ApertureGeometry, azimuth: f64) -> Self {
        let phases = steering_vector(geometry, azimuth)
            .entries
            .iter()
            .map(|a| -a.arg())
            .collect();
        Self { phases }
    }

    pub fn weights(&self) -> Vec<Complex64> {
        self.phases.iter().map(|&p| Complex64::from_polar(1.0, p)).collect()
    }
}

pub fn phased_array_gain(pattern: &PhaseOnlyPattern, geometry: &ApertureGeometry, azimuth: f64) -> Complex64 {
    aperture_response(geometry, &pattern.weights(), azimuth)
}

/// Effective complex element weights of one Tx/Rx pair for one slot.
///
/// Both architectures reduce to this form: a holographic surface drives
/// element `m` with `ψ_m q_m`, a phased array with `A e^{jφ_m}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotBeam {
    pub tx: Vec<Complex64>,
    pub rx: Vec<Complex64>,
}

impl SlotBeam {
    pub fn from_patterns(
        tx: &HolographicPattern,
        rx: &HolographicPattern,
        geom_tx: &ApertureGeometry,
        geom_rx: &ApertureGeometry,
    ) -> Self {
        Self {
            tx: tx.element_weights(geom_tx),
            rx: rx.element_weights(geom_rx),
        }
    }

    pub fn gain(&self, geom_tx: &ApertureGeometry, geom_rx: &ApertureGeometry, azimuth: f64) -> Complex64 {
        aperture_response(geom_rx, &self.rx, azimuth) * aperture_response(geom_tx, &self.tx, azimuth)
    }

    /// `Σ |w_R,m|²`; the receive noise variance is this times σ².
    pub fn rx_power(&self) -> f64 {
        self.rx.iter().map(|w| w.norm_sqr()).sum()
    }

    pub fn tx_power(&self) -> f64 {
        self.tx.iter().map(|w| w.norm_sqr()).sum()
    }
}
