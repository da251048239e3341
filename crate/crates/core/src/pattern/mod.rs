//! Offline optimization of per-slot holographic patterns.
//!
//! For one scan slot the objective is the side-lobe margin
//! `δ = min_{θ̃ ∈ D} γ(θ̄) − γ(θ̃)`, maximized over Tx amplitudes on the power
//! shell `Σψ_T² = P_M, ψ ∈ [0,1]` and Rx amplitudes in `[0,1]`. The problem is
//! split into a transmit and a receive subproblem that are solved alternately,
//! each by projected gradient ascent on a log-sum-exp smoothed minimum.

mod bank;

pub use bank::{build_pattern_bank, BankSlot, PatternBank, BANK_SCHEMA};

use num_complex::Complex64;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rhs::{feed_phase_vector, steering_vector, ApertureGeometry, HolographicPattern, Role};
use crate::seed::{self, Rng, Stream};

/// Reported margin when a slot has no side-lobe directions.
pub const EMPTY_SIDELOBE_MARGIN: f64 = 1e12;

/// Main-lobe exclusion half-width, in grid steps.
pub const MAIN_LOBE_EXCLUSION_STEPS: f64 = 1.5;

/// Uniform angular scan grid of one radar sector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    /// Sector width in radians, centred on the radar boresight.
    pub sector: f64,
    /// Grid step in radians.
    pub step: f64,
}

impl ScanGrid {
    pub fn new(sector: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::validation("grid.step_deg", "must be positive"));
        }
        if !(sector > 0.0 && sector.is_finite()) {
            return Err(Error::validation("grid.sector_deg", "must be positive"));
        }
        let ratio = sector / step;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return Err(Error::validation("grid.step_deg", "must divide the sector into a whole number of slots"));
        }
        Ok(Self { sector, step })
    }

    pub fn from_degrees(sector_deg: f64, step_deg: f64) -> Result<Self> {
        Self::new(sector_deg.to_radians(), step_deg.to_radians())
    }

    pub fn slot_count(&self) -> usize {
        (self.sector / self.step).round() as usize
    }

    pub fn slot_direction(&self, slot: usize) -> f64 {
        -self.sector / 2.0 + (slot as f64 + 0.5) * self.step
    }

    pub fn slot_directions(&self) -> Vec<f64> {
        (0..self.slot_count()).map(|i| self.slot_direction(i)).collect()
    }

    /// `oversample` directions per slot, uniformly spanning the sector.
    pub fn fine_directions(&self, oversample: usize) -> Vec<f64> {
        let n = self.slot_count() * oversample;
        let fine = self.sector / n as f64;
        (0..n).map(|j| -self.sector / 2.0 + (j as f64 + 0.5) * fine).collect()
    }

    pub fn contains(&self, azimuth: f64) -> bool {
        azimuth >= -self.sector / 2.0 && azimuth < self.sector / 2.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlotSpec {
    pub slot: usize,
    pub main_direction: f64,
    pub sidelobes: Vec<f64>,
    /// Transmit power budget `P_M` in watts.
    pub power: f64,
    /// Receiver noise standard deviation.
    pub sigma: f64,
}

impl SlotSpec {
    /// Slot `slot` of `grid`, with every other grid direction outside the
    /// main-lobe exclusion zone as a side-lobe direction.
    pub fn from_grid(grid: &ScanGrid, slot: usize, power: f64, sigma: f64) -> Self {
        Self::from_grid_oversampled(grid, slot, power, sigma, 1)
    }

    /// As `from_grid`, but with side-lobe directions taken from the grid
    /// refined `oversample` times, so lobes narrower than a grid step are
    /// still constrained.
    pub fn from_grid_oversampled(grid: &ScanGrid, slot: usize, power: f64, sigma: f64, oversample: usize) -> Self {
        let main = grid.slot_direction(slot);
        let sidelobes = grid
            .fine_directions(oversample.max(1))
            .into_iter()
            .filter(|d| (d - main).abs() > MAIN_LOBE_EXCLUSION_STEPS * grid.step)
            .collect();
        Self {
            slot,
            main_direction: main,
            sidelobes,
            power,
            sigma,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Relative change of δ between outer iterations below which the
    /// alternation stops.
    pub threshold: f64,
    pub max_outer_iterations: usize,
    pub inner_iterations: usize,
    pub initial_step: f64,
    /// Independent random initializations of the alternation.
    pub restarts: usize,
    /// Extra random starts per subproblem on top of the warm start.
    pub inner_restarts: usize,
    /// Largest gap between side-lobe directions, degrees. The scan grid is
    /// refined by the smallest integer factor that meets it.
    pub sidelobe_spacing_deg: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            threshold: 1e-4,
            max_outer_iterations: 12,
            inner_iterations: 150,
            initial_step: 0.5,
            restarts: 2,
            inner_restarts: 2,
            sidelobe_spacing_deg: 1.0,
            seed: 0x5eed,
        }
    }
}

impl SolverConfig {
    /// Refinement of `grid` that keeps side-lobe directions at most
    /// `sidelobe_spacing_deg` apart.
    pub fn sidelobe_oversample(&self, grid: &ScanGrid) -> usize {
        ((grid.step.to_degrees() / self.sidelobe_spacing_deg) - 1e-9).ceil().max(1.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(Error::validation("solver.threshold", "must be positive"));
        }
        if self.max_outer_iterations == 0 {
            return Err(Error::validation("solver.max_outer_iterations", "must be at least 1"));
        }
        if self.inner_iterations == 0 {
            return Err(Error::validation("solver.inner_iterations", "must be at least 1"));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(Error::validation("solver.initial_step", "must be positive"));
        }
        if self.restarts == 0 {
            return Err(Error::validation("solver.restarts", "must be at least 1"));
        }
        if !(self.sidelobe_spacing_deg > 0.0 && self.sidelobe_spacing_deg.is_finite()) {
            return Err(Error::validation("solver.sidelobe_spacing_deg", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizationResult {
    pub pattern_tx: HolographicPattern,
    pub pattern_rx: HolographicPattern,
    pub margin: f64,
    pub iterations: usize,
    pub delta_history: Vec<f64>,
}

/// Per-direction element responses `b_m(θ) = a_m(θ) q_m`, so that
/// `aᵀ(θ) Ψ q = Σ_m ψ_m b_m(θ)`.
#[derive(Clone, Debug)]
struct Responses {
    main: Vec<Complex64>,
    sides: Vec<Vec<Complex64>>,
}

impl Responses {
    fn new(geometry: &ApertureGeometry, spec: &SlotSpec) -> Self {
        let q = feed_phase_vector(geometry);
        let at = |theta: f64| -> Vec<Complex64> {
            steering_vector(geometry, theta)
                .entries()
                .iter()
                .zip(q.entries())
                .map(|(a, q)| a * q)
                .collect()
        };
        Self {
            main: at(spec.main_direction),
            sides: spec.sidelobes.iter().map(|&t| at(t)).collect(),
        }
    }
}

fn response(b: &[Complex64], psi: &[f64]) -> Complex64 {
    b.iter().zip(psi).map(|(b, &p)| b * p).sum()
}

fn power_of(psi: &[f64]) -> f64 {
    psi.iter().map(|p| p * p).sum()
}

/// Exact side-lobe margin `min_{θ̃∈D} γ(θ̄) − γ(θ̃)`.
pub fn margin(
    pattern_tx: &HolographicPattern,
    pattern_rx: &HolographicPattern,
    geom_tx: &ApertureGeometry,
    geom_rx: &ApertureGeometry,
    spec: &SlotSpec,
) -> Result<f64> {
    let tx = Responses::new(geom_tx, spec);
    let rx = Responses::new(geom_rx, spec);
    margin_raw(pattern_tx.psi(), pattern_rx.psi(), &tx, &rx, spec)
}

fn margin_raw(psi_tx: &[f64], psi_rx: &[f64], tx: &Responses, rx: &Responses, spec: &SlotSpec) -> Result<f64> {
    let noise = power_of(psi_rx) * spec.sigma * spec.sigma;
    if power_of(psi_rx) == 0.0 {
        return Err(Error::ZeroReceivePattern);
    }
    if spec.sidelobes.is_empty() {
        return Ok(EMPTY_SIDELOBE_MARGIN);
    }
    let gamma = |bt: &[Complex64], br: &[Complex64]| {
        (response(bt, psi_tx) * response(br, psi_rx)).norm_sqr() / noise
    };
    let main = gamma(&tx.main, &rx.main);
    let worst_side = tx
        .sides
        .iter()
        .zip(&rx.sides)
        .map(|(bt, br)| gamma(bt, br))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(main - worst_side)
}

/// `max_x min_l  w₀|b₀·x|² − w_l|b_l·x|²` over a set reached by `project`.
/// With no side terms the objective is the main term alone.
struct MaxMin<'a> {
    main_weight: f64,
    main: &'a [Complex64],
    sides: Vec<(f64, &'a [Complex64])>,
}

impl MaxMin<'_> {
    fn terms(&self, x: &[f64]) -> (Complex64, Vec<Complex64>) {
        (response(self.main, x), self.sides.iter().map(|(_, b)| response(b, x)).collect())
    }

    fn differences(&self, main: Complex64, sides: &[Complex64]) -> Vec<f64> {
        let m = self.main_weight * main.norm_sqr();
        self.sides.iter().zip(sides).map(|((w, _), s)| m - w * s.norm_sqr()).collect()
    }

    fn hard(&self, x: &[f64]) -> f64 {
        let (main, sides) = self.terms(x);
        if self.sides.is_empty() {
            return self.main_weight * main.norm_sqr();
        }
        self.differences(main, &sides).into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Log-sum-exp soft minimum at temperature `tau` and its gradient.
    fn smooth(&self, x: &[f64], tau: f64, want_grad: bool) -> (f64, Vec<f64>) {
        let (main, sides) = self.terms(x);
        let mut grad = vec![0.0; if want_grad { x.len() } else { 0 }];
        if self.sides.is_empty() {
            let value = self.main_weight * main.norm_sqr();
            for (g, b) in grad.iter_mut().zip(self.main) {
                *g = 2.0 * self.main_weight * (main.conj() * b).re;
            }
            return (value, grad);
        }
        let d = self.differences(main, &sides);
        let lo = d.iter().copied().fold(f64::INFINITY, f64::min);
        let e: Vec<f64> = d.iter().map(|v| (-(v - lo) / tau).exp()).collect();
        let z: f64 = e.iter().sum();
        let value = lo - tau * z.ln();
        if want_grad {
            for (m, g) in grad.iter_mut().enumerate() {
                let mut acc = self.main_weight * (main.conj() * self.main[m]).re;
                for (((w, b), s), e) in self.sides.iter().zip(&sides).zip(&e) {
                    acc -= (e / z) * w * (s.conj() * b[m]).re;
                }
                *g = 2.0 * acc;
            }
        }
        (value, grad)
    }
}

/// Projected gradient ascent with temperature annealing and a backtracking
/// step. Returns the iterate with the best exact objective. With `tangent`
/// the radial part of the gradient is dropped: on a sphere constraint it
/// only feeds the projection and, for a negative objective, can swamp the
/// useful direction entirely.
fn ascend(
    problem: &MaxMin,
    start: Vec<f64>,
    project: &dyn Fn(&mut [f64]),
    tangent: bool,
    config: &SolverConfig,
) -> (Vec<f64>, f64) {
    const TAU_START: f64 = 5e-2;
    const TAU_END: f64 = 1e-5;
    let mut x = start;
    let mut best_val = problem.hard(&x);
    let mut best = x.clone();
    let mut step = config.initial_step;
    let n = config.inner_iterations;
    for k in 0..n {
        let frac = if n > 1 { k as f64 / (n - 1) as f64 } else { 1.0 };
        let tau = TAU_START * (TAU_END / TAU_START).powf(frac);
        let (f, mut g) = problem.smooth(&x, tau, true);
        if tangent {
            let radial = g.iter().zip(&x).map(|(g, x)| g * x).sum::<f64>() / power_of(&x);
            g.iter_mut().zip(&x).for_each(|(g, x)| *g -= radial * x);
        }
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm == 0.0 || !gnorm.is_finite() {
            break;
        }
        let mut accepted = false;
        for _ in 0..40 {
            let mut y: Vec<f64> = x.iter().zip(&g).map(|(x, g)| x + step * g / gnorm).collect();
            project(&mut y);
            let (fy, _) = problem.smooth(&y, tau, false);
            if fy >= f {
                x = y;
                step = (step * 1.5).min(4.0);
                accepted = true;
                break;
            }
            step *= 0.5;
            if step < 1e-14 {
                break;
            }
        }
        if !accepted {
            step = config.initial_step * 1e-3;
        }
        let val = problem.hard(&x);
        if val > best_val {
            best_val = val;
            best = x.clone();
        }
    }
    (best, best_val)
}

/// Projection used for the Tx power shell: `clip(λ v, 0, 1)` with `λ > 0`
/// chosen so that `Σψ² = power`. Nonpositive entries are lifted to a tiny
/// floor so the shell is always reachable when `power ≤ M`.
pub(crate) fn project_power_shell(v: &mut [f64], power: f64) {
    let m = v.len() as f64;
    if power >= m * (1.0 - 1e-15) {
        v.iter_mut().for_each(|x| *x = 1.0);
        return;
    }
    let vmax = v.iter().copied().fold(0.0_f64, f64::max);
    let floor = if vmax > 0.0 { vmax * 1e-9 } else { 1.0 };
    for x in v.iter_mut() {
        if !(*x > floor) {
            *x = floor;
        }
    }
    let shell = |lambda: f64, v: &[f64]| v.iter().map(|x| (lambda * x).min(1.0).powi(2)).sum::<f64>();
    let mut hi = 1.0 / v.iter().copied().fold(0.0_f64, f64::max);
    while shell(hi, v) < power {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if shell(mid, v) < power {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= hi * 1e-16 {
            break;
        }
    }
    for x in v.iter_mut() {
        *x = (hi * *x).min(1.0);
    }
}

/// Projection onto the nonnegative part of the unit sphere.
fn project_unit_sphere(v: &mut [f64]) {
    for x in v.iter_mut() {
        if !(*x > 0.0) {
            *x = 0.0;
        }
    }
    let norm = power_of(v).sqrt();
    if norm == 0.0 {
        let u = 1.0 / (v.len() as f64).sqrt();
        v.iter_mut().for_each(|x| *x = u);
    } else {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

fn check_power(power: f64, elements: usize) -> Result<()> {
    if !(power > 0.0 && power <= elements as f64 && power.is_finite()) {
        return Err(Error::InfeasiblePower { power, elements });
    }
    Ok(())
}

fn random_feasible_tx(rng: &mut Rng, m: usize, power: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
    project_power_shell(&mut v, power);
    v
}

fn random_rx(rng: &mut Rng, m: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..=1.0)).collect();
        if power_of(&v) > 0.0 {
            return v;
        }
    }
}

/// A random pattern pair feasible for the slot problem: Tx projected onto
/// the power shell, Rx uniform in `[0,1]`.
pub fn random_feasible_pair(rng: &mut Rng, m_tx: usize, m_rx: usize, power: f64) -> (Vec<f64>, Vec<f64>) {
    let tx = random_feasible_tx(rng, m_tx, power);
    let rx = random_rx(rng, m_rx);
    (tx, rx)
}

fn solve_transmit(
    spec: &SlotSpec,
    tx: &Responses,
    rx: &Responses,
    psi_rx: &[f64],
    warm: &[f64],
    config: &SolverConfig,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    let m = warm.len();
    check_power(spec.power, m)?;
    let noise = power_of(psi_rx) * spec.sigma * spec.sigma;
    if noise == 0.0 {
        return Err(Error::ZeroReceivePattern);
    }
    // γ(θ) = c(θ) |b_T(θ)·ψ_T|² with c(θ) = |g_R(θ)|² / noise. Normalize so the
    // objective lies in [-1, 1]: |b·ψ|² ≤ M·P_M on the shell.
    let c = |br: &[Complex64]| response(br, psi_rx).norm_sqr() / noise;
    let c_main = c(&rx.main);
    let c_sides: Vec<f64> = rx.sides.iter().map(|b| c(b)).collect();
    let scale = c_main.max(c_sides.iter().copied().fold(0.0, f64::max)) * m as f64 * spec.power;
    if scale == 0.0 {
        let mut w = warm.to_vec();
        project_power_shell(&mut w, spec.power);
        return Ok(w);
    }
    let problem = MaxMin {
        main_weight: c_main / scale,
        main: &tx.main,
        sides: c_sides.iter().zip(&tx.sides).map(|(c, b)| (c / scale, b.as_slice())).collect(),
    };
    let power = spec.power;
    let project = move |v: &mut [f64]| project_power_shell(v, power);

    let mut warm = warm.to_vec();
    project(&mut warm);
    let warm_val = problem.hard(&warm);
    let mut best = (warm.clone(), warm_val);
    let mut starts = vec![warm];
    starts.extend((0..config.inner_restarts).map(|_| random_feasible_tx(rng, m, power)));
    for s in starts {
        let (x, v) = ascend(&problem, s, &project, false, config);
        if v > best.1 {
            best = (x, v);
        }
    }
    Ok(best.0)
}

fn solve_receive(
    spec: &SlotSpec,
    tx: &Responses,
    rx: &Responses,
    psi_tx: &[f64],
    warm: &[f64],
    config: &SolverConfig,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    let m = warm.len();
    if power_of(warm) == 0.0 {
        return Err(Error::ZeroReceivePattern);
    }
    // Unit-noise form: with ‖ψ_R‖²σ² = 1 the SNR is |g_T|²|g_R|². Work with
    // u = σψ_R on the unit sphere and weights |g_T(θ)|²/σ².
    let sigma2 = spec.sigma * spec.sigma;
    let a = |bt: &[Complex64]| response(bt, psi_tx).norm_sqr() / sigma2;
    let a_main = a(&tx.main);
    let a_sides: Vec<f64> = tx.sides.iter().map(|b| a(b)).collect();
    let scale = a_main.max(a_sides.iter().copied().fold(0.0, f64::max)) * m as f64;
    let mut u0 = warm.to_vec();
    project_unit_sphere(&mut u0);
    let best_u = if scale == 0.0 {
        u0
    } else {
        let problem = MaxMin {
            main_weight: a_main / scale,
            main: &rx.main,
            sides: a_sides.iter().zip(&rx.sides).map(|(c, b)| (c / scale, b.as_slice())).collect(),
        };
        let warm_val = problem.hard(&u0);
        let mut best = (u0.clone(), warm_val);
        let mut starts = vec![u0];
        starts.extend((0..config.inner_restarts).map(|_| {
            let mut v = random_rx(rng, m);
            project_unit_sphere(&mut v);
            v
        }));
        for s in starts {
            let (x, v) = ascend(&problem, s, &project_unit_sphere, true, config);
            if v > best.1 {
                best = (x, v);
            }
        }
        best.0
    };
    // Largest rescaling that keeps every amplitude in [0, 1].
    let peak = best_u.iter().copied().fold(0.0_f64, f64::max);
    if peak == 0.0 {
        return Err(Error::ZeroReceivePattern);
    }
    Ok(best_u.iter().map(|u| (u / peak).clamp(0.0, 1.0)).collect())
}

/// Keeps the warm start unless the candidate strictly improves the margin.
fn keep_better(candidate: Vec<f64>, warm: &[f64], eval: impl Fn(&[f64]) -> Result<f64>) -> Result<Vec<f64>> {
    let (c, w) = (eval(&candidate)?, eval(warm)?);
    Ok(if c > w { candidate } else { warm.to_vec() })
}

fn role_tag(role: Role) -> u64 {
    match role {
        Role::Transmit => 0,
        Role::Receive => 1,
    }
}

/// Transmit subproblem: best Tx pattern for a fixed Rx pattern, never worse
/// than the warm start.
pub fn optimize_transmit(
    spec: &SlotSpec,
    geom_tx: &ApertureGeometry,
    geom_rx: &ApertureGeometry,
    pattern_rx: &HolographicPattern,
    warm_start: &HolographicPattern,
    config: &SolverConfig,
) -> Result<HolographicPattern> {
    let mut rng = seed::rng(config.seed, Stream::Restart, &[spec.slot as u64, role_tag(Role::Transmit)]);
    let tx = Responses::new(geom_tx, spec);
    let rx = Responses::new(geom_rx, spec);
    transmit_step(spec, &tx, &rx, pattern_rx.psi(), warm_start.psi(), config, &mut rng)
        .and_then(|psi| HolographicPattern::new(psi, Role::Transmit, spec.slot))
}

fn transmit_step(
    spec: &SlotSpec,
    tx: &Responses,
    rx: &Responses,
    psi_rx: &[f64],
    warm: &[f64],
    config: &SolverConfig,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    let candidate = solve_transmit(spec, tx, rx, psi_rx, warm, config, rng)?;
    let mut feasible_warm = warm.to_vec();
    project_power_shell(&mut feasible_warm, spec.power);
    let keep_warm = feasible_warm
        .iter()
        .zip(warm)
        .all(|(a, b)| (a - b).abs() <= 1e-12);
    if !keep_warm {
        return Ok(candidate);
    }
    keep_better(candidate, warm, |p| margin_raw(p, psi_rx, tx, rx, spec))
}

/// Receive subproblem, solved in its unit-noise normalized form and rescaled
/// back into the amplitude box; never worse than the warm start.
pub fn optimize_receive(
    spec: &SlotSpec,
    geom_tx: &ApertureGeometry,
    geom_rx: &ApertureGeometry,
    pattern_tx: &HolographicPattern,
    warm_start: &HolographicPattern,
    config: &SolverConfig,
) -> Result<HolographicPattern> {
    let mut rng = seed::rng(config.seed, Stream::Restart, &[spec.slot as u64, role_tag(Role::Receive)]);
    let tx = Responses::new(geom_tx, spec);
    let rx = Responses::new(geom_rx, spec);
    receive_step(spec, &tx, &rx, pattern_tx.psi(), warm_start.psi(), config, &mut rng)
        .and_then(|psi| HolographicPattern::new(psi, Role::Receive, spec.slot))
}

fn receive_step(
    spec: &SlotSpec,
    tx: &Responses,
    rx: &Responses,
    psi_tx: &[f64],
    warm: &[f64],
    config: &SolverConfig,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    let candidate = solve_receive(spec, tx, rx, psi_tx, warm, config, rng)?;
    keep_better(candidate, warm, |p| margin_raw(psi_tx, p, tx, rx, spec))
}

/// Alternates the two subproblems from random Rx initializations and
/// returns the best restart.
pub fn alternating_optimize(
    spec: &SlotSpec,
    geom_tx: &ApertureGeometry,
    geom_rx: &ApertureGeometry,
    config: &SolverConfig,
) -> Result<OptimizationResult> {
    config.validate()?;
    let (mt, mr) = (geom_tx.element_count(), geom_rx.element_count());
    check_power(spec.power, mt)?;
    let tx = Responses::new(geom_tx, spec);
    let rx = Responses::new(geom_rx, spec);

    let mut best: Option<(Vec<f64>, Vec<f64>, Vec<f64>)> = None;
    for restart in 0..config.restarts {
        let mut init = seed::rng(config.seed, Stream::PatternInit, &[spec.slot as u64, restart as u64]);
        let (mut psi_tx, mut psi_rx) = random_feasible_pair(&mut init, mt, mr, spec.power);
        let mut history = vec![margin_raw(&psi_tx, &psi_rx, &tx, &rx, spec)?];
        for outer in 0..config.max_outer_iterations {
            let idx = [spec.slot as u64, restart as u64, outer as u64];
            let mut rng = seed::rng(config.seed, Stream::Restart, &idx);
            psi_tx = transmit_step(spec, &tx, &rx, &psi_rx, &psi_tx, config, &mut rng)?;
            psi_rx = receive_step(spec, &tx, &rx, &psi_tx, &psi_rx, config, &mut rng)?;
            let delta = margin_raw(&psi_tx, &psi_rx, &tx, &rx, spec)?;
            let prev = *history.last().unwrap();
            history.push(delta);
            let scale = delta.abs().max(prev.abs()).max(f64::MIN_POSITIVE);
            if (delta - prev).abs() < config.threshold * scale {
                break;
            }
        }
        let improves = match &best {
            None => true,
            Some((_, _, h)) => history.last() > h.last(),
        };
        if improves {
            best = Some((psi_tx, psi_rx, history));
        }
    }
    let (psi_tx, psi_rx, delta_history) = best.expect("at least one restart");
    Ok(OptimizationResult {
        margin: *delta_history.last().unwrap(),
        iterations: delta_history.len() - 1,
        pattern_tx: HolographicPattern::new(psi_tx, Role::Transmit, spec.slot)?,
        pattern_rx: HolographicPattern::new(psi_rx, Role::Receive, spec.slot)?,
        delta_history,
    })
}
