use std::f64::consts::PI;

use nalgebra::Matrix2;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rhs_slam::config::{Mode, RunConfig};
use rhs_slam::frame::{wrap_angle, Pose2};
use rhs_slam::io::{parse_trajectory_csv, trajectory_csv, RawDump, TrajectoryRow};
use rhs_slam::pattern::{alternating_optimize, margin, random_feasible_pair, ScanGrid, SlotSpec, SolverConfig};
use rhs_slam::pointcloud::{omp_angles, Dictionary};
use rhs_slam::rhs::{ApertureGeometry, HolographicPattern, Point2, Role};
use rhs_slam::slam::{ekf_update, systematic_indices, Landmark};

const LAMBDA: f64 = 299_792_458.0 / 24.125e9;

fn ula(m: usize) -> (ApertureGeometry, ApertureGeometry) {
    let tx = ApertureGeometry::uniform_linear(m, LAMBDA / 4.0, LAMBDA, 1.73).unwrap();
    let rx = tx.with_opposite_feed();
    (tx, rx)
}

fn psd() -> impl Strategy<Value = Matrix2<f64>> {
    (prop::array::uniform4(-3.0..3.0f64), 1e-6..1.0f64).prop_map(|(a, eps)| {
        let a = Matrix2::new(a[0], a[1], a[2], a[3]);
        a * a.transpose() + Matrix2::identity() * eps
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pose_inverse_round_trips(x in -50.0..50.0f64, y in -50.0..50.0f64, h in -PI..PI, px in -50.0..50.0f64, py in -50.0..50.0f64) {
        let pose = Pose2::new(x, y, h);
        let p = Point2::new(px, py);
        let back = pose.inverse_transform_point(pose.transform_point(p));
        prop_assert!((back - p).norm() < 1e-9);
        let id = pose.compose(&pose.inverse());
        prop_assert!(id.position().norm() < 1e-9 && id.heading.abs() < 1e-12);
    }

    #[test]
    fn wrapped_angles_stay_in_range(a in -1e3..1e3f64) {
        let w = wrap_angle(a);
        prop_assert!(w > -PI - 1e-12 && w <= PI + 1e-12);
        let turns = (a - w) / (2.0 * PI);
        prop_assert!((turns - turns.round()).abs() < 1e-9);
    }

    #[test]
    fn random_transmit_patterns_are_feasible(seed in any::<u64>(), m in 1usize..40, frac in 0.01..1.0f64) {
        let power = frac * m as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (tx, rx) = random_feasible_pair(&mut rng, m, m, power);
        let p: f64 = tx.iter().map(|v| v * v).sum();
        prop_assert!((p - power).abs() <= 1e-9 * power.max(1.0));
        prop_assert!(tx.iter().chain(&rx).all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn margin_ignores_receive_scale(seed in any::<u64>(), slot in 0usize..36, alpha in 0.05..2.0f64) {
        let (gt, gr) = ula(12);
        let grid = ScanGrid::from_degrees(90.0, 2.5).unwrap();
        let spec = SlotSpec::from_grid(&grid, slot, 1.0, 1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (t, r) = random_feasible_pair(&mut rng, 12, 12, 1.0);
        let peak = r.iter().copied().fold(0.0, f64::max);
        let unit: Vec<f64> = r.iter().map(|v| v / peak).collect();
        let scaled: Vec<f64> = unit.iter().map(|v| v * alpha.min(1.0)).collect();
        let tx = HolographicPattern::new(t, Role::Transmit, slot).unwrap();
        let a = margin(&tx, &HolographicPattern::new(unit, Role::Receive, slot).unwrap(), &gt, &gr, &spec).unwrap();
        let b = margin(&tx, &HolographicPattern::new(scaled, Role::Receive, slot).unwrap(), &gt, &gr, &spec).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn landmark_update_shrinks_uncertainty(prior in psd(), noise in psd(), ox in -10.0..10.0f64, oy in -10.0..10.0f64) {
        let lm = Landmark { id: 1, mean: Point2::zeros(), cov: prior, hits: 1, last_seen: 0 };
        let out = ekf_update(&lm, Point2::new(ox, oy), &noise).unwrap();
        prop_assert_eq!(out.cov[(0, 1)], out.cov[(1, 0)]);
        prop_assert!(out.cov.symmetric_eigenvalues().iter().all(|&e| e >= -1e-12 * prior.trace()));
        prop_assert!(out.cov.trace() <= prior.trace() * (1.0 + 1e-12));
        // Textbook form: K = Λ(Λ + R)⁻¹, μ' = μ + K(z - μ), Λ' = (I - K)Λ.
        let k = prior * (prior + noise).try_inverse().unwrap();
        let mean = k * Point2::new(ox, oy);
        let cov = (Matrix2::identity() - k) * prior;
        let scale = prior.norm().max(1.0);
        prop_assert!((out.mean - mean).norm() <= 1e-8 * mean.norm().max(1.0));
        prop_assert!((out.cov - (cov + cov.transpose()) * 0.5).norm() <= 1e-8 * scale);
    }

    #[test]
    fn systematic_resampling_draws_every_slot(w in prop::collection::vec(0.0..1.0f64, 1..60), u in 0.0..1.0f64) {
        prop_assume!(w.iter().sum::<f64>() > 0.0);
        let idx = systematic_indices(&w, u);
        prop_assert_eq!(idx.len(), w.len());
        prop_assert!(idx.windows(2).all(|p| p[0] <= p[1]));
        prop_assert!(idx.iter().all(|&i| i < w.len() && w[i] > 0.0));
    }

    #[test]
    fn omp_decomposition_is_exact(seed in any::<u64>(), re in prop::collection::vec(-1.0..1.0f64, 8), im in prop::collection::vec(-1.0..1.0f64, 8)) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let columns: Vec<Vec<Complex64>> = (0..24)
            .map(|_| (0..8).map(|_| Complex64::from_polar(1.0, rng.random_range(-PI..PI))).collect())
            .collect();
        let dict = Dictionary::from_columns(columns.clone(), (0..24).map(|j| j as f64).collect());
        let y: Vec<Complex64> = re.iter().zip(&im).map(|(&a, &b)| Complex64::new(a, b)).collect();
        let r = omp_angles(&y, &dict, 6, 0.0);
        // y = Σ s_j h_j + residual, and the residual never grows.
        for n in 0..8 {
            let fit: Complex64 = columns.iter().zip(&r.coefficients).map(|(c, s)| c[n] * s).sum();
            prop_assert!((fit + r.residual[n] - y[n]).norm() < 1e-9);
        }
        let nr: f64 = r.residual.iter().map(|v| v.norm_sqr()).sum();
        let ny: f64 = y.iter().map(|v| v.norm_sqr()).sum();
        prop_assert!(nr <= ny + 1e-12);
    }

    #[test]
    fn raw_dump_round_trips(radars in 1usize..4, slots in 1usize..4, samples in 1usize..16, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let signals: Vec<Vec<Vec<Complex64>>> = (0..radars)
            .map(|_| (0..slots).map(|_| (0..samples).map(|_| Complex64::new(rng.random(), rng.random())).collect()).collect())
            .collect();
        let dump = RawDump::new(3, 2.5e8, signals).unwrap();
        let (bin, side) = dump.encode();
        prop_assert_eq!(RawDump::decode(&bin, &side).unwrap(), dump);
        prop_assert!(RawDump::decode(&bin[..bin.len() - 1], &side).is_err());
    }

    #[test]
    fn trajectory_csv_round_trips(rows in prop::collection::vec((-1e3..1e3f64, -1e3..1e3f64, -PI..PI), 0..20)) {
        let rows: Vec<TrajectoryRow> = rows
            .iter()
            .enumerate()
            .map(|(i, &(x, y, h))| TrajectoryRow::new(i, Pose2::new(x, y, h), Pose2::new(y, x, -h)))
            .collect();
        let text = trajectory_csv(&rows).unwrap();
        let back = parse_trajectory_csv(std::str::from_utf8(&text).unwrap()).unwrap();
        prop_assert_eq!(back, rows);
    }

    #[test]
    fn config_json_round_trips(seed in any::<u64>(), cycles in 1usize..200, m in 6usize..80, phased in any::<bool>()) {
        let mut c = RunConfig {
            seed,
            mode: if phased { Mode::PhasedArray } else { Mode::RhsRandom },
            ..RunConfig::default()
        };
        c.scenario.cycles = cycles;
        c.aperture.elements = m;
        let back = RunConfig::from_json(&c.to_json()).unwrap();
        prop_assert_eq!(back.to_json(), c.to_json());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn alternation_never_loses_margin(slot in 0usize..18, seed in any::<u64>()) {
        let (gt, gr) = ula(8);
        let grid = ScanGrid::from_degrees(90.0, 5.0).unwrap();
        let spec = SlotSpec::from_grid(&grid, slot, 1.0, 1e-3);
        let cfg = SolverConfig { seed, restarts: 1, max_outer_iterations: 6, inner_iterations: 60, ..SolverConfig::default() };
        let r = alternating_optimize(&spec, &gt, &gr, &cfg).unwrap();
        prop_assert!(r.delta_history.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!((r.margin - *r.delta_history.last().unwrap()).abs() <= 1e-9 * r.margin.abs().max(1.0));
    }
}
