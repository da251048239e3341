//! Pattern bank: one optimized Tx/Rx pair per scan slot, persisted as JSON.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{alternating_optimize, OptimizationResult, ScanGrid, SlotSpec, SolverConfig};
use crate::error::{Error, Result};
use crate::rhs::{ApertureGeometry, HolographicPattern, Role};

pub const BANK_SCHEMA: &str = "rhs-slam/pattern-bank/2";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankSlot {
    pub theta_deg: f64,
    pub psi_tx: Vec<f64>,
    pub psi_rx: Vec<f64>,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternBank {
    pub schema: String,
    pub geometry_hash: String,
    #[serde(rename = "I")]
    pub slot_count: usize,
    pub slots: Vec<BankSlot>,
}

impl PatternBank {
    /// Cache key over everything that determines the bank contents.
    pub fn key(
        geom_tx: &ApertureGeometry,
        geom_rx: &ApertureGeometry,
        grid: &ScanGrid,
        solver: &SolverConfig,
        power: f64,
        sigma: f64,
    ) -> String {
        let mut h = Sha256::new();
        h.update(BANK_SCHEMA.as_bytes());
        geom_tx.digest_into(&mut h);
        geom_rx.digest_into(&mut h);
        h.update(grid.sector.to_le_bytes());
        h.update(grid.step.to_le_bytes());
        h.update(serde_json::to_vec(solver).expect("solver config serializes"));
        h.update(power.to_le_bytes());
        h.update(sigma.to_le_bytes());
        hex::encode(h.finalize())
    }

    pub fn from_results(geometry_hash: String, grid: &ScanGrid, results: &[OptimizationResult]) -> Self {
        let slots = results
            .iter()
            .enumerate()
            .map(|(i, r)| BankSlot {
                theta_deg: grid.slot_direction(i).to_degrees(),
                psi_tx: r.pattern_tx.psi().to_vec(),
                psi_rx: r.pattern_rx.psi().to_vec(),
                delta: r.margin,
            })
            .collect::<Vec<_>>();
        Self {
            schema: BANK_SCHEMA.to_string(),
            geometry_hash,
            slot_count: slots.len(),
            slots,
        }
    }

    /// Parses and validates a bank document.
    pub fn from_json(text: &str) -> Result<Self> {
        let bank: PatternBank = serde_json::from_str(text).map_err(|e| Error::Bank(e.to_string()))?;
        bank.validate()?;
        Ok(bank)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bank serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != BANK_SCHEMA {
            return Err(Error::Bank(format!("unsupported schema `{}`", self.schema)));
        }
        if self.slot_count != self.slots.len() || self.slots.is_empty() {
            return Err(Error::Bank(format!(
                "I = {} does not match {} slot entries",
                self.slot_count,
                self.slots.len()
            )));
        }
        let (mt, mr) = (self.slots[0].psi_tx.len(), self.slots[0].psi_rx.len());
        for (i, s) in self.slots.iter().enumerate() {
            if s.psi_tx.len() != mt || s.psi_rx.len() != mr || mt == 0 || mr == 0 {
                return Err(Error::Bank(format!("slot {i}: inconsistent element counts")));
            }
            let in_box = |v: &f64| (0.0..=1.0).contains(v);
            if !s.psi_tx.iter().all(in_box) || !s.psi_rx.iter().all(in_box) {
                return Err(Error::Bank(format!("slot {i}: amplitude outside [0, 1]")));
            }
            if !s.theta_deg.is_finite() || !s.delta.is_finite() {
                return Err(Error::Bank(format!("slot {i}: non-finite value")));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn patterns(&self, slot: usize) -> Result<(HolographicPattern, HolographicPattern)> {
        let s = &self.slots[slot];
        Ok((
            HolographicPattern::new(s.psi_tx.clone(), Role::Transmit, slot)?,
            HolographicPattern::new(s.psi_rx.clone(), Role::Receive, slot)?,
        ))
    }
}

/// Optimizes every slot of `grid` independently (in parallel).
pub fn build_pattern_bank(
    grid: &ScanGrid,
    geom_tx: &ApertureGeometry,
    geom_rx: &ApertureGeometry,
    power: f64,
    sigma: f64,
    solver: &SolverConfig,
) -> Result<Vec<OptimizationResult>> {
    (0..grid.slot_count())
        .into_par_iter()
        .map(|i| {
            let spec = SlotSpec::from_grid_oversampled(grid, i, power, sigma, solver.sidelobe_oversample(grid));
            alternating_optimize(&spec, geom_tx, geom_rx, solver)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_bank() -> (PatternBank, Vec<OptimizationResult>) {
        let g = ApertureGeometry::uniform_linear(4, 0.0031, 0.0124, 1.73).unwrap();
        let grid = ScanGrid::from_degrees(90.0, 30.0).unwrap();
        let solver = SolverConfig {
            inner_iterations: 30,
            ..SolverConfig::default()
        };
        let results = build_pattern_bank(&grid, &g, &g, 1.0, 1.0, &solver).unwrap();
        let key = PatternBank::key(&g, &g, &grid, &solver, 1.0, 1.0);
        (PatternBank::from_results(key, &grid, &results), results)
    }

    #[test]
    fn single_slot_bank() {
        let g = ApertureGeometry::uniform_linear(3, 0.0031, 0.0124, 1.73).unwrap();
        let grid = ScanGrid::from_degrees(10.0, 10.0).unwrap();
        let r = build_pattern_bank(&grid, &g, &g, 1.0, 1.0, &SolverConfig::default()).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].margin, super::super::EMPTY_SIDELOBE_MARGIN);
    }

    #[test]
    fn reload_is_bit_identical() {
        let (bank, _) = small_bank();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bank.json");
        bank.save(&path).unwrap();
        let back = PatternBank::load(&path).unwrap();
        for (a, b) in bank.slots.iter().zip(&back.slots) {
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.psi_tx), bits(&b.psi_tx));
            assert_eq!(bits(&a.psi_rx), bits(&b.psi_rx));
            assert_eq!(a.delta.to_bits(), b.delta.to_bits());
        }
        assert_eq!(bank, back);
    }

    #[test]
    fn malformed_banks_rejected() {
        let (bank, _) = small_bank();
        let mut wrong_schema = bank.clone();
        wrong_schema.schema = "other".into();
        assert!(PatternBank::from_json(&wrong_schema.to_json()).is_err());
        let mut wrong_count = bank.clone();
        wrong_count.slot_count += 1;
        assert!(PatternBank::from_json(&wrong_count.to_json()).is_err());
        let mut out_of_box = bank.clone();
        out_of_box.slots[0].psi_rx[0] = 1.5;
        assert!(PatternBank::from_json(&out_of_box.to_json()).is_err());
        assert!(PatternBank::from_json("{").is_err());
        assert!(PatternBank::from_json("[]").is_err());
    }

    #[test]
    fn key_tracks_inputs() {
        let g = ApertureGeometry::uniform_linear(4, 0.0031, 0.0124, 1.73).unwrap();
        let g2 = ApertureGeometry::uniform_linear(5, 0.0031, 0.0124, 1.73).unwrap();
        let grid = ScanGrid::from_degrees(90.0, 30.0).unwrap();
        let s = SolverConfig::default();
        let k = PatternBank::key(&g, &g, &grid, &s, 1.0, 1.0);
        assert_eq!(k, PatternBank::key(&g, &g, &grid, &s, 1.0, 1.0));
        assert_ne!(k, PatternBank::key(&g2, &g2, &grid, &s, 1.0, 1.0));
        assert_ne!(k, PatternBank::key(&g, &g, &grid, &s, 2.0, 1.0));
    }
}
