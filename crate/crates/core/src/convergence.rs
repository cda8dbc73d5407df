//! Fock-truncation checks: rerun with every truncation doubled and compare.

use serde::{Deserialize, Serialize};

use crate::dressed::{dress, DressedBasis, TransitionTable};
use crate::error::Result;
use crate::model::ModelSpec;
use crate::thermal::{g2_zero, thermal_state};

/// Allowed drift of each of the lowest levels.
pub const ENERGY_DRIFT_TOL: f64 = 1e-6;
/// Allowed drift of `g²(0)`.
pub const G2_DRIFT_TOL: f64 = 1e-4;
/// Number of lowest levels compared.
pub const COMPARED_LEVELS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationCheck {
    pub n_fock: usize,
    pub doubled_n_fock: usize,
    pub energy_drift: f64,
    /// `None` when the statistics are undefined at either truncation.
    pub g2_drift: Option<f64>,
}

impl TruncationCheck {
    pub fn passed(&self) -> bool {
        self.energy_drift < ENERGY_DRIFT_TOL && self.g2_drift.map_or(true, |d| d < G2_DRIFT_TOL)
    }
}

fn g2_at(basis: &DressedBasis, table: &TransitionTable, temperature: f64) -> Option<f64> {
    let state = thermal_state(basis, temperature).ok()?;
    g2_zero(basis, table, &state, basis.default_level_cut(temperature)).ok()
}

/// Compares energies and `g²(0)` of `spec` against the same model with doubled truncation.
pub fn check_truncation(spec: &ModelSpec, temperature: f64) -> Result<TruncationCheck> {
    let (b1, t1) = dress(&spec.build()?)?;
    let doubled = spec.with_scaled_truncation(2);
    let (b2, t2) = dress(&doubled.build()?)?;
    let k = COMPARED_LEVELS.min(b1.dim());
    let energy_drift = b1.energies()[..k]
        .iter()
        .zip(&b2.energies()[..k])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let g2_drift = match (g2_at(&b1, &t1, temperature), g2_at(&b2, &t2, temperature)) {
        (Some(a), Some(b)) => Some((a - b).abs()),
        _ => None,
    };
    Ok(TruncationCheck {
        n_fock: spec.n_fock(),
        doubled_n_fock: doubled.n_fock(),
        energy_drift,
        g2_drift,
    })
}
