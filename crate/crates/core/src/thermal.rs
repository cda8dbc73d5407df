//! Canonical thermal state and equal-time photon statistics of the emitted field.

use crate::dressed::{xdot_plus, DressedBasis, TransitionTable};
use crate::error::{Error, Result};
use crate::model::{rabi_lowering_ops, RabiParams};
use crate::operator::{HilbertSpace, QOperator};

/// Below this emitted flux the photon statistics are reported as undefined.
pub const FLUX_FLOOR: f64 = 1e-30;
/// Boltzmann weights below this are stored as exact zeros.
pub const POPULATION_FLOOR: f64 = 1e-30;

/// Boltzmann populations of the dressed levels.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalState {
    temperature: f64,
    populations: Vec<f64>,
    partition: f64,
}

impl ThermalState {
    /// The `T → 0⁺` limit: all weight in the dressed ground state.
    pub fn ground(basis: &DressedBasis) -> Self {
        let mut populations = vec![0.0; basis.dim()];
        populations[0] = 1.0;
        Self { temperature: 0.0, populations, partition: 1.0 }
    }

    /// k_BT in units of ω₀; zero for [`ThermalState::ground`].
    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn populations(&self) -> &[f64] {
        &self.populations
    }

    /// Partition function of the energies measured from the ground state.
    pub fn partition(&self) -> f64 {
        self.partition
    }

    /// Diagonal density matrix on the lowest `level_cut` dressed levels.
    pub fn density_matrix(&self, level_cut: usize) -> Result<QOperator> {
        if level_cut > self.populations.len() {
            return Err(Error::DimensionMismatch {
                expected: self.populations.len(),
                got: level_cut,
            });
        }
        QOperator::from_real_diagonal(
            &HilbertSpace::flat(level_cut)?,
            &self.populations[..level_cut],
        )
    }
}

/// `ρ_T = e^{−H/T}/Z` expressed in the dressed basis.
pub fn thermal_state(basis: &DressedBasis, temperature: f64) -> Result<ThermalState> {
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::NonPositiveTemperature(temperature));
    }
    let mut weights: Vec<f64> =
        basis.excitation_energies().iter().map(|e| (-e / temperature).exp()).collect();
    let partition: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= partition;
        if *w < POPULATION_FLOOR {
            *w = 0.0;
        }
    }
    Ok(ThermalState { temperature, populations: weights, partition })
}

/// `⟨Ẋ⁻Ẋ⁺⟩ = Σ_{j<k} p_k Δ_kj² |X_jk|²`.
pub fn photon_flux(
    basis: &DressedBasis,
    table: &TransitionTable,
    state: &ThermalState,
    level_cut: usize,
) -> Result<f64> {
    let xp = xdot_plus(basis, table, level_cut)?;
    let p = state.populations();
    let mut flux = 0.0;
    for k in 0..level_cut {
        let col: f64 = (0..k).map(|j| xp.get(j, k).norm_sqr()).sum();
        flux += p[k] * col;
    }
    Ok(flux)
}

/// Zero-delay `g²(0) = ⟨Ẋ⁻Ẋ⁻Ẋ⁺Ẋ⁺⟩ / ⟨Ẋ⁻Ẋ⁺⟩²` in the thermal state.
pub fn g2_zero(
    basis: &DressedBasis,
    table: &TransitionTable,
    state: &ThermalState,
    level_cut: usize,
) -> Result<f64> {
    let flux = photon_flux(basis, table, state, level_cut)?;
    if !(flux > FLUX_FLOOR) {
        return Err(Error::UndefinedStatistics { flux, floor: FLUX_FLOOR });
    }
    let xp = xdot_plus(basis, table, level_cut)?;
    let pair = xp.mul(&xp)?;
    let p = state.populations();
    let mut coincidences = 0.0;
    for k in 0..level_cut {
        let col: f64 = (0..level_cut).map(|i| pair.get(i, k).norm_sqr()).sum();
        coincidences += p[k] * col;
    }
    Ok(coincidences / (flux * flux))
}

/// Standard normal-ordered `⟨a†a†aa⟩/⟨a†a⟩²` of a bare annihilation operator.
pub fn normal_order_g2(rho: &QOperator, a: &QOperator) -> Result<f64> {
    let ad = a.adjoint();
    let n = ad.mul(a)?;
    let flux = n.mul(rho)?.trace().re;
    if !(flux > FLUX_FLOOR) {
        return Err(Error::UndefinedStatistics { flux, floor: FLUX_FLOOR });
    }
    let pairs = ad.mul(&ad)?.mul(a)?.mul(a)?;
    Ok(pairs.mul(rho)?.trace().re / (flux * flux))
}

/// Bare thermal state of a single mode (`n_levels` Fock states) or TLS (`n_levels = 2`).
pub fn bare_thermal_populations(frequency: f64, temperature: f64, n_levels: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n_levels).map(|n| (-(n as f64) * frequency / temperature).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// g²(0) of the cavity in the steady state of the standard (RWA, local-bath)
/// master equation: the product of bare thermal states.
pub fn g2_zero_rwa_baseline(params: &RabiParams, temperature: f64) -> Result<f64> {
    params.validate()?;
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::NonPositiveTemperature(temperature));
    }
    let (a, _) = rabi_lowering_ops(params.n_fock)?;
    let tls = bare_thermal_populations(params.omega_x, temperature, 2);
    let cav = bare_thermal_populations(params.omega0, temperature, params.n_fock);
    let diag: Vec<f64> = tls.iter().flat_map(|&p| cav.iter().map(move |&q| p * q)).collect();
    let rho = QOperator::from_real_diagonal(a.space(), &diag)?;
    normal_order_g2(&rho, &a)
}

/// Region of the zero-delay phase diagram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    /// Standard thermal light, `1.999 < g²(0) ≤ 2`.
    Green,
    /// Reduced bunching, `1 ≤ g²(0) ≤ 1.999`.
    Gray,
    /// Antibunched, `g²(0) < 1`.
    Blue,
    /// Superbunched, `g²(0) > 2`.
    Red,
}

/// Values within this distance of 2 count as exactly thermal.
pub const THERMAL_VALUE_TOL: f64 = 1e-9;

impl Region {
    pub fn classify(g2: f64) -> Region {
        if g2 < 1.0 {
            Region::Blue
        } else if g2 <= 1.999 {
            Region::Gray
        } else if g2 <= 2.0 + THERMAL_VALUE_TOL {
            Region::Green
        } else {
            Region::Red
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Region::Green => "green",
            Region::Gray => "gray",
            Region::Blue => "blue",
            Region::Red => "red",
        }
    }
}
