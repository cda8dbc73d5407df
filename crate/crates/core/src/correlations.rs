//! Two-time correlations of the emitted field from the quantum regression theorem.

use serde::{Deserialize, Serialize};

use crate::dressed::{dress, xdot_plus, xdot_plus_filtered, DressedBasis, TransitionTable};
use crate::dynamics::{
    all_rates, build_liouvillian, trace_functional, vectorize, BathSpec, CVector, Liouvillian,
    Propagator, SchurForm,
};
use crate::error::{Error, Result};
use crate::model::System;
use crate::operator::{max_abs, CMatrix, C64, ZERO};
use crate::thermal::{thermal_state, ThermalState, FLUX_FLOOR};

/// `‖L ρ‖_max` above which a state is refused as a regression starting point.
pub const STATIONARITY_TOL: f64 = 1e-8;
/// Filtered lines whose amplitude `|Δ X_jk|` falls below this are treated as absent.
pub const LINE_AMPLITUDE_FLOOR: f64 = 1e-6;
/// A correlation still above this fraction of its zero-delay value marks a short window.
pub const WINDOW_DECAY: f64 = 1e-3;
/// Default delay window in units of the slowest populated coherence lifetime.
pub const WINDOW_LIFETIMES: f64 = 10.0;
/// Upper bound on the number of points of a default delay grid.
pub const MAX_TAU_POINTS: usize = 100_000;
/// Transitions with less than this fraction of the total flux are ignored when
/// choosing default grids.
const POPULATED_FRACTION: f64 = 1e-6;

/// Dressed model, bath and stationary state bundled for correlation work.
#[derive(Debug, Clone)]
pub struct StationarySource {
    pub basis: DressedBasis,
    pub table: TransitionTable,
    pub bath: BathSpec,
    pub liouvillian: Liouvillian,
    pub state: ThermalState,
}

impl StationarySource {
    /// Dresses `system` and builds its master equation on `level_cut` levels
    /// (the default thermal window when `None`).
    pub fn new(system: &System, bath: BathSpec, level_cut: Option<usize>) -> Result<Self> {
        bath.validate()?;
        let (basis, table) = dress(system)?;
        let cut = level_cut.unwrap_or_else(|| basis.default_level_cut(bath.temperature));
        let channels = all_rates(&basis, &table, &bath, cut, system.reference_frequency)?;
        let liouvillian = build_liouvillian(&basis, cut, &channels)?;
        let state = thermal_state(&basis, bath.temperature)?;
        Ok(Self { basis, table, bath, liouvillian, state })
    }

    pub fn level_cut(&self) -> usize {
        self.liouvillian.dim()
    }

    /// `ρ_T` on the retained levels.
    pub fn rho(&self) -> Result<CMatrix> {
        Ok(self.state.density_matrix(self.level_cut())?.into_matrix())
    }

    pub fn xdot_plus(&self) -> Result<CMatrix> {
        Ok(xdot_plus(&self.basis, &self.table, self.level_cut())?.into_matrix())
    }

    /// `Ẋ⁺_jk`, rejecting lines without emission amplitude.
    pub fn line(&self, j: usize, k: usize) -> Result<CMatrix> {
        let op = xdot_plus_filtered(&self.basis, &self.table, self.level_cut(), j, k)?;
        let magnitude = op.get(j, k).norm();
        if magnitude < LINE_AMPLITUDE_FLOOR {
            return Err(Error::ZeroTransition { j, k, magnitude });
        }
        Ok(op.into_matrix())
    }

    /// `⟨Ẋ⁻Ẋ⁺⟩` in the stationary state.
    pub fn flux(&self) -> Result<f64> {
        let xp = self.xdot_plus()?;
        expectation(&(xp.adjoint() * &xp), &self.rho()?)
    }

    /// Default delay grid: `WINDOW_LIFETIMES` lifetimes of the slowest populated
    /// coherence, sampled finely enough for the fastest populated line.
    pub fn default_tau_grid(&self) -> Result<Vec<f64>> {
        let (slowest, fastest_gap) = self.populated_line_scales()?;
        let t_max = WINDOW_LIFETIMES / slowest;
        let mut dt = (0.05 / fastest_gap).min(slowest.recip() / 20.0);
        let n = (t_max / dt).ceil() as usize;
        if n > MAX_TAU_POINTS {
            dt = t_max / MAX_TAU_POINTS as f64;
        }
        let n = (t_max / dt).ceil() as usize;
        Ok((0..=n).map(|i| i as f64 * dt).collect())
    }

    /// Smallest coherence decay rate and largest gap over lines carrying flux.
    fn populated_line_scales(&self) -> Result<(f64, f64)> {
        let d = self.level_cut();
        let xp = self.xdot_plus()?;
        let p = self.state.populations();
        let flux = self.flux()?;
        if !(flux > FLUX_FLOOR) {
            return Err(Error::UndefinedStatistics { flux, floor: FLUX_FLOOR });
        }
        let m = self.liouvillian.matrix();
        let mut slowest = f64::INFINITY;
        let mut fastest = 0.0f64;
        for k in 0..d {
            for j in 0..k {
                if p[k] * xp[(j, k)].norm_sqr() < POPULATED_FRACTION * flux {
                    continue;
                }
                let idx = j + k * d;
                slowest = slowest.min(-m[(idx, idx)].re);
                fastest = fastest.max(self.basis.gap(k, j));
            }
        }
        if !(slowest.is_finite() && slowest > 0.0) {
            return Err(Error::Numerical("no damped emission line in the level window".into()));
        }
        Ok((slowest, fastest))
    }
}

fn expectation(op: &CMatrix, rho: &CMatrix) -> Result<f64> {
    Ok((op * rho).trace().re)
}

fn check_stationary(l: &Liouvillian, rho: &CMatrix) -> Result<()> {
    if rho.nrows() != l.dim() {
        return Err(Error::DimensionMismatch { expected: l.dim(), got: rho.nrows() });
    }
    let residual = max_abs(&l.apply(rho)?);
    if !(residual < STATIONARITY_TOL) {
        return Err(Error::NotStationary { residual });
    }
    Ok(())
}

fn check_delays(tau: &[f64]) -> Result<()> {
    if tau.is_empty() {
        return Err(Error::InvalidGrid("delay grid is empty".into()));
    }
    if tau.iter().any(|t| !t.is_finite()) || tau.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("delays must be finite and strictly ascending".into()));
    }
    Ok(())
}

/// `Tr[M e^{Lτ} X₀]` for each delay.
fn regress(l: &Liouvillian, initial: &CMatrix, observable: &CMatrix, tau: &[f64]) -> Result<Vec<C64>> {
    let b = trace_functional(observable);
    let mut out = vec![ZERO; tau.len()];
    Propagator::new(l).run(&vectorize(initial), tau, |i, x| out[i] = b.dot(x))?;
    Ok(out)
}

/// `⟨A(t) B(t+τ)⟩ = Tr[B e^{Lτ}(ρA)]` for `τ ≥ 0`.
pub fn two_time(
    l: &Liouvillian,
    rho: &CMatrix,
    a: &CMatrix,
    b: &CMatrix,
    tau: &[f64],
) -> Result<Vec<C64>> {
    check_stationary(l, rho)?;
    regress(l, &(rho * a), b, tau)
}

/// `⟨A(t) M(t+τ) D(t)⟩ = Tr[M e^{Lτ}(D ρ A)]` for `τ ≥ 0`.
pub fn quartic(
    l: &Liouvillian,
    rho: &CMatrix,
    a: &CMatrix,
    m: &CMatrix,
    d: &CMatrix,
    tau: &[f64],
) -> Result<Vec<C64>> {
    check_stationary(l, rho)?;
    regress(l, &(d * rho * a), m, tau)
}

/// Parameters a trace was computed for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceMetadata {
    pub temperature: f64,
    pub gamma_cavity: f64,
    pub gamma_emitter: f64,
    pub level_cut: usize,
}

impl TraceMetadata {
    fn of(source: &StationarySource) -> Self {
        Self {
            temperature: source.bath.temperature,
            gamma_cavity: source.bath.gamma_cavity,
            gamma_emitter: source.bath.gamma_emitter,
            level_cut: source.level_cut(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTrace {
    pub tau: Vec<f64>,
    pub values: Vec<f64>,
    pub metadata: TraceMetadata,
}

/// `g²(τ)` of the emitted field with `ρ_T` as the stationary state.
pub fn g2_tau(source: &StationarySource, tau: &[f64]) -> Result<CorrelationTrace> {
    check_delays(tau)?;
    if tau[0] < 0.0 {
        return Err(Error::InvalidGrid("g2(tau) takes non-negative delays".into()));
    }
    let flux = source.flux()?;
    if !(flux > FLUX_FLOOR) {
        return Err(Error::UndefinedStatistics { flux, floor: FLUX_FLOOR });
    }
    let xp = source.xdot_plus()?;
    let xm = xp.adjoint();
    let n = &xm * &xp;
    let raw = quartic(&source.liouvillian, &source.rho()?, &xm, &n, &xp, tau)?;
    Ok(CorrelationTrace {
        tau: tau.to_vec(),
        values: raw.iter().map(|z| z.re / (flux * flux)).collect(),
        metadata: TraceMetadata::of(source),
    })
}

/// Normalized coincidences between the `2 → 1` and `1 → 0` lines.
///
/// Positive delays detect the `2 → 1` photon first; negative delays detect the
/// `1 → 0` photon first and are evaluated as a second forward-time regression.
pub fn g2_cross_filtered(source: &StationarySource, tau: &[f64]) -> Result<CorrelationTrace> {
    check_delays(tau)?;
    let upper = source.line(1, 2)?;
    let lower = source.line(0, 1)?;
    let rho = source.rho()?;
    let n_upper = upper.adjoint() * &upper;
    let n_lower = lower.adjoint() * &lower;
    let flux_upper = expectation(&n_upper, &rho)?;
    let flux_lower = expectation(&n_lower, &rho)?;
    let norm = flux_upper * flux_lower;
    if !(flux_upper > FLUX_FLOOR && flux_lower > FLUX_FLOOR) {
        return Err(Error::UndefinedStatistics {
            flux: flux_upper.min(flux_lower),
            floor: FLUX_FLOOR,
        });
    }
    let split = tau.partition_point(|&t| t < 0.0);
    let negative: Vec<f64> = tau[..split].iter().rev().map(|t| -t).collect();
    let l = &source.liouvillian;
    let mut values = Vec::with_capacity(tau.len());
    if !negative.is_empty() {
        let raw = quartic(l, &rho, &lower.adjoint(), &n_upper, &lower, &negative)?;
        values.extend(raw.iter().rev().map(|z| z.re / norm));
    }
    if split < tau.len() {
        let raw = quartic(l, &rho, &upper.adjoint(), &n_lower, &upper, &tau[split..])?;
        values.extend(raw.iter().map(|z| z.re / norm));
    }
    Ok(CorrelationTrace { tau: tau.to_vec(), values, metadata: TraceMetadata::of(source) })
}

/// `C(τ) = ⟨Ẋ⁻(t) Ẋ⁺(t+τ)⟩` for `τ ≥ 0`.
pub fn first_order_correlation(source: &StationarySource, tau: &[f64]) -> Result<Vec<C64>> {
    check_delays(tau)?;
    let xp = source.xdot_plus()?;
    two_time(&source.liouvillian, &source.rho()?, &xp.adjoint(), &xp, tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    #[default]
    Raw,
    /// Divided by the stationary flux `⟨Ẋ⁻Ẋ⁺⟩`.
    PerFlux,
    /// Divided by the maximum of the lowest-temperature spectrum of a set.
    PaperFigure,
}

impl Normalization {
    pub fn as_str(&self) -> &'static str {
        match self {
            Normalization::Raw => "raw",
            Normalization::PerFlux => "per-flux",
            Normalization::PaperFigure => "paper-figure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub omega: Vec<f64>,
    pub values: Vec<f64>,
    pub normalization: Normalization,
    pub metadata: TraceMetadata,
    /// Stationary flux, kept so that normalizations can be undone.
    pub flux: f64,
}

/// `S(ω) = 2ℜ ∫₀^∞ C(τ) e^{iωτ} dτ` evaluated in closed form through the
/// Schur form of the Liouvillian, at arbitrary frequencies.
#[derive(Debug, Clone)]
pub struct SpectrumEvaluator {
    schur: SchurForm,
    left: CVector,
    right: CVector,
    flux: f64,
    metadata: TraceMetadata,
}

impl SpectrumEvaluator {
    pub fn new(source: &StationarySource) -> Result<Self> {
        let flux = source.flux()?;
        if !(flux > FLUX_FLOOR) {
            return Err(Error::UndefinedStatistics { flux, floor: FLUX_FLOOR });
        }
        let rho = source.rho()?;
        let xp = source.xdot_plus()?;
        check_stationary(&source.liouvillian, &rho)?;
        let schur = SchurForm::new(&source.liouvillian)?;
        let (left, right) =
            schur.project(&trace_functional(&xp), &vectorize(&(&rho * xp.adjoint())));
        Ok(Self { schur, left, right, flux, metadata: TraceMetadata::of(source) })
    }

    pub fn flux(&self) -> f64 {
        self.flux
    }

    /// Unnormalized `S(ω)`.
    pub fn eval(&self, omega: f64) -> f64 {
        2.0 * self.schur.resolvent(C64::new(0.0, -omega), &self.left, &self.right).re
    }

    pub fn spectrum(&self, omega: &[f64], normalization: Normalization) -> Spectrum {
        let scale = match normalization {
            Normalization::PerFlux => self.flux.recip(),
            _ => 1.0,
        };
        Spectrum {
            omega: omega.to_vec(),
            values: omega.iter().map(|&w| scale * self.eval(w)).collect(),
            normalization,
            metadata: self.metadata,
            flux: self.flux,
        }
    }

    /// Full width at half maximum of the line peaking near `center`.
    pub fn fwhm(&self, center: f64) -> Result<f64> {
        let peak = self.refine_peak(center);
        let half = 0.5 * self.eval(peak);
        let edge = |dir: f64| -> Result<f64> {
            let mut step = 1e-6;
            let mut inner = peak;
            let mut outer = peak + dir * step;
            while self.eval(outer) > half {
                inner = outer;
                step *= 2.0;
                outer = peak + dir * step;
                if step > 10.0 {
                    return Err(Error::Numerical(format!("no half maximum near {center}")));
                }
            }
            for _ in 0..80 {
                let mid = 0.5 * (inner + outer);
                if self.eval(mid) > half {
                    inner = mid;
                } else {
                    outer = mid;
                }
            }
            Ok(0.5 * (inner + outer))
        };
        Ok(edge(1.0)? - edge(-1.0)?)
    }

    /// Golden-section search for the local maximum closest to `guess`.
    pub fn refine_peak(&self, guess: f64) -> f64 {
        let mut width = 1e-3;
        while width < 1.0 && self.eval(guess + width) > self.eval(guess) {
            width *= 2.0;
        }
        while width < 1.0 && self.eval(guess - width) > self.eval(guess) {
            width *= 2.0;
        }
        let (mut a, mut b) = (guess - width, guess + width);
        let r = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..200 {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if self.eval(c) > self.eval(d) {
                b = d;
            } else {
                a = c;
            }
            if b - a < 1e-12 {
                break;
            }
        }
        0.5 * (a + b)
    }
}

/// Emission spectrum on `omega`.
pub fn emission_spectrum(
    source: &StationarySource,
    omega: &[f64],
    normalization: Normalization,
) -> Result<Spectrum> {
    if omega.is_empty() || omega.iter().any(|w| !w.is_finite()) {
        return Err(Error::InvalidGrid("frequency grid must be non-empty and finite".into()));
    }
    Ok(SpectrumEvaluator::new(source)?.spectrum(omega, normalization))
}

/// Half-sided transform `2ℜ ∫₀^{τ_max} C(τ) e^{iωτ} dτ` by the trapezoid rule.
///
/// Fails when the correlation has not decayed by the end of the window.
pub fn spectrum_from_correlation(tau: &[f64], correlation: &[C64], omega: &[f64]) -> Result<Vec<f64>> {
    check_delays(tau)?;
    if tau.len() != correlation.len() {
        return Err(Error::DimensionMismatch { expected: tau.len(), got: correlation.len() });
    }
    if tau.len() < 2 || tau[0] != 0.0 {
        return Err(Error::InvalidGrid("delay grid must start at zero".into()));
    }
    let c0 = correlation[0].norm();
    let ratio = correlation[correlation.len() - 1].norm() / c0;
    if !(ratio <= WINDOW_DECAY) {
        return Err(Error::WindowTooShort { ratio });
    }
    Ok(omega
        .iter()
        .map(|&w| {
            let f = |i: usize| correlation[i] * C64::from_polar(1.0, w * tau[i]);
            let integral: C64 = (1..tau.len())
                .map(|i| (f(i) + f(i - 1)) * (0.5 * (tau[i] - tau[i - 1])))
                .sum();
            2.0 * integral.re
        })
        .collect())
}

/// Rescales a set of spectra by the maximum of its lowest-temperature member.
pub fn normalize_set(spectra: &mut [Spectrum]) -> Result<()> {
    let coldest = spectra
        .iter()
        .min_by(|a, b| a.metadata.temperature.total_cmp(&b.metadata.temperature))
        .ok_or_else(|| Error::InvalidGrid("empty spectrum set".into()))?;
    let scale = coldest.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(scale > 0.0) {
        return Err(Error::Numerical("lowest-temperature spectrum has no positive maximum".into()));
    }
    for s in spectra.iter_mut() {
        for v in &mut s.values {
            *v /= scale;
        }
        s.normalization = Normalization::PaperFigure;
    }
    Ok(())
}

/// Grid indices of local maxima above `threshold · max(values)`.
pub fn local_maxima(values: &[f64], threshold: f64) -> Vec<usize> {
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] > values[i - 1] && values[i] >= values[i + 1])
        .filter(|&i| values[i] >= threshold * top)
        .collect()
}

/// Angular frequency of the dominant oscillation of a trace, from the mean
/// spacing of its successive maxima (parabolically refined).
pub fn oscillation_frequency(tau: &[f64], values: &[f64]) -> Result<f64> {
    let peaks: Vec<f64> = (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] > values[i - 1] && values[i] >= values[i + 1])
        .map(|i| {
            let (y0, y1, y2) = (values[i - 1], values[i], values[i + 1]);
            let denom = y0 - 2.0 * y1 + y2;
            let shift = if denom != 0.0 { 0.5 * (y0 - y2) / denom } else { 0.0 };
            tau[i] + shift * (tau[i + 1] - tau[i - 1]) / 2.0
        })
        .collect();
    if peaks.len() < 2 {
        return Err(Error::Numerical("fewer than two maxima in the trace".into()));
    }
    let spacing = (peaks[peaks.len() - 1] - peaks[0]) / (peaks.len() - 1) as f64;
    Ok(2.0 * std::f64::consts::PI / spacing)
}

/// Evenly spaced grid with `n ≥ 2` points from `lo` to `hi`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}
