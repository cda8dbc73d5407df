//! Dressed-state Lindblad master equation for thermal baths.
//!
//! Density matrices are vectorized by stacking columns: element `(i, j)` of a
//! `d × d` matrix sits at index `i + j·d`, so `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.

use nalgebra::DVector;

use crate::dressed::{DressedBasis, TransitionTable, DEGENERACY_TOL};
use crate::error::{Error, Result};
use crate::model::{build_rwa, rabi_lowering_ops, ChannelKind, RabiParams};
use crate::operator::{max_abs, CMatrix, HilbertSpace, QOperator, C64, I, ONE, ZERO};
use crate::thermal::normal_order_g2;

pub type CVector = DVector<C64>;

/// Residual a steady state must reach: `‖L ρ_ss‖_max`.
pub const STEADY_STATE_TOL: f64 = 1e-10;
/// Relative size (against the smallest damping rate) separating the null
/// eigenvalue from the rest of the Liouvillian spectrum.
pub const NULL_SPACE_GAP: f64 = 1e-8;

/// Thermal baths seen by the cavity and emitter channels.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BathSpec {
    pub gamma_cavity: f64,
    pub gamma_emitter: f64,
    pub temperature: f64,
}

impl BathSpec {
    pub fn new(gamma_cavity: f64, gamma_emitter: f64, temperature: f64) -> Result<Self> {
        let b = Self { gamma_cavity, gamma_emitter, temperature };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("gamma_cavity", self.gamma_cavity), ("gamma_emitter", self.gamma_emitter)]
        {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be non-negative, got {v}"),
                });
            }
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::NonPositiveTemperature(self.temperature));
        }
        Ok(())
    }

    pub fn gamma(&self, kind: ChannelKind) -> f64 {
        match kind {
            ChannelKind::Cavity => self.gamma_cavity,
            ChannelKind::Emitter => self.gamma_emitter,
        }
    }
}

/// Bose–Einstein occupation `1/(e^{ω/T} − 1)`; zero for `ω ≤ 0` or `T ≤ 0`.
pub fn thermal_occupation(frequency: f64, temperature: f64) -> f64 {
    if frequency <= 0.0 || temperature <= 0.0 {
        return 0.0;
    }
    1.0 / (frequency / temperature).exp_m1()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionRate {
    pub lower: usize,
    pub upper: usize,
    pub gap: f64,
    /// `Γ = γ (Δ/ω₀) |C|²`.
    pub rate: f64,
    /// `n̄(Δ, T)`.
    pub occupation: f64,
}

impl TransitionRate {
    pub fn downward(&self) -> f64 {
        self.rate * (1.0 + self.occupation)
    }

    pub fn upward(&self) -> f64 {
        self.rate * self.occupation
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRates {
    pub label: String,
    pub gamma: f64,
    pub rates: Vec<TransitionRate>,
}

/// Relaxation coefficients of one channel for every pair `j < k < level_cut`.
pub fn rates(
    basis: &DressedBasis,
    table: &TransitionTable,
    bath: &BathSpec,
    channel: usize,
    level_cut: usize,
    reference_frequency: f64,
) -> Result<ChannelRates> {
    bath.validate()?;
    let ch = table.channels().get(channel).ok_or(Error::InvalidParameter {
        name: "channel",
        reason: format!("index {channel} out of range"),
    })?;
    if level_cut > basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), got: level_cut });
    }
    let gamma = bath.gamma(ch.kind);
    let mut out = Vec::with_capacity(level_cut * (level_cut - 1) / 2);
    for k in 0..level_cut {
        for j in 0..k {
            let gap = basis.gap(k, j);
            let (rate, occupation) = if gap < DEGENERACY_TOL {
                (0.0, 0.0)
            } else {
                (
                    gamma * (gap / reference_frequency) * ch.coefficients[(j, k)].norm_sqr(),
                    thermal_occupation(gap, bath.temperature),
                )
            };
            out.push(TransitionRate { lower: j, upper: k, gap, rate, occupation });
        }
    }
    Ok(ChannelRates { label: ch.label.clone(), gamma, rates: out })
}

/// Rates of every channel in the table.
pub fn all_rates(
    basis: &DressedBasis,
    table: &TransitionTable,
    bath: &BathSpec,
    level_cut: usize,
    reference_frequency: f64,
) -> Result<Vec<ChannelRates>> {
    (0..table.channels().len())
        .map(|c| rates(basis, table, bath, c, level_cut, reference_frequency))
        .collect()
}

/// One `rate · 𝒟[op]` term.
#[derive(Debug, Clone)]
pub struct CollapseTerm {
    pub label: String,
    pub rate: f64,
    pub op: QOperator,
}

/// Superoperator on column-stacked density matrices.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    dim: usize,
    matrix: CMatrix,
    channels: Vec<ChannelRates>,
    rate_scale: f64,
}

impl Liouvillian {
    /// `L = −i[H, ·] + Σ rate (O·O† − ½{O†O, ·})`.
    pub fn from_lindblad(h: &QOperator, terms: &[CollapseTerm]) -> Result<Self> {
        h.ensure_hermitian()?;
        let d = h.dim();
        let id = CMatrix::identity(d, d);
        let hm = h.matrix();
        let mut l = (id.kronecker(hm) - hm.transpose().kronecker(&id)) * (-I);
        let mut decay = CMatrix::zeros(d, d);
        let mut rate_scale = f64::INFINITY;
        for t in terms {
            if t.op.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, got: t.op.dim() });
            }
            if !(t.rate >= 0.0) || !t.rate.is_finite() {
                return Err(Error::NegativeRate { term: t.label.clone(), rate: t.rate });
            }
            if t.rate == 0.0 {
                continue;
            }
            rate_scale = rate_scale.min(t.rate);
            let o = t.op.matrix();
            l += o.conjugate().kronecker(o) * C64::new(t.rate, 0.0);
            decay += o.adjoint() * o * C64::new(t.rate, 0.0);
        }
        l -= (id.kronecker(&decay) + decay.transpose().kronecker(&id)) * C64::new(0.5, 0.0);
        Ok(Self {
            dim: d,
            matrix: l,
            channels: Vec::new(),
            rate_scale: if rate_scale.is_finite() { rate_scale } else { 0.0 },
        })
    }

    /// Hilbert-space dimension `d`; the superoperator is `d² × d²`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Per-channel rates the dressed construction used.
    pub fn channels(&self) -> &[ChannelRates] {
        &self.channels
    }

    /// Smallest damping scale, used to separate the null space.
    pub fn rate_scale(&self) -> f64 {
        self.rate_scale
    }

    /// `L(ρ)` for a `d × d` matrix.
    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        if rho.nrows() != self.dim || rho.ncols() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: rho.nrows() });
        }
        Ok(unvectorize(&(&self.matrix * vectorize(rho)), self.dim))
    }
}

pub fn vectorize(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

pub fn unvectorize(v: &CVector, d: usize) -> CMatrix {
    CMatrix::from_column_slice(d, d, v.as_slice())
}

/// Row vector `b` with `Tr[O X] = b · vec(X)`.
pub(crate) fn trace_functional(o: &CMatrix) -> CVector {
    vectorize(&o.transpose())
}

/// Master equation in the dressed basis, truncated to the lowest `level_cut` levels.
pub fn build_liouvillian(
    basis: &DressedBasis,
    level_cut: usize,
    channels: &[ChannelRates],
) -> Result<Liouvillian> {
    if level_cut < 2 || level_cut > basis.dim() {
        return Err(Error::InvalidParameter {
            name: "level_cut",
            reason: format!("{level_cut} not in [2, {}]", basis.dim()),
        });
    }
    let space = HilbertSpace::flat(level_cut)?;
    let energies: Vec<f64> = basis.excitation_energies()[..level_cut].to_vec();
    let h = QOperator::from_real_diagonal(&space, &energies)?;
    let mut terms = Vec::new();
    for ch in channels {
        for r in &ch.rates {
            if r.upper >= level_cut {
                return Err(Error::DimensionMismatch { expected: level_cut, got: r.upper + 1 });
            }
            if r.rate < 0.0 || r.occupation < 0.0 {
                return Err(Error::NegativeRate { term: ch.label.clone(), rate: r.rate });
            }
            if r.rate == 0.0 {
                continue;
            }
            terms.push(CollapseTerm {
                label: format!("{}:{}<-{}", ch.label, r.lower, r.upper),
                rate: r.downward(),
                op: projector(&space, r.lower, r.upper),
            });
            if r.occupation > 0.0 {
                terms.push(CollapseTerm {
                    label: format!("{}:{}->{}", ch.label, r.lower, r.upper),
                    rate: r.upward(),
                    op: projector(&space, r.upper, r.lower),
                });
            }
        }
    }
    let mut l = Liouvillian::from_lindblad(&h, &terms)?;
    l.channels = channels.to_vec();
    let gamma_min =
        channels.iter().map(|c| c.gamma).filter(|&g| g > 0.0).fold(f64::INFINITY, f64::min);
    l.rate_scale = if gamma_min.is_finite() { gamma_min } else { 0.0 };
    Ok(l)
}

/// `|row⟩⟨col|`.
fn projector(space: &HilbertSpace, row: usize, col: usize) -> QOperator {
    let mut op = QOperator::zeros(space).into_matrix();
    op[(row, col)] = ONE;
    QOperator::new(space.clone(), op).expect("square by construction")
}

/// Complex Schur form `L = Q T Q†`, reused for spectra and null-space checks.
#[derive(Debug, Clone)]
pub struct SchurForm {
    q: CMatrix,
    t: CMatrix,
}

impl SchurForm {
    pub fn new(l: &Liouvillian) -> Result<Self> {
        let schur = l
            .matrix
            .clone()
            .try_schur(f64::EPSILON, 0)
            .ok_or_else(|| Error::Eigensolver("Schur decomposition did not converge".into()))?;
        let (q, t) = schur.unpack();
        Ok(Self { q, t })
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        (0..self.t.nrows()).map(|i| self.t[(i, i)]).collect()
    }

    /// Precomputes `(bᵀQ, Q†x)` for repeated resolvent evaluations.
    pub fn project(&self, observable: &CVector, initial: &CVector) -> (CVector, CVector) {
        let left = self.q.transpose() * observable;
        let right = self.q.adjoint() * initial;
        (left, right)
    }

    /// `bᵀ (z − L)⁻¹ x` given the projections from [`SchurForm::project`].
    pub fn resolvent(&self, z: C64, left: &CVector, right: &CVector) -> C64 {
        let n = self.t.nrows();
        let mut y = right.clone();
        for i in (0..n).rev() {
            let mut acc = y[i];
            for j in i + 1..n {
                acc += self.t[(i, j)] * y[j];
            }
            y[i] = acc / (z - self.t[(i, i)]);
        }
        left.dot(&y)
    }
}

/// Unique trace-one null vector of `L`.
pub fn steady_state(l: &Liouvillian) -> Result<QOperator> {
    let d = l.dim;
    let schur = SchurForm::new(l)?;
    let mut mags: Vec<f64> = schur.eigenvalues().iter().map(|z| z.norm()).collect();
    mags.sort_by(f64::total_cmp);
    let threshold = if l.rate_scale > 0.0 {
        NULL_SPACE_GAP * l.rate_scale
    } else {
        STEADY_STATE_TOL * max_abs(&l.matrix).max(1.0)
    };
    let null_dim = mags.iter().filter(|&&m| m <= threshold).count();
    if null_dim != 1 {
        return Err(Error::AmbiguousSteadyState { null_dim });
    }

    // Replace the equation for ρ_00 by the trace condition.
    let mut a = l.matrix.clone();
    for col in 0..d * d {
        a[(0, col)] = ZERO;
    }
    for i in 0..d {
        a[(0, i + i * d)] = ONE;
    }
    let mut b = CVector::zeros(d * d);
    b[0] = ONE;
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Numerical("steady-state system is singular".into()))?;
    let rho = unvectorize(&x, d);
    let residual = max_abs(&unvectorize(&(&l.matrix * &x), d));
    if !(residual < STEADY_STATE_TOL) {
        return Err(Error::Numerical(format!("steady-state residual {residual:e}")));
    }
    let herm = crate::operator::hermitian_deviation(&rho);
    if herm > 1e-8 {
        return Err(Error::Numerical(format!("steady state not Hermitian ({herm:e})")));
    }
    let rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
    let min_eig = rho.clone().symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
    if min_eig < -STEADY_STATE_TOL {
        return Err(Error::Numerical(format!("steady state has eigenvalue {min_eig:e}")));
    }
    QOperator::new(HilbertSpace::flat(d)?, rho)
}

/// Grid steps that differ by less than this relative amount share one propagator;
/// uniform grids far from the origin differ only by rounding.
const STEP_REUSE_TOL: f64 = 1e-9;

/// `exp(L Δt)` stored row by row without its exact zeros; the secular
/// structure of the dressed master equation leaves most entries zero.
struct SparseStep {
    dt: f64,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseStep {
    fn new(dt: f64, dense: &CMatrix) -> Self {
        let mut row_start = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for i in 0..dense.nrows() {
            for j in 0..dense.ncols() {
                let z = dense[(i, j)];
                if z != ZERO {
                    cols.push(j);
                    vals.push(z);
                }
            }
            row_start.push(cols.len());
        }
        Self { dt, row_start, cols, vals }
    }

    fn apply(&self, x: &CVector, out: &mut CVector) {
        for (i, o) in out.iter_mut().enumerate() {
            let (lo, hi) = (self.row_start[i], self.row_start[i + 1]);
            *o = self.cols[lo..hi].iter().zip(&self.vals[lo..hi]).map(|(&j, v)| v * x[j]).sum();
        }
    }
}

/// Advances column-stacked operators under `L` with cached `exp(L Δt)` steps.
pub(crate) struct Propagator<'a> {
    l: &'a Liouvillian,
    cached: Option<SparseStep>,
}

impl<'a> Propagator<'a> {
    pub(crate) fn new(l: &'a Liouvillian) -> Self {
        Self { l, cached: None }
    }

    fn step(&mut self, dt: f64) -> Result<&SparseStep> {
        let reuse =
            matches!(&self.cached, Some(s) if (s.dt - dt).abs() <= STEP_REUSE_TOL * dt.abs());
        if !reuse {
            let e = (&self.l.matrix * C64::new(dt, 0.0)).exp();
            if e.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Integration(format!("propagator over dt = {dt} is not finite")));
            }
            self.cached = Some(SparseStep::new(dt, &e));
        }
        Ok(self.cached.as_ref().expect("just filled"))
    }

    /// Calls `visit(i, x(times[i]))` for each time, starting from `x(0) = x0`.
    pub(crate) fn run<F>(&mut self, x0: &CVector, times: &[f64], mut visit: F) -> Result<()>
    where
        F: FnMut(usize, &CVector),
    {
        check_times(times)?;
        let mut x = x0.clone();
        let mut next = x0.clone();
        let mut now = 0.0;
        for (i, &t) in times.iter().enumerate() {
            let dt = t - now;
            if dt > 0.0 {
                self.step(dt)?.apply(&x, &mut next);
                std::mem::swap(&mut x, &mut next);
                now = t;
            }
            visit(i, &x);
        }
        Ok(())
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::InvalidGrid("times must be finite and non-negative".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidGrid("times must be ascending".into()));
    }
    Ok(())
}

/// `ρ(t) = e^{Lt} ρ₀` at each time of an ascending grid.
pub fn evolve(l: &Liouvillian, rho0: &QOperator, times: &[f64]) -> Result<Vec<QOperator>> {
    if rho0.dim() != l.dim {
        return Err(Error::DimensionMismatch { expected: l.dim, got: rho0.dim() });
    }
    rho0.ensure_hermitian()?;
    let tr = rho0.trace();
    if (tr - ONE).norm() > 1e-10 {
        return Err(Error::InvalidParameter {
            name: "rho0",
            reason: format!("trace {tr} is not one"),
        });
    }
    let mut out = Vec::with_capacity(times.len());
    let space = rho0.space().clone();
    let mut failure = None;
    Propagator::new(l).run(&vectorize(rho0.matrix()), times, |_, x| {
        match QOperator::new(space.clone(), unvectorize(x, space.total_dim())) {
            Ok(op) => out.push(op),
            Err(e) => failure = Some(e),
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Standard quantum-optics master equation: Jaynes–Cummings Hamiltonian with
/// local thermal dissipators on the bare cavity and emitter.
pub fn standard_me_baseline(params: &RabiParams, bath: &BathSpec) -> Result<Liouvillian> {
    bath.validate()?;
    let h = build_rwa(params)?;
    let (a, sm) = rabi_lowering_ops(params.n_fock)?;
    let n_cav = thermal_occupation(params.omega0, bath.temperature);
    let n_tls = thermal_occupation(params.omega_x, bath.temperature);
    let terms = vec![
        CollapseTerm { label: "a".into(), rate: bath.gamma_cavity * (1.0 + n_cav), op: a.clone() },
        CollapseTerm { label: "a†".into(), rate: bath.gamma_cavity * n_cav, op: a.adjoint() },
        CollapseTerm { label: "σ⁻".into(), rate: bath.gamma_emitter * (1.0 + n_tls), op: sm.clone() },
        CollapseTerm { label: "σ⁺".into(), rate: bath.gamma_emitter * n_tls, op: sm.adjoint() },
    ];
    let mut l = Liouvillian::from_lindblad(&h, &terms)?;
    let gamma_min = [bath.gamma_cavity, bath.gamma_emitter]
        .into_iter()
        .filter(|&g| g > 0.0)
        .fold(f64::INFINITY, f64::min);
    if gamma_min.is_finite() {
        l.rate_scale = gamma_min;
    }
    Ok(l)
}

/// Bare normal-ordered g²(0) of the cavity in the standard master equation's steady state.
pub fn standard_me_g2(params: &RabiParams, bath: &BathSpec) -> Result<f64> {
    let l = standard_me_baseline(params, bath)?;
    let rho = steady_state(&l)?;
    let (a, _) = rabi_lowering_ops(params.n_fock)?;
    let rho = QOperator::new(a.space().clone(), rho.into_matrix())?;
    normal_order_g2(&rho, &a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dressed::dress;
    use crate::model::ModelSpec;
    use crate::thermal::{bare_thermal_populations, thermal_state};

    struct Setup {
        basis: DressedBasis,
        table: TransitionTable,
        cut: usize,
    }

    fn setup(g: f64, t: f64) -> Setup {
        let system = ModelSpec::Rabi(RabiParams::resonant(g, 20)).build().unwrap();
        let (basis, table) = dress(&system).unwrap();
        let cut = basis.default_level_cut(t);
        Setup { basis, table, cut }
    }

    fn liouvillian(s: &Setup, bath: &BathSpec) -> Liouvillian {
        let r = all_rates(&s.basis, &s.table, bath, s.cut, 1.0).unwrap();
        build_liouvillian(&s.basis, s.cut, &r).unwrap()
    }

    #[test]
    fn occupation_limits() {
        assert_eq!(thermal_occupation(1.0, 0.0), 0.0);
        assert!(thermal_occupation(1.0, 1e-3) < 1e-300);
        assert!((thermal_occupation(1.0, 1.0) - 1.0 / (1f64.exp() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn rate_formula_at_unit_gap() {
        // At g = 0 the 0 -> 1 cavity transition has Δ = ω₀ and |C| = 1.
        let s = setup(0.0, 0.2);
        let bath = BathSpec::new(0.02, 0.01, 0.2).unwrap();
        let r = rates(&s.basis, &s.table, &bath, 0, s.cut, 1.0).unwrap();
        for tr in r.rates.iter().filter(|r| r.rate > 0.0 && (r.gap - 1.0).abs() < 1e-12) {
            let c2 = s.table.channels()[0].coefficients[(tr.lower, tr.upper)].norm_sqr();
            assert!((tr.rate - 0.02 * c2).abs() < 1e-15);
        }
        // Degenerate pairs carry no rate.
        assert!(r.rates.iter().filter(|r| r.gap < 1e-9).all(|r| r.rate == 0.0));
    }

    #[test]
    fn quasidegenerate_rate_suppression() {
        let s = setup(0.9, 0.15);
        let bath = BathSpec::new(0.01, 0.01, 0.15).unwrap();
        let r = rates(&s.basis, &s.table, &bath, 0, s.cut, 1.0).unwrap();
        let find = |j, k| r.rates.iter().find(|t| t.lower == j && t.upper == k).unwrap();
        let r01 = find(0, 1);
        let c01 = s.table.channels()[0].coefficients[(0, 1)].norm_sqr();
        // Γ ∝ Δ: the doublet rate is the unit-gap rate scaled by Δ₁₀.
        assert!((r01.rate - 0.01 * s.basis.gap(1, 0) * c01).abs() < 1e-16);
        assert!(s.basis.gap(1, 0) < 0.25);
    }

    #[test]
    fn detailed_balance() {
        let s = setup(0.5, 0.2);
        let bath = BathSpec::new(0.01, 0.01, 0.2).unwrap();
        for ch in all_rates(&s.basis, &s.table, &bath, s.cut, 1.0).unwrap() {
            for r in ch.rates.iter().filter(|r| r.rate > 0.0) {
                let ratio = r.upward() / r.downward();
                assert!((ratio - (-r.gap / 0.2).exp()).abs() < 1e-13 * (1.0 + ratio));
            }
        }
    }

    #[test]
    fn trace_and_hermiticity_preserved() {
        let s = setup(0.6, 0.2);
        let l = liouvillian(&s, &BathSpec::new(0.01, 0.02, 0.2).unwrap());
        let d = l.dim();
        let mut rho = CMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                rho[(i, j)] = C64::new(((i * 7 + j * 3) % 5) as f64 * 0.1, ((i + 2 * j) % 3) as f64 * 0.05);
            }
        }
        let rho = &rho + rho.adjoint();
        let lr = l.apply(&rho).unwrap();
        assert!(lr.trace().norm() < 1e-10);
        assert!(crate::operator::hermitian_deviation(&lr) < 1e-10);
    }

    #[test]
    fn pure_hamiltonian_keeps_populations() {
        let s = setup(0.4, 0.2);
        let l = liouvillian(&s, &BathSpec::new(0.0, 0.0, 0.2).unwrap());
        let mut rho = CMatrix::zeros(l.dim(), l.dim());
        rho[(2, 2)] = ONE;
        let rho = QOperator::from_matrix(rho).unwrap();
        for r in evolve(&l, &rho, &[0.0, 1.0, 50.0]).unwrap() {
            assert!(r.sub(&rho).unwrap().max_norm() < 1e-12);
        }
        assert!(matches!(steady_state(&l), Err(Error::AmbiguousSteadyState { .. })));
    }

    #[test]
    fn steady_state_is_thermal() {
        let t = 0.07;
        let s = setup(0.5, t);
        let thermal = thermal_state(&s.basis, t).unwrap().density_matrix(s.cut).unwrap();
        for (ga, gx) in [(0.01, 0.01), (0.03, 0.005)] {
            let l = liouvillian(&s, &BathSpec::new(ga, gx, t).unwrap());
            let rho = steady_state(&l).unwrap();
            assert!(rho.sub(&thermal).unwrap().max_norm() < 1e-6);
            assert!(max_abs(&l.apply(rho.matrix()).unwrap()) < 1e-10);
        }
    }

    #[test]
    fn thermal_state_is_stationary_and_cascade_flows_down() {
        let t = 0.15;
        let s = setup(0.9, t);
        let l = liouvillian(&s, &BathSpec::new(0.01, 0.01, t).unwrap());
        let thermal = thermal_state(&s.basis, t).unwrap().density_matrix(s.cut).unwrap();
        for r in evolve(&l, &thermal, &[0.0, 10.0, 500.0]).unwrap() {
            assert!(r.sub(&thermal).unwrap().max_norm() < 1e-9);
        }
        let mut start = CMatrix::zeros(l.dim(), l.dim());
        start[(2, 2)] = ONE;
        let start = QOperator::from_matrix(start).unwrap();
        let traj = evolve(&l, &start, &[0.0, 300.0, 30000.0]).unwrap();
        // After a few |2⟩ lifetimes the weight sits in |1⟩, which drains far more slowly.
        let p = |k: usize, i: usize| traj[i].get(k, k).re;
        assert!(p(2, 1) < 0.1 && p(1, 1) > 0.5);
        assert!(p(1, 2) < p(1, 1));
        for r in &traj {
            assert!((r.trace() - ONE).norm() < 1e-9);
            assert!(r.hermitian_deviation() < 1e-9);
        }
    }

    #[test]
    fn secular_block_structure() {
        let s = setup(0.5, 0.2);
        let l = liouvillian(&s, &BathSpec::new(0.01, 0.01, 0.2).unwrap());
        let d = l.dim();
        let is_pop = |idx: usize| idx % d == idx / d;
        let mut worst = 0.0f64;
        for r in 0..d * d {
            for c in 0..d * d {
                if is_pop(r) != is_pop(c) {
                    worst = worst.max(l.matrix()[(r, c)].norm());
                }
            }
        }
        assert!(worst < 1e-12);
    }

    #[test]
    fn negative_rate_rejected() {
        let s = setup(0.2, 0.1);
        let mut r = all_rates(&s.basis, &s.table, &BathSpec::new(0.01, 0.01, 0.1).unwrap(), s.cut, 1.0)
            .unwrap();
        r[0].rates[0].rate = -1.0;
        assert!(matches!(build_liouvillian(&s.basis, s.cut, &r), Err(Error::NegativeRate { .. })));
    }

    #[test]
    fn baseline_steady_state_is_product_thermal() {
        let t = 0.3;
        let p = RabiParams::resonant(0.0, 8);
        let bath = BathSpec::new(0.01, 0.02, t).unwrap();
        let rho = steady_state(&standard_me_baseline(&p, &bath).unwrap()).unwrap();
        let tls = bare_thermal_populations(1.0, t, 2);
        let cav = bare_thermal_populations(1.0, t, 8);
        for (m, pm) in tls.iter().enumerate() {
            for (n, pn) in cav.iter().enumerate() {
                let idx = m * 8 + n;
                assert!((rho.get(idx, idx).re - pm * pn).abs() < 1e-9);
            }
        }
        // Cavity occupation gives the output flux γ_a n̄.
        let (a, _) = rabi_lowering_ops(8).unwrap();
        let n = a.adjoint().mul(&a).unwrap().mul(&QOperator::new(a.space().clone(), rho.into_matrix()).unwrap()).unwrap().trace().re;
        assert!((n - thermal_occupation(1.0, t)).abs() < 1e-6);
    }

    #[test]
    fn baseline_g2_is_two() {
        for (g, t) in [(0.1, 0.2), (0.5, 0.07)] {
            let v = standard_me_g2(&RabiParams::resonant(g, 8), &BathSpec::new(0.01, 0.01, t).unwrap())
                .unwrap();
            assert!((v - 2.0).abs() < 1e-4, "{v}");
        }
    }

    #[test]
    fn schur_resolvent_matches_dense_solve() {
        let s = setup(0.3, 0.2);
        let l = liouvillian(&s, &BathSpec::new(0.01, 0.01, 0.2).unwrap());
        let n = l.dim() * l.dim();
        let x: CVector = CVector::from_fn(n, |i, _| C64::new((i % 7) as f64, (i % 3) as f64));
        let b: CVector = CVector::from_fn(n, |i, _| C64::new(1.0 / (1 + i) as f64, 0.0));
        let schur = SchurForm::new(&l).unwrap();
        let (left, right) = schur.project(&b, &x);
        let z = C64::new(0.0, 0.7);
        let fast = schur.resolvent(z, &left, &right);
        let dense = (CMatrix::identity(n, n) * z - l.matrix()).lu().solve(&x).unwrap();
        let direct = b.dot(&dense);
        assert!((fast - direct).norm() < 1e-8 * direct.norm().max(1.0));
    }
}
