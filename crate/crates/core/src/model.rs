//! Hamiltonians of a cavity coupled to two-level emitters, without the
//! rotating-wave approximation, plus the Jaynes–Cummings reference.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{embed, fock_annihilation, tls_lowering, HilbertSpace, QOperator, I};

pub const DEFAULT_N_FOCK: usize = 20;

/// Largest Hilbert-space dimension any builder will produce.
pub const DIMENSION_CAP: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiParams {
    pub omega0: f64,
    pub omega_x: f64,
    pub g: f64,
    pub n_fock: usize,
}

impl RabiParams {
    /// Resonant model with ω₀ = ω_x = 1.
    pub fn resonant(g: f64, n_fock: usize) -> Self {
        Self { omega0: 1.0, omega_x: 1.0, g, n_fock }
    }

    pub fn validate(&self) -> Result<()> {
        positive("omega0", self.omega0)?;
        positive("omega_x", self.omega_x)?;
        non_negative("g", self.g)?;
        fock("n_fock", self.n_fock)?;
        cap(2 * self.n_fock)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmitterParams {
    pub omega_x: f64,
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiTlsParams {
    pub omega0: f64,
    pub emitters: Vec<EmitterParams>,
    pub n_fock: usize,
}

impl MultiTlsParams {
    /// `count` identical resonant emitters with common coupling `g`.
    pub fn identical(count: usize, g: f64, n_fock: usize) -> Self {
        Self { omega0: 1.0, emitters: vec![EmitterParams { omega_x: 1.0, g }; count], n_fock }
    }

    pub fn validate(&self) -> Result<()> {
        positive("omega0", self.omega0)?;
        if self.emitters.is_empty() {
            return Err(Error::InvalidParameter {
                name: "emitters",
                reason: "at least one emitter is required".into(),
            });
        }
        for e in &self.emitters {
            positive("omega_x", e.omega_x)?;
            non_negative("g", e.g)?;
        }
        fock("n_fock", self.n_fock)?;
        let tls_dim = 1usize
            .checked_shl(self.emitters.len() as u32)
            .filter(|_| self.emitters.len() < usize::BITS as usize)
            .ok_or(Error::DimensionOverflow { dim: usize::MAX, cap: DIMENSION_CAP })?;
        cap(tls_dim.saturating_mul(self.n_fock))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeParams {
    pub omega0: f64,
    pub g: f64,
    pub n_fock: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoModeParams {
    pub modes: [ModeParams; 2],
    pub omega_x: f64,
}

impl TwoModeParams {
    pub fn validate(&self) -> Result<()> {
        positive("omega_x", self.omega_x)?;
        for m in &self.modes {
            positive("omega0", m.omega0)?;
            non_negative("g", m.g)?;
            fock("n_fock", m.n_fock)?;
        }
        cap(2 * self.modes[0].n_fock * self.modes[1].n_fock)
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::InvalidParameter { name, reason: format!("must be positive, got {v}") });
    }
    Ok(())
}

fn non_negative(name: &'static str, v: f64) -> Result<()> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::InvalidParameter {
            name,
            reason: format!("must be non-negative, got {v}"),
        });
    }
    Ok(())
}

fn fock(name: &'static str, n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParameter { name, reason: format!("must be at least 2, got {n}") });
    }
    Ok(())
}

fn cap(dim: usize) -> Result<()> {
    if dim > DIMENSION_CAP {
        return Err(Error::DimensionOverflow { dim, cap: DIMENSION_CAP });
    }
    Ok(())
}

/// Which tensor layout a space follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    Rabi,
    MultiTls { emitters: usize },
    TwoMode,
}

impl ModelKind {
    fn expected_layout(&self, space: &HilbertSpace) -> bool {
        let f = space.factors();
        match *self {
            ModelKind::Rabi => f.len() == 2 && f[0] == 2,
            ModelKind::MultiTls { emitters } => {
                f.len() == emitters + 1 && f[..emitters].iter().all(|&d| d == 2)
            }
            ModelKind::TwoMode => f.len() == 3 && f[0] == 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelKind {
    Cavity,
    Emitter,
}

/// A system operator coupled to its own thermal bath.
#[derive(Debug, Clone)]
pub struct Channel {
    pub label: String,
    pub kind: ChannelKind,
    /// Lowering operator `c` entering `−i(c − c†)`.
    pub lowering: QOperator,
}

/// Everything the downstream modules need about one model instance.
#[derive(Debug, Clone)]
pub struct System {
    pub kind: ModelKind,
    /// Frequency that normalizes the ohmic rate factor Δ/ω₀.
    pub reference_frequency: f64,
    pub hamiltonian: QOperator,
    pub parity: QOperator,
    /// Cavity field `X = −i Σ_m (a_m − a_m†)` with unit zero-point amplitude.
    pub field: QOperator,
    pub channels: Vec<Channel>,
}

/// Any of the supported Hamiltonians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelSpec {
    Rabi(RabiParams),
    MultiTls(MultiTlsParams),
    TwoMode(TwoModeParams),
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Rabi(_) => ModelKind::Rabi,
            ModelSpec::MultiTls(p) => ModelKind::MultiTls { emitters: p.emitters.len() },
            ModelSpec::TwoMode(_) => ModelKind::TwoMode,
        }
    }

    /// Fock truncation of the (first) cavity mode.
    pub fn n_fock(&self) -> usize {
        match self {
            ModelSpec::Rabi(p) => p.n_fock,
            ModelSpec::MultiTls(p) => p.n_fock,
            ModelSpec::TwoMode(p) => p.modes[0].n_fock,
        }
    }

    /// Same model with every Fock truncation multiplied by `factor`.
    pub fn with_scaled_truncation(&self, factor: usize) -> ModelSpec {
        match self {
            ModelSpec::Rabi(p) => ModelSpec::Rabi(RabiParams { n_fock: p.n_fock * factor, ..*p }),
            ModelSpec::MultiTls(p) => {
                ModelSpec::MultiTls(MultiTlsParams { n_fock: p.n_fock * factor, ..p.clone() })
            }
            ModelSpec::TwoMode(p) => {
                let mut q = *p;
                for m in &mut q.modes {
                    m.n_fock *= factor;
                }
                ModelSpec::TwoMode(q)
            }
        }
    }

    pub fn build(&self) -> Result<System> {
        match self {
            ModelSpec::Rabi(p) => rabi_system(p),
            ModelSpec::MultiTls(p) => multi_tls_system(p),
            ModelSpec::TwoMode(p) => two_mode_system(p),
        }
    }
}

/// `−i (c − c†)`.
pub fn quadrature(c: &QOperator) -> Result<QOperator> {
    Ok(c.sub(&c.adjoint())?.scale(-I))
}

struct RabiOps {
    space: HilbertSpace,
    a: QOperator,
    sm: QOperator,
}

fn rabi_ops(n_fock: usize) -> Result<RabiOps> {
    let space = HilbertSpace::new(vec![2, n_fock])?;
    let a = embed(&fock_annihilation(n_fock)?, &space, 1)?;
    let sm = embed(&tls_lowering(), &space, 0)?;
    Ok(RabiOps { space, a, sm })
}

/// `H = ω₀ a†a + ω_x σ⁺σ⁻ + g (a + a†)(σ⁻ + σ⁺)`.
pub fn build_rabi(params: &RabiParams) -> Result<QOperator> {
    params.validate()?;
    let RabiOps { a, sm, .. } = rabi_ops(params.n_fock)?;
    let n = a.adjoint().mul(&a)?;
    let ex = sm.adjoint().mul(&sm)?;
    let coupling = a.add(&a.adjoint())?.mul(&sm.add(&sm.adjoint())?)?;
    n.scale_real(params.omega0)
        .add(&ex.scale_real(params.omega_x))?
        .add(&coupling.scale_real(params.g))
}

/// Jaynes–Cummings form `ω₀ a†a + ω_x σ⁺σ⁻ + g (a σ⁺ + a† σ⁻)`.
pub fn build_rwa(params: &RabiParams) -> Result<QOperator> {
    params.validate()?;
    let RabiOps { a, sm, .. } = rabi_ops(params.n_fock)?;
    let n = a.adjoint().mul(&a)?;
    let ex = sm.adjoint().mul(&sm)?;
    let exchange = a.mul(&sm.adjoint())?.add(&a.adjoint().mul(&sm)?)?;
    n.scale_real(params.omega0)
        .add(&ex.scale_real(params.omega_x))?
        .add(&exchange.scale_real(params.g))
}

/// Bare cavity and emitter lowering operators of the single-mode model.
pub fn rabi_lowering_ops(n_fock: usize) -> Result<(QOperator, QOperator)> {
    let RabiOps { a, sm, .. } = rabi_ops(n_fock)?;
    Ok((a, sm))
}

fn rabi_system(params: &RabiParams) -> Result<System> {
    let hamiltonian = build_rabi(params)?;
    let RabiOps { space, a, sm } = rabi_ops(params.n_fock)?;
    let parity = parity_operator(&space, ModelKind::Rabi)?;
    Ok(System {
        kind: ModelKind::Rabi,
        reference_frequency: params.omega0,
        hamiltonian,
        parity,
        field: quadrature(&a)?,
        channels: vec![
            Channel { label: "cavity".into(), kind: ChannelKind::Cavity, lowering: a },
            Channel { label: "emitter".into(), kind: ChannelKind::Emitter, lowering: sm },
        ],
    })
}

fn multi_tls_ops(params: &MultiTlsParams) -> Result<(HilbertSpace, QOperator, Vec<QOperator>)> {
    let j = params.emitters.len();
    let mut factors = vec![2; j];
    factors.push(params.n_fock);
    let space = HilbertSpace::new(factors)?;
    let a = embed(&fock_annihilation(params.n_fock)?, &space, j)?;
    let sms = (0..j)
        .map(|slot| embed(&tls_lowering(), &space, slot))
        .collect::<Result<Vec<_>>>()?;
    Ok((space, a, sms))
}

/// `H = ω₀ a†a + Σ_j ω_x⁽ʲ⁾ σ⁺_j σ⁻_j + (a + a†) Σ_j g⁽ʲ⁾ (σ⁻_j + σ⁺_j)`.
pub fn build_multi_tls(params: &MultiTlsParams) -> Result<QOperator> {
    params.validate()?;
    let (_, a, sms) = multi_tls_ops(params)?;
    let mut h = a.adjoint().mul(&a)?.scale_real(params.omega0);
    let mut dipole = QOperator::zeros(a.space());
    for (e, sm) in params.emitters.iter().zip(&sms) {
        h = h.add(&sm.adjoint().mul(sm)?.scale_real(e.omega_x))?;
        dipole = dipole.add(&sm.add(&sm.adjoint())?.scale_real(e.g))?;
    }
    h.add(&a.add(&a.adjoint())?.mul(&dipole)?)
}

fn multi_tls_system(params: &MultiTlsParams) -> Result<System> {
    let hamiltonian = build_multi_tls(params)?;
    let (space, a, sms) = multi_tls_ops(params)?;
    let kind = ModelKind::MultiTls { emitters: sms.len() };
    let parity = parity_operator(&space, kind)?;
    let field = quadrature(&a)?;
    let mut channels =
        vec![Channel { label: "cavity".into(), kind: ChannelKind::Cavity, lowering: a }];
    for (idx, sm) in sms.into_iter().enumerate() {
        channels.push(Channel {
            label: format!("emitter{}", idx + 1),
            kind: ChannelKind::Emitter,
            lowering: sm,
        });
    }
    Ok(System {
        kind,
        reference_frequency: params.omega0,
        hamiltonian,
        parity,
        field,
        channels,
    })
}

fn two_mode_ops(params: &TwoModeParams) -> Result<(HilbertSpace, [QOperator; 2], QOperator)> {
    let [m1, m2] = params.modes;
    let space = HilbertSpace::new(vec![2, m1.n_fock, m2.n_fock])?;
    let a1 = embed(&fock_annihilation(m1.n_fock)?, &space, 1)?;
    let a2 = embed(&fock_annihilation(m2.n_fock)?, &space, 2)?;
    let sm = embed(&tls_lowering(), &space, 0)?;
    Ok((space, [a1, a2], sm))
}

/// `H = Σ_m ω₀⁽ᵐ⁾ a_m†a_m + ω_x σ⁺σ⁻ + [Σ_m g⁽ᵐ⁾ (a_m + a_m†)](σ⁻ + σ⁺)`.
pub fn build_two_mode(params: &TwoModeParams) -> Result<QOperator> {
    params.validate()?;
    let (_, modes, sm) = two_mode_ops(params)?;
    let mut h = sm.adjoint().mul(&sm)?.scale_real(params.omega_x);
    let mut field = QOperator::zeros(sm.space());
    for (a, p) in modes.iter().zip(&params.modes) {
        h = h.add(&a.adjoint().mul(a)?.scale_real(p.omega0))?;
        field = field.add(&a.add(&a.adjoint())?.scale_real(p.g))?;
    }
    h.add(&field.mul(&sm.add(&sm.adjoint())?)?)
}

fn two_mode_system(params: &TwoModeParams) -> Result<System> {
    let hamiltonian = build_two_mode(params)?;
    let (space, [a1, a2], sm) = two_mode_ops(params)?;
    let parity = parity_operator(&space, ModelKind::TwoMode)?;
    let field = quadrature(&a1)?.add(&quadrature(&a2)?)?;
    Ok(System {
        kind: ModelKind::TwoMode,
        reference_frequency: params.modes[0].omega0,
        hamiltonian,
        parity,
        field,
        channels: vec![
            Channel { label: "cavity1".into(), kind: ChannelKind::Cavity, lowering: a1 },
            Channel { label: "cavity2".into(), kind: ChannelKind::Cavity, lowering: a2 },
            Channel { label: "emitter".into(), kind: ChannelKind::Emitter, lowering: sm },
        ],
    })
}

/// Total excitation number: Σ σ⁺σ⁻ over emitters plus Σ a†a over modes.
pub fn excitation_number(space: &HilbertSpace, kind: ModelKind) -> Result<QOperator> {
    check_layout(space, kind)?;
    let diag = excitation_diagonal(space, kind);
    QOperator::from_real_diagonal(space, &diag.iter().map(|&n| n as f64).collect::<Vec<_>>())
}

fn check_layout(space: &HilbertSpace, kind: ModelKind) -> Result<()> {
    if !kind.expected_layout(space) {
        return Err(Error::InvalidDimension(format!(
            "space with factors {:?} does not match model {:?}",
            space.factors(),
            kind
        )));
    }
    Ok(())
}

// Every factor counts its own level index as excitations (TLS: 0 = ground).
fn excitation_diagonal(space: &HilbertSpace, _kind: ModelKind) -> Vec<usize> {
    let factors = space.factors();
    let mut out = Vec::with_capacity(space.total_dim());
    for mut idx in 0..space.total_dim() {
        let mut n = 0;
        for &d in factors.iter().rev() {
            n += idx % d;
            idx /= d;
        }
        out.push(n);
    }
    out
}

/// `Π = exp(iπ N_exc)`, diagonal with entries (−1)^N_exc.
pub fn parity_operator(space: &HilbertSpace, kind: ModelKind) -> Result<QOperator> {
    check_layout(space, kind)?;
    let diag: Vec<f64> = excitation_diagonal(space, kind)
        .into_iter()
        .map(|n| if n % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    QOperator::from_real_diagonal(space, &diag)
}
