use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("slot {slot} out of range for a space with {factors} factors")]
    SlotOutOfRange { slot: usize, factors: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("Hilbert space dimension {dim} exceeds the cap of {cap}")]
    DimensionOverflow { dim: usize, cap: usize },

    #[error("operator is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("parity operator does not commute with the Hamiltonian (max deviation {deviation:e})")]
    ParityMismatch { deviation: f64 },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),

    #[error("undefined photon statistics: flux {flux:e} is below the floor {floor:e}")]
    UndefinedStatistics { flux: f64, floor: f64 },

    #[error("negative rate {rate:e} in `{term}`")]
    NegativeRate { term: String, rate: f64 },

    #[error("steady state is not unique: null space dimension {null_dim}")]
    AmbiguousSteadyState { null_dim: usize },

    #[error("state is not stationary under the Liouvillian (residual {residual:e})")]
    NotStationary { residual: f64 },

    #[error("time integration failed: {0}")]
    Integration(String),

    #[error("transition {j}<-{k} has no emission amplitude (|amplitude| = {magnitude:e})")]
    ZeroTransition { j: usize, k: usize, magnitude: f64 },

    #[error("delay window too short: |C(tau_max)|/|C(0)| = {ratio:e}")]
    WindowTooShort { ratio: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// Short machine-readable code written into sweep records.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidDimension(_) => "invalid-dimension",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::SlotOutOfRange { .. } => "slot-out-of-range",
            Error::InvalidParameter { .. } => "invalid-parameter",
            Error::DimensionOverflow { .. } => "dimension-overflow",
            Error::NotHermitian { .. } => "not-hermitian",
            Error::ParityMismatch { .. } => "parity-mismatch",
            Error::Eigensolver(_) => "eigensolver",
            Error::NonPositiveTemperature(_) => "non-positive-temperature",
            Error::UndefinedStatistics { .. } => "undefined-statistics",
            Error::NegativeRate { .. } => "negative-rate",
            Error::AmbiguousSteadyState { .. } => "ambiguous-steady-state",
            Error::NotStationary { .. } => "not-stationary",
            Error::Integration(_) => "integration",
            Error::ZeroTransition { .. } => "zero-transition",
            Error::WindowTooShort { .. } => "window-too-short",
            Error::InvalidGrid(_) => "invalid-grid",
            Error::Numerical(_) => "numerical",
        }
    }
}
