//! Dense operators on truncated tensor-product Hilbert spaces.
//!
//! Energies are in units of the reference cavity frequency with ħ = 1.
//! Tensor factors are ordered emitters first, then cavity modes.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Max-norm tolerance for operators that must be Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HilbertSpace {
    factors: Vec<usize>,
    total_dim: usize,
}

impl HilbertSpace {
    pub fn new(factors: Vec<usize>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidDimension("a space needs at least one factor".into()));
        }
        if let Some(&d) = factors.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidDimension(format!("factor dimension {d} < 2")));
        }
        let total_dim = factors
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::InvalidDimension("dimension overflows usize".into()))?;
        Ok(Self { factors, total_dim })
    }

    /// A space with a single factor, e.g. a truncated dressed basis.
    pub fn flat(dim: usize) -> Result<Self> {
        Self::new(vec![dim])
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }
}

/// A square complex matrix tagged with the space it acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct QOperator {
    space: HilbertSpace,
    elements: CMatrix,
}

impl QOperator {
    pub fn new(space: HilbertSpace, elements: CMatrix) -> Result<Self> {
        let d = space.total_dim();
        if elements.nrows() != elements.ncols() {
            return Err(Error::InvalidDimension(format!(
                "matrix is {}x{}, not square",
                elements.nrows(),
                elements.ncols()
            )));
        }
        if elements.nrows() != d {
            return Err(Error::DimensionMismatch { expected: d, got: elements.nrows() });
        }
        Ok(Self { space, elements })
    }

    /// Wraps a square matrix in a single-factor space.
    pub fn from_matrix(elements: CMatrix) -> Result<Self> {
        let space = HilbertSpace::flat(elements.nrows())?;
        Self::new(space, elements)
    }

    pub fn zeros(space: &HilbertSpace) -> Self {
        let d = space.total_dim();
        Self { space: space.clone(), elements: CMatrix::zeros(d, d) }
    }

    pub fn identity(space: &HilbertSpace) -> Self {
        let d = space.total_dim();
        Self { space: space.clone(), elements: CMatrix::identity(d, d) }
    }

    pub fn from_real_diagonal(space: &HilbertSpace, diag: &[f64]) -> Result<Self> {
        let d = space.total_dim();
        if diag.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: diag.len() });
        }
        let mut m = CMatrix::zeros(d, d);
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        Ok(Self { space: space.clone(), elements: m })
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.total_dim()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.elements
    }

    pub fn into_matrix(self) -> CMatrix {
        self.elements
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.elements[(row, col)]
    }

    fn check_same(&self, other: &QOperator) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok(())
    }

    pub fn adjoint(&self) -> QOperator {
        Self { space: self.space.clone(), elements: self.elements.adjoint() }
    }

    pub fn mul(&self, other: &QOperator) -> Result<QOperator> {
        self.check_same(other)?;
        Ok(Self { space: self.space.clone(), elements: matmul(&self.elements, &other.elements) })
    }

    pub fn add(&self, other: &QOperator) -> Result<QOperator> {
        self.check_same(other)?;
        Ok(Self { space: self.space.clone(), elements: &self.elements + &other.elements })
    }

    pub fn sub(&self, other: &QOperator) -> Result<QOperator> {
        self.check_same(other)?;
        Ok(Self { space: self.space.clone(), elements: &self.elements - &other.elements })
    }

    pub fn scale(&self, factor: C64) -> QOperator {
        Self { space: self.space.clone(), elements: &self.elements * factor }
    }

    pub fn scale_real(&self, factor: f64) -> QOperator {
        self.scale(C64::new(factor, 0.0))
    }

    /// `[self, other] = self·other − other·self`.
    pub fn commutator(&self, other: &QOperator) -> Result<QOperator> {
        self.check_same(other)?;
        let ab = matmul(&self.elements, &other.elements);
        let ba = matmul(&other.elements, &self.elements);
        Ok(Self { space: self.space.clone(), elements: ab - ba })
    }

    pub fn trace(&self) -> C64 {
        self.elements.trace()
    }

    /// Largest absolute value of any element.
    pub fn max_norm(&self) -> f64 {
        max_abs(&self.elements)
    }

    pub fn hermitian_deviation(&self) -> f64 {
        hermitian_deviation(&self.elements)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    /// Rejects (never symmetrizes) operators off by more than [`HERMITIAN_TOL`].
    pub fn ensure_hermitian(&self) -> Result<()> {
        let deviation = self.hermitian_deviation();
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(())
    }

    /// Tensor product `self ⊗ other`, factors concatenated in order.
    pub fn kron(&self, other: &QOperator) -> Result<QOperator> {
        let mut factors = self.space.factors().to_vec();
        factors.extend_from_slice(other.space.factors());
        let space = HilbertSpace::new(factors)?;
        Ok(Self { space, elements: self.elements.kronecker(&other.elements) })
    }
}

/// Complex product assembled from real products, which nalgebra hands to an
/// optimized kernel; the generic complex path is an order of magnitude slower.
pub fn matmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(a.ncols(), b.nrows(), "inner dimensions differ");
    if a.nrows() * a.ncols() * b.ncols() < 4096 {
        return a * b;
    }
    let (ar, ai) = (a.map(|z| z.re), a.map(|z| z.im));
    let (br, bi) = (b.map(|z| z.re), b.map(|z| z.im));
    let re = &ar * &br - &ai * &bi;
    let im = &ar * &bi + &ai * &br;
    CMatrix::from_fn(a.nrows(), b.ncols(), |i, j| C64::new(re[(i, j)], im[(i, j)]))
}

pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub(crate) fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Bosonic annihilation operator truncated to `n_fock` number states.
pub fn fock_annihilation(n_fock: usize) -> Result<QOperator> {
    if n_fock < 2 {
        return Err(Error::InvalidDimension(format!("n_fock = {n_fock} < 2")));
    }
    let mut m = CMatrix::zeros(n_fock, n_fock);
    for n in 1..n_fock {
        m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    QOperator::new(HilbertSpace::flat(n_fock)?, m)
}

/// Two-level lowering operator; index 0 is the ground state, 1 the excited state.
pub fn tls_lowering() -> QOperator {
    let mut m = CMatrix::zeros(2, 2);
    m[(0, 1)] = ONE;
    QOperator { space: HilbertSpace { factors: vec![2], total_dim: 2 }, elements: m }
}

/// Places `op` at position `slot` of `space`, identities elsewhere.
pub fn embed(op: &QOperator, space: &HilbertSpace, slot: usize) -> Result<QOperator> {
    let factors = space.factors();
    if slot >= factors.len() {
        return Err(Error::SlotOutOfRange { slot, factors: factors.len() });
    }
    if op.dim() != factors[slot] {
        return Err(Error::DimensionMismatch { expected: factors[slot], got: op.dim() });
    }
    let left: usize = factors[..slot].iter().product();
    let right: usize = factors[slot + 1..].iter().product();
    let mut m = CMatrix::identity(left, left).kronecker(op.matrix());
    m = m.kronecker(&CMatrix::identity(right, right));
    QOperator::new(space.clone(), m)
}
