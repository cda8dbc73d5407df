//! Eigenbasis of the coupled Hamiltonian and the emission operators built on it.
//!
//! The Hamiltonian is diagonalized separately in each parity sector, so every
//! dressed state carries an exact parity label. Levels closer than
//! [`DEGENERACY_TOL`] are ordered with even parity first, and each eigenvector
//! is rotated so its largest bare-basis component is real and positive.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Channel, ChannelKind, System};
use crate::operator::{matmul, max_abs, CMatrix, HilbertSpace, QOperator, C64, I, ZERO};

/// Energy gap below which two levels count as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;
/// Transition elements smaller than this are set to exactly zero.
pub const SNAP_TOL: f64 = 1e-12;
/// Accuracy demanded of every eigendecomposition.
pub const EIGEN_TOL: f64 = 1e-8;

/// Thermal window of the default level cut, in units of k_BT.
pub const LEVEL_CUT_THERMAL_WIDTH: f64 = 8.0;
/// Fixed energy margin of the default level cut, in units of ω₀.
pub const LEVEL_CUT_MARGIN: f64 = 4.0;

#[derive(Debug, Clone)]
pub struct DressedBasis {
    energies: Vec<f64>,
    vectors: CMatrix,
    parities: Vec<i8>,
}

impl DressedBasis {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Ascending eigenvalues.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Unitary matrix whose column `j` is the dressed state `|j⟩` in the bare basis.
    pub fn vectors(&self) -> &CMatrix {
        &self.vectors
    }

    pub fn parities(&self) -> &[i8] {
        &self.parities
    }

    pub fn ground_energy(&self) -> f64 {
        self.energies[0]
    }

    /// `Δ_kj = ω_k − ω_j`.
    pub fn gap(&self, k: usize, j: usize) -> f64 {
        self.energies[k] - self.energies[j]
    }

    /// Energies measured from the ground state.
    pub fn excitation_energies(&self) -> Vec<f64> {
        let e0 = self.ground_energy();
        self.energies.iter().map(|e| e - e0).collect()
    }

    /// `U† M U`.
    pub fn to_dressed(&self, bare: &CMatrix) -> CMatrix {
        matmul(&matmul(&self.vectors.adjoint(), bare), &self.vectors)
    }

    /// `U M U†`.
    pub fn to_bare(&self, dressed: &CMatrix) -> CMatrix {
        matmul(&matmul(&self.vectors, dressed), &self.vectors.adjoint())
    }

    /// `‖H U − U diag(ω)‖_max` for the Hamiltonian this basis came from.
    pub fn residual(&self, h: &QOperator) -> f64 {
        let mut hu = matmul(h.matrix(), &self.vectors);
        for (j, &e) in self.energies.iter().enumerate() {
            let col = self.vectors.column(j) * C64::new(e, 0.0);
            let mut target = hu.column_mut(j);
            target -= col;
        }
        max_abs(&hu)
    }

    /// Number of lowest levels inside the default thermal window at `temperature`.
    pub fn default_level_cut(&self, temperature: f64) -> usize {
        let limit = LEVEL_CUT_THERMAL_WIDTH * temperature.max(0.0) + LEVEL_CUT_MARGIN;
        let e0 = self.ground_energy();
        let n = self.energies.iter().take_while(|&&e| e - e0 <= limit).count();
        n.clamp(2.min(self.dim()), self.dim())
    }
}

/// Diagonalizes `h` within the eigenspaces of `parity`.
pub fn diagonalize(h: &QOperator, parity: &QOperator) -> Result<DressedBasis> {
    h.ensure_hermitian()?;
    parity.ensure_hermitian()?;
    if h.dim() != parity.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), got: parity.dim() });
    }
    let scale = h.max_norm().max(1.0);
    let deviation = h.commutator(parity)?.max_norm();
    if deviation > EIGEN_TOL * scale {
        return Err(Error::ParityMismatch { deviation });
    }

    let n = h.dim();
    let sectors = parity_sectors(parity)?;
    let mut states: Vec<(f64, i8, nalgebra::DVector<C64>)> = Vec::with_capacity(n);
    for (sign, basis) in sectors {
        if basis.ncols() == 0 {
            continue;
        }
        let block = matmul(&matmul(&basis.adjoint(), h.matrix()), &basis);
        let block = (&block + block.adjoint()) * C64::new(0.5, 0.0);
        let eig = block.symmetric_eigen();
        let vecs = matmul(&basis, &eig.eigenvectors);
        for (k, &e) in eig.eigenvalues.iter().enumerate() {
            if !e.is_finite() {
                return Err(Error::Eigensolver("non-finite eigenvalue".into()));
            }
            states.push((e, sign, vecs.column(k).into_owned()));
        }
    }

    states.sort_by(|a, b| a.0.total_cmp(&b.0));
    order_degenerate_clusters(&mut states);

    let mut vectors = CMatrix::zeros(n, n);
    let mut energies = Vec::with_capacity(n);
    let mut parities = Vec::with_capacity(n);
    for (j, (e, p, mut v)) in states.into_iter().enumerate() {
        fix_phase(v.as_mut_slice());
        vectors.set_column(j, &v);
        energies.push(e);
        parities.push(p);
    }
    let basis = DressedBasis { energies, vectors, parities };

    let residual = basis.residual(h);
    if residual > EIGEN_TOL * scale {
        return Err(Error::Eigensolver(format!("residual {residual:e} too large")));
    }
    let gram = matmul(&basis.vectors.adjoint(), &basis.vectors) - CMatrix::identity(n, n);
    let unitarity = max_abs(&gram);
    if unitarity > EIGEN_TOL {
        return Err(Error::Eigensolver(format!("eigenvectors not orthonormal ({unitarity:e})")));
    }
    Ok(basis)
}

/// Orthonormal bases of the +1 and −1 eigenspaces.
fn parity_sectors(parity: &QOperator) -> Result<Vec<(i8, CMatrix)>> {
    let n = parity.dim();
    let m = parity.matrix();
    let square = m * m - CMatrix::identity(n, n);
    if max_abs(&square) > EIGEN_TOL {
        return Err(Error::InvalidDimension("parity operator does not square to identity".into()));
    }
    let diagonal = (0..n).all(|j| (0..n).all(|i| i == j || m[(i, j)].norm() == 0.0));
    let (values, vectors): (Vec<f64>, CMatrix) = if diagonal {
        ((0..n).map(|i| m[(i, i)].re).collect(), CMatrix::identity(n, n))
    } else {
        let eig = m.clone().symmetric_eigen();
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };
    let mut out = Vec::new();
    for sign in [1i8, -1] {
        let cols: Vec<usize> = values
            .iter()
            .enumerate()
            .filter(|(_, &v)| (v - sign as f64).abs() < 1e-6)
            .map(|(i, _)| i)
            .collect();
        let mut basis = CMatrix::zeros(n, cols.len());
        for (c, &i) in cols.iter().enumerate() {
            basis.set_column(c, &vectors.column(i));
        }
        out.push((sign, basis));
    }
    if out.iter().map(|(_, b)| b.ncols()).sum::<usize>() != n {
        return Err(Error::Eigensolver("parity eigenvalues are not ±1".into()));
    }
    Ok(out)
}

fn order_degenerate_clusters(states: &mut [(f64, i8, nalgebra::DVector<C64>)]) {
    let mut start = 0;
    while start < states.len() {
        let mut end = start + 1;
        while end < states.len() && states[end].0 - states[end - 1].0 < DEGENERACY_TOL {
            end += 1;
        }
        if end - start > 1 {
            states[start..end].sort_by(|a, b| b.1.cmp(&a.1));
        }
        start = end;
    }
}

/// Rotates `v` so its largest-magnitude component (first one on ties) is real positive.
fn fix_phase(v: &mut [C64]) {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    let pivot = v.iter().position(|z| z.norm() >= max * (1.0 - 1e-12)).unwrap_or(0);
    let phase = v[pivot].conj() / v[pivot].norm();
    for z in v.iter_mut() {
        *z *= phase;
    }
    v[pivot] = C64::new(v[pivot].re, 0.0);
}

/// Coefficients of one bath channel in the dressed basis.
#[derive(Debug, Clone)]
pub struct ChannelTable {
    pub label: String,
    pub kind: ChannelKind,
    /// `C_jk = −i⟨j|(c − c†)|k⟩`.
    pub coefficients: CMatrix,
}

#[derive(Debug, Clone)]
pub struct TransitionTable {
    field: CMatrix,
    channels: Vec<ChannelTable>,
}

impl TransitionTable {
    /// `X_jk = ⟨j|X|k⟩`.
    pub fn field(&self) -> &CMatrix {
        &self.field
    }

    pub fn channels(&self) -> &[ChannelTable] {
        &self.channels
    }
}

/// Expresses the cavity field and each channel quadrature in the dressed basis.
pub fn transition_table(
    basis: &DressedBasis,
    field: &QOperator,
    channels: &[Channel],
) -> Result<TransitionTable> {
    let n = basis.dim();
    let dressed = |op: &QOperator| -> Result<CMatrix> {
        if op.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: op.dim() });
        }
        let mut m = basis.to_dressed(op.matrix());
        clean_transitions(&mut m, basis.parities());
        Ok(m)
    };
    let field = dressed(field)?;
    let channels = channels
        .iter()
        .map(|c| {
            let quad = c.lowering.sub(&c.lowering.adjoint())?.scale(-I);
            Ok(ChannelTable {
                label: c.label.clone(),
                kind: c.kind,
                coefficients: dressed(&quad)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TransitionTable { field, channels })
}

/// Snaps round-off to zero; parity-odd operators get exact zeros between equal parities.
fn clean_transitions(m: &mut CMatrix, parities: &[i8]) {
    let n = m.nrows();
    let scale = max_abs(m).max(1.0);
    let mut odd = true;
    for j in 0..n {
        for k in 0..n {
            if parities[j] == parities[k] && m[(j, k)].norm() > EIGEN_TOL * scale {
                odd = false;
            }
        }
    }
    for j in 0..n {
        for k in 0..n {
            if m[(j, k)].norm() < SNAP_TOL || (odd && parities[j] == parities[k]) {
                m[(j, k)] = ZERO;
            }
        }
    }
}

fn check_cut(basis: &DressedBasis, level_cut: usize) -> Result<()> {
    if level_cut < 2 {
        return Err(Error::InvalidParameter {
            name: "level_cut",
            reason: format!("must be at least 2, got {level_cut}"),
        });
    }
    if level_cut > basis.dim() {
        return Err(Error::InvalidParameter {
            name: "level_cut",
            reason: format!("{level_cut} exceeds the basis dimension {}", basis.dim()),
        });
    }
    Ok(())
}

/// `Ẋ⁺ = −i Σ_{j<k} Δ_kj X_jk |j⟩⟨k|` restricted to the lowest `level_cut` levels.
pub fn xdot_plus(
    basis: &DressedBasis,
    table: &TransitionTable,
    level_cut: usize,
) -> Result<QOperator> {
    check_cut(basis, level_cut)?;
    let mut m = CMatrix::zeros(level_cut, level_cut);
    for k in 0..level_cut {
        for j in 0..k {
            m[(j, k)] = -I * basis.gap(k, j) * table.field[(j, k)];
        }
    }
    QOperator::new(HilbertSpace::flat(level_cut)?, m)
}

/// Single emission line `k → j`: `Ẋ⁺_jk = iΔ_jk X_jk |j⟩⟨k|`, `k > j`.
pub fn xdot_plus_filtered(
    basis: &DressedBasis,
    table: &TransitionTable,
    level_cut: usize,
    j: usize,
    k: usize,
) -> Result<QOperator> {
    check_cut(basis, level_cut)?;
    if k <= j {
        return Err(Error::InvalidParameter {
            name: "transition",
            reason: format!("upper index {k} must exceed lower index {j}"),
        });
    }
    if k >= level_cut {
        return Err(Error::InvalidParameter {
            name: "transition",
            reason: format!("index {k} outside the level cut {level_cut}"),
        });
    }
    let mut m = CMatrix::zeros(level_cut, level_cut);
    m[(j, k)] = I * (-basis.gap(k, j)) * table.field[(j, k)];
    QOperator::new(HilbertSpace::flat(level_cut)?, m)
}

/// Diagonalizes a built system and tabulates its transitions.
pub fn dress(system: &System) -> Result<(DressedBasis, TransitionTable)> {
    let basis = diagonalize(&system.hamiltonian, &system.parity)?;
    let table = transition_table(&basis, &system.field, &system.channels)?;
    Ok((basis, table))
}

/// Adiabatic levels `lower` and `upper = lower + 1` exchange diabatic character
/// between two neighbouring grid points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub lower: usize,
    pub upper: usize,
    pub g_before: f64,
    pub g_after: f64,
}

#[derive(Debug, Clone)]
pub struct LevelSweep {
    pub g: Vec<f64>,
    /// `energies[i]` holds the lowest levels at `g[i]`.
    pub energies: Vec<Vec<f64>>,
    pub crossings: Vec<Crossing>,
}

/// Overlap a diabatic match must exceed to count as unambiguous.
const TRACKING_OVERLAP: f64 = 0.9;

/// Energies of the lowest `levels` states along `g_grid`, with level crossings
/// found by following eigenvector overlaps between neighbouring points.
pub fn level_sweep<F>(build: F, g_grid: &[f64], levels: usize) -> Result<LevelSweep>
where
    F: Fn(f64) -> Result<System> + Sync,
{
    if g_grid.is_empty() {
        return Err(Error::InvalidGrid("coupling grid is empty".into()));
    }
    if g_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("coupling grid must be strictly ascending".into()));
    }
    if levels < 2 {
        return Err(Error::InvalidParameter { name: "levels", reason: "need at least 2".into() });
    }
    // Track a few extra states so the top reported level has partners.
    let tracked = levels + 2;
    let points: Vec<(Vec<f64>, CMatrix)> = g_grid
        .par_iter()
        .map(|&g| {
            let system = build(g)?;
            let basis = diagonalize(&system.hamiltonian, &system.parity)?;
            let m = tracked.min(basis.dim());
            if m < levels {
                return Err(Error::InvalidParameter {
                    name: "levels",
                    reason: format!("basis has only {} states", basis.dim()),
                });
            }
            let vecs = basis.vectors().columns(0, m).into_owned();
            Ok((basis.energies()[..levels].to_vec(), vecs))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut crossings = Vec::new();
    let mut labels: Vec<usize> = (0..points[0].1.ncols()).collect();
    for step in 1..points.len() {
        let old = &points[step - 1].1;
        let new = &points[step].1;
        let (assignment, decisive) = match_states(old, new);
        let new_labels: Vec<usize> = assignment.iter().map(|&i| labels[i]).collect();
        for lower in 0..levels - 1 {
            let upper = lower + 1;
            let swapped = new_labels[lower] == labels[upper] && new_labels[upper] == labels[lower];
            if swapped && decisive[lower] && decisive[upper] {
                crossings.push(Crossing {
                    lower,
                    upper,
                    g_before: g_grid[step - 1],
                    g_after: g_grid[step],
                });
            }
        }
        labels = new_labels;
    }

    Ok(LevelSweep {
        g: g_grid.to_vec(),
        energies: points.into_iter().map(|(e, _)| e).collect(),
        crossings,
    })
}

/// For each new state, the index of the old state it continues, and whether
/// the match was unambiguous.
fn match_states(old: &CMatrix, new: &CMatrix) -> (Vec<usize>, Vec<bool>) {
    let overlaps = old.adjoint() * new;
    let (m_old, m_new) = (old.ncols(), new.ncols());
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(m_old * m_new);
    for i in 0..m_old {
        for j in 0..m_new {
            pairs.push((overlaps[(i, j)].norm_sqr(), i, j));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut assignment = vec![usize::MAX; m_new];
    let mut decisive = vec![false; m_new];
    let mut used = vec![false; m_old];
    for (ov, i, j) in pairs {
        if assignment[j] == usize::MAX && !used[i] {
            assignment[j] = i;
            decisive[j] = ov > TRACKING_OVERLAP;
            used[i] = true;
        }
    }
    (assignment, decisive)
}

impl LevelSweep {
    /// `g,omega_0,…` rows with 12 significant digits.
    pub fn to_csv(&self) -> String {
        let levels = self.energies.first().map_or(0, Vec::len);
        let mut out = String::new();
        for c in &self.crossings {
            out.push_str(&format!(
                "#crossing={}/{},{},{}\n",
                c.lower,
                c.upper,
                crate::format::sig12(c.g_before),
                crate::format::sig12(c.g_after)
            ));
        }
        out.push('g');
        for l in 0..levels {
            out.push_str(&format!(",omega_{l}"));
        }
        out.push('\n');
        for (g, row) in self.g.iter().zip(&self.energies) {
            out.push_str(&crate::format::sig12(*g));
            for e in row {
                out.push(',');
                out.push_str(&crate::format::sig12(*e));
            }
            out.push('\n');
        }
        out
    }
}
