//! Dense complex linear algebra for systems of at most three qubits.
//!
//! Basis index `i` of an `n`-qubit register stores qubit `q` (0 = atom,
//! then photons in reflection order) in bit `n - 1 - q`. Bit value 0 is
//! spin up, so the two-qubit ordering is `↑↑, ↑↓, ↓↑, ↓↓`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const MAX_QUBITS: usize = 3;

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_FLOOR: f64 = -1e-8;
pub const UNITARY_TOL: f64 = 1e-10;
pub const PHASE_TIE_TOL: f64 = 1e-12;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub(crate) fn qubits_for_dim(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(dim));
    }
    let n = dim.trailing_zeros() as usize;
    if n > MAX_QUBITS {
        return Err(Error::TooManyQubits {
            qubits: n,
            max: MAX_QUBITS,
        });
    }
    Ok(n)
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub(crate) fn hermitian_deviation(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let sym = (m + m.adjoint()) * c(0.5, 0.0);
    let mut ev: Vec<f64> = SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub(crate) fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Normalized state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amps: CVector,
}

impl PureState {
    /// Builds a state from raw amplitudes, normalizing them.
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        qubits_for_dim(amps.len())?;
        let v = CVector::from_vec(amps);
        let norm = v.norm();
        if norm < 1e-300 {
            return Err(Error::ZeroNorm);
        }
        Ok(Self {
            amps: v.unscale(norm),
        })
    }

    pub(crate) fn from_vector_unchecked(v: CVector) -> Self {
        Self { amps: v }
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::new(amps.iter().map(|&x| c(x, 0.0)).collect())
    }

    pub fn basis(qubits: usize, index: usize) -> Result<Self> {
        let dim = 1usize << qubits;
        qubits_for_dim(dim)?;
        if index >= dim {
            return Err(Error::InvalidQubit { index, qubits });
        }
        let mut v = CVector::zeros(dim);
        v[index] = c(1.0, 0.0);
        Ok(Self { amps: v })
    }

    pub fn up() -> Self {
        Self::from_vector_unchecked(CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]))
    }

    pub fn down() -> Self {
        Self::from_vector_unchecked(CVector::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0)]))
    }

    /// `(|↑⟩ + |↓⟩)/√2`
    pub fn up_x() -> Self {
        Self::from_vector_unchecked(CVector::from_vec(vec![
            c(FRAC_1_SQRT_2, 0.0),
            c(FRAC_1_SQRT_2, 0.0),
        ]))
    }

    /// `(|↑⟩ − |↓⟩)/√2`, used for atom and photon alike.
    pub fn down_x() -> Self {
        Self::from_vector_unchecked(CVector::from_vec(vec![
            c(FRAC_1_SQRT_2, 0.0),
            c(-FRAC_1_SQRT_2, 0.0),
        ]))
    }

    /// `(|↑⟩ + i|↓⟩)/√2`
    pub fn up_y() -> Self {
        Self::from_vector_unchecked(CVector::from_vec(vec![
            c(FRAC_1_SQRT_2, 0.0),
            c(0.0, FRAC_1_SQRT_2),
        ]))
    }

    /// `(|↑⟩ − i|↓⟩)/√2`
    pub fn down_y() -> Self {
        Self::from_vector_unchecked(CVector::from_vec(vec![
            c(FRAC_1_SQRT_2, 0.0),
            c(0.0, -FRAC_1_SQRT_2),
        ]))
    }

    pub fn qubits(&self) -> usize {
        self.amps.len().trailing_zeros() as usize
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amps
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &PureState) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(self.amps.dotc(&other.amps))
    }

    pub fn equals_up_to_phase(&self, other: &PureState, tol: f64) -> bool {
        self.inner(other)
            .map(|z| (z.norm() - 1.0).abs() <= tol)
            .unwrap_or(false)
    }

    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix {
            m: &self.amps * self.amps.adjoint(),
        }
    }

    pub fn apply(&self, u: &UnitaryOp) -> Result<PureState> {
        if u.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: u.dim(),
            });
        }
        Ok(Self {
            amps: &u.m * &self.amps,
        })
    }

    pub fn scale_phase(&self, phase: f64) -> PureState {
        Self {
            amps: &self.amps * C64::from_polar(1.0, phase),
        }
    }

    /// Normalized superposition `a·self + b·other`.
    pub fn superpose(&self, a: C64, other: &PureState, b: C64) -> Result<PureState> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        let v = &self.amps * a + &other.amps * b;
        PureState::new(v.iter().copied().collect())
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: CMatrix,
}

impl DensityMatrix {
    /// Validates the physicality invariants.
    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                actual: m.ncols(),
            });
        }
        qubits_for_dim(m.nrows())?;
        let herm = hermitian_deviation(&m);
        if herm > HERMITIAN_TOL {
            return Err(Error::NotPhysical {
                property: "Hermitian",
                deviation: herm,
            });
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::NotPhysical {
                property: "unit trace",
                deviation: (tr - c(1.0, 0.0)).norm(),
            });
        }
        let min = hermitian_eigenvalues(&m)[0];
        if min < PSD_FLOOR {
            return Err(Error::NotPhysical {
                property: "positive semidefinite",
                deviation: -min,
            });
        }
        Ok(Self { m })
    }

    /// Normalizes a positive (possibly unnormalized) operator, symmetrizing
    /// away round-off. Returns `None` when the trace vanishes.
    pub(crate) fn from_unnormalized(m: &CMatrix) -> Option<Self> {
        let tr = m.trace().re;
        if tr <= 1e-300 {
            return None;
        }
        let h = (m + m.adjoint()) * c(0.5 / tr, 0.0);
        Some(Self { m: h })
    }

    pub fn maximally_mixed(qubits: usize) -> Result<Self> {
        let dim = 1usize << qubits;
        qubits_for_dim(dim)?;
        Ok(Self {
            m: CMatrix::identity(dim, dim) * c(1.0 / dim as f64, 0.0),
        })
    }

    pub fn from_pure(psi: &PureState) -> Self {
        psi.projector()
    }

    /// Weighted mixture of pure states; weights are renormalized.
    pub fn mixture(parts: &[(f64, PureState)]) -> Result<Self> {
        let first = parts.first().ok_or(Error::ZeroNorm)?;
        let dim = first.1.dim();
        let mut m = CMatrix::zeros(dim, dim);
        for (w, psi) in parts {
            if psi.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: psi.dim(),
                });
            }
            m += psi.projector().m * c(*w, 0.0);
        }
        Self::from_unnormalized(&m).ok_or(Error::ZeroNorm)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn trace(&self) -> C64 {
        self.m.trace()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.m)
    }

    pub fn purity(&self) -> f64 {
        (&self.m * &self.m).trace().re
    }

    /// Element-wise absolute values, the quantity shown in density-matrix
    /// bar charts.
    pub fn abs_entries(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.m[(i, j)].norm()).collect())
            .collect()
    }

    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        let diff = &self.m - &other.m;
        Ok(0.5
            * hermitian_eigenvalues(&diff)
                .iter()
                .map(|x| x.abs())
                .sum::<f64>())
    }

    pub fn conjugate_by(&self, u: &UnitaryOp) -> Result<DensityMatrix> {
        if u.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: u.dim(),
            });
        }
        Ok(Self {
            m: &u.m * &self.m * u.m.adjoint(),
        })
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        max_abs(&(&self.m - &other.m))
    }
}

/// Square unitary matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryOp {
    m: CMatrix,
}

impl UnitaryOp {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                actual: m.ncols(),
            });
        }
        qubits_for_dim(m.nrows())?;
        let dev = max_abs(&(&m * m.adjoint() - CMatrix::identity(m.nrows(), m.nrows())));
        if dev > UNITARY_TOL {
            return Err(Error::NotPhysical {
                property: "unitary",
                deviation: dev,
            });
        }
        Ok(Self { m })
    }

    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        Self { m }
    }

    pub fn identity(qubits: usize) -> Self {
        let d = 1usize << qubits;
        Self {
            m: CMatrix::identity(d, d),
        }
    }

    pub fn pauli_x() -> Self {
        Self::from_real_rows(&[[0.0, 1.0], [1.0, 0.0]])
    }

    pub fn pauli_y() -> Self {
        Self {
            m: CMatrix::from_row_slice(
                2,
                2,
                &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)],
            ),
        }
    }

    pub fn pauli_z() -> Self {
        Self::from_real_rows(&[[1.0, 0.0], [0.0, -1.0]])
    }

    /// Maps the z basis onto the x basis: `|↑⟩ → |↑x⟩`, `|↓⟩ → |↓x⟩`.
    pub fn hadamard() -> Self {
        let h = FRAC_1_SQRT_2;
        Self::from_real_rows(&[[h, h], [h, -h]])
    }

    fn from_real_rows(rows: &[[f64; 2]; 2]) -> Self {
        Self {
            m: CMatrix::from_fn(2, 2, |i, j| c(rows[i][j], 0.0)),
        }
    }

    pub fn diagonal(entries: &[C64]) -> Result<Self> {
        Self::new(CMatrix::from_diagonal(&CVector::from_column_slice(entries)))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn dagger(&self) -> Self {
        Self {
            m: self.m.adjoint(),
        }
    }

    /// `self · other`
    pub fn compose(&self, other: &UnitaryOp) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(Self {
            m: &self.m * &other.m,
        })
    }

    /// True if `self = e^{iθ}·other` for some θ.
    pub fn equals_up_to_phase(&self, other: &UnitaryOp, tol: f64) -> bool {
        if self.dim() != other.dim() {
            return false;
        }
        let overlap = (other.m.adjoint() * &self.m).trace() / self.dim() as f64;
        if (overlap.norm() - 1.0).abs() > tol {
            return false;
        }
        let phase = overlap / overlap.norm();
        max_abs(&(&self.m - &other.m * phase)) <= tol
    }

    /// Embeds a single-qubit operator acting on `target` of an `n`-qubit register.
    pub fn on_qubit(&self, target: usize, qubits: usize) -> Result<Self> {
        if self.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                actual: self.dim(),
            });
        }
        if target >= qubits {
            return Err(Error::InvalidQubit {
                index: target,
                qubits,
            });
        }
        Ok(Self {
            m: embed(&self.m, target, qubits),
        })
    }
}

/// Embeds a 2×2 operator on qubit `target` of an `n`-qubit register.
pub(crate) fn embed(op: &CMatrix, target: usize, qubits: usize) -> CMatrix {
    let mut out = CMatrix::identity(1, 1);
    for q in 0..qubits {
        out = if q == target {
            kron(&out, op)
        } else {
            kron(&out, &CMatrix::identity(2, 2))
        };
    }
    out
}

/// Set of Kraus operators. Trace-decreasing channels model post-selected
/// loss; the missing weight is the failure probability.
#[derive(Debug, Clone)]
pub struct KrausChannel {
    ops: Vec<CMatrix>,
    trace_preserving: bool,
}

impl KrausChannel {
    pub fn new(ops: Vec<CMatrix>, trace_preserving: bool) -> Result<Self> {
        let first = ops.first().ok_or(Error::InvalidParameter {
            name: "kraus_ops".into(),
            reason: "at least one operator required".into(),
        })?;
        let dim = first.nrows();
        for k in &ops {
            if k.nrows() != dim || k.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: k.nrows().max(k.ncols()),
                });
            }
        }
        let sum = ops
            .iter()
            .fold(CMatrix::zeros(dim, dim), |acc, k| acc + k.adjoint() * k);
        let gap = CMatrix::identity(dim, dim) - &sum;
        if trace_preserving {
            let dev = max_abs(&gap);
            if dev > 1e-10 {
                return Err(Error::NotPhysical {
                    property: "trace preserving",
                    deviation: dev,
                });
            }
        } else {
            let min = hermitian_eigenvalues(&gap)[0];
            if min < -1e-10 {
                return Err(Error::NotPhysical {
                    property: "trace non-increasing",
                    deviation: -min,
                });
            }
        }
        Ok(Self {
            ops,
            trace_preserving,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            ops: vec![CMatrix::identity(dim, dim)],
            trace_preserving: true,
        }
    }

    pub fn from_unitary(u: &UnitaryOp) -> Self {
        Self {
            ops: vec![u.matrix().clone()],
            trace_preserving: true,
        }
    }

    /// Removes all z-basis coherence of one qubit.
    pub fn full_dephasing() -> Self {
        let p0 = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]));
        let p1 = CMatrix::from_diagonal(&CVector::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0)]));
        Self {
            ops: vec![p0, p1],
            trace_preserving: true,
        }
    }

    pub fn ops(&self) -> &[CMatrix] {
        &self.ops
    }

    pub fn dim(&self) -> usize {
        self.ops[0].nrows()
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.trace_preserving
    }

    /// `Σ K ρ K†` without renormalization.
    pub(crate) fn apply_raw(&self, rho: &CMatrix) -> CMatrix {
        self.ops
            .iter()
            .fold(CMatrix::zeros(rho.nrows(), rho.ncols()), |acc, k| {
                acc + k * rho * k.adjoint()
            })
    }

    /// Runs `other` after `self`.
    pub fn then(&self, other: &KrausChannel) -> Result<KrausChannel> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        let ops = other
            .ops
            .iter()
            .flat_map(|b| self.ops.iter().map(move |a| b * a))
            .collect();
        Ok(Self {
            ops,
            trace_preserving: self.trace_preserving && other.trace_preserving,
        })
    }

    /// Probabilistic mixture `w·self + (1−w)·other`.
    pub fn mix(&self, weight: f64, other: &KrausChannel) -> Result<KrausChannel> {
        crate::error::check_probability("weight", weight)?;
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        let a = weight.sqrt();
        let b = (1.0 - weight).sqrt();
        let mut ops: Vec<CMatrix> = Vec::new();
        if a > 0.0 {
            ops.extend(self.ops.iter().map(|k| k * c(a, 0.0)));
        }
        if b > 0.0 {
            ops.extend(other.ops.iter().map(|k| k * c(b, 0.0)));
        }
        Ok(Self {
            ops,
            trace_preserving: self.trace_preserving && other.trace_preserving,
        })
    }

    /// Embeds a single-qubit channel on `target` of an `n`-qubit register.
    pub fn on_qubit(&self, target: usize, qubits: usize) -> Result<KrausChannel> {
        if self.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                actual: self.dim(),
            });
        }
        if target >= qubits {
            return Err(Error::InvalidQubit {
                index: target,
                qubits,
            });
        }
        Ok(Self {
            ops: self.ops.iter().map(|k| embed(k, target, qubits)).collect(),
            trace_preserving: self.trace_preserving,
        })
    }
}

/// Kronecker product with the left operand on the more significant qubits.
pub trait Tensor: Sized {
    fn tensor(&self, other: &Self) -> Result<Self>;
}

fn check_tensor_dim(a: usize, b: usize) -> Result<()> {
    qubits_for_dim(a * b).map(|_| ())
}

impl Tensor for PureState {
    fn tensor(&self, other: &Self) -> Result<Self> {
        check_tensor_dim(self.dim(), other.dim())?;
        Ok(Self {
            amps: self.amps.kronecker(&other.amps),
        })
    }
}

impl Tensor for DensityMatrix {
    fn tensor(&self, other: &Self) -> Result<Self> {
        check_tensor_dim(self.dim(), other.dim())?;
        Ok(Self {
            m: kron(&self.m, &other.m),
        })
    }
}

impl Tensor for UnitaryOp {
    fn tensor(&self, other: &Self) -> Result<Self> {
        check_tensor_dim(self.dim(), other.dim())?;
        Ok(Self {
            m: kron(&self.m, &other.m),
        })
    }
}

/// Tensor product of several states, in order.
pub fn tensor_all(states: &[PureState]) -> Result<PureState> {
    let mut it = states.iter();
    let first = it.next().ok_or(Error::ZeroNorm)?.clone();
    it.try_fold(first, |acc, s| acc.tensor(s))
}

pub(crate) fn partial_trace_raw(m: &CMatrix, qubits: usize, keep: &[usize]) -> CMatrix {
    let traced: Vec<usize> = (0..qubits).filter(|q| !keep.contains(q)).collect();
    let kd = 1usize << keep.len();
    let td = 1usize << traced.len();
    let compose = |k: usize, t: usize| -> usize {
        let mut idx = 0usize;
        for (pos, &q) in keep.iter().enumerate() {
            let bit = (k >> (keep.len() - 1 - pos)) & 1;
            idx |= bit << (qubits - 1 - q);
        }
        for (pos, &q) in traced.iter().enumerate() {
            let bit = (t >> (traced.len() - 1 - pos)) & 1;
            idx |= bit << (qubits - 1 - q);
        }
        idx
    };
    CMatrix::from_fn(kd, kd, |i, j| {
        (0..td).map(|t| m[(compose(i, t), compose(j, t))]).sum()
    })
}

/// Reduced state on the qubits in `keep` (kept in ascending order).
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    if keep.is_empty() {
        return Err(Error::EmptyKeepSet);
    }
    let n = rho.qubits();
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if let Some(&bad) = keep.iter().find(|&&q| q >= n) {
        return Err(Error::InvalidQubit {
            index: bad,
            qubits: n,
        });
    }
    Ok(DensityMatrix {
        m: partial_trace_raw(&rho.m, n, &keep),
    })
}

/// Outcome of a projective measurement on one subsystem.
#[derive(Debug, Clone, PartialEq)]
pub enum Projection<S> {
    Outcome {
        state: S,
        probability: f64,
    },
    /// The projector annihilates the state.
    Empty,
}

impl<S> Projection<S> {
    pub fn probability(&self) -> f64 {
        match self {
            Projection::Outcome { probability, .. } => *probability,
            Projection::Empty => 0.0,
        }
    }

    pub fn state(&self) -> Option<&S> {
        match self {
            Projection::Outcome { state, .. } => Some(state),
            Projection::Empty => None,
        }
    }
}

fn check_projector(p: &CMatrix) -> Result<()> {
    if p.nrows() != 2 || p.ncols() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: p.nrows(),
        });
    }
    let idem = max_abs(&(p * p - p));
    let herm = hermitian_deviation(p);
    if idem.max(herm) > 1e-10 {
        return Err(Error::NotPhysical {
            property: "an orthogonal projector",
            deviation: idem.max(herm),
        });
    }
    Ok(())
}

const EMPTY_TOL: f64 = 1e-14;

/// Projects `subsystem` of a pure state and renormalizes.
pub fn project_pure(
    state: &PureState,
    projector: &CMatrix,
    subsystem: usize,
) -> Result<Projection<PureState>> {
    check_projector(projector)?;
    let n = state.qubits();
    if subsystem >= n {
        return Err(Error::InvalidQubit {
            index: subsystem,
            qubits: n,
        });
    }
    let full = embed(projector, subsystem, n);
    let v = full * &state.amps;
    let p = v.norm_squared();
    if p <= EMPTY_TOL {
        return Ok(Projection::Empty);
    }
    Ok(Projection::Outcome {
        state: PureState {
            amps: v.unscale(p.sqrt()),
        },
        probability: p,
    })
}

/// Projects `subsystem` of a mixed state and renormalizes.
pub fn project_density(
    rho: &DensityMatrix,
    projector: &CMatrix,
    subsystem: usize,
) -> Result<Projection<DensityMatrix>> {
    check_projector(projector)?;
    let n = rho.qubits();
    if subsystem >= n {
        return Err(Error::InvalidQubit {
            index: subsystem,
            qubits: n,
        });
    }
    let full = embed(projector, subsystem, n);
    let out = &full * &rho.m * &full;
    let p = out.trace().re;
    if p <= EMPTY_TOL {
        return Ok(Projection::Empty);
    }
    Ok(Projection::Outcome {
        state: DensityMatrix::from_unnormalized(&out).ok_or(Error::ZeroNorm)?,
        probability: p,
    })
}

/// `R(θ, φ) = exp(−i θ/2 (cos φ·X + sin φ·Y))`.
pub fn rotation(theta: f64, phi: f64) -> UnitaryOp {
    let (s, co) = (theta / 2.0).sin_cos();
    let off = c(0.0, -s);
    UnitaryOp {
        m: CMatrix::from_row_slice(
            2,
            2,
            &[
                c(co, 0.0),
                off * C64::from_polar(1.0, -phi),
                off * C64::from_polar(1.0, phi),
                c(co, 0.0),
            ],
        ),
    }
}

/// `⟨ψ|ρ|ψ⟩`, clamped to `[0, 1]`.
pub fn fidelity_pure(rho: &DensityMatrix, target: &PureState) -> Result<f64> {
    if rho.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            actual: target.dim(),
        });
    }
    let v = &target.amps;
    let f = v.dotc(&(&rho.m * v)).re;
    Ok(f.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseOptimum {
    /// Phase `φ*` in `(|u⟩ + e^{−iφ}|v⟩)/√2`, radians in `(−π, π]`.
    pub phi: f64,
    pub fidelity: f64,
}

/// Maximizes `⟨ψ(φ)|ρ|ψ(φ)⟩` for `|ψ(φ)⟩ = (|u⟩ + e^{−iφ}|v⟩)/√2`.
///
/// `F(φ) = (ρ_uu + ρ_vv)/2 + Re(e^{−iφ} ρ_uv)`, so the optimum sits at
/// `φ* = arg ρ_uv` with `F = (ρ_uu + ρ_vv)/2 + |ρ_uv|`.
pub fn optimal_phase_fidelity(
    rho: &DensityMatrix,
    u: &PureState,
    v: &PureState,
) -> Result<PhaseOptimum> {
    for s in [u, v] {
        if s.dim() != rho.dim() {
            return Err(Error::DimensionMismatch {
                expected: rho.dim(),
                actual: s.dim(),
            });
        }
    }
    let ov = u.inner(v)?.norm();
    if ov > 1e-10 {
        return Err(Error::NotOrthonormal(ov));
    }
    let (ua, va) = (&u.amps, &v.amps);
    let ruu = ua.dotc(&(&rho.m * ua)).re;
    let rvv = va.dotc(&(&rho.m * va)).re;
    let ruv = ua.dotc(&(&rho.m * va));
    let phi = if ruv.norm() < PHASE_TIE_TOL {
        0.0
    } else {
        ruv.arg()
    };
    let f = (0.5 * (ruu + rvv) + ruv.norm()).clamp(0.0, 1.0);
    Ok(PhaseOptimum { phi, fidelity: f })
}

/// `|ψ(φ)⟩ = (|u⟩ + e^{−iφ}|v⟩)/√2`.
pub fn phased_superposition(u: &PureState, v: &PureState, phi: f64) -> Result<PureState> {
    u.superpose(c(1.0, 0.0), v, C64::from_polar(1.0, -phi))
}

/// Applies a channel and renormalizes. The second value is the trace
/// before renormalization, i.e. the post-selection success probability.
pub fn apply_channel(rho: &DensityMatrix, ch: &KrausChannel) -> Result<(DensityMatrix, f64)> {
    if ch.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            actual: ch.dim(),
        });
    }
    let out = ch.apply_raw(&rho.m);
    let p = out.trace().re;
    if p <= EMPTY_TOL {
        return Err(Error::Starvation(" after channel".into()));
    }
    let p = if ch.trace_preserving { 1.0 } else { p };
    Ok((
        DensityMatrix::from_unnormalized(&out).ok_or(Error::ZeroNorm)?,
        p,
    ))
}

#[derive(Debug, Serialize, Deserialize)]
struct DensityMatrixJson {
    dim: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl Serialize for DensityMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let d = self.dim();
        DensityMatrixJson {
            dim: d,
            re: (0..d)
                .map(|i| (0..d).map(|j| self.m[(i, j)].re).collect())
                .collect(),
            im: (0..d)
                .map(|i| (0..d).map(|j| self.m[(i, j)].im).collect())
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = DensityMatrixJson::deserialize(d)?;
        let dim = raw.dim;
        let rows_ok = raw.re.len() == dim
            && raw.im.len() == dim
            && raw.re.iter().chain(raw.im.iter()).all(|r| r.len() == dim);
        if !rows_ok {
            return Err(D::Error::custom(format!(
                "expected {dim}x{dim} real and imaginary parts"
            )));
        }
        let m = CMatrix::from_fn(dim, dim, |i, j| c(raw.re[i][j], raw.im[i][j]));
        DensityMatrix::from_matrix(m).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn phi_plus_ap() -> PureState {
        // (|↑ ↑x⟩ + |↓ ↓x⟩)/√2
        let a = PureState::up().tensor(&PureState::up_x()).unwrap();
        let b = PureState::down().tensor(&PureState::down_x()).unwrap();
        a.superpose(c(1.0, 0.0), &b, c(1.0, 0.0)).unwrap()
    }

    #[test]
    fn tensor_basis_bookkeeping() {
        let s = PureState::up().tensor(&PureState::down()).unwrap();
        assert_eq!(s.amplitudes()[1], c(1.0, 0.0));
        assert_abs_diff_eq!(s.amplitudes().norm(), 1.0);
    }

    #[test]
    fn tensor_identities() {
        let i4 = UnitaryOp::identity(1)
            .tensor(&UnitaryOp::identity(1))
            .unwrap();
        assert_eq!(i4, UnitaryOp::identity(2));
    }

    #[test]
    fn tensor_x_states_by_hand() {
        let s = PureState::up_x().tensor(&PureState::down_x()).unwrap();
        let expect = [0.5, -0.5, 0.5, -0.5];
        for (a, e) in s.amplitudes().iter().zip(expect) {
            assert_abs_diff_eq!(a.re, e, epsilon = 1e-15);
            assert_abs_diff_eq!(a.im, 0.0);
        }
    }

    #[test]
    fn tensor_rejects_four_qubits() {
        let two = PureState::basis(2, 0).unwrap();
        let three = two.tensor(&PureState::up()).unwrap();
        assert!(matches!(
            three.tensor(&PureState::up()),
            Err(Error::TooManyQubits { .. })
        ));
    }

    #[test]
    fn partial_trace_of_bell_is_mixed() {
        let rho = phi_plus_ap().projector();
        let atom = partial_trace(&rho, &[0]).unwrap();
        assert!(atom.max_abs_diff(&DensityMatrix::maximally_mixed(1).unwrap()) < 1e-12);
    }

    #[test]
    fn partial_trace_keep_all_is_identity() {
        let rho = phi_plus_ap().projector();
        let same = partial_trace(&rho, &[0, 1]).unwrap();
        assert!(same.max_abs_diff(&rho) < 1e-15);
    }

    #[test]
    fn partial_trace_against_block_sum() {
        // σ arbitrary physical state; ρ = |↑⟩⟨↑| ⊗ σ, so the atom-traced
        // result is the sum of the diagonal 2×2 blocks of ρ.
        let sigma = DensityMatrix::mixture(&[
            (0.7, PureState::up_y()),
            (0.3, PureState::from_real(&[0.6, 0.8]).unwrap()),
        ])
        .unwrap();
        let rho = PureState::up().projector().tensor(&sigma).unwrap();
        let m = rho.matrix();
        let block = CMatrix::from_fn(2, 2, |i, j| m[(i, j)] + m[(i + 2, j + 2)]);
        let got = partial_trace(&rho, &[1]).unwrap();
        assert!(max_abs(&(got.matrix() - block)) < 1e-15);
        assert!(got.max_abs_diff(&sigma) < 1e-15);
    }

    #[test]
    fn partial_trace_errors() {
        let rho = phi_plus_ap().projector();
        assert!(matches!(partial_trace(&rho, &[]), Err(Error::EmptyKeepSet)));
        assert!(matches!(
            partial_trace(&rho, &[2]),
            Err(Error::InvalidQubit { .. })
        ));
    }

    fn proj_up() -> CMatrix {
        PureState::up().projector().into_matrix()
    }

    fn proj_down() -> CMatrix {
        PureState::down().projector().into_matrix()
    }

    #[test]
    fn project_bell_component() {
        let out = project_pure(&phi_plus_ap(), &proj_up(), 0).unwrap();
        let expect = PureState::up().tensor(&PureState::up_x()).unwrap();
        assert_abs_diff_eq!(out.probability(), 0.5, epsilon = 1e-12);
        assert!(out.state().unwrap().equals_up_to_phase(&expect, 1e-10));
    }

    #[test]
    fn project_orthogonal_is_empty() {
        let out = project_pure(&PureState::up(), &proj_down(), 0).unwrap();
        assert_eq!(out, Projection::Empty);
    }

    #[test]
    fn project_eraser_output_on_atom_down() {
        // (1/2)[|↑⟩(|↑x↑x⟩ − |↓x↓x⟩) − |↓⟩(|↑x↑x⟩ + |↓x↓x⟩)]
        let uu = PureState::up_x().tensor(&PureState::up_x()).unwrap();
        let dd = PureState::down_x().tensor(&PureState::down_x()).unwrap();
        let a = PureState::up();
        let b = PureState::down();
        let mut amps = CVector::zeros(8);
        amps += a.tensor(&uu).unwrap().amplitudes() * c(0.5, 0.0);
        amps -= a.tensor(&dd).unwrap().amplitudes() * c(0.5, 0.0);
        amps -= b.tensor(&uu).unwrap().amplitudes() * c(0.5, 0.0);
        amps -= b.tensor(&dd).unwrap().amplitudes() * c(0.5, 0.0);
        let state = PureState::new(amps.iter().copied().collect()).unwrap();
        let out = project_pure(&state, &proj_down(), 0).unwrap();
        assert_abs_diff_eq!(out.probability(), 0.5, epsilon = 1e-12);
        let phi_plus_pp = uu.superpose(c(1.0, 0.0), &dd, c(1.0, 0.0)).unwrap();
        let expect = PureState::down().tensor(&phi_plus_pp).unwrap();
        let got = out.state().unwrap();
        let overlap = got.inner(&expect).unwrap();
        assert_abs_diff_eq!(overlap.re, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn project_rejects_non_idempotent() {
        let bad = CMatrix::identity(2, 2) * c(0.5, 0.0);
        assert!(project_pure(&PureState::up(), &bad, 0).is_err());
    }

    #[test]
    fn rotation_examples() {
        assert!(rotation(0.0, 1.234).equals_up_to_phase(&UnitaryOp::identity(1), 1e-12));
        let twice = rotation(PI, 0.0).compose(&rotation(PI, 0.0)).unwrap();
        let back = PureState::up().apply(&twice).unwrap();
        assert!(back.equals_up_to_phase(&PureState::up(), 1e-12));
        // cos(π/4)|↑⟩ − i sin(π/4)|↓⟩
        let half = PureState::up().apply(&rotation(PI / 2.0, 0.0)).unwrap();
        let h = FRAC_1_SQRT_2;
        assert_abs_diff_eq!(half.amplitudes()[0].re, h, epsilon = 1e-15);
        assert_abs_diff_eq!(half.amplitudes()[1].im, -h, epsilon = 1e-15);
        assert_abs_diff_eq!(half.amplitudes()[1].re, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn fidelity_examples() {
        let phi = phi_plus_ap();
        assert_abs_diff_eq!(
            fidelity_pure(&phi.projector(), &phi).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        assert_abs_diff_eq!(fidelity_pure(&mixed, &phi).unwrap(), 0.25, epsilon = 1e-12);
        let a = PureState::up().tensor(&PureState::up_x()).unwrap();
        let b = PureState::down().tensor(&PureState::down_x()).unwrap();
        let minus = a.superpose(c(1.0, 0.0), &b, c(-1.0, 0.0)).unwrap();
        let rho = DensityMatrix::mixture(&[(0.75, phi.clone()), (0.25, minus)]).unwrap();
        assert_abs_diff_eq!(fidelity_pure(&rho, &phi).unwrap(), 0.75, epsilon = 1e-12);
        assert!(fidelity_pure(&rho, &PureState::up()).is_err());
    }

    #[test]
    fn optimal_phase_examples() {
        let u = PureState::up().tensor(&PureState::up_x()).unwrap();
        let v = PureState::down().tensor(&PureState::down_x()).unwrap();
        let opt = optimal_phase_fidelity(&phi_plus_ap().projector(), &u, &v).unwrap();
        assert_abs_diff_eq!(opt.phi, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(opt.fidelity, 1.0, epsilon = 1e-12);

        let diag = DensityMatrix::mixture(&[(0.6, u.clone()), (0.4, v.clone())]).unwrap();
        let opt = optimal_phase_fidelity(&diag, &u, &v).unwrap();
        assert_eq!(opt.phi, 0.0);
        assert_abs_diff_eq!(opt.fidelity, 0.5, epsilon = 1e-12);

        let target = phased_superposition(&u, &v, 0.3).unwrap();
        let opt = optimal_phase_fidelity(&target.projector(), &u, &v).unwrap();
        assert_abs_diff_eq!(opt.phi, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(opt.fidelity, 1.0, epsilon = 1e-12);

        assert!(matches!(
            optimal_phase_fidelity(&diag, &u, &u),
            Err(Error::NotOrthonormal(_))
        ));
    }

    #[test]
    fn channel_examples() {
        let rho = phi_plus_ap().projector();
        let (out, p) = apply_channel(&rho, &KrausChannel::identity(4)).unwrap();
        assert_eq!(p, 1.0);
        assert!(out.max_abs_diff(&rho) < 1e-15);

        let (out, p) = apply_channel(
            &PureState::up_x().projector(),
            &KrausChannel::full_dephasing(),
        )
        .unwrap();
        assert_eq!(p, 1.0);
        assert!(out.max_abs_diff(&DensityMatrix::maximally_mixed(1).unwrap()) < 1e-15);

        let lossy = KrausChannel::new(vec![CMatrix::identity(4, 4) * c(0.7f64.sqrt(), 0.0)], false)
            .unwrap();
        let (out, p) = apply_channel(&rho, &lossy).unwrap();
        assert_abs_diff_eq!(p, 0.7, epsilon = 1e-12);
        assert!(out.max_abs_diff(&rho) < 1e-12);

        let dead = KrausChannel::new(vec![CMatrix::zeros(4, 4)], false).unwrap();
        assert!(matches!(
            apply_channel(&rho, &dead),
            Err(Error::Starvation(_))
        ));
    }

    #[test]
    fn kraus_completeness_enforced() {
        let too_big = CMatrix::identity(2, 2) * c(1.1, 0.0);
        assert!(KrausChannel::new(vec![too_big.clone()], false).is_err());
        let half = CMatrix::identity(2, 2) * c(0.5, 0.0);
        assert!(KrausChannel::new(vec![half], true).is_err());
    }

    #[test]
    fn density_validation() {
        let bad = CMatrix::identity(2, 2);
        assert!(DensityMatrix::from_matrix(bad).is_err());
        let neg = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.1, 0.0), c(-0.1, 0.0)]));
        assert!(matches!(
            DensityMatrix::from_matrix(neg),
            Err(Error::NotPhysical {
                property: "positive semidefinite",
                ..
            })
        ));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let rho = phi_plus_ap().projector();
        let text = serde_json::to_string(&rho).unwrap();
        let back: DensityMatrix = serde_json::from_str(&text).unwrap();
        assert!(back.max_abs_diff(&rho) < 1e-15);
        let bad = r#"{"dim":2,"re":[[1,0],[0,1]],"im":[[0,0],[0,0]]}"#;
        assert!(serde_json::from_str::<DensityMatrix>(bad).is_err());
    }
}
