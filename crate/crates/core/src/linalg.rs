//! Dense complex linear algebra on small registers: states, observables,
//! tensor placement, ordered operator products and graph states.
//!
//! Basis ordering is big-endian in the register list: the first register is
//! the most significant digit of a basis index. For qubit layouts this makes
//! qubit 1 the leading tensor factor.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bitstring::{BitString, DEFAULT_EXHAUSTIVE_THRESHOLD};
use crate::error::{LabError, Result};
use crate::graph::PhaseFunction;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Hermiticity, unitarity, completeness and commutation checks.
pub const STRUCTURE_TOL: f64 = 1e-10;
/// Equality of states.
pub const STATE_TOL: f64 = 1e-9;
/// Normalization on construction.
pub const NORM_TOL: f64 = 1e-12;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Ordered list of named registers and their dimensions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    registers: Vec<(String, usize)>,
}

impl Layout {
    pub fn new(registers: Vec<(String, usize)>) -> Result<Self> {
        if registers.is_empty() || registers.iter().any(|(_, d)| *d == 0) {
            return Err(LabError::InvalidArgument("layout needs registers of positive dimension".into()));
        }
        Ok(Self { registers })
    }

    /// `n` qubits named `q1 … qn`.
    pub fn qubits(n: usize) -> Self {
        Self { registers: (1..=n).map(|k| (format!("q{k}"), 2)).collect() }
    }

    /// Two abstract registers `A` and `B`.
    pub fn bipartite(dim_a: usize, dim_b: usize) -> Result<Self> {
        Self::new(vec![("A".into(), dim_a), ("B".into(), dim_b)])
    }

    pub fn registers(&self) -> &[(String, usize)] {
        &self.registers
    }

    pub fn len(&self) -> usize {
        self.registers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.registers.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.registers.iter().map(|(_, d)| d).product()
    }

    fn dims(&self) -> Vec<usize> {
        self.registers.iter().map(|(_, d)| *d).collect()
    }
}

/// Normalized pure state over a [`Layout`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: CVector,
    layout: Layout,
}

impl StateVector {
    /// Normalizes `amplitudes`; rejects the zero vector and dimension mismatches.
    pub fn new(amplitudes: CVector, layout: Layout) -> Result<Self> {
        if amplitudes.len() != layout.total_dim() {
            return Err(LabError::DimensionMismatch(format!(
                "{} amplitudes for a layout of dimension {}",
                amplitudes.len(),
                layout.total_dim()
            )));
        }
        let norm = amplitudes.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(LabError::InvalidArgument("state vector has zero or non-finite norm".into()));
        }
        Ok(Self { amplitudes: amplitudes / c(norm), layout })
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(index: usize, layout: Layout) -> Result<Self> {
        let dim = layout.total_dim();
        if index >= dim {
            return Err(LabError::IndexOutOfRange { index, len: dim });
        }
        let mut amps = CVector::zeros(dim);
        amps[index] = ONE;
        Self::new(amps, layout)
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// Applies `op` (dimension must match) and renormalizes. Intended for unitaries.
    pub fn apply(&self, op: &CMatrix) -> Result<Self> {
        check_square(op, self.dim())?;
        Self::new(op * &self.amplitudes, self.layout.clone())
    }
}

/// Hermitian unitary matrix placed on a set of sites (1-based register indices).
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    matrix: CMatrix,
    sites: Vec<usize>,
}

impl Observable {
    pub fn new(matrix: CMatrix, sites: Vec<usize>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(LabError::DimensionMismatch("observable must be square".into()));
        }
        let herm = hermitian_deviation(&matrix);
        let unit = unitary_deviation(&matrix);
        if herm > STRUCTURE_TOL || unit > STRUCTURE_TOL {
            return Err(LabError::InvalidArgument(format!(
                "observable is not Hermitian and unitary (deviations {herm:.3e}, {unit:.3e})"
            )));
        }
        Ok(Self { matrix, sites })
    }

    pub fn on_qubit(pauli: Pauli, site: usize) -> Self {
        Self { matrix: pauli.matrix(), sites: vec![site] }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Places `op` on its sites of `layout` with identity elsewhere. Sites may be
/// listed in any order; the operator's own tensor factors follow that order.
pub fn embed(op: &Observable, layout: &Layout) -> Result<CMatrix> {
    embed_matrix(op.matrix(), op.sites(), layout)
}

pub fn embed_matrix(matrix: &CMatrix, sites: &[usize], layout: &Layout) -> Result<CMatrix> {
    let dims = layout.dims();
    for (i, &s) in sites.iter().enumerate() {
        if s == 0 || s > dims.len() {
            return Err(LabError::IndexOutOfRange { index: s, len: dims.len() });
        }
        if sites[..i].contains(&s) {
            return Err(LabError::InvalidArgument(format!("site {s} listed twice")));
        }
    }
    let op_dim: usize = sites.iter().map(|&s| dims[s - 1]).product();
    check_square(matrix, op_dim)?;

    let total = layout.total_dim();
    // strides[r]: weight of register r in a global basis index
    let mut strides = vec![1usize; dims.len()];
    for r in (0..dims.len().saturating_sub(1)).rev() {
        strides[r] = strides[r + 1] * dims[r + 1];
    }
    let digit = |idx: usize, r: usize| (idx / strides[r]) % dims[r];
    let local_index = |idx: usize| sites.iter().fold(0usize, |acc, &s| acc * dims[s - 1] + digit(idx, s - 1));
    let rest_index = |idx: usize| {
        let mut out = idx;
        for &s in sites {
            out -= digit(idx, s - 1) * strides[s - 1];
        }
        out
    };

    let mut full = CMatrix::zeros(total, total);
    for col in 0..total {
        let col_rest = rest_index(col);
        let col_local = local_index(col);
        for row in 0..total {
            if rest_index(row) == col_rest {
                full[(row, col)] = matrix[(local_index(row), col_local)];
            }
        }
    }
    Ok(full)
}

/// `O^t = Π_k O_k^{t_k}` with the index increasing left to right, so the
/// highest-index factor acts on a state first.
pub fn ordered_power(ops: &[CMatrix], t: &BitString) -> Result<CMatrix> {
    if ops.len() != t.len() {
        return Err(LabError::LengthMismatch { expected: ops.len(), found: t.len() });
    }
    let dim = ops
        .first()
        .map(|m| m.nrows())
        .ok_or_else(|| LabError::InvalidArgument("ordered power of an empty family".into()))?;
    let mut out = identity(dim);
    for (k, op) in ops.iter().enumerate() {
        if t.bit(k + 1) {
            check_square(op, dim)?;
            out *= op;
        }
    }
    Ok(out)
}

/// Applies `O^t` to a vector without forming the product.
pub fn apply_ordered_power(ops: &[CMatrix], t: &BitString, v: &CVector) -> Result<CVector> {
    if ops.len() != t.len() {
        return Err(LabError::LengthMismatch { expected: ops.len(), found: t.len() });
    }
    let mut out = v.clone();
    for k in (1..=ops.len()).rev() {
        if t.bit(k) {
            check_square(&ops[k - 1], out.len())?;
            out = &ops[k - 1] * out;
        }
    }
    Ok(out)
}

/// Single-qubit observables used by the tests. `D = (X+Z)/√2`, `E = (X−Z)/√2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
    D,
    E,
}

impl Pauli {
    pub fn matrix(self) -> CMatrix {
        let s = FRAC_1_SQRT_2;
        let (a, b, cc, d) = match self {
            Pauli::I => (ONE, ZERO, ZERO, ONE),
            Pauli::X => (ZERO, ONE, ONE, ZERO),
            Pauli::Y => (ZERO, Complex64::new(0.0, -1.0), Complex64::new(0.0, 1.0), ZERO),
            Pauli::Z => (ONE, ZERO, ZERO, -ONE),
            Pauli::D => (c(s), c(s), c(s), c(-s)),
            Pauli::E => (c(-s), c(s), c(s), c(s)),
        };
        CMatrix::from_row_slice(2, 2, &[a, b, cc, d])
    }

    /// Eigenprojector `(I ± P)/2` for eigenvalue `sign`.
    pub fn projector(self, sign: i8) -> CMatrix {
        let m = self.matrix();
        (identity(2) + m * c(f64::from(sign))) * c(0.5)
    }
}

/// `{X, Z, D, E}` in that order.
pub fn pauli_observables() -> [(Pauli, CMatrix); 4] {
    [Pauli::X, Pauli::Z, Pauli::D, Pauli::E].map(|p| (p, p.matrix()))
}

/// `2^{−n/2} Σ_u (−1)^{P(u)} |u⟩` on `n` qubits.
pub fn graph_state(phase: &PhaseFunction) -> Result<StateVector> {
    phase.ensure_consistent(DEFAULT_EXHAUSTIVE_THRESHOLD)?;
    let n = phase.n();
    // 2^{-n/2}, exact for even n and correctly rounded for odd n
    let mut amp = 0.5f64.powi((n / 2) as i32);
    if n % 2 == 1 {
        amp *= FRAC_1_SQRT_2;
    }
    let amps = BitString::all(n)?
        .map(|u| phase.evaluate(&u).map(|p| c(if p == 0 { amp } else { -amp })))
        .collect::<Result<Vec<_>>>()?;
    Ok(StateVector { amplitudes: CVector::from_vec(amps), layout: Layout::qubits(n) })
}

/// `⟨v|w⟩`.
pub fn inner(v: &StateVector, w: &StateVector) -> Result<Complex64> {
    inner_raw(v.amplitudes(), w.amplitudes())
}

pub fn inner_raw(v: &CVector, w: &CVector) -> Result<Complex64> {
    if v.len() != w.len() {
        return Err(LabError::DimensionMismatch(format!("{} vs {}", v.len(), w.len())));
    }
    Ok(v.dotc(w))
}

/// `‖v − w‖₂` with no phase adjustment.
pub fn distance2(v: &StateVector, w: &StateVector) -> Result<f64> {
    distance2_raw(v.amplitudes(), w.amplitudes())
}

pub fn distance2_raw(v: &CVector, w: &CVector) -> Result<f64> {
    if v.len() != w.len() {
        return Err(LabError::DimensionMismatch(format!("{} vs {}", v.len(), w.len())));
    }
    Ok((v - w).norm())
}

/// `min_φ ‖v − e^{iφ} w‖₂`, attained at `φ = arg⟨w|v⟩`.
pub fn distance_phase_aligned(v: &StateVector, w: &StateVector) -> Result<f64> {
    let ov = inner(w, v)?;
    let phase = if ov.norm() > 0.0 { ov / c(ov.norm()) } else { ONE };
    distance2_raw(v.amplitudes(), &(w.amplitudes() * phase))
}

/// Real part of `⟨ψ|op|ψ⟩`; a large imaginary part means `op` was not Hermitian.
pub fn expectation(state: &StateVector, op: &CMatrix) -> Result<f64> {
    check_square(op, state.dim())?;
    let value = state.amplitudes().dotc(&(op * state.amplitudes()));
    real_or_err(value)
}

/// `⟨ψ|A⊗B|ψ⟩` for a state on `d_A·d_B` amplitudes (A the leading factor),
/// computed as `Σ conj(Ψ) ∘ (A Ψ Bᵀ)` with `Ψ` the `d_A × d_B` amplitude matrix.
pub fn bipartite_expectation(amplitudes: &CVector, a: &CMatrix, b: &CMatrix) -> Result<f64> {
    let psi = amplitude_matrix(amplitudes, a.nrows(), b.nrows())?;
    let moved = a * &psi * b.transpose();
    real_or_err(psi.zip_fold(&moved, ZERO, |acc, x, y| acc + x.conj() * y))
}

/// Reshapes amplitudes into the `d_A × d_B` matrix `Ψ[i][j] = ψ[i·d_B + j]`.
pub fn amplitude_matrix(amplitudes: &CVector, dim_a: usize, dim_b: usize) -> Result<CMatrix> {
    if dim_a * dim_b != amplitudes.len() {
        return Err(LabError::DimensionMismatch(format!(
            "{dim_a}×{dim_b} does not match {} amplitudes",
            amplitudes.len()
        )));
    }
    Ok(CMatrix::from_row_slice(dim_a, dim_b, amplitudes.as_slice()))
}

fn real_or_err(value: Complex64) -> Result<f64> {
    if value.im.abs() >= STRUCTURE_TOL {
        return Err(LabError::Internal(format!("expectation has imaginary part {:.3e}", value.im)));
    }
    Ok(value.re)
}

fn check_square(m: &CMatrix, dim: usize) -> Result<()> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(LabError::DimensionMismatch(format!("expected {dim}×{dim}, found {}×{}", m.nrows(), m.ncols())));
    }
    Ok(())
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `max |M − M†|`.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// `max |M†M − I|`.
pub fn unitary_deviation(m: &CMatrix) -> f64 {
    max_abs(&(m.adjoint() * m - identity(m.nrows())))
}

/// `max |AB − BA|`.
pub fn commutator_deviation(a: &CMatrix, b: &CMatrix) -> f64 {
    max_abs(&(a * b - b * a))
}
