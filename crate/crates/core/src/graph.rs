//! Adjacency matrices and the graph-state phase function `P`.

use std::fmt;
use std::sync::Arc;

use crate::bitstring::{guard_exhaustive, BitString};
use crate::error::{LabError, Result};

/// Symmetric zero-diagonal 0/1 matrix. Row `i` is stored as a packed
/// [`BitString`] so `A·x mod 2` is a popcount per row.
#[derive(Clone, PartialEq, Eq)]
pub struct AdjacencyMatrix {
    rows: Vec<BitString>,
}

impl AdjacencyMatrix {
    pub fn new(entries: &[Vec<u8>]) -> Result<Self> {
        let n = entries.len();
        if n == 0 {
            return Err(LabError::InvalidArgument("adjacency matrix must be non-empty".into()));
        }
        for (i, row) in entries.iter().enumerate() {
            if row.len() != n {
                return Err(LabError::DimensionMismatch(format!(
                    "row {} has length {}, expected {n}",
                    i + 1,
                    row.len()
                )));
            }
            if row[i] != 0 {
                return Err(LabError::InvalidArgument(format!("diagonal entry {} is nonzero", i + 1)));
            }
            for (j, &v) in row.iter().enumerate() {
                if v != entries[j][i] {
                    return Err(LabError::InvalidArgument(format!(
                        "matrix is not symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        let rows = entries.iter().map(|r| BitString::from_bits(r)).collect::<Result<_>>()?;
        Ok(Self { rows })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(&vec![vec![0; n]; n])
    }

    /// `R`: the adjacency matrix of `n/2` disjoint edges `{k, k + n/2}`,
    /// i.e. the permutation exchanging the two halves of a string.
    pub fn swap_halves(n: usize) -> Result<Self> {
        if !n.is_multiple_of(2) {
            return Err(LabError::OddLength(n));
        }
        let half = n / 2;
        let entries: Vec<Vec<u8>> = (0..n).map(|i| (0..n).map(|j| u8::from(j == (i + half) % n)).collect()).collect();
        Self::new(&entries)
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// Entry at 1-based `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> Result<u8> {
        let row = self.rows.get(i.wrapping_sub(1)).ok_or(LabError::IndexOutOfRange { index: i, len: self.dim() })?;
        Ok(row.get(j)? as u8)
    }

    /// `A·x` over GF(2).
    pub fn apply(&self, x: &BitString) -> Result<BitString> {
        if x.len() != self.dim() {
            return Err(LabError::LengthMismatch { expected: self.dim(), found: x.len() });
        }
        let bits: Vec<u8> = self.rows.iter().map(|r| (r.dot(x).unwrap() & 1) as u8).collect();
        BitString::from_bits(&bits)
    }

    /// `s·A·s` over the integers.
    pub fn quadratic_form(&self, s: &BitString) -> Result<u32> {
        if s.len() != self.dim() {
            return Err(LabError::LengthMismatch { expected: self.dim(), found: s.len() });
        }
        Ok(self.rows.iter().enumerate().filter(|(i, _)| s.bit(i + 1)).map(|(_, r)| r.dot(s).unwrap()).sum())
    }
}

impl fmt::Debug for AdjacencyMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.rows.iter().map(|r| r.to_string())).finish()
    }
}

/// `P(s) = (s·A·s / 2) mod 2`.
pub fn phase_p(s: &BitString, adjacency: &AdjacencyMatrix) -> Result<u8> {
    let q = adjacency.quadratic_form(s)?;
    if q % 2 != 0 {
        return Err(LabError::Internal(format!("s·A·s = {q} is odd for s = {s}")));
    }
    Ok(((q / 2) % 2) as u8)
}

type PhaseEvaluator = Arc<dyn Fn(&BitString) -> u8 + Send + Sync>;

/// A phase function together with the adjacency matrix it is meant to
/// satisfy the pairing identity for.
#[derive(Clone)]
pub struct PhaseFunction {
    adjacency: AdjacencyMatrix,
    custom: Option<PhaseEvaluator>,
}

/// Outcome of an exhaustive identity check. `counterexample` holds the first
/// failing pair in enumeration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentityCheck {
    pub pairs_checked: u64,
    pub counterexample: Option<(BitString, BitString)>,
}

impl IdentityCheck {
    pub fn holds(&self) -> bool {
        self.counterexample.is_none()
    }
}

impl PhaseFunction {
    /// The standard quadratic phase of `adjacency`.
    pub fn quadratic(adjacency: AdjacencyMatrix) -> Self {
        Self { adjacency, custom: None }
    }

    /// An arbitrary evaluator, paired with `adjacency`. Used to inject
    /// deliberately inconsistent phases.
    pub fn custom<F>(adjacency: AdjacencyMatrix, f: F) -> Self
    where
        F: Fn(&BitString) -> u8 + Send + Sync + 'static,
    {
        Self { adjacency, custom: Some(Arc::new(f)) }
    }

    pub fn adjacency(&self) -> &AdjacencyMatrix {
        &self.adjacency
    }

    pub fn n(&self) -> usize {
        self.adjacency.dim()
    }

    pub fn evaluate(&self, s: &BitString) -> Result<u8> {
        match &self.custom {
            Some(f) => {
                if s.len() != self.n() {
                    return Err(LabError::LengthMismatch { expected: self.n(), found: s.len() });
                }
                Ok(f(s) & 1)
            }
            None => phase_p(s, &self.adjacency),
        }
    }

    /// Checks `P(s) + P(t) = P(s⊕t) + s·A(s⊕t) (mod 2)` for every pair.
    pub fn check_property(&self, threshold: usize) -> Result<IdentityCheck> {
        let n = self.n();
        guard_exhaustive(n, threshold)?;
        let phases: Vec<u8> = BitString::all(n)?.map(|s| self.evaluate(&s)).collect::<Result<_>>()?;
        let images: Vec<BitString> = BitString::all(n)?.map(|s| self.adjacency.apply(&s)).collect::<Result<_>>()?;
        let mut pairs = 0u64;
        for s in BitString::all(n)? {
            for t in BitString::all(n)? {
                pairs += 1;
                let st = s.xor(&t)?;
                let lhs = (phases[s.value() as usize] + phases[t.value() as usize]) % 2;
                let rhs = (phases[st.value() as usize] + s.dot_mod2(&images[st.value() as usize])?) % 2;
                if lhs != rhs {
                    return Ok(IdentityCheck { pairs_checked: pairs, counterexample: Some((s, t)) });
                }
            }
        }
        Ok(IdentityCheck { pairs_checked: pairs, counterexample: None })
    }

    /// Like [`check_property`](Self::check_property) but turns a failure into an error.
    pub fn ensure_consistent(&self, threshold: usize) -> Result<()> {
        let check = self.check_property(threshold)?;
        match check.counterexample {
            None => Ok(()),
            Some((s, t)) => Err(LabError::InconsistentPhase { s: s.to_string(), t: t.to_string() }),
        }
    }
}

impl fmt::Debug for PhaseFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhaseFunction")
            .field("adjacency", &self.adjacency)
            .field("custom", &self.custom.is_some())
            .finish()
    }
}

/// Exhaustive check of the pairing identity for the quadratic phase of `adjacency`.
pub fn check_p_property(adjacency: &AdjacencyMatrix, threshold: usize) -> Result<bool> {
    Ok(PhaseFunction::quadratic(adjacency.clone()).check_property(threshold)?.holds())
}
