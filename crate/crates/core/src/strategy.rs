//! Players' behaviour: a shared bipartite state plus, for each party, a
//! projective measurement per question. Per-symbol observables
//! `M'^q_k = Γ^q_{k,+1} − Γ^q_{k,−1}` are extracted once at construction.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::linalg::QR;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::graph::{AdjacencyMatrix, PhaseFunction};
use crate::linalg::{
    amplitude_matrix, bipartite_expectation, c, commutator_deviation, graph_state, hermitian_deviation, identity, kron,
    max_abs, unitary_deviation, CMatrix, CVector, Layout, Pauli, StateVector, STRUCTURE_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    Alice,
    Bob,
}

/// Single-sub-test measurement setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Symbol {
    X,
    Z,
    D,
    E,
}

impl Symbol {
    pub const ALL: [Symbol; 4] = [Symbol::X, Symbol::Z, Symbol::D, Symbol::E];

    pub fn pauli(self) -> Pauli {
        match self {
            Symbol::X => Pauli::X,
            Symbol::Z => Pauli::Z,
            Symbol::D => Pauli::D,
            Symbol::E => Pauli::E,
        }
    }

    fn from_char(ch: char) -> Result<Self> {
        match ch {
            'X' => Ok(Symbol::X),
            'Z' => Ok(Symbol::Z),
            'D' => Ok(Symbol::D),
            'E' => Ok(Symbol::E),
            _ => Err(LabError::Parse(format!("'{ch}' is not one of X, Z, D, E"))),
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Question label. The parallel Mayers-Yao test uses `X`, `Z`, `D`, `Xj(j)`
/// and `Zj(j)`; the strictly parallel test uses one symbol per sub-test.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QuestionKind {
    X,
    Z,
    D,
    Xj(usize),
    Zj(usize),
    Spp(Vec<Symbol>),
}

impl QuestionKind {
    pub fn spp(symbols: &[Symbol]) -> Self {
        QuestionKind::Spp(symbols.to_vec())
    }

    pub fn is_bit_family(&self) -> bool {
        matches!(self, QuestionKind::Xj(_) | QuestionKind::Zj(_))
    }
}

impl fmt::Display for QuestionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuestionKind::X => f.write_str("X"),
            QuestionKind::Z => f.write_str("Z"),
            QuestionKind::D => f.write_str("D"),
            QuestionKind::Xj(j) => write!(f, "X{j}"),
            QuestionKind::Zj(j) => write!(f, "Z{j}"),
            QuestionKind::Spp(s) => {
                f.write_str("spp:")?;
                s.iter().try_for_each(|x| write!(f, "{x}"))
            }
        }
    }
}

impl FromStr for QuestionKind {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(rest) = s.strip_prefix("spp:") {
            if rest.is_empty() {
                return Err(LabError::Parse("empty question string".into()));
            }
            return rest.chars().map(Symbol::from_char).collect::<Result<_>>().map(QuestionKind::Spp);
        }
        match s {
            "X" => return Ok(QuestionKind::X),
            "Z" => return Ok(QuestionKind::Z),
            "D" => return Ok(QuestionKind::D),
            _ => {}
        }
        let parse_j = |digits: &str| {
            digits
                .parse::<usize>()
                .ok()
                .filter(|j| *j >= 1)
                .ok_or_else(|| LabError::Parse(format!("bad question label '{s}'")))
        };
        if let Some(d) = s.strip_prefix('X') {
            return parse_j(d).map(QuestionKind::Xj);
        }
        if let Some(d) = s.strip_prefix('Z') {
            return parse_j(d).map(QuestionKind::Zj);
        }
        Err(LabError::Parse(format!("bad question label '{s}'")))
    }
}

impl Serialize for QuestionKind {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for QuestionKind {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(deserializer)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Question {
    pub party: Party,
    pub kind: QuestionKind,
}

/// Which of the two protocols a strategy answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestFlavor {
    My,
    Spp,
}

impl TestFlavor {
    /// The question whose per-symbol observables are `X'_k`.
    pub fn x_question(self, m: usize) -> QuestionKind {
        self.uniform_question(Symbol::X, m)
    }

    pub fn z_question(self, m: usize) -> QuestionKind {
        self.uniform_question(Symbol::Z, m)
    }

    /// The question asking `symbol` on every sub-test.
    pub fn uniform_question(self, symbol: Symbol, m: usize) -> QuestionKind {
        match (self, symbol) {
            (TestFlavor::My, Symbol::X) => QuestionKind::X,
            (TestFlavor::My, Symbol::Z) => QuestionKind::Z,
            (TestFlavor::My, Symbol::D) => QuestionKind::D,
            (TestFlavor::My, Symbol::E) => QuestionKind::Spp(vec![Symbol::E; m]),
            (TestFlavor::Spp, s) => QuestionKind::Spp(vec![s; m]),
        }
    }
}

impl fmt::Display for TestFlavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestFlavor::My => "my",
            TestFlavor::Spp => "spp",
        })
    }
}

impl FromStr for TestFlavor {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "my" => Ok(TestFlavor::My),
            "spp" => Ok(TestFlavor::Spp),
            _ => Err(LabError::Parse(format!("unknown test flavor '{s}'"))),
        }
    }
}

/// Number of bit-indexed question families `j = 1 … ⌈log₂ m⌉` needed so that
/// any two sub-test indices in `1..=m` differ in some bit.
pub fn bit_family_count(m: usize) -> usize {
    if m <= 1 {
        0
    } else {
        (usize::BITS - (m - 1).leading_zeros()) as usize
    }
}

/// Bit `j` of `k`, with `j = 1` the least significant bit.
pub fn bit_of(k: usize, j: usize) -> bool {
    (k >> (j - 1)) & 1 == 1
}

pub type Answer = Vec<i8>;

/// Answer-string-indexed projectors `Π^q_a` on one party's space.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    m: usize,
    projectors: Vec<(Answer, CMatrix)>,
}

impl Measurement {
    /// Checks shapes only; projectivity is reported by [`validate_strategy`].
    pub fn new(m: usize, projectors: Vec<(Answer, CMatrix)>) -> Result<Self> {
        if m == 0 || projectors.is_empty() {
            return Err(LabError::InvalidArgument("measurement needs m ≥ 1 and at least one outcome".into()));
        }
        let dim = projectors[0].1.nrows();
        for (a, p) in &projectors {
            if a.len() != m || a.iter().any(|x| *x != 1 && *x != -1) {
                return Err(LabError::InvalidArgument(format!("answer {a:?} is not a ±1 string of length {m}")));
            }
            if p.nrows() != dim || p.ncols() != dim {
                return Err(LabError::DimensionMismatch("projectors of one measurement differ in size".into()));
            }
        }
        let mut seen: Vec<&Answer> = projectors.iter().map(|(a, _)| a).collect();
        seen.sort();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(LabError::InvalidArgument("duplicate answer string".into()));
        }
        Ok(Self { m, projectors })
    }

    /// Measures qubit `k` in the eigenbasis of `bases[k]` for every `k`.
    pub fn product(bases: &[Pauli]) -> Result<Self> {
        let m = bases.len();
        let projectors = all_answers(m)
            .into_iter()
            .map(|a| {
                let p = bases.iter().zip(&a).fold(identity(1), |acc, (b, &x)| kron(&acc, &b.projector(x)));
                (a, p)
            })
            .collect();
        Self::new(m, projectors)
    }

    /// Always answers `answer`, on a space of dimension `dim`.
    pub fn deterministic(dim: usize, answer: Answer) -> Result<Self> {
        Self::new(answer.len(), vec![(answer, identity(dim))])
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.projectors[0].1.nrows()
    }

    pub fn projectors(&self) -> &[(Answer, CMatrix)] {
        &self.projectors
    }

    /// `Γ_{k,x} = Σ_{a : a_k = x} Π_a`.
    pub fn symbol_projector(&self, k: usize, x: i8) -> Result<CMatrix> {
        if k == 0 || k > self.m {
            return Err(LabError::IndexOutOfRange { index: k, len: self.m });
        }
        if x != 1 && x != -1 {
            return Err(LabError::InvalidArgument(format!("symbol value {x} is not ±1")));
        }
        let mut out = CMatrix::zeros(self.dim(), self.dim());
        for (a, p) in &self.projectors {
            if a[k - 1] == x {
                out += p;
            }
        }
        Ok(out)
    }

    /// `M'_k = Γ_{k,+1} − Γ_{k,−1}`.
    pub fn observable_for_symbol(&self, k: usize) -> Result<CMatrix> {
        Ok(self.symbol_projector(k, 1)? - self.symbol_projector(k, -1)?)
    }

    /// `U Π_a U†` for every outcome.
    pub fn conjugate(&self, u: &CMatrix) -> Result<Self> {
        if u.nrows() != self.dim() {
            return Err(LabError::DimensionMismatch("conjugating unitary has wrong size".into()));
        }
        let ud = u.adjoint();
        let projectors = self.projectors.iter().map(|(a, p)| (a.clone(), u * p * &ud)).collect();
        Self::new(self.m, projectors)
    }
}

/// All `2^m` answer strings, `+1` before `−1` in each position.
pub fn all_answers(m: usize) -> Vec<Answer> {
    (0..1usize << m).map(|idx| (0..m).map(|k| if (idx >> (m - 1 - k)) & 1 == 0 { 1 } else { -1 }).collect()).collect()
}

/// A random projective measurement with `2^m` outcomes on dimension `dim`:
/// the columns of a random unitary are dealt round-robin to the outcomes.
pub fn random_projective_measurement(dim: usize, m: usize, rng: &mut impl Rng) -> Result<Measurement> {
    let g = CMatrix::from_fn(dim, dim, |_, _| {
        num_complex::Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let q = QR::new(g).q();
    let answers = all_answers(m);
    let mut projectors: Vec<(Answer, CMatrix)> = answers.into_iter().map(|a| (a, CMatrix::zeros(dim, dim))).collect();
    let count = projectors.len();
    let offset = rng.random_range(0..count);
    for col in 0..dim {
        let v = q.column(col);
        projectors[(col + offset) % count].1 += v * v.adjoint();
    }
    Measurement::new(m, projectors)
}

#[derive(Debug, Clone)]
struct MeasurementEntry {
    measurement: Measurement,
    observables: Vec<CMatrix>,
}

impl MeasurementEntry {
    fn new(measurement: Measurement) -> Result<Self> {
        let observables = (1..=measurement.m()).map(|k| measurement.observable_for_symbol(k)).collect::<Result<_>>()?;
        Ok(Self { measurement, observables })
    }
}

/// Bipartite state plus per-party question → measurement maps.
#[derive(Debug, Clone)]
pub struct Strategy {
    dims: (usize, usize),
    state: StateVector,
    m: usize,
    alice: BTreeMap<QuestionKind, MeasurementEntry>,
    bob: BTreeMap<QuestionKind, MeasurementEntry>,
}

impl Strategy {
    pub fn new(
        dims: (usize, usize),
        amplitudes: CVector,
        m: usize,
        alice: BTreeMap<QuestionKind, Measurement>,
        bob: BTreeMap<QuestionKind, Measurement>,
    ) -> Result<Self> {
        if m == 0 {
            return Err(LabError::InvalidArgument("m must be at least 1".into()));
        }
        let state = StateVector::new(amplitudes, Layout::bipartite(dims.0, dims.1)?)?;
        let build = |map: BTreeMap<QuestionKind, Measurement>, dim: usize, who: &str| {
            map.into_iter()
                .map(|(q, meas)| {
                    if meas.dim() != dim {
                        return Err(LabError::DimensionMismatch(format!(
                            "{who}'s measurement for {q} acts on dimension {}, expected {dim}",
                            meas.dim()
                        )));
                    }
                    if meas.m() != m {
                        return Err(LabError::InvalidArgument(format!(
                            "{who}'s measurement for {q} has {} symbols, expected {m}",
                            meas.m()
                        )));
                    }
                    if let QuestionKind::Spp(s) = &q {
                        if s.len() != m {
                            return Err(LabError::InvalidArgument(format!("question {q} must have {m} symbols")));
                        }
                    }
                    Ok((q, MeasurementEntry::new(meas)?))
                })
                .collect::<Result<BTreeMap<_, _>>>()
        };
        let alice = build(alice, dims.0, "Alice")?;
        let bob = build(bob, dims.1, "Bob")?;
        Ok(Self { dims, state, m, alice, bob })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Total number of sub-test observables `n = 2m`.
    pub fn n(&self) -> usize {
        2 * self.m
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    fn side(&self, party: Party) -> &BTreeMap<QuestionKind, MeasurementEntry> {
        match party {
            Party::Alice => &self.alice,
            Party::Bob => &self.bob,
        }
    }

    pub fn questions(&self, party: Party) -> impl Iterator<Item = &QuestionKind> {
        self.side(party).keys()
    }

    pub fn has_question(&self, party: Party, kind: &QuestionKind) -> bool {
        self.side(party).contains_key(kind)
    }

    pub fn measurement(&self, party: Party, kind: &QuestionKind) -> Result<&Measurement> {
        self.entry(party, kind).map(|e| &e.measurement)
    }

    fn entry(&self, party: Party, kind: &QuestionKind) -> Result<&MeasurementEntry> {
        self.side(party).get(kind).ok_or_else(|| LabError::UnknownQuestion(format!("{party:?} has no question {kind}")))
    }

    /// `M'^q_k` on the party's own factor, `1 ≤ k ≤ m`.
    pub fn observable(&self, party: Party, kind: &QuestionKind, k: usize) -> Result<&CMatrix> {
        let entry = self.entry(party, kind)?;
        entry.observables.get(k.wrapping_sub(1)).ok_or(LabError::IndexOutOfRange { index: k, len: self.m })
    }

    /// `⟨ψ'| M'^{qa}_{ka} ⊗ M'^{qb}_{kb} |ψ'⟩`.
    pub fn correlation(&self, qa: &QuestionKind, ka: usize, qb: &QuestionKind, kb: usize) -> Result<f64> {
        let a = self.observable(Party::Alice, qa, ka)?;
        let b = self.observable(Party::Bob, qb, kb)?;
        bipartite_expectation(self.state.amplitudes(), a, b)
    }

    /// Embeds a party-local operator into the full system `H_A ⊗ H_B`.
    pub fn lift(&self, party: Party, op: &CMatrix) -> CMatrix {
        match party {
            Party::Alice => kron(op, &identity(self.dims.1)),
            Party::Bob => kron(&identity(self.dims.0), op),
        }
    }

    /// The global family `O'_1 … O'_n`: Alice's sub-tests `1…m` then Bob's,
    /// each taken from the question asking `symbol` everywhere.
    pub fn global_observables(&self, flavor: TestFlavor, symbol: Symbol) -> Result<Vec<CMatrix>> {
        let q = flavor.uniform_question(symbol, self.m);
        let mut out = Vec::with_capacity(self.n());
        for party in [Party::Alice, Party::Bob] {
            for k in 1..=self.m {
                out.push(self.lift(party, self.observable(party, &q, k)?));
            }
        }
        Ok(out)
    }

    /// Returns a copy with every projector of `party` conjugated by `u`.
    pub fn conjugate_party(&self, party: Party, u: &CMatrix) -> Result<Self> {
        let remap = |map: &BTreeMap<QuestionKind, MeasurementEntry>| {
            map.iter().map(|(q, e)| Ok((q.clone(), e.measurement.conjugate(u)?))).collect::<Result<BTreeMap<_, _>>>()
        };
        let (alice, bob) = match party {
            Party::Alice => (remap(&self.alice)?, self.plain(Party::Bob)),
            Party::Bob => (self.plain(Party::Alice), remap(&self.bob)?),
        };
        Self::new(self.dims, self.state.amplitudes().clone(), self.m, alice, bob)
    }

    /// Returns a copy with a different shared state.
    pub fn with_state(&self, amplitudes: CVector) -> Result<Self> {
        Self::new(self.dims, amplitudes, self.m, self.plain(Party::Alice), self.plain(Party::Bob))
    }

    fn plain(&self, party: Party) -> BTreeMap<QuestionKind, Measurement> {
        self.side(party).iter().map(|(q, e)| (q.clone(), e.measurement.clone())).collect()
    }

    /// Joint Born-rule distribution of `(a, b)` for the given questions,
    /// as `(alice answer, bob answer, probability)` with zero rows dropped.
    pub fn joint_distribution(&self, qa: &QuestionKind, qb: &QuestionKind) -> Result<Vec<(Answer, Answer, f64)>> {
        let ma = self.measurement(Party::Alice, qa)?;
        let mb = self.measurement(Party::Bob, qb)?;
        let psi = amplitude_matrix(self.state.amplitudes(), self.dims.0, self.dims.1)?;
        let mut out = Vec::new();
        for (a, pa) in ma.projectors() {
            let left = pa * &psi;
            for (b, pb) in mb.projectors() {
                let prob = (&left * pb.transpose()).norm_squared();
                if prob > 0.0 {
                    out.push((a.clone(), b.clone(), prob));
                }
            }
        }
        Ok(out)
    }
}

/// Error parameters feeding the bound formulas.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EpsilonBundle {
    #[serde(default)]
    pub eps: f64,
    #[serde(default)]
    pub eps1: f64,
    #[serde(default)]
    pub eps2: f64,
    #[serde(default)]
    pub eps3: f64,
    #[serde(default)]
    pub eps4: f64,
    #[serde(default)]
    pub delta: f64,
}

impl EpsilonBundle {
    /// A bundle with only `ε₁, ε₂, ε₃` set.
    pub fn lemma(eps1: f64, eps2: f64, eps3: f64) -> Result<Self> {
        Self { eps1, eps2, eps3, ..Default::default() }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        let all = [self.eps, self.eps1, self.eps2, self.eps3, self.eps4, self.delta];
        if all.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(LabError::InvalidArgument(format!("error parameters must be finite and ≥ 0: {self:?}")));
        }
        Ok(self)
    }

    pub fn is_zero(&self) -> bool {
        [self.eps, self.eps1, self.eps2, self.eps3, self.eps4, self.delta].iter().all(|x| *x == 0.0)
    }
}

fn honest_state(m: usize) -> Result<CVector> {
    let r = AdjacencyMatrix::swap_halves(2 * m)?;
    Ok(graph_state(&PhaseFunction::quadratic(r))?.amplitudes().clone())
}

/// Bases used by the honest players for each sub-test of a MY question.
pub fn honest_my_bases(kind: &QuestionKind, m: usize) -> Result<Vec<Pauli>> {
    let bases = match kind {
        QuestionKind::X => vec![Pauli::X; m],
        QuestionKind::Z => vec![Pauli::Z; m],
        QuestionKind::D => vec![Pauli::D; m],
        QuestionKind::Xj(j) => (1..=m).map(|k| if bit_of(k, *j) { Pauli::X } else { Pauli::Z }).collect(),
        QuestionKind::Zj(j) => (1..=m).map(|k| if !bit_of(k, *j) { Pauli::Z } else { Pauli::X }).collect(),
        QuestionKind::Spp(_) => {
            return Err(LabError::UnknownQuestion(format!("{kind} is not a parallel Mayers-Yao question")))
        }
    };
    Ok(bases)
}

/// Question labels of the parallel Mayers-Yao test. The bit families run over
/// `j = 1 … max(1, ⌈log₂ m⌉)`.
pub fn my_questions(m: usize) -> Vec<QuestionKind> {
    let mut qs = vec![QuestionKind::X, QuestionKind::Z, QuestionKind::D];
    for j in 1..=bit_family_count(m).max(1) {
        qs.push(QuestionKind::Xj(j));
        qs.push(QuestionKind::Zj(j));
    }
    qs
}

/// All `4^m` question strings of the strictly parallel test, in lexicographic
/// order over `X < Z < D < E`.
pub fn spp_questions(m: usize) -> Vec<QuestionKind> {
    let mut out = vec![Vec::new()];
    for _ in 0..m {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<Symbol>| {
                Symbol::ALL.into_iter().map(move |s| {
                    let mut p = prefix.clone();
                    p.push(s);
                    p
                })
            })
            .collect();
    }
    out.into_iter().map(QuestionKind::Spp).collect()
}

/// Honest players of the parallel Mayers-Yao test on `m` e-bits.
pub fn honest_my_strategy(m: usize) -> Result<Strategy> {
    if m == 0 {
        return Err(LabError::InvalidArgument("m must be at least 1".into()));
    }
    let mut side = BTreeMap::new();
    for q in my_questions(m) {
        let meas = Measurement::product(&honest_my_bases(&q, m)?)?;
        side.insert(q, meas);
    }
    let d = 1usize << m;
    Strategy::new((d, d), honest_state(m)?, m, side.clone(), side)
}

/// Honest players of the strictly parallel test on `m` e-bits.
pub fn honest_spp_strategy(m: usize) -> Result<Strategy> {
    if m == 0 {
        return Err(LabError::InvalidArgument("m must be at least 1".into()));
    }
    let mut side = BTreeMap::new();
    for q in spp_questions(m) {
        let QuestionKind::Spp(symbols) = &q else { unreachable!() };
        let bases: Vec<Pauli> = symbols.iter().map(|s| s.pauli()).collect();
        let meas = Measurement::product(&bases)?;
        side.insert(q, meas);
    }
    let d = 1usize << m;
    Strategy::new((d, d), honest_state(m)?, m, side.clone(), side)
}

/// A classical strategy on one-dimensional spaces: every question of `flavor`
/// is answered by the fixed string `answer(party, question)`.
pub fn deterministic_strategy<F>(flavor: TestFlavor, m: usize, answer: F) -> Result<Strategy>
where
    F: Fn(Party, &QuestionKind) -> Answer,
{
    let questions = match flavor {
        TestFlavor::My => my_questions(m),
        TestFlavor::Spp => spp_questions(m),
    };
    let side = |party| -> Result<BTreeMap<QuestionKind, Measurement>> {
        questions.iter().map(|q| Ok((q.clone(), Measurement::deterministic(1, answer(party, q))?))).collect()
    };
    Strategy::new((1, 1), CVector::from_element(1, c(1.0)), m, side(Party::Alice)?, side(Party::Bob)?)
}

/// Noise applied by [`perturb_strategy`]: per-qubit measurement rotations
/// `e^{−iθY}` for each party and a seeded state admixture of weight `w`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "NoiseDoc")]
pub struct NoiseSpec {
    pub theta_alice: f64,
    pub theta_bob: f64,
    pub w: f64,
    pub seed: u64,
}

/// Accepts `theta` as shorthand for both parties; party-specific fields win.
#[derive(Deserialize)]
struct NoiseDoc {
    theta: Option<f64>,
    theta_alice: Option<f64>,
    theta_bob: Option<f64>,
    #[serde(default)]
    w: f64,
    #[serde(default)]
    seed: u64,
}

impl From<NoiseDoc> for NoiseSpec {
    fn from(d: NoiseDoc) -> Self {
        let both = d.theta.unwrap_or(0.0);
        NoiseSpec {
            theta_alice: d.theta_alice.unwrap_or(both),
            theta_bob: d.theta_bob.unwrap_or(both),
            w: d.w,
            seed: d.seed,
        }
    }
}

impl NoiseSpec {
    pub fn alice_rotation(theta: f64) -> Self {
        Self { theta_alice: theta, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let angle_ok = |t: f64| t.is_finite() && t.abs() <= std::f64::consts::PI;
        if !angle_ok(self.theta_alice) || !angle_ok(self.theta_bob) {
            return Err(LabError::InvalidArgument("rotation angles must lie in [−π, π]".into()));
        }
        if !(self.w.is_finite() && (0.0..=1.0).contains(&self.w)) {
            return Err(LabError::InvalidArgument("state admixture weight must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Draws `θ_A, θ_B ∈ [0, θ_max]` and `w ∈ [0, w_max]` from `seed`.
    pub fn random(theta_max: f64, w_max: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            theta_alice: rng.random::<f64>() * theta_max,
            theta_bob: rng.random::<f64>() * theta_max,
            w: rng.random::<f64>() * w_max,
            seed,
        }
    }
}

/// `⊗_{qubits} e^{−iθY}` on a space of dimension `dim = 2^q`.
pub fn local_rotation(theta: f64, dim: usize) -> Result<CMatrix> {
    if !dim.is_power_of_two() {
        return Err(LabError::InvalidArgument(format!("rotation noise needs a qubit register, found dimension {dim}")));
    }
    let (s, co) = theta.sin_cos();
    let single = CMatrix::from_row_slice(2, 2, &[c(co), c(-s), c(s), c(co)]);
    let qubits = dim.trailing_zeros();
    Ok((0..qubits).fold(identity(1), |acc, _| kron(&acc, &single)))
}

pub fn perturb_strategy(strategy: &Strategy, noise: &NoiseSpec) -> Result<Strategy> {
    noise.validate()?;
    let mut out = strategy.clone();
    if noise.theta_alice != 0.0 {
        out = out.conjugate_party(Party::Alice, &local_rotation(noise.theta_alice, out.dims.0)?)?;
    }
    if noise.theta_bob != 0.0 {
        out = out.conjugate_party(Party::Bob, &local_rotation(noise.theta_bob, out.dims.1)?)?;
    }
    if noise.w > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        let dim = out.state.dim();
        let r = CVector::from_fn(dim, |_, _| {
            num_complex::Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let r = &r / c(r.norm());
        let mixed = out.state.amplitudes() * c(1.0 - noise.w) + r * c(noise.w);
        out = out.with_state(mixed)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub max_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Checks projectivity of every measurement and the algebraic facts the
/// observable construction should guarantee.
pub fn validate_strategy(s: &Strategy) -> ValidationReport {
    let mut completeness = 0.0f64;
    let mut orthogonality = 0.0f64;
    let mut hermitian = 0.0f64;
    let mut unitary = 0.0f64;
    let mut same_question = 0.0f64;
    for party in [Party::Alice, Party::Bob] {
        for entry in s.side(party).values() {
            let meas = &entry.measurement;
            let dim = meas.dim();
            let total = meas.projectors().iter().fold(CMatrix::zeros(dim, dim), |acc, (_, p)| acc + p);
            completeness = completeness.max(max_abs(&(total - identity(dim))));
            for (i, (_, p)) in meas.projectors().iter().enumerate() {
                for (j, (_, q)) in meas.projectors().iter().enumerate() {
                    let expected = if i == j { p.clone() } else { CMatrix::zeros(dim, dim) };
                    orthogonality = orthogonality.max(max_abs(&(p * q - expected)));
                }
            }
            for (k, o) in entry.observables.iter().enumerate() {
                hermitian = hermitian.max(hermitian_deviation(o));
                unitary = unitary.max(unitary_deviation(o));
                for o2 in &entry.observables[k + 1..] {
                    same_question = same_question.max(commutator_deviation(o, o2));
                }
            }
        }
    }
    let mut cross_party = 0.0f64;
    if s.m <= 3 {
        let lifted = |party| -> Vec<CMatrix> {
            s.side(party).values().flat_map(|e| e.observables.iter().map(move |o| s.lift(party, o))).take(8).collect()
        };
        let (a, b) = (lifted(Party::Alice), lifted(Party::Bob));
        for x in &a {
            for y in &b {
                cross_party = cross_party.max(commutator_deviation(x, y));
            }
        }
    }
    let norm = (s.state.norm() - 1.0).abs();
    let mk = |name: &str, dev: f64, tol: f64| CheckResult { name: name.into(), passed: dev <= tol, max_deviation: dev };
    ValidationReport {
        checks: vec![
            mk("completeness", completeness, STRUCTURE_TOL),
            mk("orthogonality", orthogonality, STRUCTURE_TOL),
            mk("observable_hermitian", hermitian, STRUCTURE_TOL),
            mk("observable_unitary", unitary, STRUCTURE_TOL),
            mk("same_question_commutation", same_question, STRUCTURE_TOL),
            mk("cross_party_commutation", cross_party, STRUCTURE_TOL),
            mk("state_normalized", norm, crate::linalg::NORM_TOL),
        ],
    }
}

// ---------------------------------------------------------------------------
// JSON documents

/// Either a named honest strategy (optionally perturbed) or an explicit one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StrategySource {
    Named(NamedStrategy),
    Explicit(StrategyDocument),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NamedKind {
    #[serde(rename = "honest-my")]
    HonestMy,
    #[serde(rename = "honest-spp")]
    HonestSpp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedStrategy {
    #[serde(rename = "type")]
    pub kind: NamedKind,
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyDocument {
    pub dims: [usize; 2],
    /// Interleaved `re, im` amplitudes.
    pub state: Vec<f64>,
    pub questions: Vec<QuestionDocument>,
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionDocument {
    pub party: Party,
    pub kind: QuestionKind,
    pub projectors: Vec<ProjectorDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectorDocument {
    pub answer: Answer,
    /// Row-major interleaved `re, im` entries.
    pub matrix: Vec<f64>,
}

fn interleave<'a>(values: impl Iterator<Item = &'a num_complex::Complex64>) -> Vec<f64> {
    values.flat_map(|z| [z.re, z.im]).collect()
}

fn deinterleave(values: &[f64]) -> Result<Vec<num_complex::Complex64>> {
    if !values.len().is_multiple_of(2) {
        return Err(LabError::Parse("interleaved complex list has odd length".into()));
    }
    Ok(values.chunks(2).map(|p| num_complex::Complex64::new(p[0], p[1])).collect())
}

impl StrategySource {
    pub fn build(&self) -> Result<Strategy> {
        match self {
            StrategySource::Named(n) => {
                let base = match n.kind {
                    NamedKind::HonestMy => honest_my_strategy(n.m)?,
                    NamedKind::HonestSpp => honest_spp_strategy(n.m)?,
                };
                match &n.noise {
                    Some(noise) => perturb_strategy(&base, noise),
                    None => Ok(base),
                }
            }
            StrategySource::Explicit(doc) => doc.build(),
        }
    }
}

impl StrategyDocument {
    pub fn build(&self) -> Result<Strategy> {
        let amps = CVector::from_vec(deinterleave(&self.state)?);
        let mut alice = BTreeMap::new();
        let mut bob = BTreeMap::new();
        for q in &self.questions {
            let dim = match q.party {
                Party::Alice => self.dims[0],
                Party::Bob => self.dims[1],
            };
            let projectors = q
                .projectors
                .iter()
                .map(|p| {
                    let entries = deinterleave(&p.matrix)?;
                    if entries.len() != dim * dim {
                        return Err(LabError::DimensionMismatch(format!(
                            "projector for {} has {} entries, expected {}",
                            q.kind,
                            entries.len(),
                            dim * dim
                        )));
                    }
                    Ok((p.answer.clone(), CMatrix::from_row_slice(dim, dim, &entries)))
                })
                .collect::<Result<Vec<_>>>()?;
            let target = match q.party {
                Party::Alice => &mut alice,
                Party::Bob => &mut bob,
            };
            if target.insert(q.kind.clone(), Measurement::new(self.m, projectors)?).is_some() {
                return Err(LabError::Parse(format!("question {} listed twice", q.kind)));
            }
        }
        Strategy::new((self.dims[0], self.dims[1]), amps, self.m, alice, bob)
    }

    pub fn from_strategy(s: &Strategy) -> Self {
        let mut questions = Vec::new();
        for party in [Party::Alice, Party::Bob] {
            for (kind, entry) in s.side(party) {
                let projectors = entry
                    .measurement
                    .projectors()
                    .iter()
                    .map(|(a, p)| ProjectorDocument { answer: a.clone(), matrix: interleave(p.transpose().iter()) })
                    .collect();
                questions.push(QuestionDocument { party, kind: kind.clone(), projectors });
            }
        }
        StrategyDocument {
            dims: [s.dims.0, s.dims.1],
            state: interleave(s.state.amplitudes().iter()),
            questions,
            m: s.m,
        }
    }
}
