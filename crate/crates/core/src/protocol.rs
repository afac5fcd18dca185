//! Referee side of both tests: pairing rules, correlation deviations, and
//! the non-local game.

use std::collections::HashMap;
use std::f64::consts::SQRT_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::lemmas::Rational;
use crate::strategy::{bit_family_count, honest_my_strategy, Answer, QuestionKind, Strategy, Symbol, TestFlavor};

/// Cirel'son value of the two CHSH expressions.
pub const CHSH_MAX: f64 = 2.0 * SQRT_2;

/// Optimal quantum expectation of the game, `(2√2 + 1)/5`.
pub fn game_optimum() -> f64 {
    (2.0 * SQRT_2 + 1.0) / 5.0
}

/// Largest `m` for which the `10^m` question strings are enumerated.
pub const GAME_EXACT_MAX_M: usize = 4;

/// The ten per-sub-test question pairs of the game.
pub const GAME_PAIRS: [(Symbol, Symbol); 10] = [
    (Symbol::X, Symbol::Z),
    (Symbol::X, Symbol::D),
    (Symbol::X, Symbol::E),
    (Symbol::Z, Symbol::X),
    (Symbol::Z, Symbol::D),
    (Symbol::Z, Symbol::E),
    (Symbol::D, Symbol::X),
    (Symbol::D, Symbol::Z),
    (Symbol::E, Symbol::X),
    (Symbol::E, Symbol::Z),
];

/// Question pairs a referee may send in one protocol run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestSpec {
    pub flavor: TestFlavor,
    pub m: usize,
}

impl TestSpec {
    pub fn new(flavor: TestFlavor, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(LabError::InvalidArgument("m must be at least 1".into()));
        }
        Ok(Self { flavor, m })
    }

    /// Whether the referee may pair `qa` with `qb`.
    pub fn is_allowed(&self, qa: &QuestionKind, qb: &QuestionKind) -> bool {
        match self.flavor {
            TestFlavor::My => my_pair_allowed(qa, qb),
            TestFlavor::Spp => match (qa, qb) {
                (QuestionKind::Spp(a), QuestionKind::Spp(b)) => {
                    a.len() == self.m
                        && b.len() == self.m
                        && a.iter().zip(b).all(|(x, y)| GAME_PAIRS.contains(&(*x, *y)))
                }
                _ => false,
            },
        }
    }

    /// Explicit allowed pair list for the MY test.
    pub fn my_allowed_pairs(&self) -> Vec<(QuestionKind, QuestionKind)> {
        let qs = crate::strategy::my_questions(self.m);
        let mut out = Vec::new();
        for a in &qs {
            for b in &qs {
                if my_pair_allowed(a, b) {
                    out.push((a.clone(), b.clone()));
                }
            }
        }
        out
    }
}

fn my_pair_allowed(qa: &QuestionKind, qb: &QuestionKind) -> bool {
    let is_my = |q: &QuestionKind| !matches!(q, QuestionKind::Spp(_));
    is_my(qa)
        && is_my(qb)
        && !(qa == &QuestionKind::D && qb == &QuestionKind::D)
        && !(qa.is_bit_family() && qb.is_bit_family())
}

/// Every `(Alice question, Bob question, sub-test)` whose deviation enters
/// the MY hypothesis: all pairs over `{X, Z, X_j, Z_j}` other than bit family
/// against bit family, plus `D` against `X` or `Z` in both directions.
pub fn my_required_correlations(m: usize) -> Result<Vec<(QuestionKind, QuestionKind, usize)>> {
    if m == 0 {
        return Err(LabError::InvalidArgument("m must be at least 1".into()));
    }
    let mut base = vec![QuestionKind::X, QuestionKind::Z];
    for j in 1..=bit_family_count(m) {
        base.push(QuestionKind::Xj(j));
        base.push(QuestionKind::Zj(j));
    }
    let mut pairs = Vec::new();
    for a in &base {
        for b in &base {
            if !(a.is_bit_family() && b.is_bit_family()) {
                pairs.push((a.clone(), b.clone()));
            }
        }
    }
    for q in [QuestionKind::X, QuestionKind::Z] {
        pairs.push((q.clone(), QuestionKind::D));
        pairs.push((QuestionKind::D, q));
    }
    Ok((1..=m).flat_map(|k| pairs.iter().map(move |(a, b)| (a.clone(), b.clone(), k))).collect())
}

/// `⟨ψ'| M'^q_k ⊗ M'^r_{k+m} |ψ'⟩`. Pairs the MY referee never asks are refused.
pub fn correlation_exact(s: &Strategy, q: &QuestionKind, r: &QuestionKind, k: usize) -> Result<f64> {
    let is_my = |x: &QuestionKind| !matches!(x, QuestionKind::Spp(_));
    if is_my(q) && is_my(r) && !my_pair_allowed(q, r) {
        return Err(LabError::ExcludedPair(format!("({q}, {r})")));
    }
    if k == 0 || k > s.m() {
        return Err(LabError::IndexOutOfRange { index: k, len: s.m() });
    }
    s.correlation(q, k, r, k)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationEntry {
    /// `corr` for a single correlation, `chsh-ab` / `chsh-ba` for the two
    /// CHSH expressions.
    pub kind: String,
    pub alice: String,
    pub bob: String,
    pub k: usize,
    pub measured: f64,
    pub ideal: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub test: TestFlavor,
    pub m: usize,
    pub eps: f64,
    /// Index into `entries` of the largest deviation.
    pub argmax: Option<usize>,
    pub entries: Vec<CorrelationEntry>,
}

impl CorrelationReport {
    fn from_entries(test: TestFlavor, m: usize, entries: Vec<CorrelationEntry>) -> Self {
        let mut eps = 0.0;
        let mut argmax = None;
        for (i, e) in entries.iter().enumerate() {
            if argmax.is_none() || e.deviation > eps {
                eps = e.deviation;
                argmax = Some(i);
            }
        }
        Self { test, m, eps, argmax, entries }
    }

    pub fn worst(&self) -> Option<&CorrelationEntry> {
        self.argmax.map(|i| &self.entries[i])
    }
}

/// Deviations of the required MY correlations from the honest values.
pub fn epsilon_my(s: &Strategy) -> Result<CorrelationReport> {
    let m = s.m();
    let ideal = honest_my_strategy(m)?;
    let triples = my_required_correlations(m)?;
    let entries = triples
        .par_iter()
        .map(|(q, r, k)| {
            let measured = correlation_exact(s, q, r, *k)?;
            let target = correlation_exact(&ideal, q, r, *k)?;
            Ok(CorrelationEntry {
                kind: "corr".into(),
                alice: q.to_string(),
                bob: r.to_string(),
                k: *k,
                measured,
                ideal: target,
                deviation: (measured - target).abs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CorrelationReport::from_entries(TestFlavor::My, m, entries))
}

/// CHSH deficits in both directions plus the matching-correlation deficits
/// `1 − T` for Alice and Bob asked complementary `X`/`Z` on sub-test `k`.
pub fn epsilon_spp(s: &Strategy) -> Result<CorrelationReport> {
    let m = s.m();
    let uq = |sym| TestFlavor::Spp.uniform_question(sym, m);
    let (qx, qz, qd, qe) = (uq(Symbol::X), uq(Symbol::Z), uq(Symbol::D), uq(Symbol::E));
    let mut entries = Vec::new();
    for k in 1..=m {
        let chsh = |ab: bool| -> Result<f64> {
            let corr = |x: &QuestionKind, y: &QuestionKind| {
                if ab {
                    s.correlation(x, k, y, k)
                } else {
                    s.correlation(y, k, x, k)
                }
            };
            Ok(corr(&qx, &qd)? - corr(&qx, &qe)? + corr(&qz, &qd)? + corr(&qz, &qe)?)
        };
        for (ab, kind, alice, bob) in [(true, "chsh-ab", "X|Z", "D|E"), (false, "chsh-ba", "D|E", "X|Z")] {
            let value = chsh(ab)?;
            entries.push(CorrelationEntry {
                kind: kind.into(),
                alice: alice.into(),
                bob: bob.into(),
                k,
                measured: value,
                ideal: CHSH_MAX,
                deviation: (CHSH_MAX - value).max(0.0),
            });
        }
    }
    let xz = xz_strings(m);
    let mut matches = Vec::new();
    for q in &xz {
        for r in &xz {
            for k in 1..=m {
                if q[k - 1] != r[k - 1] {
                    matches.push((QuestionKind::Spp(q.clone()), QuestionKind::Spp(r.clone()), k));
                }
            }
        }
    }
    let match_entries = matches
        .par_iter()
        .map(|(q, r, k)| {
            let t = s.correlation(q, *k, r, *k)?;
            Ok(CorrelationEntry {
                kind: "corr".into(),
                alice: q.to_string(),
                bob: r.to_string(),
                k: *k,
                measured: t,
                ideal: 1.0,
                deviation: (1.0 - t).max(0.0),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    entries.extend(match_entries);
    Ok(CorrelationReport::from_entries(TestFlavor::Spp, m, entries))
}

fn xz_strings(m: usize) -> Vec<Vec<Symbol>> {
    (0..1usize << m)
        .map(|idx| (0..m).map(|k| if (idx >> (m - 1 - k)) & 1 == 0 { Symbol::X } else { Symbol::Z }).collect())
        .collect()
}

/// `f(qa, qb)`: `−1` for the anti-correlated pairs `(X, E)` and `(E, X)`.
pub fn win_sign(qa: Symbol, qb: Symbol) -> Result<i8> {
    if !GAME_PAIRS.contains(&(qa, qb)) {
        return Err(LabError::ExcludedPair(format!("({qa}, {qb})")));
    }
    Ok(match (qa, qb) {
        (Symbol::X, Symbol::E) | (Symbol::E, Symbol::X) => -1,
        _ => 1,
    })
}

/// Whether one sub-test round is won.
pub fn win_predicate(qa: Symbol, qb: Symbol, a: i8, b: i8) -> Result<bool> {
    if !matches!(a, 1 | -1) || !matches!(b, 1 | -1) {
        return Err(LabError::InvalidArgument("answers must be ±1".into()));
    }
    Ok(a * b == win_sign(qa, qb)?)
}

/// Per-sub-test question pairs for question-string index `idx < 10^m`,
/// sub-test 1 most significant.
pub fn question_string(idx: usize, m: usize) -> Vec<(Symbol, Symbol)> {
    let mut out = vec![GAME_PAIRS[0]; m];
    let mut rest = idx;
    for slot in out.iter_mut().rev() {
        *slot = GAME_PAIRS[rest % 10];
        rest /= 10;
    }
    out
}

fn split_questions(pairs: &[(Symbol, Symbol)]) -> (QuestionKind, QuestionKind) {
    (QuestionKind::Spp(pairs.iter().map(|p| p.0).collect()), QuestionKind::Spp(pairs.iter().map(|p| p.1).collect()))
}

fn guard_game(m: usize) -> Result<usize> {
    if m > GAME_EXACT_MAX_M {
        return Err(LabError::ThresholdExceeded { n: m, threshold: GAME_EXACT_MAX_M });
    }
    Ok(10usize.pow(m as u32))
}

/// Exact `E(A) = (1/(10^m m)) Σ_{q,k} f(q,k) ⟨M'^q_k M'^q_{k+m}⟩`.
pub fn game_expectation_exact(s: &Strategy) -> Result<f64> {
    let m = s.m();
    let count = guard_game(m)?;
    let total: f64 = (0..count)
        .into_par_iter()
        .map(|idx| {
            let pairs = question_string(idx, m);
            let (qa, qb) = split_questions(&pairs);
            let mut acc = 0.0;
            for (k, (a, b)) in pairs.iter().enumerate() {
                acc += f64::from(win_sign(*a, *b)?) * s.correlation(&qa, k + 1, &qb, k + 1)?;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum();
    Ok(total / (count * m) as f64)
}

fn accept_values(pairs: &[(Symbol, Symbol)], a: &Answer, b: &Answer) -> Result<Vec<i8>> {
    pairs
        .iter()
        .zip(a.iter().zip(b))
        .map(|((qa, qb), (x, y))| Ok(if win_predicate(*qa, *qb, *x, *y)? { 1 } else { -1 }))
        .collect()
}

/// Expectation of the threshold referee averaged over `a ∈ {−m+1, …, m}`,
/// for a fixed vector of per-sub-test accept values.
pub fn threshold_referee_value(accepts: &[i8]) -> Rational {
    let m = accepts.len() as i64;
    let sum: i64 = accepts.iter().map(|x| i64::from(*x)).sum();
    let mut total = 0i64;
    for a in (-m + 1)..=m {
        total += if sum >= a { 1 } else { -1 };
    }
    Rational::new(total, 2 * m)
}

/// `E(A)` of the threshold referee computed from the full joint answer
/// distributions, without appealing to the referee lemma.
pub fn threshold_referee_expectation(s: &Strategy) -> Result<f64> {
    referee_expectation_by(s, |accepts| {
        let v = threshold_referee_value(accepts);
        *v.numer() as f64 / *v.denom() as f64
    })
}

/// `E(A)` of the referee that picks one sub-test uniformly and outputs its `A_k`.
pub fn alternative_referee_expectation(s: &Strategy) -> Result<f64> {
    referee_expectation_by(s, |accepts| accepts.iter().map(|x| f64::from(*x)).sum::<f64>() / accepts.len() as f64)
}

fn referee_expectation_by<F>(s: &Strategy, value: F) -> Result<f64>
where
    F: Fn(&[i8]) -> f64 + Sync,
{
    let m = s.m();
    let count = guard_game(m)?;
    let parts = (0..count)
        .into_par_iter()
        .map(|idx| {
            let pairs = question_string(idx, m);
            let (qa, qb) = split_questions(&pairs);
            let mut acc = 0.0;
            for (a, b, p) in s.joint_distribution(&qa, &qb)? {
                acc += p * value(&accept_values(&pairs, &a, &b)?);
            }
            Ok(acc)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(parts.iter().sum::<f64>() / count as f64)
}

/// Checks, in exact arithmetic, that the threshold referee's expectation
/// equals `(1/m) Σ_k A_k` for every deterministic `A ∈ {−1, +1}^m`.
pub fn referee_expectation_check(m: usize) -> Result<bool> {
    if m == 0 || m > 20 {
        return Err(LabError::InvalidArgument(format!("m = {m} outside 1..=20")));
    }
    for idx in 0..1usize << m {
        let accepts: Vec<i8> = (0..m).map(|k| if (idx >> k) & 1 == 0 { 1 } else { -1 }).collect();
        let sum: i64 = accepts.iter().map(|x| i64::from(*x)).sum();
        if threshold_referee_value(&accepts) != Rational::new(sum, m as i64) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `(δ, ε)` with `δ = max(0, (2√2+1)/5 − E(A))` and `ε = 2δ / (10^m · 2m)`.
pub fn delta_and_epsilon(s: &Strategy) -> Result<(f64, f64)> {
    Ok(delta_epsilon_from_expectation(game_expectation_exact(s)?, s.m()))
}

pub fn delta_epsilon_from_expectation(e: f64, m: usize) -> (f64, f64) {
    let delta = (game_optimum() - e).max(0.0);
    let n = (2 * m) as f64;
    (delta, 2.0 * delta / (10f64.powi(m as i32) * n))
}

/// Best single-copy classical expectation, by enumerating all 256 pairs of
/// deterministic answer tables, together with one optimal table pair
/// (answers to X, Z, D, E for Alice then Bob).
pub fn max_classical_expectation() -> (Rational, [i8; 8]) {
    let index = |s: Symbol| Symbol::ALL.iter().position(|x| *x == s).unwrap();
    let mut best = (Rational::new(-1, 1), [1i8; 8]);
    for bits in 0u32..256 {
        let table: [i8; 8] = std::array::from_fn(|i| if (bits >> i) & 1 == 0 { 1 } else { -1 });
        let mut total = 0i64;
        for (qa, qb) in GAME_PAIRS {
            let f = win_sign(qa, qb).unwrap();
            total += i64::from(f * table[index(qa)] * table[4 + index(qb)]);
        }
        let value = Rational::new(total, 10);
        if value > best.0 {
            best = (value, table);
        }
    }
    best
}

/// One round of the game.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct GameOutcome {
    pub questions: Vec<(Symbol, Symbol)>,
    pub alice_answers: Answer,
    pub bob_answers: Answer,
    /// `A_k ∈ {−1, +1}`.
    pub accepts: Vec<i8>,
    /// `a ∈ {−m+1, …, m}`.
    pub threshold: i64,
    /// `A = +1` iff `Σ_k A_k ≥ a`.
    pub result: i8,
}

type Distribution = Vec<(Answer, Answer, f64)>;

fn draw<'a>(dist: &'a Distribution, rng: &mut impl Rng) -> (&'a Answer, &'a Answer) {
    let u = rng.random::<f64>();
    let mut acc = 0.0;
    for (a, b, p) in dist {
        acc += p;
        if u < acc {
            return (a, b);
        }
    }
    let last = dist.last().expect("distribution is non-empty");
    (&last.0, &last.1)
}

fn play_round(
    s: &Strategy,
    rng: &mut impl Rng,
    cache: &mut HashMap<(QuestionKind, QuestionKind), Distribution>,
) -> Result<GameOutcome> {
    let m = s.m();
    let questions: Vec<(Symbol, Symbol)> = (0..m).map(|_| GAME_PAIRS[rng.random_range(0..10)]).collect();
    let key = split_questions(&questions);
    if !cache.contains_key(&key) {
        let dist = s.joint_distribution(&key.0, &key.1)?;
        if dist.is_empty() {
            return Err(LabError::Internal("joint answer distribution is empty".into()));
        }
        cache.insert(key.clone(), dist);
    }
    let (a, b) = draw(&cache[&key], rng);
    let accepts = accept_values(&questions, a, b)?;
    let threshold = rng.random_range(-(m as i64) + 1..=m as i64);
    let sum: i64 = accepts.iter().map(|x| i64::from(*x)).sum();
    Ok(GameOutcome {
        questions,
        alice_answers: a.clone(),
        bob_answers: b.clone(),
        accepts,
        threshold,
        result: if sum >= threshold { 1 } else { -1 },
    })
}

/// Plays a single round with answers drawn by the Born rule.
pub fn game_round_sample(s: &Strategy, rng: &mut impl Rng) -> Result<GameOutcome> {
    play_round(s, rng, &mut HashMap::new())
}

/// Rounds per independently seeded block of [`sample_game`].
pub const SAMPLE_BLOCK: usize = 4096;

/// Plays `rounds` rounds. Block `i` uses stream `i` of a generator seeded
/// with `seed`, so the sequence does not depend on the worker count.
pub fn sample_game(s: &Strategy, rounds: usize, seed: u64) -> Result<Vec<GameOutcome>> {
    let blocks = rounds.div_ceil(SAMPLE_BLOCK);
    let parts = (0..blocks)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut cache = HashMap::new();
            let len = SAMPLE_BLOCK.min(rounds - i * SAMPLE_BLOCK);
            (0..len).map(|_| play_round(s, &mut rng, &mut cache)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleSummary {
    pub rounds: usize,
    pub mean: f64,
    /// Standard error of the mean of a ±1 variable, `√((1 − mean²)/rounds)`.
    pub std_error: f64,
}

pub fn summarize(outcomes: &[GameOutcome]) -> SampleSummary {
    let rounds = outcomes.len();
    if rounds == 0 {
        return SampleSummary { rounds, mean: 0.0, std_error: 0.0 };
    }
    let mean = outcomes.iter().map(|o| f64::from(o.result)).sum::<f64>() / rounds as f64;
    SampleSummary { rounds, mean, std_error: ((1.0 - mean * mean).max(0.0) / rounds as f64).sqrt() }
}
