//! Closed-form robustness bounds as pure functions of the error parameters.
//!
//! The bounds depend on `p` only through `|p|`, so they take the weight.
//! Each report keeps the radicands so a reader can see which term dominates.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::bitstring::{guard_exhaustive, BitString};
use crate::error::{LabError, Result};
use crate::strategy::EpsilonBundle;

/// Largest distance between two normalized states; bounds above it say nothing.
pub const VACUOUS_ABOVE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundName {
    Graphstate,
    Sufficient,
    MayersYao,
    ChshAc,
    Theorem1,
    Theorem1Recomputed,
    Spp,
    Game,
}

impl BoundName {
    pub const ALL: [BoundName; 8] = [
        BoundName::Graphstate,
        BoundName::Sufficient,
        BoundName::MayersYao,
        BoundName::ChshAc,
        BoundName::Theorem1,
        BoundName::Theorem1Recomputed,
        BoundName::Spp,
        BoundName::Game,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundName::Graphstate => "graphstate",
            BoundName::Sufficient => "sufficient",
            BoundName::MayersYao => "mayers-yao",
            BoundName::ChshAc => "chsh-ac",
            BoundName::Theorem1 => "theorem1",
            BoundName::Theorem1Recomputed => "theorem1-recomputed",
            BoundName::Spp => "spp",
            BoundName::Game => "game",
        }
    }
}

impl fmt::Display for BoundName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundName {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        BoundName::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| LabError::Parse(format!("unknown bound '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub name: BoundName,
    pub n: usize,
    pub weight_p: usize,
    pub inputs: EpsilonBundle,
    pub value: f64,
    /// Operand of each square root, in printed order.
    pub terms: Vec<f64>,
    pub vacuous: bool,
}

impl BoundReport {
    fn new(name: BoundName, n: usize, weight_p: usize, inputs: EpsilonBundle, value: f64, terms: Vec<f64>) -> Self {
        Self { name, n, weight_p, inputs, value, terms, vacuous: value > VACUOUS_ABOVE }
    }

    fn from_radicands(
        name: BoundName,
        n: usize,
        weight_p: usize,
        inputs: EpsilonBundle,
        terms: Vec<f64>,
    ) -> Result<Self> {
        if let Some(t) = terms.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(LabError::Internal(format!("{name}: radicand {t} is negative or non-finite")));
        }
        let value = terms.iter().map(|t| t.sqrt()).sum();
        Ok(Self::new(name, n, weight_p, inputs, value, terms))
    }
}

fn check_nonneg(x: f64, what: &str) -> Result<()> {
    if !(x.is_finite() && x >= 0.0) {
        return Err(LabError::InvalidArgument(format!("{what} must be finite and ≥ 0, got {x}")));
    }
    Ok(())
}

fn check_shape(n: usize, weight_p: usize) -> Result<()> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(LabError::InvalidArgument(format!("n must be even and ≥ 2, got {n}")));
    }
    if weight_p > n {
        return Err(LabError::InvalidArgument(format!("|p| = {weight_p} exceeds n = {n}")));
    }
    Ok(())
}

/// Anticommutation error for `X'^s Z'^t`:
/// `(|s_a||t_a| + |s_b||t_b|)(ε₁+2ε₂) + (t·s)(ε₃−ε₁) + 2ε₂ min{|s|,|t|}`.
pub fn eps_ac(s: &BitString, t: &BitString, e: &EpsilonBundle) -> Result<f64> {
    if s.len() != t.len() {
        return Err(LabError::LengthMismatch { expected: s.len(), found: t.len() });
    }
    let w = |x: BitString| f64::from(x.weight());
    let cross = w(s.half_a()?) * w(t.half_a()?) + w(s.half_b()?) * w(t.half_b()?);
    let overlap = f64::from(t.dot(s)?);
    Ok(cross * (e.eps1 + 2.0 * e.eps2) + overlap * (e.eps3 - e.eps1) + 2.0 * e.eps2 * w(*s).min(w(*t)))
}

/// Swap error for `X'^s` against `Z'^{Rs}`:
/// `|s| ε₂ + ε_ac(s_a, R s_b) + ε_ac(s_b, R s_a)`.
pub fn eps_xz(s: &BitString, e: &EpsilonBundle) -> Result<f64> {
    let (sa, sb) = (s.half_a()?, s.half_b()?);
    Ok(f64::from(s.weight()) * e.eps2 + eps_ac(&sa, &sb.swap_halves()?, e)? + eps_ac(&sb, &sa.swap_halves()?, e)?)
}

/// One step of the swap induction: `|t|(ε₁+2ε₂) + t_k(ε₃−ε₁)`, for `t`
/// supported on the half of the register containing position `k`.
pub fn claim_step_bound(t: &BitString, k: usize, e: &EpsilonBundle) -> Result<f64> {
    let n = t.len();
    if k == 0 || k > n {
        return Err(LabError::IndexOutOfRange { index: k, len: n });
    }
    let half = if k <= n / 2 { t.half_a()? } else { t.half_b()? };
    if half != *t {
        return Err(LabError::InvalidArgument(format!("t = {t} is not confined to the half containing k = {k}")));
    }
    let tk = if t.bit(k) { 1.0 } else { 0.0 };
    Ok(f64::from(t.weight()) * (e.eps1 + 2.0 * e.eps2) + tk * (e.eps3 - e.eps1))
}

/// The general graph-state bound, enumerating both double sums:
/// `√((1/2^{2n−1}) Σ_{s,t} ε_ac(s,p) + ε_ac(s,p⊕t)) + √((1/2^{2n−1}) Σ_{t,u} ε_ac(t,u) + ε_xz(u))`.
pub fn graphstate_bound<A, X>(n: usize, p: &BitString, e_ac: A, e_xz: X, threshold: usize) -> Result<BoundReport>
where
    A: Fn(&BitString, &BitString) -> Result<f64>,
    X: Fn(&BitString) -> Result<f64>,
{
    if p.len() != n {
        return Err(LabError::LengthMismatch { expected: n, found: p.len() });
    }
    guard_exhaustive(n, threshold)?;
    let scale = 1.0 / 2f64.powi(2 * n as i32 - 1);
    let mut first = 0.0;
    let mut second = 0.0;
    let xz: Vec<f64> = BitString::all(n)?.map(|u| e_xz(&u)).collect::<Result<_>>()?;
    for s in BitString::all(n)? {
        let at_p = e_ac(&s, p)?;
        for t in BitString::all(n)? {
            first += at_p + e_ac(&s, &p.xor(&t)?)?;
            second += e_ac(&s, &t)? + xz[t.value() as usize];
        }
    }
    // the second sum runs over (t, u); reusing (s, t) as names is harmless
    BoundReport::from_radicands(
        BoundName::Graphstate,
        n,
        p.weight() as usize,
        EpsilonBundle::default(),
        vec![scale * first, scale * second],
    )
}

/// [`graphstate_bound`] with the anticommutation and swap errors above.
pub fn graphstate_bound_from_bundle(
    n: usize,
    p: &BitString,
    e: &EpsilonBundle,
    threshold: usize,
) -> Result<BoundReport> {
    let mut report = graphstate_bound(n, p, |s, t| eps_ac(s, t, e), |u| eps_xz(u, e), threshold)?;
    report.inputs = *e;
    Ok(report)
}

/// Closed form for the parallel test's sufficient conditions.
pub fn sufficient_conditions_bound(n: usize, weight_p: usize, e: &EpsilonBundle) -> Result<BoundReport> {
    check_shape(n, weight_p)?;
    let e = e.validated()?;
    let (nf, w) = (n as f64, weight_p as f64);
    let first = w / 2.0 * ((nf - 1.0) * e.eps1 + 2.0 * nf * e.eps2 + e.eps3)
        + nf / 4.0 * (e.eps3 - e.eps1)
        + nf * nf / 8.0 * (e.eps1 + 2.0 * e.eps2);
    let second = nf * nf / 4.0 * (e.eps1 + 2.0 * e.eps2) + nf / 2.0 * (e.eps2 + e.eps3 - e.eps1);
    BoundReport::from_radicands(BoundName::Sufficient, n, weight_p, e, vec![first, second])
}

/// Anticommutation error delivered by one Mayers-Yao block:
/// `4(1+√2)(2ε)^{1/4} + 8√(2ε) + (5+3√2)(2ε)^{3/4}`.
pub fn mayers_yao_ac_bound(eps: f64) -> Result<f64> {
    check_nonneg(eps, "ε")?;
    let x = 2.0 * eps;
    Ok(4.0 * (1.0 + SQRT_2) * x.powf(0.25) + 8.0 * x.sqrt() + (5.0 + 3.0 * SQRT_2) * x.powf(0.75))
}

/// Anticommutation error delivered by a near-optimal CHSH pair: `2√(2√2 ε)`.
pub fn chsh_ac_bound(eps: f64) -> Result<f64> {
    check_nonneg(eps, "ε")?;
    Ok(2.0 * (2.0 * SQRT_2 * eps).sqrt())
}

/// Final bound of the parallel Mayers-Yao test.
pub fn theorem1_bound(n: usize, weight_p: usize, eps: f64) -> Result<BoundReport> {
    check_shape(n, weight_p)?;
    let e4 = mayers_yao_ac_bound(eps)?;
    let (nf, w) = (n as f64, weight_p as f64);
    let r = (2.0 * eps).sqrt();
    let first = r * (9.0 * nf * nf / 4.0 + 1.5 * nf) + nf * e4 / 2.0;
    let second = r * (9.0 * nf * nf / 8.0 + nf * (2.5 * w - 0.25) - w / 2.0) + e4 * (nf / 4.0 + w / 2.0);
    let inputs = EpsilonBundle { eps, eps4: e4, ..Default::default() };
    BoundReport::from_radicands(BoundName::Theorem1, n, weight_p, inputs, vec![first, second])
}

/// The sufficient-conditions closed form evaluated at the error estimates
/// the MY test delivers: `ε₁ = 4√(2ε)`, `ε₂ = √(2ε)`, `ε₃ = ε₄`.
pub fn theorem1_recomputed_bound(n: usize, weight_p: usize, eps: f64) -> Result<BoundReport> {
    check_nonneg(eps, "ε")?;
    let r = (2.0 * eps).sqrt();
    let e4 = mayers_yao_ac_bound(eps)?;
    let bundle = EpsilonBundle { eps, eps1: 4.0 * r, eps2: r, eps3: e4, eps4: e4, delta: 0.0 };
    let mut report = sufficient_conditions_bound(n, weight_p, &bundle)?;
    report.name = BoundName::Theorem1Recomputed;
    Ok(report)
}

fn spp_brackets(n: f64, w: f64) -> (f64, f64) {
    let a = 9.0 * n * n / 4.0 + (3.0 + 2f64.powf(1.25)) * n / 2.0;
    let b = 9.0 * n * n / 8.0 + n * (2.5 * w - 0.25 + 2f64.powf(-0.75)) + w * (2f64.powf(0.25) - 0.5);
    (a, b)
}

/// Final bound of the strictly parallel test in terms of its `ε`.
pub fn spp_selftest_bound(n: usize, weight_p: usize, eps: f64) -> Result<BoundReport> {
    check_shape(n, weight_p)?;
    check_nonneg(eps, "ε")?;
    let (a, b) = spp_brackets(n as f64, weight_p as f64);
    let r = (2.0 * eps).sqrt();
    let inputs = EpsilonBundle { eps, ..Default::default() };
    BoundReport::from_radicands(BoundName::Spp, n, weight_p, inputs, vec![r * a, r * b])
}

/// Final bound of the game in terms of the expectation deficit `δ`:
/// `10^{n/8}` times the two radicals with `√(2ε)` replaced by `√(nδ)`.
pub fn game_bound(n: usize, weight_p: usize, delta: f64) -> Result<BoundReport> {
    check_shape(n, weight_p)?;
    check_nonneg(delta, "δ")?;
    let nf = n as f64;
    let (a, b) = spp_brackets(nf, weight_p as f64);
    let r = (nf * delta).sqrt();
    let prefactor = 10f64.powf(nf / 8.0);
    let terms = vec![r * a, r * b];
    let value = prefactor * terms.iter().map(|t| t.sqrt()).sum::<f64>();
    let inputs = EpsilonBundle { delta, ..Default::default() };
    Ok(BoundReport::new(BoundName::Game, n, weight_p, inputs, value, terms))
}

/// Evaluates one named bound. `graphstate` uses the first `weight_p`
/// positions as `p`.
pub fn evaluate_bound(name: BoundName, n: usize, weight_p: usize, e: &EpsilonBundle) -> Result<BoundReport> {
    let e = e.validated()?;
    check_shape(n, weight_p)?;
    let scalar = |value: f64| BoundReport::new(name, n, weight_p, e, value, vec![]);
    match name {
        BoundName::Graphstate => {
            let bits: Vec<u8> = (0..n).map(|i| u8::from(i < weight_p)).collect();
            graphstate_bound_from_bundle(
                n,
                &BitString::from_bits(&bits)?,
                &e,
                crate::bitstring::DEFAULT_EXHAUSTIVE_THRESHOLD,
            )
        }
        BoundName::Sufficient => sufficient_conditions_bound(n, weight_p, &e),
        BoundName::MayersYao => Ok(scalar(mayers_yao_ac_bound(e.eps)?)),
        BoundName::ChshAc => Ok(scalar(chsh_ac_bound(e.eps)?)),
        BoundName::Theorem1 => theorem1_bound(n, weight_p, e.eps),
        BoundName::Theorem1Recomputed => theorem1_recomputed_bound(n, weight_p, e.eps),
        BoundName::Spp => spp_selftest_bound(n, weight_p, e.eps),
        BoundName::Game => game_bound(n, weight_p, e.delta),
    }
}

/// The MY acceptance bound: the larger of the printed and recomputed forms.
pub fn my_dominance_bound(n: usize, weight_p: usize, eps: f64) -> Result<f64> {
    Ok(theorem1_bound(n, weight_p, eps)?.value.max(theorem1_recomputed_bound(n, weight_p, eps)?.value))
}
