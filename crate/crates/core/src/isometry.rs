//! The local-isometry construction, its junk state, and the self-testing
//! distance.
//!
//! Register order is (system, S block of `n` ancillas, U block of `n`
//! ancillas); ancilla `k` of S is paired with ancilla `k` of U. An amplitude
//! index is `sys·4ⁿ + s·2ⁿ + u`.

use std::f64::consts::FRAC_1_SQRT_2;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bitstring::BitString;
use crate::bounds::{spp_selftest_bound, theorem1_bound, theorem1_recomputed_bound, BoundName, BoundReport};
use crate::error::{LabError, Result};
use crate::graph::{phase_p, AdjacencyMatrix};
use crate::linalg::{apply_ordered_power, c, CMatrix, CVector, Layout, StateVector, STATE_TOL};
use crate::protocol::{epsilon_my, epsilon_spp};
use crate::strategy::{Strategy, Symbol, TestFlavor};

/// Largest `n` for which the junk state's `4ⁿ`-term sum is evaluated.
pub const JUNK_MAX_N: usize = 6;

/// Pairs are enumerated exhaustively up to this many.
pub const EXHAUSTIVE_PAIR_LIMIT: usize = 256;

/// Default sample size above [`EXHAUSTIVE_PAIR_LIMIT`].
pub const DEFAULT_PAIR_SAMPLE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IsometryStep {
    AttachPairs,
    ControlledX,
    HadamardU,
    ControlledZ,
}

/// Which ancilla block carries the ideal state. Only `IdealOnU` is the
/// construction's layout; the other exists for the negative test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AncillaLayout {
    IdealOnU,
    IdealOnS,
}

/// `Φ` for a given strategy: the observables `X'_k`, `Z'_k` on the system
/// register and the fixed step list.
#[derive(Debug, Clone)]
pub struct IsometryPlan {
    n: usize,
    dims: (usize, usize),
    x: Vec<CMatrix>,
    z: Vec<CMatrix>,
    psi: CVector,
    steps: Vec<IsometryStep>,
}

impl IsometryPlan {
    pub fn new(s: &Strategy, flavor: TestFlavor) -> Result<Self> {
        let x = s.global_observables(flavor, Symbol::X)?;
        let z = s.global_observables(flavor, Symbol::Z)?;
        Ok(Self {
            n: s.n(),
            dims: s.dims(),
            x,
            z,
            psi: s.state().amplitudes().clone(),
            steps: vec![
                IsometryStep::AttachPairs,
                IsometryStep::ControlledX,
                IsometryStep::HadamardU,
                IsometryStep::ControlledZ,
                IsometryStep::HadamardU,
                IsometryStep::ControlledX,
            ],
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn system_dim(&self) -> usize {
        self.dims.0 * self.dims.1
    }

    pub fn output_dim(&self) -> usize {
        self.system_dim() << (2 * self.n)
    }

    pub fn steps(&self) -> &[IsometryStep] {
        &self.steps
    }

    pub fn output_layout(&self) -> Result<Layout> {
        let mut regs = vec![("A".to_string(), self.dims.0), ("B".to_string(), self.dims.1)];
        regs.extend((1..=self.n).map(|k| (format!("S{k}"), 2)));
        regs.extend((1..=self.n).map(|k| (format!("U{k}"), 2)));
        Layout::new(regs)
    }

    /// Column mask of U-block ancilla `k` in an ancilla index `s·2ⁿ + u`.
    fn u_mask(&self, k: usize) -> usize {
        1usize << (self.n - k)
    }

    /// `Φ(v)` as a raw amplitude vector.
    pub fn apply(&self, v: &CVector) -> Result<CVector> {
        let d = self.system_dim();
        if v.len() != d {
            return Err(LabError::DimensionMismatch(format!("input has dimension {}, system has {d}", v.len())));
        }
        let anc = 1usize << (2 * self.n);
        // columns are ancilla configurations
        let mut state = CMatrix::zeros(d, anc);
        for step in &self.steps {
            match step {
                IsometryStep::AttachPairs => {
                    let amp = c(0.5f64.powf(self.n as f64 / 2.0));
                    for s in 0..1usize << self.n {
                        state.set_column((s << self.n) | s, &(v * amp));
                    }
                }
                IsometryStep::ControlledX => self.controlled(&mut state, &self.x),
                IsometryStep::ControlledZ => self.controlled(&mut state, &self.z),
                IsometryStep::HadamardU => self.hadamard_u(&mut state),
            }
        }
        Ok(CVector::from_fn(d * anc, |idx, _| state[(idx / anc, idx % anc)]))
    }

    /// For `k = n … 1`, applies `ops[k]` to the columns whose U-ancilla `k` is 1.
    fn controlled(&self, state: &mut CMatrix, ops: &[CMatrix]) {
        for k in (1..=self.n).rev() {
            let mask = self.u_mask(k);
            let cols: Vec<usize> = (0..state.ncols()).filter(|a| a & mask != 0).collect();
            let block = CMatrix::from_fn(state.nrows(), cols.len(), |i, j| state[(i, cols[j])]);
            let out = &ops[k - 1] * block;
            for (j, &a) in cols.iter().enumerate() {
                state.set_column(a, &out.column(j));
            }
        }
    }

    fn hadamard_u(&self, state: &mut CMatrix) {
        let h = c(FRAC_1_SQRT_2);
        for k in 1..=self.n {
            let mask = self.u_mask(k);
            for a in (0..state.ncols()).filter(|a| a & mask == 0) {
                let c0 = state.column(a).clone_owned();
                let c1 = state.column(a | mask).clone_owned();
                state.set_column(a, &((&c0 + &c1) * h));
                state.set_column(a | mask, &((c0 - c1) * h));
            }
        }
    }

    /// `X'^q Z'^p |ψ'⟩` on the system register.
    pub fn prepared(&self, p: &BitString, q: &BitString) -> Result<CVector> {
        let zp = apply_ordered_power(&self.z, p, &self.psi)?;
        apply_ordered_power(&self.x, q, &zp)
    }

    /// `(1/2ⁿ) Σ_{s,t} (−1)^{s·t + P(s)} Z'^t |ψ'⟩ ⊗ |s⟩`, index `sys·2ⁿ + s`.
    pub fn junk(&self) -> Result<CVector> {
        let n = self.n;
        if n > JUNK_MAX_N {
            return Err(LabError::ThresholdExceeded { n, threshold: JUNK_MAX_N });
        }
        let r = AdjacencyMatrix::swap_halves(n)?;
        let d = self.system_dim();
        let images: Vec<CVector> =
            BitString::all(n)?.map(|t| apply_ordered_power(&self.z, &t, &self.psi)).collect::<Result<_>>()?;
        let mut junk = CVector::zeros(d << n);
        let scale = 0.5f64.powi(n as i32);
        for s in BitString::all(n)? {
            let ps = phase_p(&s, &r)?;
            let mut acc = CVector::zeros(d);
            for t in BitString::all(n)? {
                let sign = if (s.dot_mod2(&t)? + ps) % 2 == 0 { scale } else { -scale };
                acc += &images[t.value() as usize] * c(sign);
            }
            for sys in 0..d {
                junk[(sys << n) | s.value() as usize] = acc[sys];
            }
        }
        Ok(junk)
    }

    /// `‖Φ(X'^q Z'^p ψ') − |junk⟩ ⊗ X^q Z^p ψ‖`, phase-exact.
    pub fn distance(&self, junk: &CVector, p: &BitString, q: &BitString, layout: AncillaLayout) -> Result<f64> {
        let n = self.n;
        if p.len() != n || q.len() != n {
            return Err(LabError::LengthMismatch { expected: n, found: if p.len() != n { p.len() } else { q.len() } });
        }
        let out = self.apply(&self.prepared(p, q)?)?;
        let ideal = ideal_state(p, q)?;
        let block = 1usize << n;
        let d = self.system_dim();
        let mut sq = 0.0;
        for sys in 0..d {
            for a in 0..block {
                for b in 0..block {
                    // a indexes the S block and b the U block
                    let target = match layout {
                        AncillaLayout::IdealOnU => junk[sys * block + a] * ideal[b],
                        AncillaLayout::IdealOnS => junk[sys * block + b] * ideal[a],
                    };
                    sq += (out[(sys * block + a) * block + b] - target).norm_sqr();
                }
            }
        }
        Ok(sq.sqrt())
    }
}

/// `X^q Z^p |ψ⟩` for the ideal graph state of the half-swap graph, built by
/// sign flips and index permutation rather than by matrices.
pub fn ideal_state(p: &BitString, q: &BitString) -> Result<CVector> {
    let n = p.len();
    let r = AdjacencyMatrix::swap_halves(n)?;
    let amp = 0.5f64.powf(n as f64 / 2.0);
    let mut out = CVector::zeros(1 << n);
    for u in BitString::all(n)? {
        let sign = (phase_p(&u, &r)? + u.dot_mod2(p)?) % 2;
        let target = u.xor(q)?;
        out[target.value() as usize] = c(if sign == 0 { amp } else { -amp });
    }
    Ok(out)
}

/// `Φ` applied to a state on the strategy's system register.
pub fn apply_isometry(s: &Strategy, flavor: TestFlavor, input: &StateVector) -> Result<StateVector> {
    let plan = IsometryPlan::new(s, flavor)?;
    let out = plan.apply(input.amplitudes())?;
    StateVector::new(out, plan.output_layout()?)
}

pub fn junk_state(s: &Strategy, flavor: TestFlavor) -> Result<CVector> {
    IsometryPlan::new(s, flavor)?.junk()
}

pub fn selftest_distance(s: &Strategy, flavor: TestFlavor, p: &BitString, q: &BitString) -> Result<f64> {
    let plan = IsometryPlan::new(s, flavor)?;
    plan.distance(&plan.junk()?, p, q, AncillaLayout::IdealOnU)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PairSelection {
    /// Exhaustive when `4ⁿ ≤ 256`, otherwise a seeded sample of 64 pairs.
    Auto,
    Exhaustive,
    Sample(usize),
}

/// Selected `(p, q)` pairs, in increasing `(p, q)` order.
pub fn select_pairs(n: usize, selection: PairSelection, seed: u64) -> Result<Vec<(BitString, BitString)>> {
    let total = 1usize
        .checked_shl(2 * n as u32)
        .filter(|_| 2 * n < 63)
        .ok_or(LabError::ThresholdExceeded { n, threshold: 31 })?;
    let count = match selection {
        PairSelection::Exhaustive => total,
        PairSelection::Auto if total <= EXHAUSTIVE_PAIR_LIMIT => total,
        PairSelection::Auto => DEFAULT_PAIR_SAMPLE,
        PairSelection::Sample(k) => k.min(total),
    };
    let mut picks: Vec<usize> = if count == total {
        (0..total).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sample(&mut rng, total, count).into_vec()
    };
    picks.sort_unstable();
    picks
        .into_iter()
        .map(|idx| {
            Ok((BitString::from_value((idx >> n) as u64, n)?, BitString::from_value((idx & ((1 << n) - 1)) as u64, n)?))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub name: BoundName,
    pub value: f64,
    pub vacuous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsometryReport {
    pub p: BitString,
    pub q: BitString,
    pub distance: f64,
    pub bounds: Vec<BoundCheck>,
    /// The distance is within the largest applicable bound, up to the
    /// numerical floor `STATE_TOL`.
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsometryVerification {
    pub test: TestFlavor,
    pub m: usize,
    pub eps: f64,
    pub junk_norm: f64,
    pub max_distance: f64,
    pub passed: bool,
    pub reports: Vec<IsometryReport>,
}

fn bounds_for(flavor: TestFlavor, n: usize, weight_p: usize, eps: f64) -> Result<Vec<BoundReport>> {
    match flavor {
        TestFlavor::My => Ok(vec![theorem1_bound(n, weight_p, eps)?, theorem1_recomputed_bound(n, weight_p, eps)?]),
        TestFlavor::Spp => Ok(vec![spp_selftest_bound(n, weight_p, eps)?]),
    }
}

/// Measures the test-level `ε`, then checks every selected `(p, q)` against
/// the largest applicable bound at that `ε`.
pub fn verify_bound(
    s: &Strategy,
    flavor: TestFlavor,
    selection: PairSelection,
    seed: u64,
) -> Result<IsometryVerification> {
    let eps = match flavor {
        TestFlavor::My => epsilon_my(s)?.eps,
        TestFlavor::Spp => epsilon_spp(s)?.eps,
    };
    let plan = IsometryPlan::new(s, flavor)?;
    let junk = plan.junk()?;
    let n = plan.n();
    let pairs = select_pairs(n, selection, seed)?;
    let reports = pairs
        .par_iter()
        .map(|(p, q)| {
            let distance = plan.distance(&junk, p, q, AncillaLayout::IdealOnU)?;
            let bounds: Vec<BoundCheck> = bounds_for(flavor, n, p.weight() as usize, eps)?
                .into_iter()
                .map(|b| BoundCheck { name: b.name, value: b.value, vacuous: b.vacuous })
                .collect();
            let limit = bounds.iter().map(|b| b.value).fold(0.0, f64::max);
            Ok(IsometryReport { p: *p, q: *q, distance, passed: distance <= limit + STATE_TOL, bounds })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_distance = reports.iter().map(|r| r.distance).fold(0.0, f64::max);
    Ok(IsometryVerification {
        test: flavor,
        m: s.m(),
        eps,
        junk_norm: junk.norm(),
        max_distance,
        passed: reports.iter().all(|r| r.passed),
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategy::{
        deterministic_strategy, honest_my_strategy, honest_spp_strategy, perturb_strategy, NoiseSpec,
    };
    use rand::Rng;

    fn random_vector(dim: usize, rng: &mut impl Rng) -> CVector {
        CVector::from_fn(dim, |_, _| num_complex::Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    #[test]
    fn plan_shape() {
        let plan = IsometryPlan::new(&honest_my_strategy(1).unwrap(), TestFlavor::My).unwrap();
        assert_eq!(plan.output_dim(), 4 * 16);
        assert_eq!(plan.output_layout().unwrap().total_dim(), plan.output_dim());
        assert_eq!(plan.steps().len(), 6);
    }

    #[test]
    fn isometry_preserves_norm_and_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let noisy = perturb_strategy(&honest_my_strategy(1).unwrap(), &NoiseSpec::random(0.1, 0.05, 3)).unwrap();
        for s in [honest_my_strategy(1).unwrap(), noisy] {
            let plan = IsometryPlan::new(&s, TestFlavor::My).unwrap();
            for _ in 0..100 {
                let v = random_vector(4, &mut rng);
                let out = plan.apply(&v).unwrap();
                assert!((out.norm() - v.norm()).abs() < 1e-12);
            }
            let (v, w) = (random_vector(4, &mut rng), random_vector(4, &mut rng));
            let (a, b) = (num_complex::Complex64::new(0.3, -1.2), num_complex::Complex64::new(-0.7, 0.4));
            let lhs = plan.apply(&(&v * a + &w * b)).unwrap();
            let rhs = plan.apply(&v).unwrap() * a + plan.apply(&w).unwrap() * b;
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn honest_output_factorizes() {
        let s = honest_my_strategy(1).unwrap();
        let input = s.state().clone();
        let out = apply_isometry(&s, TestFlavor::My, &input).unwrap();
        assert!((out.norm() - 1.0).abs() < 1e-12);
        let junk = junk_state(&s, TestFlavor::My).unwrap();
        assert!((junk.norm() - 1.0).abs() < 1e-12);
        let zero = BitString::zeros(2).unwrap();
        let d = selftest_distance(&s, TestFlavor::My, &zero, &zero).unwrap();
        assert!(d < 1e-9, "{d}");
        // the p = q = 0 distance is the plain factorization check
        let ideal = ideal_state(&zero, &zero).unwrap();
        let mut target = CVector::zeros(out.dim());
        for (i, j) in junk.iter().enumerate() {
            for (k, x) in ideal.iter().enumerate() {
                target[i * 4 + k] = j * x;
            }
        }
        assert!((out.amplitudes() - target).norm() < 1e-12);
    }

    #[test]
    fn zero_noise_all_pairs_m1() {
        for (s, flavor) in
            [(honest_my_strategy(1).unwrap(), TestFlavor::My), (honest_spp_strategy(1).unwrap(), TestFlavor::Spp)]
        {
            let v = verify_bound(&s, flavor, PairSelection::Auto, 0).unwrap();
            assert_eq!(v.reports.len(), 16);
            assert!(v.max_distance < 1e-9, "{}", v.max_distance);
            assert!(v.passed);
        }
    }

    #[test]
    fn ideal_state_oracle() {
        // X^q Z^p ψ via explicit Pauli matrices
        use crate::linalg::{embed_matrix, graph_state, Pauli};
        let layout = Layout::qubits(2);
        let x: Vec<CMatrix> = (1..=2).map(|k| embed_matrix(&Pauli::X.matrix(), &[k], &layout).unwrap()).collect();
        let z: Vec<CMatrix> = (1..=2).map(|k| embed_matrix(&Pauli::Z.matrix(), &[k], &layout).unwrap()).collect();
        let psi = graph_state(&crate::graph::PhaseFunction::quadratic(AdjacencyMatrix::swap_halves(2).unwrap()))
            .unwrap()
            .amplitudes()
            .clone();
        for p in BitString::all(2).unwrap() {
            for q in BitString::all(2).unwrap() {
                let direct = apply_ordered_power(&x, &q, &apply_ordered_power(&z, &p, &psi).unwrap()).unwrap();
                assert!((direct - ideal_state(&p, &q).unwrap()).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn noisy_junk_is_normalized() {
        let s = perturb_strategy(&honest_my_strategy(1).unwrap(), &NoiseSpec::alice_rotation(0.05)).unwrap();
        let junk = junk_state(&s, TestFlavor::My).unwrap();
        assert!((junk.norm() - 1.0).abs() < 1e-9);
        let junk = junk_state(
            &perturb_strategy(&honest_spp_strategy(1).unwrap(), &NoiseSpec::random(0.2, 0.05, 8)).unwrap(),
            TestFlavor::Spp,
        )
        .unwrap();
        assert!((junk.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn wrong_layout_is_detected() {
        let s = honest_my_strategy(1).unwrap();
        let plan = IsometryPlan::new(&s, TestFlavor::My).unwrap();
        let junk = plan.junk().unwrap();
        let mut worst: f64 = 0.0;
        for (p, q) in select_pairs(2, PairSelection::Exhaustive, 0).unwrap() {
            let right = plan.distance(&junk, &p, &q, AncillaLayout::IdealOnU).unwrap();
            let wrong = plan.distance(&junk, &p, &q, AncillaLayout::IdealOnS).unwrap();
            assert!(right < 1e-9);
            worst = worst.max(wrong);
        }
        assert!(worst > 0.5, "{worst}");
    }

    #[test]
    fn rotated_strategy_within_bound() {
        let s = perturb_strategy(&honest_my_strategy(1).unwrap(), &NoiseSpec::alice_rotation(0.03)).unwrap();
        let v = verify_bound(&s, TestFlavor::My, PairSelection::Auto, 0).unwrap();
        assert!(v.eps > 0.0);
        assert!(v.max_distance > 1e-6);
        assert!(v.passed);
    }

    #[test]
    fn classical_strategy_gives_vacuous_bounds() {
        let s = deterministic_strategy(TestFlavor::My, 1, |_, _| vec![1]).unwrap();
        let v = verify_bound(&s, TestFlavor::My, PairSelection::Auto, 0).unwrap();
        assert!(v.eps >= 0.99, "{}", v.eps);
        assert!(v.reports.iter().all(|r| r.bounds.iter().all(|b| b.vacuous)));
        assert!(v.passed);
        assert!((v.junk_norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pair_selection() {
        assert_eq!(select_pairs(2, PairSelection::Auto, 0).unwrap().len(), 16);
        assert_eq!(select_pairs(4, PairSelection::Auto, 0).unwrap().len(), 256);
        let a = select_pairs(6, PairSelection::Auto, 9).unwrap();
        assert_eq!(a.len(), 64);
        assert_eq!(a, select_pairs(6, PairSelection::Auto, 9).unwrap());
        assert_ne!(a, select_pairs(6, PairSelection::Auto, 10).unwrap());
        assert_eq!(select_pairs(2, PairSelection::Sample(5), 1).unwrap().len(), 5);
    }

    #[test]
    fn length_mismatch_rejected() {
        let s = honest_my_strategy(1).unwrap();
        assert!(selftest_distance(&s, TestFlavor::My, &BitString::zeros(3).unwrap(), &BitString::zeros(2).unwrap())
            .is_err());
        let plan = IsometryPlan::new(&s, TestFlavor::My).unwrap();
        assert!(plan.apply(&CVector::zeros(3)).is_err());
    }
}
