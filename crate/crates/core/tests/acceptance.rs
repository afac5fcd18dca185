//! Acceptance suite. Every criterion prints one `PASS`/`FAIL` line and then
//! asserts, so `cargo test --test acceptance -- --nocapture` gives a summary.

use std::f64::consts::SQRT_2;
use std::process::Command;
use std::time::{Duration, Instant};

use num_rational::Ratio;

use selftest_lab::bitstring::{BitString, DEFAULT_EXHAUSTIVE_THRESHOLD};
use selftest_lab::bounds::{
    eps_ac, eps_xz, evaluate_bound, graphstate_bound, graphstate_bound_from_bundle, theorem1_bound,
    theorem1_recomputed_bound, BoundName, VACUOUS_ABOVE,
};
use selftest_lab::graph::{AdjacencyMatrix, PhaseFunction};
use selftest_lab::isometry::{select_pairs, verify_bound, AncillaLayout, IsometryPlan, PairSelection};
use selftest_lab::lemmas::{
    check_r_decomposition, stringsum_avg_dot, stringsum_double_avg, stringsum_parity, Rational,
};
use selftest_lab::linalg::STATE_TOL;
use selftest_lab::protocol::{
    epsilon_my, epsilon_spp, game_expectation_exact, game_optimum, my_required_correlations, referee_expectation_check,
    sample_game, summarize, threshold_referee_value, win_predicate, GAME_PAIRS,
};
use selftest_lab::strategy::{
    bit_of, honest_my_strategy, honest_spp_strategy, perturb_strategy, EpsilonBundle, NoiseSpec, QuestionKind,
    Strategy, Symbol, TestFlavor,
};

const EXACT_TOL: f64 = 1e-12;
const SIGMAS: f64 = 4.0;

fn verdict(id: u32, what: &str, ok: bool, detail: impl std::fmt::Display) {
    println!("{} criterion {id:>2}: {what} ({detail})", if ok { "PASS" } else { "FAIL" });
}

fn finish(id: u32, what: &str, failures: &[String], elapsed: Duration, limit: Option<Duration>) {
    let slow = limit.is_some_and(|l| elapsed >= l);
    let ok = failures.is_empty() && !slow;
    let detail = match (failures.first(), slow) {
        (Some(first), _) => format!("{} failures, first: {first}", failures.len()),
        (None, true) => format!("too slow: {elapsed:.2?} ≥ {:.0?}", limit.unwrap_or_default()),
        (None, false) => format!("{elapsed:.2?}"),
    };
    verdict(id, what, ok, detail);
    assert!(failures.is_empty(), "criterion {id}: {failures:?}");
    assert!(!slow, "criterion {id} took {elapsed:?}");
}

// Independent bit-level helpers. Strings are `u64` values with position 1 as
// the most significant of `n` bits.

fn popcount_parity(x: u64) -> u64 {
    u64::from(x.count_ones() % 2)
}

fn swap_u64(x: u64, n: usize) -> u64 {
    let h = n / 2;
    let low = (1u64 << h) - 1;
    ((x & low) << h) | (x >> h)
}

fn half_a_u64(x: u64, n: usize) -> u64 {
    let h = n / 2;
    x & !((1u64 << h) - 1)
}

fn half_b_u64(x: u64, n: usize) -> u64 {
    x & ((1u64 << (n / 2)) - 1)
}

/// `s·As` as an integer, for a dense 0/1 matrix.
fn quadratic_form(a: &[Vec<u64>], s: u64, n: usize) -> u64 {
    let bit = |i: usize| (s >> (n - 1 - i)) & 1;
    (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| bit(i) * a[i][j] * bit(j)).sum()
}

fn mat_vec_u64(a: &[Vec<u64>], s: u64, n: usize) -> u64 {
    let bit = |i: usize| (s >> (n - 1 - i)) & 1;
    (0..n).fold(0, |acc, i| {
        let row = (0..n).map(|j| a[i][j] * bit(j)).sum::<u64>() % 2;
        acc | (row << (n - 1 - i))
    })
}

fn half_swap_matrix(n: usize) -> Vec<Vec<u64>> {
    let h = n / 2;
    (0..n).map(|i| (0..n).map(|j| u64::from(j == (i + h) % n)).collect()).collect()
}

#[test]
fn criterion_01_string_sum_identities() {
    let start = Instant::now();
    let mut failures = Vec::new();
    for n in 1..=10 {
        for t in BitString::all(n).unwrap() {
            let w = i64::from(t.weight());
            let avg = stringsum_avg_dot(&t, DEFAULT_EXHAUSTIVE_THRESHOLD).unwrap();
            if avg != Rational::new(w, 2) {
                failures.push(format!("average-dot n={n} t={t}: {avg}"));
            }
            let parity = stringsum_parity(&t, DEFAULT_EXHAUSTIVE_THRESHOLD).unwrap();
            if parity != Rational::from_integer(i64::from(w == 0)) {
                failures.push(format!("parity n={n} t={t}: {parity}"));
            }
        }
        let double = stringsum_double_avg(n, DEFAULT_EXHAUSTIVE_THRESHOLD).unwrap();
        if double != Rational::new(n as i64, 4) {
            failures.push(format!("double-average n={n}: {double}"));
        }
    }
    finish(1, "string-sum identities, n ≤ 10, exact", &failures, start.elapsed(), Some(Duration::from_secs(10)));
}

#[test]
fn criterion_02_half_swap_decomposition() {
    let start = Instant::now();
    let mut failures = Vec::new();
    for n in [2usize, 4, 6] {
        if !check_r_decomposition(n, DEFAULT_EXHAUSTIVE_THRESHOLD).unwrap() {
            failures.push(format!("library check fails at n={n}"));
        }
        let dot = |a: u64, b: u64| popcount_parity(a & b);
        for s in 0..1u64 << n {
            for u in 0..1u64 << n {
                let x = s ^ u;
                let lhs = dot(swap_u64(x, n), s) ^ dot(swap_u64(half_a_u64(x, n), n), half_b_u64(x, n));
                let rhs = dot(swap_u64(half_b_u64(s, n), n), half_a_u64(s, n))
                    ^ dot(swap_u64(half_a_u64(u, n), n), half_b_u64(u, n));
                if lhs != rhs {
                    failures.push(format!("n={n} s={s:0n$b} u={u:0n$b}"));
                }
            }
        }
    }
    finish(2, "half-swap decomposition, n ∈ {2,4,6}", &failures, start.elapsed(), Some(Duration::from_secs(5)));
}

#[test]
fn criterion_03_pairing_identity() {
    let start = Instant::now();
    let mut failures = Vec::new();
    for n in [2usize, 4, 6] {
        let check = PhaseFunction::quadratic(AdjacencyMatrix::swap_halves(n).unwrap())
            .check_property(DEFAULT_EXHAUSTIVE_THRESHOLD)
            .unwrap();
        if let Some((s, t)) = check.counterexample {
            failures.push(format!("library check fails at n={n}: s={s} t={t}"));
        }
        let a = half_swap_matrix(n);
        let phase = |s: u64| (quadratic_form(&a, s, n) / 2) % 2;
        for s in 0..1u64 << n {
            for t in 0..1u64 << n {
                let st = s ^ t;
                let lhs = (phase(s) + phase(t)) % 2;
                let rhs = (phase(st) + popcount_parity(s & mat_vec_u64(&a, st, n))) % 2;
                if lhs != rhs {
                    failures.push(format!("n={n} s={s:0n$b} t={t:0n$b}"));
                }
            }
        }
    }
    finish(3, "pairing identity for the half-swap graph, n ∈ {2,4,6}", &failures, start.elapsed(), None);
}

/// Single-pair graph-state correlations `⟨a⊗b⟩`, with each basis written as
/// a vector over (X, Z); the state gives `⟨XZ⟩ = ⟨ZX⟩ = 1`, `⟨XX⟩ = ⟨ZZ⟩ = 0`.
fn basis_vector(symbol: Symbol) -> [f64; 2] {
    match symbol {
        Symbol::X => [1.0, 0.0],
        Symbol::Z => [0.0, 1.0],
        Symbol::D => [1.0 / SQRT_2, 1.0 / SQRT_2],
        Symbol::E => [1.0 / SQRT_2, -1.0 / SQRT_2],
    }
}

fn pair_correlation(a: Symbol, b: Symbol) -> f64 {
    let (u, v) = (basis_vector(a), basis_vector(b));
    u[0] * v[1] + u[1] * v[0]
}

fn my_symbol(kind: &QuestionKind, k: usize) -> Symbol {
    match kind {
        QuestionKind::X => Symbol::X,
        QuestionKind::Z => Symbol::Z,
        QuestionKind::D => Symbol::D,
        QuestionKind::Xj(j) | QuestionKind::Zj(j) => {
            if bit_of(k, *j) {
                Symbol::X
            } else {
                Symbol::Z
            }
        }
        QuestionKind::Spp(q) => q[k - 1],
    }
}

fn uniform(symbol: Symbol, m: usize) -> QuestionKind {
    QuestionKind::Spp(vec![symbol; m])
}

#[test]
fn criterion_04_honest_correlations() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let allowed = [1.0, 0.0, 1.0 / SQRT_2];
    for m in 1..=3 {
        let s = honest_my_strategy(m).unwrap();
        for (qa, qb, k) in my_required_correlations(m).unwrap() {
            let measured = s.correlation(&qa, k, &qb, k).unwrap();
            let ideal = pair_correlation(my_symbol(&qa, k), my_symbol(&qb, k));
            if !allowed.iter().any(|v| (v - ideal).abs() < EXACT_TOL) {
                failures.push(format!("MY m={m} {qa}/{qb} k={k}: ideal {ideal} outside {{1, 0, 1/√2}}"));
            }
            if (measured - ideal).abs() > EXACT_TOL {
                failures.push(format!("MY m={m} {qa}/{qb} k={k}: {measured} vs {ideal}"));
            }
        }
        let report = epsilon_my(&s).unwrap();
        if report.eps > EXACT_TOL {
            failures.push(format!("MY m={m}: reported ε = {}", report.eps));
        }

        let s = honest_spp_strategy(m).unwrap();
        let corr = |a: Symbol, b: Symbol, k: usize| s.correlation(&uniform(a, m), k, &uniform(b, m), k).unwrap();
        for k in 1..=m {
            let ab = corr(Symbol::X, Symbol::D, k) - corr(Symbol::X, Symbol::E, k)
                + corr(Symbol::Z, Symbol::D, k)
                + corr(Symbol::Z, Symbol::E, k);
            let ba = corr(Symbol::D, Symbol::X, k) - corr(Symbol::E, Symbol::X, k)
                + corr(Symbol::D, Symbol::Z, k)
                + corr(Symbol::E, Symbol::Z, k);
            for (name, value) in [("A-B", ab), ("B-A", ba)] {
                if (value - 2.0 * SQRT_2).abs() > EXACT_TOL {
                    failures.push(format!("SPP m={m} k={k} CHSH {name}: {value}"));
                }
            }
        }
        let report = epsilon_spp(&s).unwrap();
        for e in &report.entries {
            if (e.measured - e.ideal).abs() > EXACT_TOL {
                failures.push(format!("SPP m={m} {} {}/{} k={}: {}", e.kind, e.alice, e.bob, e.k, e.measured));
            }
        }
        let matches = report.entries.iter().filter(|e| e.kind == "corr").count();
        if matches == 0 || report.entries.iter().filter(|e| e.kind == "corr").any(|e| e.ideal != 1.0) {
            failures.push(format!("SPP m={m}: match entries missing or with wrong ideal"));
        }
        if report.eps > EXACT_TOL {
            failures.push(format!("SPP m={m}: reported ε = {}", report.eps));
        }
    }
    finish(4, "honest correlations, m ∈ {1,2,3}", &failures, start.elapsed(), None);
}

/// Winning probability of a single sub-test, summed over the joint answer
/// distributions of every allowed pair.
fn brute_force_win_probability(s: &Strategy) -> f64 {
    let total: f64 = GAME_PAIRS
        .iter()
        .map(|&(a, b)| {
            s.joint_distribution(&uniform(a, 1), &uniform(b, 1))
                .unwrap()
                .into_iter()
                .filter(|(x, y, _)| win_predicate(a, b, x[0], y[0]).unwrap())
                .map(|(_, _, p)| p)
                .sum::<f64>()
        })
        .sum();
    total / GAME_PAIRS.len() as f64
}

#[test]
fn criterion_05_game_value() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let optimum = (2.0 * SQRT_2 + 1.0) / 5.0;
    if (game_optimum() - optimum).abs() > EXACT_TOL {
        failures.push(format!("optimum constant {}", game_optimum()));
    }

    let single = honest_spp_strategy(1).unwrap();
    let win = brute_force_win_probability(&single);
    let cos_sq = (std::f64::consts::PI / 8.0).cos().powi(2);
    let expected_win = (1.0 + optimum) / 2.0;
    if (win - expected_win).abs() > EXACT_TOL {
        failures.push(format!("brute-force winning probability {win} vs {expected_win}"));
    }
    // 8 CHSH-type pairs win with cos²(π/8) and the 2 matching pairs always win
    if (win - (8.0 * cos_sq + 2.0) / 10.0).abs() > EXACT_TOL {
        failures.push(format!("winning probability {win} is not the cos² mixture"));
    }

    for m in 1..=2 {
        let s = honest_spp_strategy(m).unwrap();
        let exact = game_expectation_exact(&s).unwrap();
        if (exact - optimum).abs() > EXACT_TOL {
            failures.push(format!("m={m}: exact E(A) = {exact}"));
        }
        let rounds = 100_000;
        let summary = summarize(&sample_game(&s, rounds, 20_240_917 + m as u64).unwrap());
        let sigma = ((1.0 - optimum * optimum) / rounds as f64).sqrt();
        if (summary.mean - optimum).abs() > SIGMAS * sigma {
            failures.push(format!(
                "m={m}: Monte Carlo mean {} is {:.2}σ away",
                summary.mean,
                (summary.mean - optimum).abs() / sigma
            ));
        }
    }
    finish(5, "game value exact and sampled, m ∈ {1,2}", &failures, start.elapsed(), None);
}

#[test]
fn criterion_06_referee_expectation() {
    let start = Instant::now();
    let mut failures = Vec::new();
    for m in 1..=6usize {
        if !referee_expectation_check(m).unwrap() {
            failures.push(format!("library check fails at m={m}"));
        }
        for code in 0..1u32 << m {
            let accepts: Vec<i8> = (0..m).map(|k| if (code >> k) & 1 == 1 { -1 } else { 1 }).collect();
            let sum: i64 = accepts.iter().map(|&a| i64::from(a)).sum();
            let value = threshold_referee_value(&accepts);
            if value != Ratio::new(sum, m as i64) {
                failures.push(format!("m={m} {accepts:?}: {value}"));
            }
        }
    }
    finish(6, "referee expectation is the sub-test average, m ≤ 6", &failures, start.elapsed(), None);
}

#[test]
fn criterion_07_zero_noise_exactness() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut m2_time = Duration::ZERO;
    for m in 1..=2usize {
        let t0 = Instant::now();
        for flavor in [TestFlavor::My, TestFlavor::Spp] {
            let s = match flavor {
                TestFlavor::My => honest_my_strategy(m).unwrap(),
                TestFlavor::Spp => honest_spp_strategy(m).unwrap(),
            };
            let n = 2 * m;
            let plan = IsometryPlan::new(&s, flavor).unwrap();
            let junk = plan.junk().unwrap();
            let pairs = select_pairs(n, PairSelection::Exhaustive, 0).unwrap();
            if pairs.len() != 1 << (2 * n) {
                failures.push(format!("{flavor} m={m}: {} pairs enumerated", pairs.len()));
            }
            let worst = pairs
                .iter()
                .map(|(p, q)| plan.distance(&junk, p, q, AncillaLayout::IdealOnU).unwrap())
                .fold(0.0, f64::max);
            if worst >= STATE_TOL {
                failures.push(format!("{flavor} m={m}: max distance {worst:e}"));
            }
        }
        if m == 2 {
            m2_time = t0.elapsed();
        }
    }
    finish(7, "zero-noise isometry distance < 1e-9, m ∈ {1,2}", &failures, m2_time, Some(Duration::from_secs(60)));
    println!("      total {:.2?}", start.elapsed());
}

#[test]
fn criterion_08_bound_dominance() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let honest = honest_my_strategy(1).unwrap();
    let (mut vacuous, mut checked) = (0usize, 0usize);
    for seed in 0..100u64 {
        let noise = NoiseSpec::random(0.05, 0.02, seed);
        let s = perturb_strategy(&honest, &noise).unwrap();
        let eps = epsilon_my(&s).unwrap().eps;
        let v = verify_bound(&s, TestFlavor::My, PairSelection::Exhaustive, seed).unwrap();
        if (v.eps - eps).abs() > EXACT_TOL {
            failures.push(format!("seed {seed}: report ε {} vs measured {eps}", v.eps));
        }
        for r in &v.reports {
            checked += 1;
            let w = r.p.weight() as usize;
            let printed = theorem1_bound(2, w, eps).unwrap().value;
            let recomputed = theorem1_recomputed_bound(2, w, eps).unwrap().value;
            let limit = printed.max(recomputed);
            if r.distance > limit {
                failures.push(format!("seed {seed} p={} q={}: {} > {limit}", r.p, r.q, r.distance));
            }
            if limit > VACUOUS_ABOVE {
                vacuous += 1;
            }
            for b in &r.bounds {
                if b.vacuous != (b.value > VACUOUS_ABOVE) {
                    failures.push(format!("seed {seed}: {} flagged vacuous={} at {}", b.name, b.vacuous, b.value));
                }
            }
        }
    }
    finish(8, "bounds dominate noisy isometry distances, 100 strategies", &failures, start.elapsed(), None);
    println!("      {checked} (p, q) checks, {vacuous} against a vacuous bound");
}

fn zero_bundle() -> EpsilonBundle {
    EpsilonBundle::default()
}

fn with_arg(arg: usize, x: f64) -> EpsilonBundle {
    let mut e = EpsilonBundle::default();
    match arg {
        0 => e.eps = x,
        1 => e.eps1 = x,
        2 => e.eps2 = x,
        3 => e.eps3 = x,
        4 => e.eps4 = x,
        _ => e.delta = x,
    }
    e
}

/// Floating-point slack for "nondecreasing": a few ulps of the larger value.
fn ulps(x: f64) -> f64 {
    4.0 * f64::EPSILON * x.abs()
}

#[test]
fn criterion_09_bound_calculus() {
    let start = Instant::now();
    let mut failures = Vec::new();
    for n in [2usize, 4] {
        for w in 0..=n {
            for name in BoundName::ALL {
                let v = evaluate_bound(name, n, w, &zero_bundle()).unwrap().value;
                if v != 0.0 {
                    failures.push(format!("{name} n={n} w={w}: {v} at zero error"));
                }
            }
        }
    }

    let grid: Vec<f64> = (0..10).map(|i| 1e-6 * 10f64.powf(i as f64 * 5.0 / 9.0)).collect();
    for n in [2usize, 4] {
        for w in 0..=n {
            for name in BoundName::ALL {
                for arg in 0..6 {
                    let values: Vec<f64> =
                        grid.iter().map(|&x| evaluate_bound(name, n, w, &with_arg(arg, x)).unwrap().value).collect();
                    if values.iter().any(|v| *v < 0.0 || !v.is_finite()) {
                        failures.push(format!("{name} n={n} w={w} arg {arg}: negative or non-finite"));
                    }
                    if values.windows(2).any(|p| p[1] < p[0] - ulps(p[0])) {
                        failures.push(format!("{name} n={n} w={w} arg {arg}: decreasing {values:?}"));
                    }
                }
            }
        }
        for name in BoundName::ALL {
            let e = EpsilonBundle { eps: 1e-4, eps1: 1e-3, eps2: 2e-3, eps3: 3e-3, eps4: 1e-3, delta: 1e-5 };
            let by_weight: Vec<f64> = (0..=n).map(|w| evaluate_bound(name, n, w, &e).unwrap().value).collect();
            if by_weight.windows(2).any(|p| p[1] < p[0] - ulps(p[0])) {
                failures.push(format!("{name} n={n}: decreasing in weight {by_weight:?}"));
            }
        }
    }

    for n in [2usize, 4] {
        for (a, b) in [(0.01, 0.02), (1e-5, 0.3), (0.25, 0.0)] {
            let closed = 2.0 * f64::sqrt(a) + f64::sqrt(2.0 * (a + b));
            for p in BitString::all(n).unwrap() {
                let v = graphstate_bound(n, &p, |_, _| Ok(a), |_| Ok(b), DEFAULT_EXHAUSTIVE_THRESHOLD).unwrap().value;
                if (v - closed).abs() > EXACT_TOL {
                    failures.push(format!("constant graphstate n={n} p={p} a={a} b={b}: {v} vs {closed}"));
                }
            }
        }
        let e = EpsilonBundle { eps1: 0.01, eps2: 0.01, eps3: 0.01, ..Default::default() };
        let scale = 1.0 / 2f64.powi(2 * n as i32 - 1);
        let all: Vec<BitString> = BitString::all(n).unwrap().collect();
        for p in &all {
            let mut first = 0.0;
            for s in &all {
                for t in &all {
                    first += eps_ac(s, p, &e).unwrap() + eps_ac(s, &p.xor(t).unwrap(), &e).unwrap();
                }
            }
            let mut second = 0.0;
            for t in &all {
                for u in &all {
                    second += eps_ac(t, u, &e).unwrap() + eps_xz(u, &e).unwrap();
                }
            }
            let oracle = (scale * first).sqrt() + (scale * second).sqrt();
            let v = graphstate_bound_from_bundle(n, p, &e, DEFAULT_EXHAUSTIVE_THRESHOLD).unwrap().value;
            if (v - oracle).abs() > EXACT_TOL {
                failures.push(format!("graphstate n={n} p={p}: {v} vs {oracle}"));
            }
        }
    }
    finish(9, "bound calculus: zero, sign, monotonicity, enumeration", &failures, start.elapsed(), None);
}

fn run_cli(config: &std::path::Path, threads: &str) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_selftest-lab"))
        .args(["run", "--config"])
        .arg(config)
        .env("SELFTEST_LAB_THREADS", threads)
        .output()
        .expect("binary runs");
    (out.status.code().unwrap_or(-1), out.stdout)
}

#[test]
fn criterion_10_determinism() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    std::fs::write(
        &config,
        r#"{
  "test": "spp",
  "m": 1,
  "strategy": {"type": "honest-spp", "m": 1, "noise": {"theta": 0.03, "w": 0.01, "seed": 5}},
  "checks": ["isometry", "game", "epsilon", "validate"],
  "seed": 42,
  "rounds": 20000,
  "pairs": "sample:8"
}"#,
    )
    .unwrap();
    let (code_a, first) = run_cli(&config, "1");
    let (code_b, second) = run_cli(&config, "1");
    let (code_c, threaded) = run_cli(&config, "4");
    if first.is_empty() {
        failures.push("empty report".to_string());
    }
    if first != second {
        failures.push("repeated single-thread runs differ".to_string());
    }
    if first != threaded {
        failures.push("thread count changes the report".to_string());
    }
    if code_a != code_b || code_a != code_c {
        failures.push(format!("exit codes {code_a}, {code_b}, {code_c}"));
    }
    finish(10, "identical seeds give byte-identical reports", &failures, start.elapsed(), None);
}
