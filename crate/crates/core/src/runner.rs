//! Batch front-end: argument and config types, the individual checks, and
//! report rendering shared by the CLI subcommands and `run --config`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::bitstring::{BitString, DEFAULT_EXHAUSTIVE_THRESHOLD};
use crate::bounds::{evaluate_bound, BoundName};
use crate::error::{LabError, Result};
use crate::graph::{AdjacencyMatrix, PhaseFunction};
use crate::isometry::{verify_bound, PairSelection};
use crate::lemmas::{check_r_decomposition, stringsum_avg_dot, stringsum_double_avg, stringsum_parity, Rational};
use crate::protocol::{
    delta_epsilon_from_expectation, epsilon_my, epsilon_spp, game_expectation_exact, game_optimum,
    referee_expectation_check, sample_game, summarize, CorrelationReport, GAME_EXACT_MAX_M,
};
use crate::strategy::{
    perturb_strategy, validate_strategy, EpsilonBundle, NamedKind, NamedStrategy, NoiseSpec, Strategy, StrategySource,
    TestFlavor,
};

/// Tolerance for "equals its ideal value" in honest checks.
pub const EXACT_TOL: f64 = 1e-12;

/// Monte Carlo agreement band, in standard errors.
pub const SAMPLING_SIGMAS: f64 = 4.0;

/// Largest `m` accepted by `honest-check`.
pub const HONEST_CHECK_MAX_M: usize = 3;

/// Largest `m` for the exhaustive referee-lemma check.
pub const REFEREE_MAX_M: usize = 6;

pub fn parse_flavor(s: &str) -> std::result::Result<TestFlavor, String> {
    s.parse().map_err(|e: LabError| e.to_string())
}

/// `auto`, `exhaustive` or `sample:<count>`.
pub fn parse_pairs(s: &str) -> Result<PairSelection> {
    match s {
        "auto" => Ok(PairSelection::Auto),
        "exhaustive" => Ok(PairSelection::Exhaustive),
        _ => s
            .strip_prefix("sample:")
            .and_then(|k| k.parse::<usize>().ok())
            .filter(|k| *k > 0)
            .map(PairSelection::Sample)
            .ok_or_else(|| LabError::Parse(format!("pair selection '{s}' is not auto, exhaustive or sample:<count>"))),
    }
}

/// A rectangular table written by `--csv`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| LabError::Io(e.to_string()))?;
        w.write_record(&self.header).map_err(|e| LabError::Io(e.to_string()))?;
        for row in &self.rows {
            w.write_record(row).map_err(|e| LabError::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Rounds to 15 significant digits.
pub fn round15(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.14e}").parse().unwrap_or(x)
}

fn fmt_float(x: f64) -> String {
    format!("{}", round15(x))
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

/// Replaces every float in `v` by its 15-significant-digit rounding.
pub fn round_floats(v: &mut Value) {
    match v {
        Value::Number(num) if num.is_f64() => {
            let x = round15(num.as_f64().unwrap_or_default());
            if let Some(n) = serde_json::Number::from_f64(x) {
                *num = n;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

/// Output of one check or subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub passed: bool,
    pub result: Value,
    pub csv: CsvTable,
}

/// The JSON document printed for a command.
pub fn render_report(command: &str, config_sha256: &str, section: &Section) -> Result<String> {
    let mut doc = json!({
        "tool": "selftest-lab",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config_sha256": config_sha256,
        "passed": section.passed,
        "result": section.result,
    });
    round_floats(&mut doc);
    let mut out = serde_json::to_string_pretty(&doc)?;
    out.push('\n');
    Ok(out)
}

pub fn sha256_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn to_value<T: Serialize>(x: &T) -> Result<Value> {
    Ok(serde_json::to_value(x)?)
}

// ---------------------------------------------------------------------------
// strategy selection

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct StrategyArgs {
    /// `honest-my`, `honest-spp`, or a path to a strategy JSON file.
    #[arg(long, default_value = "honest-my")]
    pub strategy: String,
    /// Number of e-bits for named strategies.
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    /// Measurement rotation for both parties.
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub theta_alice: Option<f64>,
    #[arg(long)]
    pub theta_bob: Option<f64>,
    /// Weight of the random state admixture.
    #[arg(long, default_value_t = 0.0)]
    pub w: f64,
    #[arg(long, default_value_t = 0)]
    pub noise_seed: u64,
}

impl StrategyArgs {
    fn noise(&self) -> NoiseSpec {
        let both = self.theta.unwrap_or(0.0);
        NoiseSpec {
            theta_alice: self.theta_alice.unwrap_or(both),
            theta_bob: self.theta_bob.unwrap_or(both),
            w: self.w,
            seed: self.noise_seed,
        }
    }

    /// The strategy plus the bytes that identify it for hashing.
    pub fn load(&self) -> Result<(Strategy, Vec<u8>)> {
        let named = match self.strategy.as_str() {
            "honest-my" => Some(NamedKind::HonestMy),
            "honest-spp" => Some(NamedKind::HonestSpp),
            _ => None,
        };
        match named {
            Some(kind) => {
                let src = StrategySource::Named(NamedStrategy { kind, m: self.m, noise: Some(self.noise()) });
                Ok((src.build()?, Vec::new()))
            }
            None => {
                let bytes = fs::read(&self.strategy)
                    .map_err(|e| LabError::Io(format!("cannot read strategy file {}: {e}", self.strategy)))?;
                let src: StrategySource = serde_json::from_slice(&bytes)?;
                Ok((perturb_strategy(&src.build()?, &self.noise())?, bytes))
            }
        }
    }
}

/// A strategy inside a run config: named, explicit, or a file reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StrategyRef {
    File { file: PathBuf },
    Inline(StrategySource),
}

impl StrategyRef {
    fn load(&self, base_dir: &Path) -> Result<Strategy> {
        match self {
            StrategyRef::Inline(src) => src.build(),
            StrategyRef::File { file } => {
                let path = base_dir.join(file);
                let bytes = fs::read(&path)
                    .map_err(|e| LabError::Io(format!("cannot read strategy file {}: {e}", path.display())))?;
                serde_json::from_slice::<StrategySource>(&bytes)?.build()
            }
        }
    }
}

// ---------------------------------------------------------------------------
// lemma checks

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct LemmaArgs {
    /// String-sum identities are checked for n = 1 … max-n.
    #[arg(long, default_value_t = DEFAULT_EXHAUSTIVE_THRESHOLD)]
    pub max_n: usize,
    /// Even sizes for the half-swap decomposition and the pairing identity.
    #[arg(long, value_delimiter = ',', default_values_t = vec![2usize, 4, 6])]
    pub even_n: Vec<usize>,
    /// Refuse exhaustive enumerations above this n.
    #[arg(long, default_value_t = DEFAULT_EXHAUSTIVE_THRESHOLD)]
    pub threshold: usize,
    /// Test hook: replaces the phase function with a constant.
    #[arg(long, hide = true)]
    #[serde(default)]
    pub inject_corrupt_phase: bool,
}

impl Default for LemmaArgs {
    fn default() -> Self {
        Self {
            max_n: DEFAULT_EXHAUSTIVE_THRESHOLD,
            even_n: vec![2, 4, 6],
            threshold: DEFAULT_EXHAUSTIVE_THRESHOLD,
            inject_corrupt_phase: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct LemmaResult {
    name: &'static str,
    n: usize,
    passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    counterexample: Option<String>,
}

pub fn check_lemmas(args: &LemmaArgs) -> Result<Section> {
    if let Some(n) = args.even_n.iter().find(|n| *n % 2 != 0 || **n == 0) {
        return Err(LabError::OddLength(*n));
    }
    if args.max_n == 0 {
        return Err(LabError::InvalidArgument("max-n must be at least 1".into()));
    }
    let mut results = Vec::new();
    for n in 1..=args.max_n {
        let mut avg_ok = true;
        let mut parity_ok = true;
        let mut first_bad = None;
        for t in BitString::all(n)? {
            if stringsum_avg_dot(&t, args.threshold)? != Rational::new(i64::from(t.weight()), 2) {
                avg_ok = false;
                first_bad.get_or_insert_with(|| t.to_string());
            }
            let expected = if t.weight() == 0 { 1 } else { 0 };
            if stringsum_parity(&t, args.threshold)? != Rational::from_integer(expected) {
                parity_ok = false;
                first_bad.get_or_insert_with(|| t.to_string());
            }
        }
        let double_ok = stringsum_double_avg(n, args.threshold)? == Rational::new(n as i64, 4);
        results.push(LemmaResult {
            name: "average-dot",
            n,
            passed: avg_ok,
            counterexample: if avg_ok { None } else { first_bad.clone() },
        });
        results.push(LemmaResult { name: "double-average", n, passed: double_ok, counterexample: None });
        results.push(LemmaResult {
            name: "parity",
            n,
            passed: parity_ok,
            counterexample: if parity_ok { None } else { first_bad },
        });
    }
    for &n in &args.even_n {
        results.push(LemmaResult {
            name: "half-swap-decomposition",
            n,
            passed: check_r_decomposition(n, args.threshold)?,
            counterexample: None,
        });
        let r = AdjacencyMatrix::swap_halves(n)?;
        let phase =
            if args.inject_corrupt_phase { PhaseFunction::custom(r, |_| 0) } else { PhaseFunction::quadratic(r) };
        let check = phase.check_property(args.threshold)?;
        results.push(LemmaResult {
            name: "pairing-identity",
            n,
            passed: check.holds(),
            counterexample: check.counterexample.map(|(s, t)| format!("s={s} t={t}")),
        });
    }
    let mut csv = CsvTable::new(&["name", "n", "passed", "counterexample"]);
    for r in &results {
        csv.rows.push(vec![
            r.name.into(),
            r.n.to_string(),
            r.passed.to_string(),
            r.counterexample.clone().unwrap_or_default(),
        ]);
    }
    Ok(Section { passed: results.iter().all(|r| r.passed), result: json!({ "checks": to_value(&results)? }), csv })
}

// ---------------------------------------------------------------------------
// correlations and honest behaviour

fn correlation_csv(report: &CorrelationReport) -> CsvTable {
    let mut csv = CsvTable::new(&["test", "m", "kind", "alice", "bob", "k", "measured", "ideal", "deviation"]);
    for e in &report.entries {
        csv.rows.push(vec![
            report.test.to_string(),
            report.m.to_string(),
            e.kind.clone(),
            e.alice.clone(),
            e.bob.clone(),
            e.k.to_string(),
            fmt_float(e.measured),
            fmt_float(e.ideal),
            fmt_float(e.deviation),
        ]);
    }
    csv
}

pub fn epsilon_report(s: &Strategy, flavor: TestFlavor) -> Result<CorrelationReport> {
    match flavor {
        TestFlavor::My => epsilon_my(s),
        TestFlavor::Spp => epsilon_spp(s),
    }
}

/// Correlation deviations; passes when `ε ≤ max_eps` (always, if unset).
pub fn check_epsilon(s: &Strategy, flavor: TestFlavor, max_eps: Option<f64>) -> Result<Section> {
    let report = epsilon_report(s, flavor)?;
    let passed = max_eps.is_none_or(|limit| report.eps <= limit);
    let mut result = to_value(&report)?;
    result["max_eps"] = to_value(&max_eps)?;
    Ok(Section { passed, csv: correlation_csv(&report), result })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct HonestArgs {
    #[arg(long, value_parser = parse_flavor)]
    pub test: TestFlavor,
    #[arg(long, default_value_t = 1)]
    pub m: usize,
}

pub fn check_honest(args: &HonestArgs) -> Result<Section> {
    if args.m == 0 || args.m > HONEST_CHECK_MAX_M {
        return Err(LabError::InvalidArgument(format!("honest-check supports 1 ≤ m ≤ {HONEST_CHECK_MAX_M}")));
    }
    let kind = match args.test {
        TestFlavor::My => NamedKind::HonestMy,
        TestFlavor::Spp => NamedKind::HonestSpp,
    };
    let s = StrategySource::Named(NamedStrategy { kind, m: args.m, noise: None }).build()?;
    let validation = validate_strategy(&s);
    let report = epsilon_report(&s, args.test)?;
    let mut passed = validation.passed() && report.eps <= EXACT_TOL;
    let mut result = json!({
        "test": args.test,
        "m": args.m,
        "eps": report.eps,
        "validation": to_value(&validation)?,
        "entries": to_value(&report.entries)?,
    });
    if args.test == TestFlavor::Spp {
        let e = game_expectation_exact(&s)?;
        let (delta, eps) = delta_epsilon_from_expectation(e, args.m);
        passed &= (e - game_optimum()).abs() <= EXACT_TOL;
        result["game"] = json!({ "E": e, "optimum": game_optimum(), "delta": delta, "eps": eps });
    }
    Ok(Section { passed, result, csv: correlation_csv(&report) })
}

// ---------------------------------------------------------------------------
// bounds

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct BoundsArgs {
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub weight_p: usize,
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.0)]
    pub eps1: f64,
    #[arg(long, default_value_t = 0.0)]
    pub eps2: f64,
    #[arg(long, default_value_t = 0.0)]
    pub eps3: f64,
    #[arg(long, default_value_t = 0.0)]
    pub eps4: f64,
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    /// A bound name or `all`.
    #[arg(long, default_value = "all")]
    pub bound: String,
}

pub fn check_bounds(args: &BoundsArgs) -> Result<Section> {
    let bundle = EpsilonBundle {
        eps: args.eps,
        eps1: args.eps1,
        eps2: args.eps2,
        eps3: args.eps3,
        eps4: args.eps4,
        delta: args.delta,
    }
    .validated()?;
    let names: Vec<BoundName> = if args.bound == "all" { BoundName::ALL.to_vec() } else { vec![args.bound.parse()?] };
    let reports = names
        .iter()
        .filter(|name| !(**name == BoundName::Graphstate && args.n > DEFAULT_EXHAUSTIVE_THRESHOLD))
        .map(|name| evaluate_bound(*name, args.n, args.weight_p, &bundle))
        .collect::<Result<Vec<_>>>()?;
    let mut csv = CsvTable::new(&["name", "n", "weight_p", "value", "vacuous"]);
    for r in &reports {
        csv.rows.push(vec![
            r.name.to_string(),
            r.n.to_string(),
            r.weight_p.to_string(),
            fmt_float(r.value),
            r.vacuous.to_string(),
        ]);
    }
    Ok(Section { passed: true, result: json!({ "bounds": to_value(&reports)? }), csv })
}

// ---------------------------------------------------------------------------
// isometry

pub fn check_isometry(s: &Strategy, flavor: TestFlavor, pairs: PairSelection, seed: u64) -> Result<Section> {
    let v = verify_bound(s, flavor, pairs, seed)?;
    let mut csv = CsvTable::new(&["p", "q", "weight_p", "distance", "bound", "vacuous", "passed"]);
    for r in &v.reports {
        let limit = r.bounds.iter().map(|b| b.value).fold(0.0, f64::max);
        csv.rows.push(vec![
            r.p.to_string(),
            r.q.to_string(),
            r.p.weight().to_string(),
            fmt_float(r.distance),
            fmt_float(limit),
            r.bounds.iter().all(|b| b.vacuous).to_string(),
            r.passed.to_string(),
        ]);
    }
    Ok(Section { passed: v.passed, result: to_value(&v)?, csv })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub strategy: StrategyArgs,
    #[arg(long, value_parser = parse_flavor)]
    pub test: TestFlavor,
    /// `auto`, `exhaustive` or `sample:<count>`.
    #[arg(long, default_value = "auto")]
    pub pairs: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

// ---------------------------------------------------------------------------
// game

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct GameArgs {
    #[command(flatten)]
    pub strategy: StrategyArgs,
    #[arg(long, default_value_t = 100_000)]
    pub rounds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Exact expectation when enumerable, plus a seeded Monte Carlo estimate
/// that must land within four standard errors of it.
pub fn check_game(s: &Strategy, rounds: usize, seed: u64) -> Result<Section> {
    let exact = if s.m() <= GAME_EXACT_MAX_M { Some(game_expectation_exact(s)?) } else { None };
    let mut result = json!({ "m": s.m(), "optimum": game_optimum() });
    let mut passed = true;
    let mut csv = CsvTable::new(&["m", "exact", "delta", "eps", "rounds", "mean", "std_error", "z"]);
    let mut row = vec![
        s.m().to_string(),
        fmt_opt(exact),
        String::new(),
        String::new(),
        rounds.to_string(),
        String::new(),
        String::new(),
        String::new(),
    ];
    if let Some(e) = exact {
        let (delta, eps) = delta_epsilon_from_expectation(e, s.m());
        result["exact"] = json!({ "E": e, "delta": delta, "eps": eps });
        row[2] = fmt_float(delta);
        row[3] = fmt_float(eps);
    }
    if rounds > 0 {
        let summary = summarize(&sample_game(s, rounds, seed)?);
        let mut sampled = to_value(&summary)?;
        if let Some(e) = exact {
            let sigma = ((1.0 - e * e).max(0.0) / rounds as f64).sqrt();
            let diff = (summary.mean - e).abs();
            let z = if sigma > 0.0 {
                diff / sigma
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            passed = z <= SAMPLING_SIGMAS;
            sampled["z"] = json!(z);
            row[7] = fmt_float(z);
        }
        sampled["seed"] = json!(seed);
        result["sampled"] = sampled;
        row[5] = fmt_float(summary.mean);
        row[6] = fmt_float(summary.std_error);
    }
    csv.rows.push(row);
    Ok(Section { passed, result, csv })
}

pub fn check_referee(max_m: usize) -> Result<Section> {
    let mut results = BTreeMap::new();
    for m in 1..=max_m {
        results.insert(m.to_string(), referee_expectation_check(m)?);
    }
    let mut csv = CsvTable::new(&["m", "passed"]);
    for (m, ok) in &results {
        csv.rows.push(vec![m.clone(), ok.to_string()]);
    }
    Ok(Section { passed: results.values().all(|x| *x), result: json!({ "by_m": results }), csv })
}

// ---------------------------------------------------------------------------
// noise sweep

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum NoiseParty {
    Alice,
    Bob,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct SweepArgs {
    #[arg(long, value_parser = parse_flavor)]
    pub test: TestFlavor,
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    /// Rotation angles to visit.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.01, 0.02, 0.03, 0.04, 0.05])]
    pub thetas: Vec<f64>,
    #[arg(long, value_enum, default_value_t = NoiseParty::Both)]
    pub party: NoiseParty,
    #[arg(long, default_value_t = 0.0)]
    pub w: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "auto")]
    pub pairs: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct SweepRow {
    theta_alice: f64,
    theta_bob: f64,
    w: f64,
    eps: f64,
    delta: Option<f64>,
    max_distance: f64,
    worst_p: BitString,
    worst_q: BitString,
    printed_bound: f64,
    recomputed_bound: Option<f64>,
    game_bound: Option<f64>,
    vacuous: bool,
    passed: bool,
}

pub fn check_sweep(args: &SweepArgs) -> Result<Section> {
    let pairs = parse_pairs(&args.pairs)?;
    let base = StrategySource::Named(NamedStrategy {
        kind: match args.test {
            TestFlavor::My => NamedKind::HonestMy,
            TestFlavor::Spp => NamedKind::HonestSpp,
        },
        m: args.m,
        noise: None,
    })
    .build()?;
    let n = 2 * args.m;
    let mut rows = Vec::new();
    for &theta in &args.thetas {
        let noise = NoiseSpec {
            theta_alice: if args.party == NoiseParty::Bob { 0.0 } else { theta },
            theta_bob: if args.party == NoiseParty::Alice { 0.0 } else { theta },
            w: args.w,
            seed: args.seed,
        };
        let s = perturb_strategy(&base, &noise)?;
        let v = verify_bound(&s, args.test, pairs, args.seed)?;
        let worst = v
            .reports
            .iter()
            .max_by(|a, b| a.distance.total_cmp(&b.distance))
            .ok_or_else(|| LabError::Internal("no pairs selected".into()))?;
        let weight = worst.p.weight() as usize;
        let find = |name: BoundName| worst.bounds.iter().find(|b| b.name == name).map(|b| b.value);
        let (printed, recomputed) = match args.test {
            TestFlavor::My => (find(BoundName::Theorem1).unwrap_or(f64::NAN), find(BoundName::Theorem1Recomputed)),
            TestFlavor::Spp => (find(BoundName::Spp).unwrap_or(f64::NAN), None),
        };
        let (delta, game) = if args.test == TestFlavor::Spp && args.m <= GAME_EXACT_MAX_M {
            let (delta, _) = delta_epsilon_from_expectation(game_expectation_exact(&s)?, args.m);
            (Some(delta), Some(crate::bounds::game_bound(n, weight, delta)?.value))
        } else {
            (None, None)
        };
        let largest = printed.max(recomputed.unwrap_or(0.0));
        rows.push(SweepRow {
            theta_alice: noise.theta_alice,
            theta_bob: noise.theta_bob,
            w: noise.w,
            eps: v.eps,
            delta,
            max_distance: v.max_distance,
            worst_p: worst.p,
            worst_q: worst.q,
            printed_bound: printed,
            recomputed_bound: recomputed,
            game_bound: game,
            vacuous: largest > crate::bounds::VACUOUS_ABOVE,
            passed: v.passed,
        });
    }
    let mut csv = CsvTable::new(&[
        "test",
        "m",
        "theta_alice",
        "theta_bob",
        "w",
        "eps",
        "delta",
        "max_distance",
        "worst_p",
        "worst_q",
        "printed_bound",
        "recomputed_bound",
        "game_bound",
        "vacuous",
        "passed",
    ]);
    for r in &rows {
        csv.rows.push(vec![
            args.test.to_string(),
            args.m.to_string(),
            fmt_float(r.theta_alice),
            fmt_float(r.theta_bob),
            fmt_float(r.w),
            fmt_float(r.eps),
            fmt_opt(r.delta),
            fmt_float(r.max_distance),
            r.worst_p.to_string(),
            r.worst_q.to_string(),
            fmt_float(r.printed_bound),
            fmt_opt(r.recomputed_bound),
            fmt_opt(r.game_bound),
            r.vacuous.to_string(),
            r.passed.to_string(),
        ]);
    }
    Ok(Section {
        passed: rows.iter().all(|r| r.passed),
        result: json!({ "test": args.test, "m": args.m, "rows": to_value(&rows)? }),
        csv,
    })
}

// ---------------------------------------------------------------------------
// config-driven runs

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckKind {
    Epsilon,
    Game,
    Isometry,
    Lemmas,
    Referee,
    Validate,
}

impl CheckKind {
    fn name(self) -> &'static str {
        match self {
            CheckKind::Epsilon => "epsilon",
            CheckKind::Game => "game",
            CheckKind::Isometry => "isometry",
            CheckKind::Lemmas => "lemmas",
            CheckKind::Referee => "referee",
            CheckKind::Validate => "validate",
        }
    }
}

fn default_pairs() -> String {
    "auto".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub test: TestFlavor,
    pub m: usize,
    pub strategy: StrategyRef,
    pub checks: Vec<CheckKind>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Monte Carlo rounds for the game check; 0 skips sampling.
    #[serde(default)]
    pub rounds: usize,
    #[serde(default = "default_pairs")]
    pub pairs: String,
    /// Upper limit asserted on the measured `ε`.
    #[serde(default)]
    pub max_eps: Option<f64>,
    #[serde(default)]
    pub lemmas: Option<LemmaArgs>,
    /// JSON report path, relative to the config file; stdout if absent.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub csv: Option<PathBuf>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(LabError::InvalidArgument("m must be at least 1".into()));
        }
        if self.checks.is_empty() {
            return Err(LabError::InvalidArgument("no checks requested".into()));
        }
        let sampling = self.rounds > 0 && self.checks.contains(&CheckKind::Game);
        let sampled_pairs = self.checks.contains(&CheckKind::Isometry) && self.pairs.starts_with("sample:");
        if (sampling || sampled_pairs) && self.seed.is_none() {
            return Err(LabError::InvalidArgument("a seed is required whenever sampling is requested".into()));
        }
        parse_pairs(&self.pairs)?;
        Ok(())
    }
}

/// Parsed config, the directory its relative paths resolve against, and the
/// hash embedded in the report.
pub fn load_config(path: &Path) -> Result<(RunConfig, PathBuf, String)> {
    let bytes = fs::read(path).map_err(|e| LabError::Io(format!("cannot read config {}: {e}", path.display())))?;
    let config: RunConfig = serde_json::from_slice(&bytes)?;
    config.validate()?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let canonical = serde_json::to_vec(&config)?;
    let mut parts: Vec<Vec<u8>> = vec![canonical];
    if let StrategyRef::File { file } = &config.strategy {
        parts.push(fs::read(dir.join(file)).map_err(|e| LabError::Io(format!("cannot read strategy file: {e}")))?);
    }
    let refs: Vec<&[u8]> = parts.iter().map(|p| p.as_slice()).collect();
    Ok((config, dir, sha256_hex(&refs)))
}

/// Runs every requested check; the report lists them by name.
pub fn run_config(config: &RunConfig, base_dir: &Path) -> Result<Section> {
    config.validate()?;
    let s = config.strategy.load(base_dir)?;
    if s.m() != config.m {
        return Err(LabError::InvalidArgument(format!("strategy has m = {}, config says {}", s.m(), config.m)));
    }
    let seed = config.seed.unwrap_or(0);
    let mut checks: Vec<CheckKind> = config.checks.clone();
    checks.sort();
    checks.dedup();
    let mut sections = BTreeMap::new();
    for check in checks {
        let section = match check {
            CheckKind::Epsilon => check_epsilon(&s, config.test, config.max_eps)?,
            CheckKind::Game => check_game(&s, config.rounds, seed)?,
            CheckKind::Isometry => check_isometry(&s, config.test, parse_pairs(&config.pairs)?, seed)?,
            CheckKind::Lemmas => check_lemmas(&config.lemmas.clone().unwrap_or_default())?,
            CheckKind::Referee => check_referee(REFEREE_MAX_M)?,
            CheckKind::Validate => {
                let report = validate_strategy(&s);
                Section { passed: report.passed(), result: to_value(&report)?, csv: CsvTable::default() }
            }
        };
        sections.insert(check.name(), section);
    }
    let mut csv = CsvTable::new(&["check", "passed"]);
    let mut result = serde_json::Map::new();
    for (name, sec) in &sections {
        csv.rows.push(vec![name.to_string(), sec.passed.to_string()]);
        result.insert(name.to_string(), json!({ "passed": sec.passed, "result": sec.result }));
    }
    Ok(Section {
        passed: sections.values().all(|s| s.passed),
        result: json!({ "test": config.test, "m": config.m, "checks": Value::Object(result) }),
        csv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_fifteen_digits() {
        assert_eq!(round15(0.1 + 0.2), 0.3);
        assert_eq!(round15(1.0 / 3.0).to_string(), "0.333333333333333");
        assert_eq!(round15(0.0), 0.0);
        let mut v = json!({ "a": [0.1 + 0.2, 1], "b": { "c": 2.0f64.sqrt() } });
        round_floats(&mut v);
        assert_eq!(v.to_string(), r#"{"a":[0.3,1],"b":{"c":1.4142135623731}}"#);
    }

    #[test]
    fn pair_parsing() {
        assert_eq!(parse_pairs("auto").unwrap(), PairSelection::Auto);
        assert_eq!(parse_pairs("sample:12").unwrap(), PairSelection::Sample(12));
        assert!(parse_pairs("sample:0").is_err());
        assert!(parse_pairs("some").is_err());
    }

    #[test]
    fn lemma_checks_default_and_negative_paths() {
        let small = LemmaArgs { max_n: 6, ..Default::default() };
        assert!(check_lemmas(&small).unwrap().passed);
        let odd = LemmaArgs { even_n: vec![2, 3], ..small.clone() };
        assert!(matches!(check_lemmas(&odd), Err(LabError::OddLength(3))));
        let corrupt = LemmaArgs { inject_corrupt_phase: true, ..small.clone() };
        let section = check_lemmas(&corrupt).unwrap();
        assert!(!section.passed);
        assert!(
            section.result.to_string().contains("s=01 t=01") || section.result.to_string().contains("counterexample")
        );
        let big = LemmaArgs { max_n: 11, ..small };
        assert!(matches!(check_lemmas(&big), Err(LabError::ThresholdExceeded { .. })));
    }

    #[test]
    fn honest_checks() {
        for (test, m) in [(TestFlavor::My, 2), (TestFlavor::Spp, 1), (TestFlavor::Spp, 2)] {
            let s = check_honest(&HonestArgs { test, m }).unwrap();
            assert!(s.passed, "{test} {m}");
        }
        assert!(check_honest(&HonestArgs { test: TestFlavor::My, m: 4 }).is_err());
    }

    #[test]
    fn sweep_rows_are_consistent() {
        let args = SweepArgs {
            test: TestFlavor::My,
            m: 1,
            thetas: vec![0.0, 0.01, 0.02, 0.03, 0.04, 0.05],
            party: NoiseParty::Both,
            w: 0.0,
            seed: 0,
            pairs: "auto".into(),
        };
        let s = check_sweep(&args).unwrap();
        assert!(s.passed);
        let rows = s.result["rows"].as_array().unwrap();
        assert!(rows[0]["max_distance"].as_f64().unwrap() < crate::linalg::STATE_TOL);
        let eps: Vec<f64> = rows.iter().map(|r| r["eps"].as_f64().unwrap()).collect();
        assert!(eps.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(s.csv.rows.len(), 6);
    }

    #[test]
    fn config_requires_seed_for_sampling() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"test": "spp", "m": 1, "strategy": {"type": "honest-spp", "m": 1}, "checks": ["game"], "rounds": 100}"#,
        )
        .unwrap();
        assert!(cfg.validate().is_err());
        let cfg: RunConfig = serde_json::from_str(
            r#"{"test": "spp", "m": 1, "strategy": {"type": "honest-spp", "m": 1}, "checks": ["game", "epsilon"], "rounds": 2000, "seed": 3}"#,
        )
        .unwrap();
        let out = run_config(&cfg, Path::new(".")).unwrap();
        assert!(out.passed);
        let keys: Vec<&String> = out.result["checks"].as_object().unwrap().keys().collect();
        assert_eq!(keys, ["epsilon", "game"]);
    }

    #[test]
    fn config_rejects_mismatched_m() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"test": "my", "m": 2, "strategy": {"type": "honest-my", "m": 1}, "checks": ["epsilon"]}"#,
        )
        .unwrap();
        assert!(run_config(&cfg, Path::new(".")).is_err());
    }
}
