use std::fmt::Display;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::{json, Value};

use densitylab::density::{
    density_chain_check, evaluate, profile_csv, trichotomy_classify, Consistency, DensityKind, DensityResult, EvalConfig,
    InnerMode,
};
use densitylab::dynamics::{
    classify, default_grid, default_l_grid, lower_mn_density, mn_witness, planted_oracle, separating_grid, Ball,
    OperatorSpec, ShiftWeights, SpaceModel,
};
use densitylab::examples_gen::{catalogue, expected_check, generate, RuleSpec};
use densitylab::families::weight_family_check;
use densitylab::setspec::{parse_set_arg, SetSpec};
use densitylab::suite;
use densitylab::{IntegerSet, Rational, Tri, WeightSequence};

/// Densities of subsets of ℕ, example families and hitting-set classification.
#[derive(Parser)]
#[command(name = "densitylab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one or more density kinds (comma-separated) on a set.
    Density(Common),
    /// Sampled ratio profiles of one or more density kinds.
    Profile(Common),
    /// Check the classical density chain and q-dominance.
    ChainCheck(Common),
    /// Classify (A, m) by growth of m_s/s and gaps of A, and cross-check predictions.
    Trichotomy(Common),
    /// Family criterion for the weight, plus taxonomy membership when a set is given.
    FamilyCheck(Common),
    /// Materialize a set; `--nmax` is the horizon.
    Generate(Common),
    /// Compare catalogued values with evaluation (whole catalogue without a set).
    ExpectedCheck(Common),
    /// Classify an orbit against the family taxonomy on a ball grid.
    Classify(ClassifyArgs),
    /// Smallest L with n_k <= L m_k over the members of a set.
    Witness(Common),
    /// Run a named check bundle.
    Suite(SuiteArgs),
}

#[derive(Args, Clone)]
struct Output {
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    /// Exit 2 when any verdict is undetermined.
    #[arg(long, global = true)]
    strict: bool,
    #[arg(long, default_value_t = 0, global = true)]
    seed: u64,
}

#[derive(Args, Clone)]
struct Common {
    /// Set as inline JSON, a JSON file, or a rule name.
    #[arg(long)]
    set: Option<String>,
    /// Generator rule by name or JSON.
    #[arg(long)]
    set_rule: Option<String>,
    /// Density kind label(s), comma-separated.
    #[arg(long)]
    kind: Option<String>,
    /// Weight sequence, e.g. `power:2`, `expo:e`, `linear:2`.
    #[arg(long)]
    mn: Option<String>,
    /// Exponent for q-kinds.
    #[arg(long)]
    q: Option<String>,
    #[arg(long)]
    nmax: Option<u64>,
    #[arg(long)]
    smax: Option<u64>,
    #[arg(long)]
    inner_mode: Option<String>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Clone)]
struct ClassifyArgs {
    /// Classification job as inline JSON or a file.
    #[arg(long)]
    job: Option<String>,
    /// Planted set for a synthetic oracle (when no job is given).
    #[arg(long)]
    set: Option<String>,
    #[arg(long)]
    set_rule: Option<String>,
    #[arg(long)]
    mn: Option<String>,
    #[arg(long)]
    q: Option<String>,
    /// Orbit horizon.
    #[arg(long)]
    nmax: Option<u64>,
    #[arg(long)]
    smax: Option<u64>,
    #[arg(long)]
    inner_mode: Option<String>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Clone)]
struct SuiteArgs {
    #[arg(value_enum)]
    name: SuiteName,
    #[command(flatten)]
    output: Output,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteName {
    Invariants,
    #[value(alias = "paper-values")]
    ReferenceValues,
    Oracle,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// `{"operator": ..., "space": ..., "x": [...], "grid": [...]}`.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassifyJob {
    operator: OperatorJob,
    space: SpaceModel,
    #[serde(default)]
    x: Option<Vec<f64>>,
    #[serde(default)]
    grid: Option<Vec<Ball>>,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum OperatorJob {
    WeightedShift { weights: ShiftWeights },
    SyntheticOracle { planted: SetSpec },
}

enum Failure {
    Spec(String),
    Io(String),
}

impl<E: Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Spec(e.to_string())
    }
}

struct Outcome {
    report: Value,
    csv: Option<String>,
    summary: Vec<String>,
    undetermined: bool,
    failed: bool,
}

impl Outcome {
    fn new(report: Value) -> Self {
        Outcome { report, csv: None, summary: vec![], undetermined: false, failed: false }
    }
}

const DEFAULT_SET_HORIZON: u64 = 1 << 16;

fn default_horizon() -> u64 {
    DEFAULT_SET_HORIZON.min(densitylab::intset::configured_max_horizon())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, output) = match &cli.command {
        Command::Density(c) => ("density", c.output.clone()),
        Command::Profile(c) => ("profile", c.output.clone()),
        Command::ChainCheck(c) => ("chain-check", c.output.clone()),
        Command::Trichotomy(c) => ("trichotomy", c.output.clone()),
        Command::FamilyCheck(c) => ("family-check", c.output.clone()),
        Command::Generate(c) => ("generate", c.output.clone()),
        Command::ExpectedCheck(c) => ("expected-check", c.output.clone()),
        Command::Witness(c) => ("witness", c.output.clone()),
        Command::Classify(c) => ("classify", c.output.clone()),
        Command::Suite(s) => ("suite", s.output.clone()),
    };
    let result = match &cli.command {
        Command::Density(c) => run_density(c, false),
        Command::Profile(c) => run_density(c, true),
        Command::ChainCheck(c) => run_chain(c),
        Command::Trichotomy(c) => run_trichotomy(c),
        Command::FamilyCheck(c) => run_family(c),
        Command::Generate(c) => run_generate(c),
        Command::ExpectedCheck(c) => run_expected(c),
        Command::Witness(c) => run_witness(c),
        Command::Classify(c) => run_classify(c),
        Command::Suite(s) => run_suite(s),
    };
    let outcome = match result {
        Ok(o) => o,
        Err(Failure::Spec(msg)) | Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    if let Err(msg) = emit(name, &output, &outcome) {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    for line in &outcome.summary {
        eprintln!("{line}");
    }
    if outcome.failed {
        ExitCode::from(1)
    } else if output.strict && outcome.undetermined {
        eprintln!("undetermined verdicts present (--strict)");
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn emit(command: &str, output: &Output, o: &Outcome) -> Result<(), String> {
    let text = match output.format {
        Format::Json => {
            // serde_json maps are ordered by key, so the output is canonical.
            let doc = json!({
                "command": command,
                "seed": output.seed,
                "version": env!("CARGO_PKG_VERSION"),
                "report": o.report,
            });
            let v: Value = serde_json::from_str(&doc.to_string()).map_err(|e| e.to_string())?;
            serde_json::to_string_pretty(&v).map_err(|e| e.to_string())? + "\n"
        }
        Format::Csv => o.csv.clone().ok_or_else(|| format!("{command} has no CSV output; use --format json"))?,
    };
    match &output.out {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display())),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| e.to_string()),
    }
}

fn parse_q(q: &Option<String>) -> Result<Option<Rational>, Failure> {
    q.as_deref().map(|s| densitylab::value::parse_rational(s).map_err(Failure::from)).transpose()
}

fn parse_mn(mn: &Option<String>) -> Result<Option<WeightSequence>, Failure> {
    mn.as_deref().map(|s| s.parse::<WeightSequence>().map_err(Failure::from)).transpose()
}

fn config(nmax: Option<u64>, smax: Option<u64>, inner: &Option<String>) -> Result<EvalConfig, Failure> {
    let mut cfg = EvalConfig::default();
    if let Some(n) = nmax {
        cfg.n_max = n;
    }
    if let Some(s) = smax {
        cfg.s_max = s;
    }
    // Explicit horizons are honored or refused; defaults shrink to what is feasible.
    cfg.clamp = nmax.is_none() && smax.is_none();
    if let Some(m) = inner {
        cfg.inner_mode = m.parse::<InnerMode>()?;
    }
    Ok(cfg)
}

fn set_spec(set: &Option<String>, rule: &Option<String>) -> Result<SetSpec, Failure> {
    match (set, rule) {
        (Some(_), Some(_)) => Err(Failure::Spec("give --set or --set-rule, not both".into())),
        (Some(s), None) => Ok(parse_set_arg(s)?),
        (None, Some(r)) => {
            let t = r.trim();
            let rule: RuleSpec = if t.starts_with('{') {
                serde_json::from_str(t).map_err(|e| format!("malformed rule JSON: {e}"))?
            } else {
                t.parse()?
            };
            Ok(SetSpec::Rule { rule, horizon: None })
        }
        (None, None) => Err(Failure::Spec("a set is required: --set or --set-rule".into())),
    }
}

fn load_set(set: &Option<String>, rule: &Option<String>) -> Result<IntegerSet, Failure> {
    Ok(set_spec(set, rule)?.build(default_horizon())?)
}

fn to_value<T: serde::Serialize>(v: &T) -> Result<Value, Failure> {
    Ok(serde_json::to_value(v)?)
}

fn bracket_line(r: &DensityResult) -> String {
    if r.exact {
        format!("{}: {} (exact, {})", r.kind, r.value, r.method)
    } else {
        format!("{}: {} bracket [{}, {}] width {:.4} ({})", r.kind, r.value, r.lower_bound, r.upper_bound, r.width(), r.method)
    }
}

fn run_density(c: &Common, profile: bool) -> Result<Outcome, Failure> {
    let a = load_set(&c.set, &c.set_rule)?;
    let mut cfg = config(c.nmax, c.smax, &c.inner_mode)?;
    if profile {
        cfg.closed_form = false;
    }
    let (q, mn) = (parse_q(&c.q)?, parse_mn(&c.mn)?);
    let labels = c.kind.as_deref().ok_or_else(|| Failure::Spec("--kind is required".into()))?;
    let kinds = labels
        .split(',')
        .map(|l| DensityKind::parse(l.trim(), q, mn.clone()))
        .collect::<Result<Vec<_>, _>>()?;
    let results = kinds.par_iter().map(|k| evaluate(&a, k, &cfg)).collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<(&str, &densitylab::density::ProfilePoint)> =
        results.iter().flat_map(|r| r.profile.iter().map(move |p| (r.kind.as_str(), p))).collect();
    let csv = profile_csv(rows);
    let report = if profile {
        Value::Array(results.iter().map(|r| json!({"kind": r.kind, "profile": r.profile, "horizons": r.horizons})).collect())
    } else if results.len() == 1 {
        to_value(&results[0])?
    } else {
        to_value(&results)?
    };
    let mut o = Outcome::new(report);
    o.csv = Some(csv);
    o.summary = results.iter().map(bracket_line).collect();
    Ok(o)
}

fn run_chain(c: &Common) -> Result<Outcome, Failure> {
    let a = load_set(&c.set, &c.set_rule)?;
    let cfg = config(c.nmax, c.smax, &c.inner_mode)?;
    let q = parse_q(&c.q)?.unwrap_or_else(|| Rational::from_integer(2));
    let rep = density_chain_check(&a, q, &cfg)?;
    let mut o = Outcome::new(to_value(&rep)?);
    o.summary = rep.values.iter().map(bracket_line).collect();
    o.summary.push(format!("chain {}", if rep.ok { "holds" } else { "violated" }));
    o.failed = !rep.ok;
    Ok(o)
}

fn run_trichotomy(c: &Common) -> Result<Outcome, Failure> {
    let a = load_set(&c.set, &c.set_rule)?;
    let cfg = config(c.nmax, c.smax, &c.inner_mode)?;
    let m = parse_mn(&c.mn)?.ok_or_else(|| Failure::Spec("--mn is required".into()))?;
    let rep = trichotomy_classify(&a, &m, &cfg)?;
    let mut o = Outcome::new(to_value(&rep)?);
    o.summary.push(format!("case {:?} ({}), {:?}", rep.case, rep.growth_evidence, rep.consistency));
    o.summary.extend(rep.predictions.iter().map(|p| format!("predicted {} for {}", p.predicted, bracket_line(&p.observed))));
    o.undetermined = rep.consistency == Consistency::Inconclusive;
    o.failed = rep.consistency == Consistency::Inconsistent;
    Ok(o)
}

fn run_family(c: &Common) -> Result<Outcome, Failure> {
    let cfg = config(c.nmax, c.smax, &c.inner_mode)?;
    let m = parse_mn(&c.mn)?.ok_or_else(|| Failure::Spec("--mn is required".into()))?;
    let q = parse_q(&c.q)?.unwrap_or_else(|| Rational::from_integer(2));
    let rep = weight_family_check(&m, &cfg, c.output.seed)?;
    let mut o = Outcome::new(json!({}));
    o.summary.push(format!("criterion {}, family verdict {}", rep.criterion, rep.furstenberg_verdict));
    o.undetermined = rep.furstenberg_verdict == Tri::Undetermined;
    let mut report = json!({ "weight-family": to_value(&rep)? });
    if c.set.is_some() || c.set_rule.is_some() {
        let a = load_set(&c.set, &c.set_rule)?;
        let rows = suite::memberships(&a, q, &m, &cfg);
        o.undetermined |= rows.iter().any(|r| r.1 == Tri::Undetermined);
        o.summary.extend(rows.iter().map(|(f, v, d)| format!("{f}: {v} {d}")));
        let map: serde_json::Map<String, Value> =
            rows.into_iter().map(|(f, v, d)| (f, json!({"verdict": v, "detail": d}))).collect();
        report["memberships"] = Value::Object(map);
    }
    o.report = report;
    Ok(o)
}

fn run_generate(c: &Common) -> Result<Outcome, Failure> {
    let spec = set_spec(&c.set, &c.set_rule)?;
    let horizon = c.nmax.unwrap_or(1000);
    let cap = densitylab::intset::configured_max_horizon();
    if horizon > cap {
        return Err(Failure::Spec(format!("horizon {horizon} exceeds the materialization limit {cap}")));
    }
    let a = match spec {
        SetSpec::Rule { rule, .. } => generate(&rule, horizon)?,
        other => other.build(horizon)?.truncate(horizon),
    };
    let mut csv = String::from("lo,hi\n");
    for iv in a.intervals() {
        csv.push_str(&format!("{},{}\n", iv.lo, iv.hi));
    }
    let mut o = Outcome::new(json!({
        "set": to_value(&SetSpec::from_set(&a))?,
        "intervals": to_value(&a.intervals().collect::<Vec<_>>())?,
        "count": a.len(),
        "horizon": a.horizon(),
    }));
    o.summary.push(format!("{} members in [1, {}]", a.len(), a.horizon()));
    o.csv = Some(csv);
    Ok(o)
}

fn run_expected(c: &Common) -> Result<Outcome, Failure> {
    let cfg = config(c.nmax, c.smax, &c.inner_mode)?;
    let rules: Vec<RuleSpec> = if c.set.is_some() || c.set_rule.is_some() {
        match set_spec(&c.set, &c.set_rule)? {
            SetSpec::Rule { rule, .. } => vec![rule],
            _ => return Err(Failure::Spec("expected-check needs a generator rule".into())),
        }
    } else {
        catalogue().into_iter().map(|e| e.rule).collect()
    };
    let reports = rules.par_iter().map(|r| expected_check(r, default_horizon(), &cfg)).collect::<Result<Vec<_>, _>>()?;
    let mut o = Outcome::new(to_value(&reports)?);
    for r in &reports {
        o.summary.push(format!("{}: {:?}", r.rule, r.consistency));
        for ch in &r.checks {
            o.summary.push(format!("  {:?} {}", ch.consistency, bracket_line(&ch.result)));
        }
    }
    o.undetermined = reports.iter().any(|r| r.consistency == Consistency::Inconclusive);
    o.failed = reports.iter().any(|r| r.consistency == Consistency::Inconsistent);
    Ok(o)
}

fn run_witness(c: &Common) -> Result<Outcome, Failure> {
    let a = load_set(&c.set, &c.set_rule)?;
    let cfg = config(c.nmax, c.smax, &c.inner_mode)?;
    let m = parse_mn(&c.mn)?.ok_or_else(|| Failure::Spec("--mn is required".into()))?;
    let count = c.nmax.map_or(1000, |n| n.min(1 << 20) as usize);
    let w = mn_witness(&a, &m, &default_l_grid(), count, u64::MAX / 2)?;
    let d = lower_mn_density(&a, &m, &cfg)?;
    let mut o = Outcome::new(json!({ "witness": to_value(&w)?, "lower-mn-density": to_value(&d)? }));
    let head = match w.l {
        Some(l) => format!("L = {l}"),
        None => "none".into(),
    };
    o.summary.push(format!("{head}; lower-mn-density bracket [{}, {}]", d.lower_bound, d.upper_bound));
    o.summary.push(format!("required L at K/4, K/2, K: {:?} over {} members", w.required, w.coverage));
    Ok(o)
}

fn run_classify(c: &ClassifyArgs) -> Result<Outcome, Failure> {
    let cfg = config(None, c.smax, &c.inner_mode)?;
    let m = parse_mn(&c.mn)?.unwrap_or_else(|| WeightSequence::power(Rational::from_integer(2)).expect("q >= 1"));
    let q = parse_q(&c.q)?.unwrap_or_else(|| Rational::from_integer(2));
    let horizon = c.nmax.unwrap_or_else(default_horizon);
    let (op, space, x, grid) = match &c.job {
        Some(job) => {
            let text = if job.trim_start().starts_with('{') {
                job.clone()
            } else {
                std::fs::read_to_string(job).map_err(|e| Failure::Io(format!("{job}: {e}")))?
            };
            let job: ClassifyJob = serde_json::from_str(&text)
                .map_err(|e| format!("malformed job JSON: {e}"))?;
            let dim = job.space.dim();
            match job.operator {
                OperatorJob::WeightedShift { weights } => {
                    let x = job.x.ok_or_else(|| Failure::Spec("weighted-shift jobs need x".into()))?;
                    let grid = job.grid.unwrap_or_else(|| default_grid(dim));
                    (OperatorSpec::WeightedShift { weights }, job.space, x, grid)
                }
                OperatorJob::SyntheticOracle { planted } => {
                    let (op, x) = planted_oracle(planted.build(horizon)?, dim);
                    let OperatorSpec::SyntheticOracle { target, far, .. } = &op else { unreachable!() };
                    let grid = job.grid.unwrap_or_else(|| separating_grid(&job.space, target, far, 3));
                    (op, job.space, job.x.unwrap_or(x), grid)
                }
            }
        }
        None => {
            let planted = load_set(&c.set, &c.set_rule)?;
            let space = SpaceModel::FrechetOmega { dim: 4 };
            let (op, x) = planted_oracle(planted, space.dim());
            let OperatorSpec::SyntheticOracle { target, far, .. } = &op else { unreachable!() };
            let grid = separating_grid(&space, target, far, 3);
            (op, space, x, grid)
        }
    };
    let rep = classify(&op, &space, &x, &grid, &m, q, horizon, &cfg)?;
    let mut o = Outcome::new(to_value(&rep)?);
    o.summary.push(format!("{} on a grid of {} balls, horizon {}", rep.operator, rep.grid_size, rep.horizon));
    o.summary.extend(rep.families.iter().map(|f| format!("{}: {} on grid (ball {})", f.family.as_str(), f.verdict, f.weakest_ball)));
    o.undetermined = rep.families.iter().any(|f| f.verdict == Tri::Undetermined);
    Ok(o)
}

fn run_suite(s: &SuiteArgs) -> Result<Outcome, Failure> {
    let seed = s.output.seed;
    let rep = match s.name {
        SuiteName::Invariants => suite::invariants(seed, 10_000, 1_000_000),
        SuiteName::ReferenceValues => suite::reference_values(&EvalConfig::default()),
        SuiteName::Oracle => suite::oracle(seed, 10_000, 50),
    };
    let mut o = Outcome::new(to_value(&rep)?);
    o.summary = rep
        .checks
        .iter()
        .map(|c| format!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail))
        .collect();
    o.failed = !rep.passed;
    Ok(o)
}
