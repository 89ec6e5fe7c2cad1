//! Named check bundles: pointwise invariants on random sets, the catalogued values,
//! and brute-force oracles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{evaluate, trichotomy_classify, Consistency, DensityKind, EvalConfig, KindTag, Outer, ScaleTag, Side, TrichotomyCase};
use crate::dynamics::{classify, default_l_grid, mn_witness, planted_oracle, separating_grid, SpaceModel};
use crate::examples_gen::{catalogue, expected_check, generate, qws_bounds, BlockSource, RuleSpec};
use crate::families::{is_member, FamilySpec};
use crate::intset::{canonicalize, IntegerSet, Interval, SetError, SetOp};
use crate::value::{ExtValue, Rational, Tri};
use crate::weights::{WeightSequence, WeightKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub checks: Vec<CheckOutcome>,
    pub passed: bool,
}

impl SuiteReport {
    fn new(suite: &str, seed: u64, checks: Vec<CheckOutcome>) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        SuiteReport { suite: suite.into(), seed, checks, passed }
    }
}

fn outcome(name: &str, passed: bool, detail: impl Into<String>) -> CheckOutcome {
    CheckOutcome { name: name.into(), passed, detail: detail.into() }
}

/// Random interval union on `[1, horizon]` with random density, optionally with a periodic tail.
pub fn random_set(rng: &mut ChaCha8Rng, horizon: u64) -> IntegerSet {
    let periodic = rng.gen_bool(0.2);
    random_set_of(rng, horizon, periodic)
}

/// Random set with (`periodic`) or without a periodic tail.
pub fn random_set_of(rng: &mut ChaCha8Rng, horizon: u64, periodic: bool) -> IntegerSet {
    if periodic {
        let period = rng.gen_range(1..=16u64);
        let offs: Vec<Interval> = (0..period).filter(|_| rng.gen_bool(0.5)).map(|o| Interval::new(o, o)).collect();
        let start = rng.gen_range(1..=1000u64);
        let prefix: Vec<Interval> = (0..rng.gen_range(0..20))
            .map(|_| {
                let a = rng.gen_range(1..start.max(2));
                Interval::new(a, (a + rng.gen_range(0..5)).min(start.saturating_sub(1)).max(a))
            })
            .filter(|iv| iv.hi < start)
            .collect();
        return IntegerSet::eventually_periodic(canonicalize(prefix), start, period, canonicalize(offs), horizon)
            .expect("valid periodic parameters");
    }
    let mean_gap = 10f64.powf(rng.gen_range(0.0..3.0));
    let mean_len = 10f64.powf(rng.gen_range(0.0..2.5));
    let mut ivs = Vec::new();
    let mut x = rng.gen_range(1..=(mean_gap as u64).max(1));
    while x <= horizon && ivs.len() < 20_000 {
        let len = rng.gen_range(0..=(2.0 * mean_len) as u64);
        ivs.push(Interval::new(x, (x + len).min(horizon)));
        x += len + 2 + rng.gen_range(0..=(2.0 * mean_gap) as u64);
    }
    IntegerSet::from_intervals(ivs, horizon).expect("increasing intervals")
}

fn random_weight(rng: &mut ChaCha8Rng) -> WeightSequence {
    let r = |n, d| Rational::new(n, d);
    match rng.gen_range(0..5) {
        0 => WeightSequence::power(r(rng.gen_range(2..=6), 2)).expect("q >= 1"),
        1 => {
            let d = rng.gen_range(1..=3);
            WeightSequence::linear(r(rng.gen_range(d..=7), d), Default::default()).expect("slope >= 1")
        }
        2 => WeightSequence::oscillating(r(1, 1), r(rng.gen_range(2..=4), 1)).expect("valid"),
        3 => WeightSequence::power(r(3, 2)).expect("q >= 1"),
        _ => WeightSequence::identity(),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InvariantCounts {
    pub sets: u64,
    pub windows: u64,
    pub window_partition: u64,
    pub union_subadditivity: u64,
    pub symmetric_difference: u64,
    pub q_dominance: u64,
    pub rounding_sandwich: u64,
    pub errors: u64,
}

impl InvariantCounts {
    fn add(mut self, o: InvariantCounts) -> Self {
        self.sets += o.sets;
        self.windows += o.windows;
        self.window_partition += o.window_partition;
        self.union_subadditivity += o.union_subadditivity;
        self.symmetric_difference += o.symmetric_difference;
        self.q_dominance += o.q_dominance;
        self.rounding_sandwich += o.rounding_sandwich;
        self.errors += o.errors;
        self
    }

    pub fn violations(&self) -> u64 {
        self.window_partition + self.union_subadditivity + self.symmetric_difference + self.q_dominance + self.rounding_sandwich
    }
}

fn invariants_one(seed: u64, i: u64, horizon: u64, windows: u64) -> Result<InvariantCounts, SetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i));
    // Mixed periodic and aperiodic pairs materialize the tail to the horizon; keep them rarer.
    let a = random_set(&mut rng, horizon);
    let p = if a.period().is_some() { 0.75 } else { 0.05 };
    let b_periodic = rng.gen_bool(p);
    let b = random_set_of(&mut rng, horizon, b_periodic);
    let comp = a.complement()?;
    let uni = a.boolean(&b, SetOp::Union)?;
    let int = a.boolean(&b, SetOp::Intersection)?;
    let sym = a.boolean(&b, SetOp::SymmetricDifference)?;
    let m = random_weight(&mut rng);
    let q = Rational::new(rng.gen_range(2..=8), 2);
    let pq = WeightSequence::power(q).expect("q >= 1");
    let mut c = InvariantCounts { sets: 1, ..Default::default() };
    for _ in 0..windows {
        c.windows += 1;
        let lo = rng.gen_range(1..=horizon);
        let hi = rng.gen_range(lo..=horizon);
        // Window partition: A and its complement split every window.
        if a.count(lo, hi)? + comp.count(lo, hi)? != hi - lo + 1 {
            c.window_partition += 1;
        }
        let (ca, cb) = (a.count(lo, hi)?, b.count(lo, hi)?);
        if uni.count(lo, hi)? > ca + cb {
            c.union_subadditivity += 1;
        }
        let (cs, ci, cu) = (sym.count(lo, hi)?, int.count(lo, hi)?, uni.count(lo, hi)?);
        if cs + ci != cu || cs + 2 * ci != ca + cb {
            c.symmetric_difference += 1;
        }
        // q-dominance at n = ⌊window length^{1/q}⌋ scale: ⌊n^q⌋ >= n.
        let n = rng.gen_range(1..=1000u64);
        if let Ok(nq) = pq.floor(n) {
            if nq <= horizon && a.count_to(nq)? < a.count_to(n)? {
                c.q_dominance += 1;
            }
        }
        // Rounding sandwich for prefix and window counts.
        let k = rng.gen_range(1..=1000u64);
        if let (Ok(fl), Ok(ce)) = (m.floor(k), m.ceil(k)) {
            if ce <= horizon {
                let (f1, f2) = (a.count_to(fl)?, a.count_to(ce)?);
                if !(f1 <= f2 && f2 <= f1 + 1) {
                    c.rounding_sandwich += 1;
                }
                let start = rng.gen_range(0..=horizon - ce);
                let (w1, w2) = (a.count(start + 1, start + fl)?, a.count(start + 1, start + ce)?);
                if !(w1 <= w2 && w2 <= w1 + 1) {
                    c.rounding_sandwich += 1;
                }
            }
        }
    }
    Ok(c)
}

/// Pointwise exact invariants on `sets` random sets at `horizon`.
pub fn invariant_counts(seed: u64, sets: u64, horizon: u64, windows: u64) -> InvariantCounts {
    (0..sets)
        .into_par_iter()
        .map(|i| invariants_one(seed, i, horizon, windows).unwrap_or(InvariantCounts { sets: 1, errors: 1, ..Default::default() }))
        .reduce(InvariantCounts::default, InvariantCounts::add)
}

/// Floor and ceiling reductions of the weight give brackets within `1/s` (or `1/n`).
pub fn rounding_brackets(seed: u64, sets: u64) -> (u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    let mut checked = 0;
    for _ in 0..sets {
        let a = random_set(&mut rng, 1 << 20);
        let m = random_weight(&mut rng);
        for tag in [
            KindTag::simple(Side::Lower, ScaleTag::Mn),
            KindTag::banach(Side::Lower, Outer::L, ScaleTag::Mn),
            KindTag::banach(Side::Upper, Outer::L, ScaleTag::Mn),
            KindTag::banach(Side::Upper, Outer::U, ScaleTag::Mn),
        ] {
            let kind = DensityKind { tag, weight: m.clone() };
            let base = EvalConfig { clamp: true, ..EvalConfig::default().estimate_only().with_horizons(2000, 64) };
            let fl = evaluate(&a, &kind, &base);
            let ce = evaluate(&a, &kind, &EvalConfig { rounding: crate::density::Rounding::Ceil, ..base.clone() });
            let (Ok(fl), Ok(ce)) = (fl, ce) else { continue };
            if fl.horizons != ce.horizons || fl.value.is_infinite() || ce.value.is_infinite() {
                continue;
            }
            checked += 1;
            let h = if tag.banach { fl.horizons.s_max } else { fl.horizons.n_max };
            let slack = 2.0 / (h / 2).max(1) as f64 + 1e-12;
            let (a0, b0) = (fl.lower_bound.to_f64(), ce.lower_bound.to_f64());
            let (a1, b1) = (fl.upper_bound.to_f64(), ce.upper_bound.to_f64());
            if b0 + 1e-12 < a0 || b0 > a0 + slack || b1 + 1e-12 < a1 || b1 > a1 + slack {
                bad += 1;
            }
        }
    }
    (checked, bad)
}

pub fn invariants(seed: u64, sets: u64, horizon: u64) -> SuiteReport {
    let c = invariant_counts(seed, sets, horizon, 8);
    let (checked, bad) = rounding_brackets(seed, 20);
    let checks = vec![
        outcome("window-partition", c.window_partition == 0 && c.errors == 0, format!("{} windows on {} sets, {} violations", c.windows, c.sets, c.window_partition)),
        outcome("union-subadditivity", c.union_subadditivity == 0, format!("{} violations", c.union_subadditivity)),
        outcome("symmetric-difference", c.symmetric_difference == 0, format!("{} violations", c.symmetric_difference)),
        outcome("q-dominance", c.q_dominance == 0, format!("{} violations", c.q_dominance)),
        outcome("rounding-sandwich", c.rounding_sandwich == 0, format!("{} violations", c.rounding_sandwich)),
        outcome("rounding-brackets", bad == 0 && checked > 0, format!("{checked} bracket pairs, {bad} outside 2/h")),
    ];
    SuiteReport::new("invariants", seed, checks)
}

/// Dense bitset used as a brute-force counting oracle.
pub struct Bitset {
    words: Vec<u64>,
}

impl Bitset {
    pub fn from_set(s: &IntegerSet, horizon: u64) -> Self {
        let mut words = vec![0u64; (horizon as usize + 64) / 64];
        for x in s.members().take_while(|&x| x <= horizon) {
            words[x as usize / 64] |= 1 << (x % 64);
        }
        Bitset { words }
    }

    pub fn count(&self, lo: u64, hi: u64) -> u64 {
        (lo..=hi).filter(|&x| self.words[x as usize / 64] >> (x % 64) & 1 == 1).count() as u64
    }
}

/// Random sets built through every representation path.
fn oracle_set(rng: &mut ChaCha8Rng, horizon: u64) -> Result<IntegerSet, SetError> {
    let base = random_set(rng, horizon);
    Ok(match rng.gen_range(0..6) {
        0 => base,
        1 => base.complement()?,
        2 => base.translate(rng.gen_range(-50..=50))?.truncate(horizon),
        3 => base.dilate(rng.gen_range(1..=4), horizon)?,
        4 => base.boolean(&random_set(rng, horizon), SetOp::Difference)?,
        _ => base.boolean(&random_set(rng, horizon), SetOp::SymmetricDifference)?,
    })
}

/// Interval counts against the bitset on `pairs` random (set, window) pairs.
pub fn count_oracle(seed: u64, pairs: u64, horizon: u64) -> (u64, u64) {
    let bad = (0..pairs)
        .into_par_iter()
        .filter(|&i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i.wrapping_mul(7919)));
            let Ok(s) = oracle_set(&mut rng, horizon) else { return true };
            let h = s.horizon().min(horizon);
            let bits = Bitset::from_set(&s, h);
            let lo = rng.gen_range(1..=h);
            let hi = rng.gen_range(lo..=h);
            s.count(lo, hi).ok() != Some(bits.count(lo, hi))
        })
        .count() as u64;
    (pairs, bad)
}

/// Planted sets for the classification oracle.
pub fn planted_catalogue() -> Vec<RuleSpec> {
    vec![
        RuleSpec::evens(),
        RuleSpec::Squares,
        RuleSpec::SparseBlocks { q: Rational::from_integer(2), eps: Rational::new(1, 2) },
        RuleSpec::SparseBlocks { q: Rational::new(3, 2), eps: Rational::new(1, 3) },
        RuleSpec::multiples(3),
        RuleSpec::Naturals,
        RuleSpec::Empty,
        RuleSpec::Kexp,
        RuleSpec::wide_blocks(Rational::from_integer(2)),
        RuleSpec::thin_blocks(Rational::new(3, 2), Rational::from_integer(2)),
        RuleSpec::BoundedGap { max_gap: 4, seed: 1 },
        RuleSpec::UnboundedGap { seed: 2 },
        RuleSpec::Monomial { coef: Rational::from_integer(2), exp: Rational::from_integer(2) },
        RuleSpec::Arithmetic { step: 5, offset: 2 },
        RuleSpec::Finite { intervals: vec![Interval::new(1, 10)] },
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedOutcome {
    pub rule: String,
    pub grid: usize,
    pub mismatches: Vec<String>,
}

/// Classification of planted oracles against direct membership of the planted set.
pub fn classify_oracle(configs: usize, cfg: &EvalConfig) -> Result<Vec<PlantedOutcome>, crate::dynamics::DynamicsError> {
    let rules = planted_catalogue();
    let space = SpaceModel::FrechetOmega { dim: 4 };
    let q = Rational::from_integer(2);
    let weights = [WeightSequence::power(q).expect("q >= 1"), WeightSequence::identity(), "linear:2".parse().expect("valid")];
    let horizon = 1 << 16;
    let mut out = Vec::with_capacity(configs);
    for i in 0..configs {
        let rule = &rules[i % rules.len()];
        let m = &weights[(i / rules.len()) % weights.len()];
        let planted = generate(rule, horizon).map_err(SetError::from)?;
        let (op, x) = planted_oracle(planted.clone(), space.dim());
        let crate::dynamics::OperatorSpec::SyntheticOracle { target, far, .. } = &op else { unreachable!() };
        let grid = separating_grid(&space, target, far, 1 + i % 3);
        let rep = classify(&op, &space, &x, &grid, m, q, horizon, cfg)?;
        let mut mismatches = Vec::new();
        for (f, v) in FamilySpec::taxonomy(q, m).iter().zip(&rep.families) {
            let direct = is_member(f, &planted, cfg)?;
            if direct.verdict != v.verdict {
                mismatches.push(format!("{}: classified {} vs planted {}", f.label, v.verdict, direct.verdict));
            }
        }
        out.push(PlantedOutcome { rule: format!("{rule} with {m}"), grid: grid.len(), mismatches });
    }
    Ok(out)
}

/// Configuration used by the oracle bundle.
pub fn oracle_config() -> EvalConfig {
    EvalConfig { max_horizon: 1 << 24, ..EvalConfig::default().with_horizons(4096, 64) }
}

pub fn oracle(seed: u64, pairs: u64, configs: usize) -> SuiteReport {
    let (n, bad) = count_oracle(seed, pairs, 1 << 16);
    let mut checks = vec![outcome("interval-vs-bitset", bad == 0, format!("{n} pairs, {bad} disagreements"))];
    match classify_oracle(configs, &oracle_config()) {
        Ok(res) => {
            let bad: Vec<&PlantedOutcome> = res.iter().filter(|r| !r.mismatches.is_empty()).collect();
            let detail = if bad.is_empty() {
                format!("{} planted configurations agree", res.len())
            } else {
                format!("{} of {} disagree: {:?}", bad.len(), res.len(), bad.first().map(|b| (&b.rule, &b.mismatches)))
            };
            checks.push(outcome("planted-classification", bad.is_empty(), detail));
        }
        Err(e) => checks.push(outcome("planted-classification", false, e.to_string())),
    }
    SuiteReport::new("oracle", seed, checks)
}

fn power(q: u64) -> WeightSequence {
    WeightSequence::power(Rational::from_integer(q)).expect("q >= 1")
}

/// Catalogued expectations plus the block bounds, trichotomy cases and the witness gap.
pub fn reference_values(cfg: &EvalConfig) -> SuiteReport {
    let mut checks = Vec::new();
    for e in catalogue() {
        match expected_check(&e.rule, 1 << 16, cfg) {
            Ok(rep) => {
                let bad: Vec<String> = rep
                    .checks
                    .iter()
                    .filter(|c| c.consistency != Consistency::Consistent && !matches!(c.expectation.verdict, crate::examples_gen::Verdict::NotFinitelyCheckable(_)))
                    .map(|c| format!("{} ({}): {:?} got {} [{}, {}]", c.expectation.kind, c.expectation.weight, c.consistency, c.result.value, c.result.lower_bound, c.result.upper_bound))
                    .collect();
                checks.push(outcome(&format!("expected:{}", e.name), bad.is_empty(), if bad.is_empty() { format!("{} values", rep.checks.len()) } else { bad.join("; ") }));
            }
            Err(err) => checks.push(outcome(&format!("expected:{}", e.name), false, err.to_string())),
        }
    }
    let two = Rational::from_integer(2);
    match qws_bounds(&BlockSource::Rule(RuleSpec::wide_blocks(two)), two, 1000, cfg) {
        Ok(r) => checks.push(outcome("block-bounds:wide", r.upper <= 1.0 + 1e-9 && r.within == Consistency::Consistent, format!("lower {:.4} upper {:.4}", r.lower, r.upper))),
        Err(e) => checks.push(outcome("block-bounds:wide", false, e.to_string())),
    }
    match qws_bounds(&BlockSource::Rule(RuleSpec::thin_blocks(Rational::new(3, 2), two)), two, 10_000, cfg) {
        Ok(r) => checks.push(outcome("block-bounds:thin", r.within == Consistency::Consistent, format!("lower {:.2} (early {:.2})", r.lower, r.lower_early))),
        Err(e) => checks.push(outcome("block-bounds:thin", false, e.to_string())),
    }
    let table = WeightSequence::table((1..=(cfg.n_max.max(cfg.s_max) + 2)).map(|s| Rational::from_integer(((s as f64).sqrt().ceil() as u64).max(1))))
        .expect("positive table");
    for (name, rule, m, case) in [
        ("trichotomy:evens", RuleSpec::evens(), power(2), TrichotomyCase::LimitInfiniteBoundedGaps),
        ("trichotomy:squares", RuleSpec::Squares, power(2), TrichotomyCase::LimitInfiniteUnboundedGaps),
        ("trichotomy:sqrt-table", RuleSpec::multiples(3), table.clone(), TrichotomyCase::LimitZero),
    ] {
        let run = generate(&rule, 1 << 16).map_err(|e| e.to_string()).and_then(|a| trichotomy_classify(&a, &m, cfg).map_err(|e| e.to_string()));
        match run {
            Ok(r) => checks.push(outcome(name, r.case == case && r.consistency != Consistency::Inconsistent, format!("{:?}, {:?}", r.case, r.consistency))),
            Err(e) => checks.push(outcome(name, false, e)),
        }
    }
    let kexp = generate(&RuleSpec::Kexp, u64::MAX / 2);
    match kexp.map_err(|e| e.to_string()).and_then(|s| mn_witness(&s, &"expo:e".parse().expect("valid"), &default_l_grid(), 1000, u64::MAX / 2).map_err(|e| e.to_string())) {
        Ok(w) => checks.push(outcome("witness:kexp", w.l.is_none(), format!("required L {:?}", w.required))),
        Err(e) => checks.push(outcome("witness:kexp", false, e)),
    }
    let osc = WeightSequence::oscillating(Rational::from_integer(1), Rational::from_integer(3)).expect("valid");
    let nat = IntegerSet::naturals(1 << 16);
    let lo = evaluate(&nat, &DensityKind::banach(Side::Lower, Outer::L, osc.clone()), cfg);
    let hi = evaluate(&nat, &DensityKind::banach(Side::Lower, Outer::U, osc.clone()), cfg);
    match (lo, hi) {
        (Ok(l), Ok(u)) => checks.push(outcome("oscillating-gap", l.exact && u.exact && l.value == ExtValue::ratio(1, 1) && u.value == ExtValue::ratio(3, 1), format!("{} < {}", l.value, u.value))),
        _ => checks.push(outcome("oscillating-gap", false, "evaluation failed")),
    }
    SuiteReport::new("reference-values", 0, checks)
}

/// Whether weight family criteria are decided analytically for a weight kind.
pub fn closed_form_weight(m: &WeightSequence) -> bool {
    !matches!(m.kind(), WeightKind::Table(_))
}

/// Family verdicts for a set, used by the CLI `family-check` on sets.
pub fn memberships(a: &IntegerSet, q: Rational, m: &WeightSequence, cfg: &EvalConfig) -> Vec<(String, Tri, String)> {
    FamilySpec::taxonomy(q, m)
        .par_iter()
        .map(|f| match is_member(f, a, cfg) {
            Ok(mem) => (f.label.to_string(), mem.verdict, format!("[{}, {}] {}", mem.result.lower_bound, mem.result.upper_bound, mem.result.method)),
            Err(e) => (f.label.to_string(), Tri::Undetermined, e.to_string()),
        })
        .collect()
}
