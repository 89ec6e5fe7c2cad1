//! Density-positivity families `{A : density(A) > 0}` and finite-scale checks of
//! upward closure, properness, the decomposition witness and translation invariance.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{
    evaluate, DensityError, DensityKind, DensityResult, EvalConfig, KindTag, Outer, ScaleTag, Side, ZERO_TOLERANCE,
};
use crate::intset::{IntegerSet, Interval, SetOp};
use crate::value::{ExtValue, Rational, Tri};
use crate::weights::{Trend, WeightSequence};

/// The sixteen taxonomy labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FamilyLabel {
    Frequently,
    QFrequently,
    UpperFrequently,
    UpperQFrequently,
    LowerMn,
    UpperMn,
    LowerReiteratively,
    Reiteratively,
    LowerLQ,
    LowerUQ,
    UpperLQ,
    UpperUQ,
    LowerLMn,
    LowerUMn,
    UpperLMn,
    UpperUMn,
}

const LABELS: [(FamilyLabel, &str); 16] = [
    (FamilyLabel::Frequently, "frequently-hypercyclic"),
    (FamilyLabel::QFrequently, "q-frequently-hypercyclic"),
    (FamilyLabel::UpperFrequently, "upper-frequently-hypercyclic"),
    (FamilyLabel::UpperQFrequently, "upper-q-frequently-hypercyclic"),
    (FamilyLabel::LowerMn, "l-mn-hypercyclic"),
    (FamilyLabel::UpperMn, "u-mn-hypercyclic"),
    (FamilyLabel::LowerReiteratively, "lower-reiteratively-hypercyclic"),
    (FamilyLabel::Reiteratively, "reiteratively-hypercyclic"),
    (FamilyLabel::LowerLQ, "lower-l-q-reiteratively-hypercyclic"),
    (FamilyLabel::LowerUQ, "lower-u-q-reiteratively-hypercyclic"),
    (FamilyLabel::UpperLQ, "upper-l-q-reiteratively-hypercyclic"),
    (FamilyLabel::UpperUQ, "upper-u-q-reiteratively-hypercyclic"),
    (FamilyLabel::LowerLMn, "lower-l-mn-reiteratively-hypercyclic"),
    (FamilyLabel::LowerUMn, "lower-u-mn-reiteratively-hypercyclic"),
    (FamilyLabel::UpperLMn, "upper-l-mn-reiteratively-hypercyclic"),
    (FamilyLabel::UpperUMn, "upper-u-mn-reiteratively-hypercyclic"),
];

impl FamilyLabel {
    pub fn all() -> Vec<FamilyLabel> {
        LABELS.iter().map(|(l, _)| *l).collect()
    }

    pub fn as_str(self) -> &'static str {
        LABELS.iter().find(|(l, _)| *l == self).map(|(_, s)| *s).expect("label table is total")
    }

    /// The density functional whose positivity defines the family.
    pub fn tag(self) -> KindTag {
        use FamilyLabel::*;
        use Side::{Lower, Upper};
        match self {
            Frequently => KindTag::simple(Lower, ScaleTag::Classic),
            QFrequently => KindTag::simple(Lower, ScaleTag::Q),
            UpperFrequently => KindTag::simple(Upper, ScaleTag::Classic),
            UpperQFrequently => KindTag::simple(Upper, ScaleTag::Q),
            LowerMn => KindTag::simple(Lower, ScaleTag::Mn),
            UpperMn => KindTag::simple(Upper, ScaleTag::Mn),
            LowerReiteratively => KindTag::classic_banach(Lower),
            Reiteratively => KindTag::classic_banach(Upper),
            LowerLQ => KindTag::banach(Lower, Outer::L, ScaleTag::Q),
            LowerUQ => KindTag::banach(Lower, Outer::U, ScaleTag::Q),
            UpperLQ => KindTag::banach(Upper, Outer::L, ScaleTag::Q),
            UpperUQ => KindTag::banach(Upper, Outer::U, ScaleTag::Q),
            LowerLMn => KindTag::banach(Lower, Outer::L, ScaleTag::Mn),
            LowerUMn => KindTag::banach(Lower, Outer::U, ScaleTag::Mn),
            UpperLMn => KindTag::banach(Upper, Outer::L, ScaleTag::Mn),
            UpperUMn => KindTag::banach(Upper, Outer::U, ScaleTag::Mn),
        }
    }

    /// Monotone under supersets: every functional counts members in windows, so all sixteen are.
    pub fn upward_closed(self) -> bool {
        true
    }
}

impl fmt::Display for FamilyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FamilyLabel {
    type Err = DensityError;

    fn from_str(s: &str) -> Result<Self, DensityError> {
        let t = s.trim().to_ascii_lowercase();
        LABELS
            .iter()
            .find(|(_, n)| *n == t)
            .map(|(l, _)| *l)
            .ok_or_else(|| DensityError::InvalidKind(format!("unknown family {s:?}")))
    }
}

impl Serialize for FamilyLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for FamilyLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// `{A : density(A) > 0}` for one functional.
#[derive(Clone, Debug, PartialEq)]
pub struct FamilySpec {
    pub label: FamilyLabel,
    pub kind: DensityKind,
    /// Estimated brackets certify membership only when the lower end exceeds this.
    pub threshold: f64,
}

impl FamilySpec {
    pub fn new(label: FamilyLabel, q: Option<Rational>, mn: Option<WeightSequence>) -> Result<Self, DensityError> {
        Ok(FamilySpec { label, kind: DensityKind::new(label.tag(), q, mn)?, threshold: ZERO_TOLERANCE })
    }

    pub fn parse(label: &str, q: Option<Rational>, mn: Option<WeightSequence>) -> Result<Self, DensityError> {
        Self::new(label.parse()?, q, mn)
    }

    /// All sixteen families for one `q` and one weight.
    pub fn taxonomy(q: Rational, mn: &WeightSequence) -> Vec<FamilySpec> {
        FamilyLabel::all()
            .into_iter()
            .map(|l| FamilySpec::new(l, Some(q), Some(mn.clone())).expect("q and weight supplied"))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub verdict: Tri,
    pub result: DensityResult,
}

/// Membership from a density bracket: exact values decide; estimates only certify `yes`.
pub fn verdict_of(result: &DensityResult, threshold: f64) -> Tri {
    if result.exact {
        Tri::from_bool(!result.value.is_zero())
    } else if result.lower_bound.to_f64() > threshold {
        Tri::Yes
    } else {
        Tri::Undetermined
    }
}

pub fn is_member(family: &FamilySpec, a: &IntegerSet, cfg: &EvalConfig) -> Result<Membership, DensityError> {
    let result = evaluate(a, &family.kind, cfg)?;
    Ok(Membership { verdict: verdict_of(&result, family.threshold), result })
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClosureSamples {
    pub passed: u64,
    pub failed: u64,
    /// Pairs where `A` was not certified a member, so nothing was asserted.
    pub vacuous: u64,
}

/// One `δ` of the decomposition: `A ∈ F_{δ,ν}` iff some `N >= ν` has `|A ∩ [1, m_N]| / N > δ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaWitness {
    #[serde(with = "crate::value::rational_str")]
    pub delta: Rational,
    /// `(ν, N)` pairs; the prefix `[1, m_N]` is the finite set whose trace forces membership.
    pub witnesses: Vec<(u64, u64)>,
    /// Whether every sampled `ν` found a witness.
    pub all_found: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpperConditions {
    pub decomposition: Vec<DeltaWitness>,
    pub translates: TranslateReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyCheckReport {
    pub weight: WeightSequence,
    pub liminf_ratio: Option<ExtValue>,
    pub limsup_ratio: Option<ExtValue>,
    /// `analytic` or `horizon-trend`.
    pub growth_evidence: String,
    /// `limsup m_n / n > 0`.
    pub criterion: Tri,
    pub naturals: Membership,
    pub naturals_verdict: Tri,
    pub proper: bool,
    pub upward_closed_samples: ClosureSamples,
    pub upper_conditions: Option<UpperConditions>,
    pub furstenberg_verdict: Tri,
}

/// Random eventually periodic set with a positive fraction of each period.
fn random_periodic(rng: &mut ChaCha8Rng, horizon: u64) -> IntegerSet {
    let period = rng.gen_range(2..=12u64);
    let mut offs: Vec<Interval> = (0..period).filter(|_| rng.gen_bool(0.4)).map(|o| Interval::new(o, o)).collect();
    if offs.is_empty() {
        offs.push(Interval::new(0, 0));
    }
    let start = rng.gen_range(1..=20u64);
    IntegerSet::eventually_periodic(vec![], start, period, crate::intset::canonicalize(offs), horizon)
        .expect("valid periodic parameters")
}

/// Random interval union without a rule.
fn random_intervals(rng: &mut ChaCha8Rng, horizon: u64) -> IntegerSet {
    let mut ivs = Vec::new();
    let mut x = rng.gen_range(1..=50u64);
    while x <= horizon {
        let len = rng.gen_range(0..=20u64);
        ivs.push(Interval::new(x, (x + len).min(horizon)));
        x += len + rng.gen_range(2..=60u64);
    }
    IntegerSet::from_intervals(ivs, horizon).expect("sorted intervals")
}

/// Samples `pairs` random `A ⊆ B` and asserts `B ∈ F` whenever `A ∈ F` is certified.
pub fn sample_upward_closure(
    family: &FamilySpec,
    pairs: usize,
    seed: u64,
    cfg: &EvalConfig,
) -> Result<ClosureSamples, DensityError> {
    let outcomes: Vec<Result<Option<bool>, DensityError>> = (0..pairs)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9).wrapping_add(i as u64));
            let h = 1 << 16;
            let (a, b) = if i % 2 == 0 {
                let a = random_periodic(&mut rng, h);
                let extra = random_periodic(&mut rng, h);
                let b = a.boolean(&extra, SetOp::Union)?;
                (a, b)
            } else {
                let a = random_intervals(&mut rng, h);
                let extra = random_intervals(&mut rng, h);
                let b = a.boolean(&extra, SetOp::Union)?;
                (a, b)
            };
            let ma = is_member(family, &a, cfg)?;
            if ma.verdict != Tri::Yes {
                return Ok(None);
            }
            Ok(Some(is_member(family, &b, cfg)?.verdict == Tri::Yes))
        })
        .collect();
    let mut out = ClosureSamples::default();
    for o in outcomes {
        match o? {
            None => out.vacuous += 1,
            Some(true) => out.passed += 1,
            Some(false) => out.failed += 1,
        }
    }
    Ok(out)
}

/// Decomposition witnesses on the grid `δ = 1/2^j` for sampled `ν`.
fn decomposition_witnesses(a: &IntegerSet, m: &WeightSequence, cfg: &EvalConfig) -> Result<Vec<DeltaWitness>, DensityError> {
    let cap = if a.rule().is_some() { cfg.max_horizon } else { a.horizon() };
    let n_top = m.max_index(cap, cfg.n_max.min(1 << 14));
    let a = a.ensure_horizon(m.floor(n_top.max(1))?, cap)?;
    let nus: Vec<u64> = [1, n_top / 8, n_top / 4, n_top / 2].into_iter().filter(|&v| v >= 1).collect();
    let mut out = Vec::new();
    for j in 1..=6u32 {
        let delta = Rational::new(1, 1 << j);
        let mut witnesses = Vec::new();
        let mut all = true;
        for &nu in &nus {
            let found = (nu..=n_top).find(|&n| {
                m.floor(n)
                    .ok()
                    .and_then(|b| a.count_to(b).ok())
                    .is_some_and(|c| Rational::new(c, n) > delta)
            });
            match found {
                Some(n) => witnesses.push((nu, n)),
                None => all = false,
            }
        }
        out.push(DeltaWitness { delta, witnesses, all_found: all });
    }
    Ok(out)
}

/// Checks that `{A : upper (m_n)-density > 0}` is a proper upper family exactly when
/// `limsup m_n / n > 0`.
pub fn weight_family_check(m: &WeightSequence, cfg: &EvalConfig, seed: u64) -> Result<FamilyCheckReport, DensityError> {
    let family = FamilySpec::new(FamilyLabel::UpperMn, None, Some(m.clone()))?;
    let (liminf, limsup, evidence) = match m.growth_limit() {
        Some(g) => (Some(g.liminf), Some(g.limsup), "analytic"),
        None => {
            let n = m.len().map_or(cfg.n_max, |l| l.min(cfg.n_max));
            match m.trend(n) {
                Trend::Vanishing => (Some(ExtValue::ZERO), Some(ExtValue::ZERO), "horizon-trend"),
                Trend::Diverging => (Some(ExtValue::Infinite), Some(ExtValue::Infinite), "horizon-trend"),
                Trend::Indeterminate => (None, None, "horizon-trend"),
            }
        }
    };
    let criterion = limsup.map_or(Tri::Undetermined, |v| Tri::from_bool(!v.is_zero()));
    let naturals_set = IntegerSet::naturals(1 << 16);
    let naturals = is_member(&family, &naturals_set, cfg)?;
    let mut naturals_verdict = naturals.verdict;
    if naturals_verdict == Tri::Undetermined
        && criterion == Tri::No
        && naturals.result.upper_bound.to_f64() < ZERO_TOLERANCE
    {
        naturals_verdict = Tri::No;
    }
    let proper = is_member(&family, &IntegerSet::empty(1 << 16), cfg)?.verdict == Tri::No;
    let upward_closed_samples = sample_upward_closure(&family, 100, seed, cfg)?;
    let upper_conditions = if criterion == Tri::Yes {
        Some(UpperConditions {
            decomposition: decomposition_witnesses(&naturals_set, m, cfg)?,
            translates: condition_iii_translates(&family, &naturals_set, &[1, 7, 100], cfg)?,
        })
    } else {
        None
    };
    let furstenberg_verdict = match criterion {
        Tri::Yes if naturals_verdict == Tri::Yes && proper && upward_closed_samples.failed == 0 => Tri::Yes,
        Tri::No if naturals_verdict != Tri::Yes => Tri::No,
        _ => Tri::Undetermined,
    };
    Ok(FamilyCheckReport {
        weight: m.clone(),
        liminf_ratio: liminf,
        limsup_ratio: limsup,
        growth_evidence: evidence.into(),
        criterion,
        naturals,
        naturals_verdict,
        proper,
        upward_closed_samples,
        upper_conditions,
        furstenberg_verdict,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranslateEntry {
    pub k: u64,
    pub original: Membership,
    pub translated: Membership,
    /// Brackets overlap once widened by `2k / N`.
    pub overlap: bool,
    pub agree: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranslateReport {
    pub entries: Vec<TranslateEntry>,
    pub ok: bool,
}

/// Compares `A` with `A - k = {x - k : x ∈ A, x > k}` for each `k`.
pub fn condition_iii_translates(
    family: &FamilySpec,
    a: &IntegerSet,
    ks: &[u64],
    cfg: &EvalConfig,
) -> Result<TranslateReport, DensityError> {
    let original = is_member(family, a, cfg)?;
    let mut entries = Vec::with_capacity(ks.len());
    for &k in ks {
        let shifted = a.translate(-(k as i64))?;
        let translated = is_member(family, &shifted, cfg)?;
        let n = original.result.horizons.n_max.max(translated.result.horizons.n_max).max(1);
        let tol = if original.result.exact && translated.result.exact { 1e-12 } else { 2.0 * k as f64 / n as f64 };
        let (a_lo, a_hi) = (original.result.lower_bound.to_f64(), original.result.upper_bound.to_f64());
        let (b_lo, b_hi) = (translated.result.lower_bound.to_f64(), translated.result.upper_bound.to_f64());
        let overlap = (a_hi.is_infinite() && b_hi.is_infinite()) || (a_lo <= b_hi + tol && b_lo <= a_hi + tol);
        let agree = original.verdict == translated.verdict;
        entries.push(TranslateEntry { k, original: original.clone(), translated, overlap, agree });
    }
    let ok = entries.iter().all(|e| e.overlap && e.agree);
    Ok(TranslateReport { entries, ok })
}
