//! Subsets of ℕ = {1, 2, ...} as canonical unions of closed integer intervals.
//!
//! A set is stored as an explicit interval list for its aperiodic prefix plus an
//! optional periodic tail (start, period, pattern of offsets). Counting
//! `|A ∩ [a, b]|` is `O(log #intervals)` in both parts, so periodic sets such as
//! the even numbers can be counted at horizons far beyond what an explicit list
//! could hold.
//!
//! Membership is only determined up to `horizon`. A set may carry a
//! [`SetRule`] that re-materializes it to any larger horizon; combinators
//! (`translate`, `dilate`, `boolean`) wrap the rules of their operands so the
//! result stays extendable.

use std::cmp::{max, min};
use std::fmt;
use std::sync::Arc;

use num_integer::Integer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::value::Rational;

/// Default cap on any materialized horizon.
pub const DEFAULT_MAX_HORIZON: u64 = (1 << 31) - 1;
/// Largest number of explicit intervals a single materialization may produce.
pub const MAX_INTERVALS: usize = 20_000_000;
/// Largest period kept symbolic when combining two periodic sets.
pub const MAX_PERIOD: u64 = 1 << 20;

/// Horizon cap from `DENSITYLAB_MAX_HORIZON`, else [`DEFAULT_MAX_HORIZON`].
pub fn configured_max_horizon() -> u64 {
    std::env::var("DENSITYLAB_MAX_HORIZON")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_MAX_HORIZON)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SetError {
    #[error("horizon exceeded: need {needed}, set is only determined up to {horizon}")]
    HorizonExceeded { needed: u64, horizon: u64 },
    #[error("horizon {needed} exceeds the configured cap {cap}")]
    CapExceeded { needed: u64, cap: u64 },
    #[error("invalid window [{a}, {b}]")]
    InvalidWindow { a: u64, b: u64 },
    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: u64, hi: u64 },
    #[error("set has {found} members within its horizon, {needed} required")]
    InsufficientMembers { needed: usize, found: usize },
    #[error("materialization needs more than {limit} intervals")]
    TooLarge { limit: usize },
    #[error("shift by {k} is not below the horizon {horizon}")]
    ShiftOutOfRange { k: i64, horizon: u64 },
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
}

/// Closed interval `[lo, hi]` of positive integers. Serialized as `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(u64, u64)", into = "(u64, u64)")]
pub struct Interval {
    pub lo: u64,
    pub hi: u64,
}

impl Interval {
    pub fn new(lo: u64, hi: u64) -> Self {
        debug_assert!(lo <= hi);
        Interval { lo, hi }
    }

    pub fn len(&self) -> u64 {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl From<(u64, u64)> for Interval {
    fn from((lo, hi): (u64, u64)) -> Self {
        Interval { lo, hi }
    }
}

impl From<Interval> for (u64, u64) {
    fn from(iv: Interval) -> Self {
        (iv.lo, iv.hi)
    }
}

/// Sorted, disjoint, non-adjacent intervals with prefix counts.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct Runs {
    ivs: Vec<Interval>,
    cum: Vec<u64>,
}

impl Runs {
    fn from_canonical(ivs: Vec<Interval>) -> Self {
        let mut cum = Vec::with_capacity(ivs.len() + 1);
        let mut acc = 0u64;
        cum.push(0);
        for iv in &ivs {
            acc += iv.len();
            cum.push(acc);
        }
        Runs { ivs, cum }
    }

    fn total(&self) -> u64 {
        *self.cum.last().unwrap_or(&0)
    }

    /// Members `<= x`.
    fn count_upto(&self, x: u64) -> u64 {
        let i = self.ivs.partition_point(|iv| iv.lo <= x);
        if i == 0 {
            return 0;
        }
        let iv = self.ivs[i - 1];
        self.cum[i - 1] + (min(iv.hi, x) - iv.lo + 1)
    }

    fn contains(&self, x: u64) -> bool {
        let i = self.ivs.partition_point(|iv| iv.hi < x);
        i < self.ivs.len() && self.ivs[i].lo <= x
    }

    /// Intervals intersecting `[lo, hi]` (unclipped).
    fn range(&self, lo: u64, hi: u64) -> &[Interval] {
        let a = self.ivs.partition_point(|iv| iv.hi < lo);
        let b = self.ivs.partition_point(|iv| iv.lo <= hi);
        &self.ivs[a..max(a, b)]
    }
}

/// Sorts and merges overlapping or adjacent intervals.
pub fn canonicalize(mut ivs: Vec<Interval>) -> Vec<Interval> {
    ivs.sort_unstable();
    let mut out: Vec<Interval> = Vec::with_capacity(ivs.len());
    for iv in ivs {
        match out.last_mut() {
            Some(last) if iv.lo <= last.hi.saturating_add(1) => last.hi = max(last.hi, iv.hi),
            _ => out.push(iv),
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Tail {
    start: u64,
    period: u64,
    /// Offsets in `[0, period)`.
    pattern: Runs,
}

impl Tail {
    /// Members of the tail in `[start, x]`.
    fn count_upto(&self, x: u64) -> u64 {
        if x < self.start {
            return 0;
        }
        let t = x - self.start + 1;
        let (full, rem) = t.div_rem(&self.period);
        full * self.pattern.total() + if rem == 0 { 0 } else { self.pattern.count_upto(rem - 1) }
    }

    fn contains(&self, x: u64) -> bool {
        x >= self.start && self.pattern.contains((x - self.start) % self.period)
    }

    fn iter_in(&self, lo: u64, hi: u64) -> TailIter<'_> {
        let from = max(lo, self.start);
        let j = (from - self.start) / self.period;
        let base = self.start + j * self.period;
        let off = from - base;
        let idx = self.pattern.ivs.partition_point(|o| o.hi < off);
        TailIter { tail: self, base, idx, lo, hi }
    }
}

struct TailIter<'a> {
    tail: &'a Tail,
    base: u64,
    idx: usize,
    lo: u64,
    hi: u64,
}

impl Iterator for TailIter<'_> {
    type Item = Interval;

    fn next(&mut self) -> Option<Interval> {
        let pat = &self.tail.pattern.ivs;
        if pat.is_empty() {
            return None;
        }
        loop {
            if self.idx == pat.len() {
                self.idx = 0;
                self.base = self.base.checked_add(self.tail.period)?;
            }
            if self.base > self.hi {
                return None;
            }
            let o = pat[self.idx];
            self.idx += 1;
            let (lo, hi) = (self.base + o.lo, self.base + o.hi);
            if hi < self.lo {
                continue;
            }
            if lo > self.hi {
                return None;
            }
            return Some(Interval::new(max(lo, self.lo), min(hi, self.hi)));
        }
    }
}

/// Merges adjacent intervals coming out of an ordered stream.
struct Merged<I: Iterator<Item = Interval>> {
    inner: I,
    pending: Option<Interval>,
}

impl<I: Iterator<Item = Interval>> Iterator for Merged<I> {
    type Item = Interval;

    fn next(&mut self) -> Option<Interval> {
        loop {
            match (self.pending, self.inner.next()) {
                (None, None) => return None,
                (None, Some(iv)) => self.pending = Some(iv),
                (Some(p), None) => {
                    self.pending = None;
                    return Some(p);
                }
                (Some(p), Some(iv)) => {
                    if iv.lo <= p.hi + 1 {
                        self.pending = Some(Interval::new(p.lo, max(p.hi, iv.hi)));
                    } else {
                        self.pending = Some(iv);
                        return Some(p);
                    }
                }
            }
        }
    }
}

/// Qualitative asymptotic behaviour of the gaps `d_{n+1} - d_n` between members.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapLaw {
    Bounded,
    /// `limsup` of the gaps is infinite.
    Unbounded,
    /// The gaps tend to infinity.
    Divergent,
    Unknown,
}

/// Behaviour of the lengths of maximal runs of consecutive members.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunLaw {
    Bounded,
    Unbounded,
    Unknown,
}

/// Leading-order behaviour of the counting function `F(x) = |A ∩ [1, x]|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum CountingLaw {
    /// `F(x) / x^exponent -> coef`.
    Power {
        coef: f64,
        #[serde(with = "crate::value::rational_str")]
        exponent: Rational,
    },
    /// `F(x) / ln x -> coef`.
    Log { coef: f64 },
}

/// Structural facts about a set that hold beyond any finite horizon.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Asymptotics {
    pub finite: bool,
    pub gaps: GapLaw,
    pub runs: RunLaw,
    pub counting: Option<CountingLaw>,
}

impl Asymptotics {
    pub const UNKNOWN: Asymptotics =
        Asymptotics { finite: false, gaps: GapLaw::Unknown, runs: RunLaw::Unknown, counting: None };

    pub const FINITE: Asymptotics =
        Asymptotics { finite: true, gaps: GapLaw::Unknown, runs: RunLaw::Bounded, counting: None };
}

impl Default for Asymptotics {
    fn default() -> Self {
        Asymptotics::UNKNOWN
    }
}

/// A generator that can materialize a set to any horizon.
pub trait SetRule: fmt::Debug + Send + Sync {
    /// Materializes the set on `[1, horizon]`. The returned set need not carry a rule.
    fn materialize(&self, horizon: u64) -> Result<IntegerSet, SetError>;

    /// JSON description used in canonical serialization.
    fn describe(&self) -> serde_json::Value;

    fn asymptotics(&self) -> Asymptotics {
        Asymptotics::UNKNOWN
    }
}

/// Subset of ℕ determined on `[1, horizon]`, optionally extendable through a rule.
#[derive(Clone)]
pub struct IntegerSet {
    prefix: Arc<Runs>,
    tail: Option<Arc<Tail>>,
    horizon: u64,
    rule: Option<Arc<dyn SetRule>>,
}

impl fmt::Debug for IntegerSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("IntegerSet");
        d.field("horizon", &self.horizon).field("prefix_intervals", &self.prefix.ivs.len());
        if let Some(t) = &self.tail {
            d.field("tail_start", &t.start).field("period", &t.period);
        }
        if let Some(r) = &self.rule {
            d.field("rule", &r.describe());
        }
        d.finish()
    }
}

impl PartialEq for IntegerSet {
    /// Same horizon and same members. Walks every interval, so avoid on huge periodic sets.
    fn eq(&self, other: &Self) -> bool {
        self.horizon == other.horizon && self.intervals().eq(other.intervals())
    }
}

impl IntegerSet {
    /// Builds a set from arbitrary intervals; pieces above `horizon` are clipped.
    pub fn from_intervals<I>(ivs: I, horizon: u64) -> Result<Self, SetError>
    where
        I: IntoIterator,
        I::Item: Into<Interval>,
    {
        let mut v = Vec::new();
        for iv in ivs {
            let iv: Interval = iv.into();
            if iv.lo == 0 || iv.lo > iv.hi {
                return Err(SetError::InvalidInterval { lo: iv.lo, hi: iv.hi });
            }
            if iv.lo <= horizon {
                v.push(Interval::new(iv.lo, min(iv.hi, horizon)));
            }
        }
        if v.len() > MAX_INTERVALS {
            return Err(SetError::TooLarge { limit: MAX_INTERVALS });
        }
        Ok(Self::from_canonical(canonicalize(v), horizon))
    }

    pub fn from_members<I: IntoIterator<Item = u64>>(members: I, horizon: u64) -> Result<Self, SetError> {
        Self::from_intervals(members.into_iter().map(|m| Interval { lo: m, hi: m }), horizon)
    }

    pub(crate) fn from_canonical(ivs: Vec<Interval>, horizon: u64) -> Self {
        IntegerSet { prefix: Arc::new(Runs::from_canonical(ivs)), tail: None, horizon, rule: None }
    }

    /// A finite set: no members beyond the listed ones, at any horizon.
    pub fn finite<I>(ivs: I, horizon: u64) -> Result<Self, SetError>
    where
        I: IntoIterator,
        I::Item: Into<Interval>,
    {
        let all = Self::from_intervals(ivs, u64::MAX)?;
        let rule = FiniteRule { ivs: all.prefix.ivs.clone() };
        Ok(rule.materialize(horizon)?.with_rule(Arc::new(rule)))
    }

    pub fn empty(horizon: u64) -> Self {
        Self::finite(Vec::<Interval>::new(), horizon).expect("empty set")
    }

    /// Eventually periodic set: explicit `prefix` below `start`, then `pattern`
    /// (offsets in `[0, period)`) repeated forever from `start`.
    pub fn eventually_periodic(
        prefix: Vec<Interval>,
        start: u64,
        period: u64,
        pattern: Vec<Interval>,
        horizon: u64,
    ) -> Result<Self, SetError> {
        let rule = PeriodicRule::new(prefix, start, period, pattern)?;
        Ok(rule.materialize(horizon)?.with_rule(Arc::new(rule)))
    }

    pub fn naturals(horizon: u64) -> Self {
        Self::eventually_periodic(vec![], 1, 1, vec![Interval::new(0, 0)], horizon).expect("naturals")
    }

    /// `{first, first + step, first + 2 step, ...}`.
    pub fn arithmetic(step: u64, first: u64, horizon: u64) -> Result<Self, SetError> {
        if step == 0 || first == 0 {
            return Err(SetError::InvalidParameters(format!(
                "arithmetic progression needs step >= 1 and first >= 1, got step={step} first={first}"
            )));
        }
        Self::eventually_periodic(vec![], first, step, vec![Interval::new(0, 0)], horizon)
    }

    /// Attaches a generator rule.
    pub fn with_rule(mut self, rule: Arc<dyn SetRule>) -> Self {
        self.rule = Some(rule);
        self
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn rule(&self) -> Option<&Arc<dyn SetRule>> {
        self.rule.as_ref()
    }

    /// Structural facts, from the periodic tail when present, else from the rule.
    pub fn asymptotics(&self) -> Asymptotics {
        let Some(rule) = &self.rule else {
            return Asymptotics::UNKNOWN;
        };
        match &self.tail {
            Some(t) => {
                let per = t.pattern.total();
                if per == 0 {
                    return Asymptotics::FINITE;
                }
                Asymptotics {
                    finite: false,
                    gaps: GapLaw::Bounded,
                    runs: if per == t.period { RunLaw::Unbounded } else { RunLaw::Bounded },
                    counting: Some(CountingLaw::Power {
                        coef: per as f64 / t.period as f64,
                        exponent: Rational::from_integer(1),
                    }),
                }
            }
            None => rule.asymptotics(),
        }
    }

    /// Asymptotic density `r/p` of an eventually periodic, rule-backed set.
    pub fn periodic_density(&self) -> Option<Rational> {
        self.rule.as_ref()?;
        let t = self.tail.as_ref()?;
        Some(Rational::new(t.pattern.total(), t.period))
    }

    /// `(start, period)` of the periodic tail, if any.
    pub fn period(&self) -> Option<(u64, u64)> {
        self.tail.as_ref().map(|t| (t.start, t.period))
    }

    /// `|A ∩ [1, x]|` for `x <= horizon` (unchecked beyond).
    pub(crate) fn count_upto(&self, x: u64) -> u64 {
        self.prefix.count_upto(x) + self.tail.as_ref().map_or(0, |t| t.count_upto(x))
    }

    /// Exact `|A ∩ [a, b]|`. Extends through the rule when `b` is past the horizon.
    pub fn count(&self, a: u64, b: u64) -> Result<u64, SetError> {
        if a == 0 || a > b {
            return Err(SetError::InvalidWindow { a, b });
        }
        if b > self.horizon {
            return self.ensure_horizon(b, u64::MAX)?.count(a, b);
        }
        Ok(self.count_upto(b) - self.count_upto(a - 1))
    }

    /// `|A ∩ [1, x]|`, with `x = 0` giving 0.
    pub fn count_to(&self, x: u64) -> Result<u64, SetError> {
        if x == 0 {
            return Ok(0);
        }
        self.count(1, x)
    }

    /// Number of members up to the horizon.
    pub fn len(&self) -> u64 {
        self.count_upto(self.horizon)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, x: u64) -> bool {
        x >= 1
            && x <= self.horizon
            && (self.prefix.contains(x) || self.tail.as_ref().is_some_and(|t| t.contains(x)))
    }

    /// Canonical intervals intersecting `[lo, hi]`, clipped to it and to the horizon.
    pub fn intervals_in(&self, lo: u64, hi: u64) -> impl Iterator<Item = Interval> + '_ {
        let hi = min(hi, self.horizon);
        let lo = max(lo, 1);
        let (pre, tail): (&[Interval], Option<TailIter<'_>>) = if lo > hi {
            (&[], None)
        } else {
            (self.prefix.range(lo, hi), self.tail.as_ref().map(|t| t.iter_in(lo, hi)))
        };
        let raw = pre
            .iter()
            .map(move |iv| Interval::new(max(iv.lo, lo), min(iv.hi, hi)))
            .chain(tail.into_iter().flatten());
        Merged { inner: raw, pending: None }
    }

    /// All canonical intervals up to the horizon.
    pub fn intervals(&self) -> impl Iterator<Item = Interval> + '_ {
        self.intervals_in(1, self.horizon)
    }

    pub fn members(&self) -> impl Iterator<Item = u64> + '_ {
        self.intervals().flat_map(|iv| iv.lo..=iv.hi)
    }

    /// Re-materializes through the rule so that the horizon is at least `needed`,
    /// growing geometrically (x2) to amortize repeated extensions.
    pub fn ensure_horizon(&self, needed: u64, cap: u64) -> Result<IntegerSet, SetError> {
        if needed <= self.horizon {
            return Ok(self.clone());
        }
        if needed > cap {
            return Err(SetError::CapExceeded { needed, cap });
        }
        let Some(rule) = &self.rule else {
            return Err(SetError::HorizonExceeded { needed, horizon: self.horizon });
        };
        let target = max(needed, min(self.horizon.saturating_mul(2), cap));
        Ok(rule.materialize(target)?.with_rule(rule.clone()))
    }

    /// Restricts the determined range to `[1, h]` (keeps the rule).
    pub fn truncate(&self, h: u64) -> IntegerSet {
        if h >= self.horizon {
            return self.clone();
        }
        let pre: Vec<Interval> = self
            .prefix
            .range(1, h)
            .iter()
            .map(|iv| Interval::new(iv.lo, min(iv.hi, h)))
            .collect();
        IntegerSet {
            prefix: Arc::new(Runs::from_canonical(pre)),
            tail: self.tail.clone(),
            horizon: h,
            rule: self.rule.clone(),
        }
    }

    /// `A + k` for `k > 0`, `A - |k| = {a - |k| : a > |k|}` for `k < 0`.
    pub fn translate(&self, k: i64) -> Result<IntegerSet, SetError> {
        if k.unsigned_abs() >= self.horizon {
            return Err(SetError::ShiftOutOfRange { k, horizon: self.horizon });
        }
        let mut out = if k >= 0 {
            let k = k as u64;
            let pre = self.prefix.ivs.iter().map(|iv| Interval::new(iv.lo + k, iv.hi + k)).collect();
            let tail = self.tail.as_ref().map(|t| {
                Arc::new(Tail { start: t.start + k, period: t.period, pattern: t.pattern.clone() })
            });
            IntegerSet {
                prefix: Arc::new(Runs::from_canonical(pre)),
                tail,
                horizon: self.horizon.saturating_add(k),
                rule: None,
            }
        } else {
            let d = k.unsigned_abs();
            let pre: Vec<Interval> = self
                .prefix
                .range(d + 1, u64::MAX)
                .iter()
                .map(|iv| Interval::new(max(iv.lo, d + 1) - d, iv.hi - d))
                .collect();
            let (pre, tail) = match &self.tail {
                None => (pre, None),
                Some(t) if t.start > d => (
                    pre,
                    Some(Arc::new(Tail { start: t.start - d, period: t.period, pattern: t.pattern.clone() })),
                ),
                Some(t) => {
                    // Re-phase the tail so that it starts at original position d + 1.
                    let from = d + 1;
                    let pattern: Vec<Interval> = Merged {
                        inner: t.iter_in(from, from + t.period - 1),
                        pending: None,
                    }
                    .map(|iv| Interval::new(iv.lo - from, iv.hi - from))
                    .collect();
                    (
                        pre,
                        Some(Arc::new(Tail { start: 1, period: t.period, pattern: Runs::from_canonical(pattern) })),
                    )
                }
            };
            IntegerSet {
                prefix: Arc::new(Runs::from_canonical(pre)),
                tail,
                horizon: self.horizon - d,
                rule: None,
            }
        };
        out.rule = self
            .rule
            .as_ref()
            .map(|r| Arc::new(TranslateRule { inner: r.clone(), k }) as Arc<dyn SetRule>);
        Ok(out)
    }

    /// `kA = {k a : a ∈ A}`, horizon `k * horizon` capped at `cap`.
    pub fn dilate(&self, k: u64, cap: u64) -> Result<IntegerSet, SetError> {
        if k == 0 {
            return Err(SetError::InvalidParameters("dilation factor must be >= 1".into()));
        }
        if k == 1 {
            return Ok(self.clone());
        }
        let horizon = min(self.horizon.saturating_mul(k), cap);
        let scale_points = |ivs: &[Interval], limit: u64| -> Result<Vec<Interval>, SetError> {
            let n: u64 = ivs.iter().map(|iv| iv.len()).sum();
            if n > MAX_INTERVALS as u64 {
                return Err(SetError::TooLarge { limit: MAX_INTERVALS });
            }
            Ok(ivs
                .iter()
                .flat_map(|iv| iv.lo..=iv.hi)
                .map(|a| a.saturating_mul(k))
                .take_while(|&v| v <= limit)
                .map(|v| Interval::new(v, v))
                .collect())
        };
        let pre = scale_points(&self.prefix.ivs, horizon)?;
        let tail = match &self.tail {
            None => None,
            Some(t) => {
                let pattern = scale_points(&t.pattern.ivs, u64::MAX)?;
                Some(Arc::new(Tail {
                    start: t.start.saturating_mul(k),
                    period: t.period.saturating_mul(k),
                    pattern: Runs::from_canonical(pattern),
                }))
            }
        };
        Ok(IntegerSet {
            prefix: Arc::new(Runs::from_canonical(pre)),
            tail,
            horizon,
            rule: self.rule.as_ref().map(|r| Arc::new(DilateRule { inner: r.clone(), k }) as Arc<dyn SetRule>),
        })
    }

    /// Complement in `[1, horizon]`.
    pub fn complement(&self) -> Result<IntegerSet, SetError> {
        let mut out = match &self.tail {
            Some(t) if t.start <= self.horizon => {
                let pre = if t.start > 1 {
                    combine_lists(
                        &[Interval::new(1, t.start - 1)],
                        &self.prefix.ivs,
                        SetOp::Difference,
                    )
                } else {
                    vec![]
                };
                let pattern =
                    combine_lists(&[Interval::new(0, t.period - 1)], &t.pattern.ivs, SetOp::Difference);
                IntegerSet {
                    prefix: Arc::new(Runs::from_canonical(pre)),
                    tail: Some(Arc::new(Tail {
                        start: t.start,
                        period: t.period,
                        pattern: Runs::from_canonical(pattern),
                    })),
                    horizon: self.horizon,
                    rule: None,
                }
            }
            _ => {
                let own = collect_limited(self.intervals())?;
                let ivs = combine_lists(&[Interval::new(1, self.horizon)], &own, SetOp::Difference);
                IntegerSet::from_canonical(ivs, self.horizon)
            }
        };
        out.rule = self
            .rule
            .as_ref()
            .map(|r| Arc::new(ComplementRule { inner: r.clone() }) as Arc<dyn SetRule>);
        Ok(out)
    }

    /// `A op B` on `[1, min(horizon_A, horizon_B)]`.
    pub fn boolean(&self, other: &IntegerSet, op: SetOp) -> Result<IntegerSet, SetError> {
        let h = min(self.horizon, other.horizon);
        if op == SetOp::Complement {
            return self.truncate(h).complement();
        }
        let symbolic = match (&self.tail, &other.tail) {
            (Some(ta), Some(tb)) => {
                let l = ta.period.lcm(&tb.period);
                let s = max(ta.start, tb.start);
                (l <= MAX_PERIOD && s <= h).then_some((s, l))
            }
            _ => None,
        };
        let mut out = if let Some((s, l)) = symbolic {
            let pre = if s > 1 {
                let a = collect_limited(self.intervals_in(1, s - 1))?;
                let b = collect_limited(other.intervals_in(1, s - 1))?;
                combine_lists(&a, &b, op)
            } else {
                vec![]
            };
            let a = collect_limited(self.ignoring_horizon().intervals_in(s, s + l - 1))?;
            let b = collect_limited(other.ignoring_horizon().intervals_in(s, s + l - 1))?;
            let pattern: Vec<Interval> = combine_lists(&a, &b, op)
                .into_iter()
                .map(|iv| Interval::new(iv.lo - s, iv.hi - s))
                .collect();
            IntegerSet {
                prefix: Arc::new(Runs::from_canonical(pre)),
                tail: Some(Arc::new(Tail { start: s, period: l, pattern: Runs::from_canonical(pattern) })),
                horizon: h,
                rule: None,
            }
        } else {
            let a = collect_limited(self.intervals_in(1, h))?;
            let b = collect_limited(other.intervals_in(1, h))?;
            IntegerSet::from_canonical(combine_lists(&a, &b, op), h)
        };
        if let (Some(ra), Some(rb)) = (&self.rule, &other.rule) {
            out.rule = Some(Arc::new(CombineRule { a: ra.clone(), b: rb.clone(), op }));
        }
        Ok(out)
    }

    /// View with an unbounded horizon; only meaningful for the periodic tail.
    fn ignoring_horizon(&self) -> IntegerSet {
        IntegerSet { horizon: u64::MAX, ..self.clone() }
    }

    /// First `n` gaps between consecutive members.
    pub fn gap_profile(&self, n: usize) -> Result<GapProfile, SetError> {
        let elements: Vec<u64> = self.members().take(n + 1).collect();
        if elements.len() < n + 1 {
            return Err(SetError::InsufficientMembers { needed: n + 1, found: elements.len() });
        }
        let gaps = elements.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(GapProfile { elements, gaps })
    }
}

fn collect_limited<I: Iterator<Item = Interval>>(it: I) -> Result<Vec<Interval>, SetError> {
    let mut v = Vec::new();
    for iv in it {
        if v.len() >= MAX_INTERVALS {
            return Err(SetError::TooLarge { limit: MAX_INTERVALS });
        }
        v.push(iv);
    }
    Ok(v)
}

/// Binary set operations. `Complement` ignores its second operand except for the horizon.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SetOp {
    Union,
    Intersection,
    Difference,
    SymmetricDifference,
    Complement,
}

impl SetOp {
    fn apply(self, a: bool, b: bool) -> bool {
        match self {
            SetOp::Union => a || b,
            SetOp::Intersection => a && b,
            SetOp::Difference => a && !b,
            SetOp::SymmetricDifference => a != b,
            SetOp::Complement => !a,
        }
    }
}

/// Sweep over the boundaries of two canonical lists.
fn combine_lists(a: &[Interval], b: &[Interval], op: SetOp) -> Vec<Interval> {
    // Endpoints of a canonical list are strictly increasing, so a merge suffices.
    let ends = |v: &[Interval]| v.iter().flat_map(|iv| [iv.lo, iv.hi + 1]).collect::<Vec<u64>>();
    let (ea, eb) = (ends(a), ends(b));
    let mut pts: Vec<u64> = Vec::with_capacity(ea.len() + eb.len());
    let (mut i, mut j) = (0, 0);
    while i < ea.len() || j < eb.len() {
        let next = if j >= eb.len() || (i < ea.len() && ea[i] <= eb[j]) {
            i += 1;
            ea[i - 1]
        } else {
            j += 1;
            eb[j - 1]
        };
        if pts.last() != Some(&next) {
            pts.push(next);
        }
    }
    let (mut ia, mut ib) = (0, 0);
    let mut out: Vec<Interval> = Vec::new();
    for w in pts.windows(2) {
        let (p, next) = (w[0], w[1]);
        while ia < a.len() && a[ia].hi < p {
            ia += 1;
        }
        while ib < b.len() && b[ib].hi < p {
            ib += 1;
        }
        let in_a = ia < a.len() && a[ia].lo <= p;
        let in_b = ib < b.len() && b[ib].lo <= p;
        if op.apply(in_a, in_b) {
            match out.last_mut() {
                Some(last) if last.hi + 1 == p => last.hi = next - 1,
                _ => out.push(Interval::new(p, next - 1)),
            }
        }
    }
    out
}

/// Leading members of a set and the gaps between them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapProfile {
    pub elements: Vec<u64>,
    pub gaps: Vec<u64>,
}

impl GapProfile {
    pub fn max_gap(&self) -> u64 {
        self.gaps.iter().copied().max().unwrap_or(0)
    }

    pub fn has_gap_exceeding(&self, bound: u64) -> bool {
        self.gaps.iter().any(|&g| g > bound)
    }

    /// Finite-evidence reading of the gap sequence: the largest gap in the last
    /// half keeps growing relative to the first quarter and the second quarter.
    pub fn looks_unbounded(&self) -> bool {
        let n = self.gaps.len();
        if n < 8 {
            return false;
        }
        let m = |r: std::ops::Range<usize>| self.gaps[r].iter().copied().max().unwrap_or(0);
        let (q1, q2, h2) = (m(0..n / 4), m(n / 4..n / 2), m(n / 2..n));
        q1 < q2 && q2 < h2
    }
}

#[derive(Debug)]
struct FiniteRule {
    ivs: Vec<Interval>,
}

impl SetRule for FiniteRule {
    fn materialize(&self, horizon: u64) -> Result<IntegerSet, SetError> {
        IntegerSet::from_intervals(self.ivs.iter().copied(), horizon)
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({ "rule": "finite", "intervals": self.ivs })
    }

    fn asymptotics(&self) -> Asymptotics {
        Asymptotics::FINITE
    }
}

#[derive(Debug)]
struct PeriodicRule {
    prefix: Vec<Interval>,
    start: u64,
    period: u64,
    pattern: Vec<Interval>,
}

impl PeriodicRule {
    fn new(prefix: Vec<Interval>, start: u64, period: u64, pattern: Vec<Interval>) -> Result<Self, SetError> {
        if start == 0 || period == 0 {
            return Err(SetError::InvalidParameters("periodic tail needs start >= 1 and period >= 1".into()));
        }
        for iv in prefix.iter().chain(&pattern) {
            if iv.lo > iv.hi {
                return Err(SetError::InvalidInterval { lo: iv.lo, hi: iv.hi });
            }
        }
        let prefix = canonicalize(prefix);
        if prefix.first().is_some_and(|iv| iv.lo == 0) || prefix.last().is_some_and(|iv| iv.hi >= start) {
            return Err(SetError::InvalidParameters("prefix must lie in [1, start)".into()));
        }
        let pattern = canonicalize(pattern);
        if pattern.last().is_some_and(|iv| iv.hi >= period) {
            return Err(SetError::InvalidParameters("pattern offsets must lie in [0, period)".into()));
        }
        Ok(PeriodicRule { prefix, start, period, pattern })
    }
}

impl SetRule for PeriodicRule {
    fn materialize(&self, horizon: u64) -> Result<IntegerSet, SetError> {
        let pre: Vec<Interval> = self
            .prefix
            .iter()
            .filter(|iv| iv.lo <= horizon)
            .map(|iv| Interval::new(iv.lo, min(iv.hi, horizon)))
            .collect();
        Ok(IntegerSet {
            prefix: Arc::new(Runs::from_canonical(pre)),
            tail: Some(Arc::new(Tail {
                start: self.start,
                period: self.period,
                pattern: Runs::from_canonical(self.pattern.clone()),
            })),
            horizon,
            rule: None,
        })
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "rule": "periodic",
            "prefix": self.prefix,
            "start": self.start,
            "period": self.period,
            "pattern": self.pattern,
        })
    }
}

#[derive(Debug)]
struct TranslateRule {
    inner: Arc<dyn SetRule>,
    k: i64,
}

impl SetRule for TranslateRule {
    fn materialize(&self, horizon: u64) -> Result<IntegerSet, SetError> {
        let base_h = if self.k >= 0 {
            horizon.saturating_sub(self.k as u64).max(self.k as u64 + 1)
        } else {
            horizon + self.k.unsigned_abs()
        };
        let base = self.inner.materialize(base_h)?;
        let t = base.translate(self.k)?;
        Ok(if t.horizon > horizon { t.truncate(horizon) } else { t })
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({ "rule": "translate", "k": self.k, "inner": self.inner.describe() })
    }

    fn asymptotics(&self) -> Asymptotics {
        self.inner.asymptotics()
    }
}

#[derive(Debug)]
struct DilateRule {
    inner: Arc<dyn SetRule>,
    k: u64,
}

impl SetRule for DilateRule {
    fn materialize(&self, horizon: u64) -> Result<IntegerSet, SetError> {
        let base = self.inner.materialize(horizon.div_ceil(self.k))?;
        base.dilate(self.k, horizon)
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({ "rule": "dilate", "k": self.k, "inner": self.inner.describe() })
    }

    fn asymptotics(&self) -> Asymptotics {
        let a = self.inner.asymptotics();
        let counting = a.counting.map(|c| match c {
            CountingLaw::Power { coef, exponent } => CountingLaw::Power {
                coef: coef * (self.k as f64).powf(-crate::value::rational_to_f64(exponent)),
                exponent,
            },
            log => log,
        });
        Asymptotics {
            finite: a.finite,
            gaps: a.gaps,
            runs: if self.k >= 2 { RunLaw::Bounded } else { a.runs },
            counting,
        }
    }
}

#[derive(Debug)]
struct ComplementRule {
    inner: Arc<dyn SetRule>,
}

impl SetRule for ComplementRule {
    fn materialize(&self, horizon: u64) -> Result<IntegerSet, SetError> {
        self.inner.materialize(horizon)?.complement()
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({ "rule": "complement", "inner": self.inner.describe() })
    }
}

#[derive(Debug)]
struct CombineRule {
    a: Arc<dyn SetRule>,
    b: Arc<dyn SetRule>,
    op: SetOp,
}

impl SetRule for CombineRule {
    fn materialize(&self, horizon: u64) -> Result<IntegerSet, SetError> {
        let a = self.a.materialize(horizon)?;
        let b = self.b.materialize(horizon)?;
        // Operands come back rule-less; re-attach so periodic tails stay symbolic.
        let a = a.with_rule(self.a.clone());
        let b = b.with_rule(self.b.clone());
        let mut out = a.boolean(&b, self.op)?;
        out.rule = None;
        Ok(out)
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({ "rule": "combine", "op": self.op, "a": self.a.describe(), "b": self.b.describe() })
    }

    fn asymptotics(&self) -> Asymptotics {
        let (a, b) = (self.a.asymptotics(), self.b.asymptotics());
        let finite = match self.op {
            SetOp::Union | SetOp::SymmetricDifference => a.finite && b.finite,
            SetOp::Intersection => a.finite || b.finite,
            SetOp::Difference => a.finite,
            SetOp::Complement => false,
        };
        if finite {
            Asymptotics::FINITE
        } else {
            Asymptotics::UNKNOWN
        }
    }
}
