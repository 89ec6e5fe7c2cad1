//! The sixteen density functionals: closed forms where the structure of the set
//! and the weight decide the limit, finite-horizon brackets otherwise.
//!
//! Simple kinds read the ratios `|A ∩ [1, ⌊m_n⌋]| / n`. Banach kinds read
//! `|A ∩ [n+1, n+⌊m_s⌋]| / s`, with the inner limit over the window position `n`
//! and the outer limit over `s`. All ratios are exact fractions; only the
//! truncation of the limits to a tail of indices is approximate.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_traits::One;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::intset::{configured_max_horizon, CountingLaw, GapLaw, IntegerSet, RunLaw, SetError};
use crate::value::{cmp_fractions, rational_to_f64, ExtValue, Rational, Tri};
use crate::weights::{Base, GrowthLimit, Trend, WeightError, WeightKind, WeightSequence};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DensityError {
    #[error(transparent)]
    Set(#[from] SetError),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error("horizon infeasible: {what} needs {needed}, limit is {cap}")]
    HorizonInfeasible { what: String, needed: u64, cap: u64 },
    #[error("invalid density kind: {0}")]
    InvalidKind(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Lower,
    Upper,
}

/// Outer limit over `s` of the Banach kinds: `liminf` (l) or `limsup` (u).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outer {
    L,
    U,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleTag {
    Classic,
    Q,
    Mn,
}

/// One of the sixteen functionals, without its parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct KindTag {
    pub banach: bool,
    pub side: Side,
    pub outer: Option<Outer>,
    pub scale: ScaleTag,
}

impl KindTag {
    pub const fn simple(side: Side, scale: ScaleTag) -> Self {
        KindTag { banach: false, side, outer: None, scale }
    }

    pub const fn classic_banach(side: Side) -> Self {
        KindTag { banach: true, side, outer: None, scale: ScaleTag::Classic }
    }

    pub const fn banach(side: Side, outer: Outer, scale: ScaleTag) -> Self {
        KindTag { banach: true, side, outer: Some(outer), scale }
    }

    /// All sixteen tags.
    pub fn all() -> Vec<KindTag> {
        let mut v = Vec::with_capacity(16);
        for side in [Side::Lower, Side::Upper] {
            for scale in [ScaleTag::Classic, ScaleTag::Q, ScaleTag::Mn] {
                v.push(KindTag::simple(side, scale));
            }
            v.push(KindTag::classic_banach(side));
            for outer in [Outer::L, Outer::U] {
                for scale in [ScaleTag::Q, ScaleTag::Mn] {
                    v.push(KindTag::banach(side, outer, scale));
                }
            }
        }
        v
    }

    fn valid(&self) -> bool {
        match (self.banach, self.scale) {
            (false, _) => self.outer.is_none(),
            (true, ScaleTag::Classic) => self.outer.is_none(),
            (true, _) => self.outer.is_some(),
        }
    }
}

impl fmt::Display for KindTag {
    /// `lower`, `upper-q`, `lower-mn`, `upper-banach`, `lower-l-banach-q`, ...
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = match self.side {
            Side::Lower => "lower",
            Side::Upper => "upper",
        };
        let scale = match self.scale {
            ScaleTag::Classic => "",
            ScaleTag::Q => "-q",
            ScaleTag::Mn => "-mn",
        };
        match (self.banach, self.outer) {
            (false, _) => write!(f, "{side}{scale}"),
            (true, None) => write!(f, "{side}-banach{scale}"),
            (true, Some(Outer::L)) => write!(f, "{side}-l-banach{scale}"),
            (true, Some(Outer::U)) => write!(f, "{side}-u-banach{scale}"),
        }
    }
}

impl FromStr for KindTag {
    type Err = DensityError;

    fn from_str(s: &str) -> Result<Self, DensityError> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        KindTag::all()
            .into_iter()
            .find(|t| t.to_string() == norm)
            .ok_or_else(|| DensityError::InvalidKind(format!("unknown density kind {s:?}")))
    }
}

impl Serialize for KindTag {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for KindTag {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// A functional together with its weight (`n` for classic kinds, `n^q` for q-kinds).
#[derive(Clone, Debug, PartialEq)]
pub struct DensityKind {
    pub tag: KindTag,
    pub weight: WeightSequence,
}

impl DensityKind {
    /// Resolves the weight: identity for classic kinds, `power(q)` for q-kinds, `mn` for mn-kinds.
    pub fn new(tag: KindTag, q: Option<Rational>, mn: Option<WeightSequence>) -> Result<Self, DensityError> {
        if !tag.valid() {
            return Err(DensityError::InvalidKind(format!("{tag:?}")));
        }
        let weight = match tag.scale {
            ScaleTag::Classic => WeightSequence::identity(),
            ScaleTag::Q => {
                let q = q.ok_or_else(|| DensityError::InvalidKind(format!("{tag} needs q")))?;
                WeightSequence::power(q)?
            }
            ScaleTag::Mn => mn.ok_or_else(|| DensityError::InvalidKind(format!("{tag} needs a weight sequence")))?,
        };
        Ok(DensityKind { tag, weight })
    }

    pub fn parse(label: &str, q: Option<Rational>, mn: Option<WeightSequence>) -> Result<Self, DensityError> {
        Self::new(label.parse()?, q, mn)
    }

    pub fn simple(side: Side, weight: WeightSequence) -> Self {
        DensityKind { tag: KindTag::simple(side, ScaleTag::Mn), weight }
    }

    pub fn classic(side: Side) -> Self {
        DensityKind { tag: KindTag::simple(side, ScaleTag::Classic), weight: WeightSequence::identity() }
    }

    pub fn classic_banach(side: Side) -> Self {
        DensityKind { tag: KindTag::classic_banach(side), weight: WeightSequence::identity() }
    }

    pub fn banach(side: Side, outer: Outer, weight: WeightSequence) -> Self {
        DensityKind { tag: KindTag::banach(side, outer, ScaleTag::Mn), weight }
    }

    pub fn label(&self) -> String {
        self.tag.to_string()
    }
}

impl fmt::Display for DensityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.tag.scale {
            ScaleTag::Classic => write!(f, "{}", self.tag),
            _ => write!(f, "{}[{}]", self.tag, self.weight),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnerMode {
    /// Inner extremum over `n ∈ [N/2, N]`, excluding prefix effects.
    Tail,
    /// Inner extremum over `n ∈ [1, N]`.
    Full,
}

impl FromStr for InnerMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "tail" => Ok(InnerMode::Tail),
            "full" => Ok(InnerMode::Full),
            _ => Err(format!("inner mode must be tail or full, got {s:?}")),
        }
    }
}

/// Reduction of a real bound `m_n` to an integer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rounding {
    Floor,
    Ceil,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub n_max: u64,
    pub s_max: u64,
    pub inner_mode: InnerMode,
    pub blow_up_threshold: f64,
    /// Cap on the horizon any rule-backed set may be materialized to.
    pub max_horizon: u64,
    pub closed_form: bool,
    /// Shrink infeasible horizons to the largest feasible ones instead of failing.
    pub clamp: bool,
    pub profile_samples: usize,
    pub rounding: Rounding,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            n_max: 1_000_000,
            s_max: 1_000,
            inner_mode: InnerMode::Tail,
            blow_up_threshold: 1e3,
            max_horizon: configured_max_horizon(),
            closed_form: true,
            clamp: true,
            profile_samples: 32,
            rounding: Rounding::Floor,
        }
    }
}

impl EvalConfig {
    pub fn estimate_only(mut self) -> Self {
        self.closed_form = false;
        self
    }

    pub fn with_horizons(mut self, n_max: u64, s_max: u64) -> Self {
        self.n_max = n_max;
        self.s_max = s_max;
        self
    }
}

/// One sampled ratio `numerator / denominator`. For Banach kinds `s` is the window
/// scale and `n` the position attaining the inner extremum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfilePoint {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub s: Option<u64>,
    pub n: u64,
    pub numerator: u64,
    pub denominator: u64,
}

impl ProfilePoint {
    pub fn ratio(&self) -> ExtValue {
        ExtValue::ratio(self.numerator, self.denominator)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Horizons {
    pub n_max: u64,
    pub s_max: u64,
    pub set_horizon: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityResult {
    pub kind: String,
    pub value: ExtValue,
    pub exact: bool,
    pub lower_bound: ExtValue,
    pub upper_bound: ExtValue,
    pub horizons: Horizons,
    pub method: String,
    pub profile: Vec<ProfilePoint>,
}

impl DensityResult {
    fn exact(kind: &DensityKind, value: ExtValue, reason: &str, set_horizon: u64) -> Self {
        DensityResult {
            kind: kind.label(),
            value,
            exact: true,
            lower_bound: value,
            upper_bound: value,
            horizons: Horizons { n_max: 0, s_max: 0, set_horizon },
            method: format!("closed-form:{reason}"),
            profile: vec![],
        }
    }

    pub fn width(&self) -> f64 {
        let w = self.upper_bound.to_f64() - self.lower_bound.to_f64();
        if w.is_nan() {
            0.0
        } else {
            w
        }
    }

    /// True when the bracket certifies a positive value.
    pub fn positive(&self) -> bool {
        self.lower_bound > ExtValue::ZERO
    }
}

/// Fraction compared exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Frac {
    num: u64,
    den: u64,
    at: u64,
    s: Option<u64>,
}

impl Frac {
    fn cmp_value(&self, o: &Frac) -> Ordering {
        cmp_fractions(self.num, self.den, o.num, o.den)
    }

    fn value(&self) -> ExtValue {
        ExtValue::ratio(self.num, self.den)
    }

    fn point(&self) -> ProfilePoint {
        ProfilePoint { s: self.s, n: self.at, numerator: self.num, denominator: self.den }
    }
}

/// Min and max with ties broken by the smaller index, so parallel reduction is deterministic.
fn min_frac(a: Frac, b: Frac) -> Frac {
    match a.cmp_value(&b) {
        Ordering::Less => a,
        Ordering::Greater => b,
        Ordering::Equal => {
            if (a.s, a.at) <= (b.s, b.at) {
                a
            } else {
                b
            }
        }
    }
}

fn max_frac(a: Frac, b: Frac) -> Frac {
    match a.cmp_value(&b) {
        Ordering::Greater => a,
        Ordering::Less => b,
        Ordering::Equal => {
            if (a.s, a.at) <= (b.s, b.at) {
                a
            } else {
                b
            }
        }
    }
}

fn set_cap(a: &IntegerSet, cfg: &EvalConfig) -> u64 {
    if a.rule().is_some() {
        cfg.max_horizon.max(a.horizon())
    } else {
        a.horizon()
    }
}

fn bound(m: &WeightSequence, n: u64, r: Rounding) -> Result<u64, WeightError> {
    match r {
        Rounding::Floor => m.floor(n),
        Rounding::Ceil => m.ceil(n),
    }
}

/// Exact ratios `|A ∩ [1, ⌊m_n⌋]| / n` for `n = 1..=n_max`.
pub fn simple_profile(a: &IntegerSet, m: &WeightSequence, n_max: u64) -> Result<Vec<ProfilePoint>, DensityError> {
    let top = m.floor(n_max)?;
    let cap = set_cap(a, &EvalConfig::default());
    let a = a.ensure_horizon(top, cap)?;
    (1..=n_max)
        .into_par_iter()
        .map(|n| {
            let b = m.floor(n)?;
            Ok(ProfilePoint { s: None, n, numerator: a.count_to(b)?, denominator: n })
        })
        .collect()
}

/// Exact extremes of `|A ∩ [n+1, n+⌊m_s⌋]| / s` over `n ∈ [lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowExtremes {
    pub inf: ProfilePoint,
    pub sup: ProfilePoint,
}

impl WindowExtremes {
    pub fn inf_value(&self) -> ExtValue {
        self.inf.ratio()
    }

    pub fn sup_value(&self) -> ExtValue {
        self.sup.ratio()
    }
}

pub fn banach_profile(
    a: &IntegerSet,
    m: &WeightSequence,
    s: u64,
    n_range: (u64, u64),
) -> Result<WindowExtremes, DensityError> {
    let (lo, hi) = n_range;
    if lo > hi {
        return Err(SetError::InvalidWindow { a: lo, b: hi }.into());
    }
    let w = m.floor(s)?;
    let cap = set_cap(a, &EvalConfig::default());
    let a = a.ensure_horizon(hi.saturating_add(w), cap)?;
    let (inf, sup) = window_extremes(&a, w, lo, hi);
    let mk = |(c, n): (u64, u64)| ProfilePoint { s: Some(s), n, numerator: c, denominator: s };
    Ok(WindowExtremes { inf: mk(inf), sup: mk(sup) })
}

/// `(min, argmin)` and `(max, argmax)` of `f(n) = |A ∩ [n+1, n+w]|` on `[lo, hi]`.
///
/// `f(n+1) - f(n)` only changes where `n+1` or `n+w+1` crosses an interval
/// boundary, so `f` is monotone between those points and its extremes sit there.
fn window_extremes(a: &IntegerSet, w: u64, lo: u64, hi: u64) -> ((u64, u64), (u64, u64)) {
    let mut hi = hi;
    if let Some((start, period)) = a.period() {
        if lo + 1 >= start {
            hi = hi.min(lo + period - 1);
        }
    }
    let f = |n: u64| a.count_upto(n + w) - a.count_upto(n);
    let mut cands: Vec<u64> = vec![lo, hi];
    let mut push = |n: i128| {
        if n >= lo as i128 && n <= hi as i128 {
            cands.push(n as u64);
        }
    };
    for iv in a.intervals_in(lo, hi + 1) {
        push(iv.lo as i128 - 1);
        push(iv.hi as i128);
    }
    for iv in a.intervals_in(lo + w, hi + w + 1) {
        push(iv.lo as i128 - 1 - w as i128);
        push(iv.hi as i128 - w as i128);
    }
    cands.sort_unstable();
    cands.dedup();
    let mut min = (u64::MAX, 0);
    let mut max = (0, 0);
    for (i, n) in cands.into_iter().enumerate() {
        let v = f(n);
        if v < min.0 {
            min = (v, n);
        }
        if v > max.0 || i == 0 {
            max = (v, n);
        }
    }
    (min, max)
}

/// `x` as an exact rational when it is a small integer, else as a real.
fn ext_from_f64(x: f64) -> ExtValue {
    if x.is_infinite() {
        ExtValue::Infinite
    } else if x.fract() == 0.0 && x >= 0.0 && x < 9.0e15 {
        ExtValue::ratio(x as u64, 1)
    } else {
        ExtValue::Real(x)
    }
}

fn is_inf(v: ExtValue) -> bool {
    v.is_infinite()
}

/// Closed-form value, when the structure of the set and the weight decide it.
pub fn closed_form(a: &IntegerSet, kind: &DensityKind) -> Option<(ExtValue, &'static str)> {
    let asym = a.asymptotics();
    if asym.finite {
        return Some((ExtValue::ZERO, "finite-set"));
    }
    a.rule()?;
    let tag = kind.tag;
    let g: Option<GrowthLimit> = kind.weight.growth_limit();
    let lower_like = match (tag.banach, tag.outer) {
        (false, _) => tag.side == Side::Lower,
        (true, Some(o)) => o == Outer::L,
        (true, None) => false,
    };
    if let Some(g) = g {
        if g.limsup.is_zero() {
            return Some((ExtValue::ZERO, "weight-ratio-vanishes"));
        }
        // Every ratio is at most ⌊m⌋ / index.
        let l_outer = tag.banach && tag.outer == Some(Outer::L);
        if g.liminf.is_zero() && (l_outer || (!tag.banach && tag.side == Side::Lower)) {
            return Some((ExtValue::ZERO, "weight-ratio-liminf-zero"));
        }
    }
    if let (Some(delta), Some(g)) = (a.periodic_density(), g) {
        let delta = ExtValue::Rational(delta);
        let v = match (tag.banach, tag.outer) {
            (true, None) => delta,
            _ if lower_like => delta.times(g.liminf),
            _ => delta.times(g.limsup),
        };
        return Some((v, "periodic"));
    }
    if !tag.banach {
        if let (Some(law), Some(g)) = (asym.counting, g) {
            if let Some(v) = counting_closed_form(law, &kind.weight, tag.side, g) {
                return Some((v, "counting-law"));
            }
        }
    }
    if let Some(g) = g {
        // Divergent gaps give F(x) = o(x).
        if !tag.banach && asym.gaps == GapLaw::Divergent && !is_inf(g.limsup) {
            return Some((ExtValue::ZERO, "divergent-gaps"));
        }
        if asym.gaps == GapLaw::Bounded {
            let growth = if lower_like || (tag.banach && tag.outer.is_none()) { g.liminf } else { g.limsup };
            if is_inf(growth) {
                return Some((ExtValue::Infinite, "bounded-gaps"));
            }
        }
    }
    if tag.banach && tag.side == Side::Lower && matches!(asym.gaps, GapLaw::Unbounded | GapLaw::Divergent) {
        return Some((ExtValue::ZERO, "unbounded-gaps"));
    }
    if tag.banach && tag.side == Side::Upper {
        if asym.runs == RunLaw::Unbounded {
            match tag.outer {
                None => return Some((ExtValue::ratio(1, 1), "unbounded-runs")),
                Some(o) => {
                    if let Some(g) = g {
                        return Some((if o == Outer::L { g.liminf } else { g.limsup }, "unbounded-runs"));
                    }
                }
            }
        }
        if asym.runs == RunLaw::Bounded && asym.gaps == GapLaw::Divergent {
            return Some((ExtValue::ZERO, "isolated-runs"));
        }
    }
    None
}

fn counting_closed_form(law: CountingLaw, m: &WeightSequence, side: Side, g: GrowthLimit) -> Option<ExtValue> {
    let one = Rational::one();
    match law {
        CountingLaw::Power { coef, exponent } => {
            let c = ext_from_f64(coef);
            match m.kind() {
                WeightKind::Power { q } => {
                    let e = *q * exponent;
                    Some(match e.cmp(&one) {
                        Ordering::Greater => ExtValue::Infinite,
                        Ordering::Equal => c,
                        Ordering::Less => ExtValue::ZERO,
                    })
                }
                WeightKind::Expo { .. } | WeightKind::Product { .. } => Some(ExtValue::Infinite),
                WeightKind::Linear { .. } | WeightKind::Oscillating { .. } => {
                    if exponent < one {
                        Some(ExtValue::ZERO)
                    } else {
                        // F(m_n) / n ≈ C m_n / n.
                        let r = if side == Side::Lower { g.liminf } else { g.limsup };
                        Some(c.times(r))
                    }
                }
                WeightKind::Table(_) => None,
            }
        }
        CountingLaw::Log { coef } => match m.kind() {
            WeightKind::Expo { base } | WeightKind::Product { base } => Some(match base {
                Base::E => ext_from_f64(coef),
                Base::Rational(b) => ExtValue::Real(coef * rational_to_f64(*b).ln()),
            }),
            WeightKind::Table(_) => None,
            _ => Some(ExtValue::ZERO),
        },
    }
}

/// Evaluates one functional.
pub fn evaluate(a: &IntegerSet, kind: &DensityKind, cfg: &EvalConfig) -> Result<DensityResult, DensityError> {
    if cfg.closed_form {
        if let Some((v, why)) = closed_form(a, kind) {
            return Ok(DensityResult::exact(kind, v, why, a.horizon()));
        }
    }
    if kind.tag.banach {
        estimate_banach(a, kind, cfg)
    } else {
        estimate_simple(a, kind, cfg)
    }
}

struct TailStats {
    inf: Frac,
    sup: Frac,
    samples: Vec<ProfilePoint>,
}

fn sample_points(pts: &[Frac], k: usize) -> Vec<ProfilePoint> {
    if pts.is_empty() || k == 0 {
        return vec![];
    }
    let step = (pts.len() / k).max(1);
    let mut v: Vec<ProfilePoint> = pts.iter().step_by(step).map(Frac::point).collect();
    let last = pts[pts.len() - 1].point();
    if v.last() != Some(&last) {
        v.push(last);
    }
    v
}

fn simple_tail(a: &IntegerSet, m: &WeightSequence, n: u64, cfg: &EvalConfig) -> Result<TailStats, DensityError> {
    let lo = (n / 2).max(1);
    let pts: Vec<Frac> = (lo..=n)
        .into_par_iter()
        .map(|k| {
            let b = bound(m, k, cfg.rounding)?;
            Ok(Frac { num: a.count_to(b)?, den: k, at: k, s: None })
        })
        .collect::<Result<_, DensityError>>()?;
    let inf = pts.par_iter().copied().reduce_with(min_frac).expect("non-empty tail");
    let sup = pts.par_iter().copied().reduce_with(max_frac).expect("non-empty tail");
    Ok(TailStats { inf, sup, samples: sample_points(&pts, cfg.profile_samples) })
}

/// Largest `n <= limit` whose bound `⌊m_n⌋` (plus `extra`) stays within `cap`.
fn feasible_index(m: &WeightSequence, extra: u64, cap: u64, limit: u64, r: Rounding) -> u64 {
    let room = cap.saturating_sub(extra);
    let n = m.max_index(room, limit);
    if r == Rounding::Ceil && n > 0 && m.ceil(n).map_or(true, |c| c > room) {
        n - 1
    } else {
        n
    }
}

fn estimate_simple(a: &IntegerSet, kind: &DensityKind, cfg: &EvalConfig) -> Result<DensityResult, DensityError> {
    let m = &kind.weight;
    let cap = set_cap(a, cfg);
    let mut n = cfg.n_max.max(2);
    let feasible = feasible_index(m, 0, cap, n, cfg.rounding);
    if feasible < n {
        if !cfg.clamp || feasible < 2 {
            let needed = bound(m, n, cfg.rounding).unwrap_or(u64::MAX);
            let what = if m.len().is_some_and(|l| l < n) { "weight table" } else { "set horizon" };
            return Err(DensityError::HorizonInfeasible { what: what.into(), needed, cap });
        }
        n = feasible;
    }
    let top = bound(m, n, cfg.rounding)?;
    let a = a.ensure_horizon(top, cap)?;
    let t = simple_tail(&a, m, n, cfg)?;
    finish(kind, cfg, t, Horizons { n_max: n, s_max: 0, set_horizon: a.horizon() }, |h| {
        simple_tail(&a, m, h, cfg).map(|t| t.inf.value())
    })
}

fn finish(
    kind: &DensityKind,
    cfg: &EvalConfig,
    t: TailStats,
    horizons: Horizons,
    at_horizon: impl Fn(u64) -> Result<ExtValue, DensityError>,
) -> Result<DensityResult, DensityError> {
    let (lo, hi) = (t.inf.value(), t.sup.value());
    let h = if kind.tag.banach { horizons.s_max } else { horizons.n_max };
    let mut out = DensityResult {
        kind: kind.label(),
        value: ExtValue::ZERO,
        exact: false,
        lower_bound: lo,
        upper_bound: hi,
        horizons,
        method: "estimate".into(),
        profile: t.samples,
    };
    if lo.to_f64() >= cfg.blow_up_threshold && h >= 8 {
        let half = at_horizon(h / 2)?;
        let quarter = at_horizon(h / 4)?;
        if quarter < half && half < lo {
            out.value = ExtValue::Infinite;
            out.upper_bound = ExtValue::Infinite;
            out.method = "estimate:blow-up".into();
            return Ok(out);
        }
    }
    out.value = match (kind.tag.banach, kind.tag.outer, kind.tag.side) {
        (false, _, Side::Lower) | (true, Some(Outer::L), _) => lo,
        (false, _, Side::Upper) | (true, Some(Outer::U), _) => hi,
        (true, None, _) => lo,
    };
    Ok(out)
}

fn banach_tail(
    a: &IntegerSet,
    kind: &DensityKind,
    s_top: u64,
    n_range: (u64, u64),
    cfg: &EvalConfig,
) -> Result<TailStats, DensityError> {
    let m = &kind.weight;
    let lo = (s_top / 2).max(1);
    let side = kind.tag.side;
    let pts: Vec<Frac> = (lo..=s_top)
        .into_par_iter()
        .map(|s| {
            let w = bound(m, s, cfg.rounding)?;
            let (mn, mx) = window_extremes(a, w, n_range.0, n_range.1);
            let (c, at) = if side == Side::Lower { mn } else { mx };
            Ok(Frac { num: c, den: s, at, s: Some(s) })
        })
        .collect::<Result<_, DensityError>>()?;
    let inf = pts.par_iter().copied().reduce_with(min_frac).expect("non-empty tail");
    let sup = pts.par_iter().copied().reduce_with(max_frac).expect("non-empty tail");
    Ok(TailStats { inf, sup, samples: sample_points(&pts, cfg.profile_samples) })
}

fn estimate_banach(a: &IntegerSet, kind: &DensityKind, cfg: &EvalConfig) -> Result<DensityResult, DensityError> {
    let m = &kind.weight;
    let cap = set_cap(a, cfg);
    let mut n = cfg.n_max.max(2);
    let mut s = cfg.s_max.max(2);
    let needed = |n: u64, s: u64| bound(m, s, cfg.rounding).map(|w| w.saturating_add(n + 1));
    if needed(n, s).map_or(true, |x| x > cap) {
        if !cfg.clamp {
            let what = if m.len().is_some_and(|l| l < s) { "weight table" } else { "set horizon" };
            return Err(DensityError::HorizonInfeasible {
                what: what.into(),
                needed: needed(n, s).unwrap_or(u64::MAX),
                cap,
            });
        }
        let mut fs = feasible_index(m, n + 1, cap, s, cfg.rounding);
        if fs < 2 {
            n = n.min(cap / 2);
            fs = feasible_index(m, n + 1, cap, s, cfg.rounding);
        }
        if fs < 2 {
            return Err(DensityError::HorizonInfeasible {
                what: "set horizon".into(),
                needed: needed(n, 2).unwrap_or(u64::MAX),
                cap,
            });
        }
        s = fs;
    }
    let top = needed(n, s)?;
    let a = a.ensure_horizon(top, cap)?;
    let n_range = match cfg.inner_mode {
        InnerMode::Tail => ((n / 2).max(1), n),
        InnerMode::Full => (1, n),
    };
    let t = banach_tail(&a, kind, s, n_range, cfg)?;
    let horizons = Horizons { n_max: n, s_max: s, set_horizon: a.horizon() };
    let mut res = finish(kind, cfg, t, horizons, |h| banach_tail(&a, kind, h, n_range, cfg).map(|t| t.inf.value()))?;
    if kind.tag.outer.is_none() && !is_inf(res.value) {
        // Classic kinds have a limit in s; report the ratio at the top scale.
        let w = bound(m, s, cfg.rounding)?;
        let (mn, mx) = window_extremes(&a, w, n_range.0, n_range.1);
        let c = if kind.tag.side == Side::Lower { mn.0 } else { mx.0 };
        res.value = ExtValue::ratio(c, s);
    }
    Ok(res)
}

/// Report of the sequence-form lower q-density estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerQReport {
    pub result: DensityResult,
    /// `sup_k n_k / k^q` over the tested range, `None` when it keeps growing.
    pub l: Option<f64>,
    pub positive: Tri,
}

/// Lower q-density from the enumeration `n_k` as `liminf k / n_k^{1/q}`, bracketed over
/// `k ∈ [K/2, K]`, with the equivalent bound `n_k <= L k^q`.
pub fn closed_form_lower_q(n_k: impl Fn(u64) -> f64 + Sync, q: Rational, k_max: u64) -> LowerQReport {
    let k_max = k_max.max(4);
    let qf = rational_to_f64(q);
    let ratio = |k: u64| k as f64 / n_k(k).powf(1.0 / qf);
    let lo = k_max / 2;
    let (inf, sup) = (lo..=k_max)
        .into_par_iter()
        .map(|k| {
            let r = ratio(k);
            (r, r)
        })
        .reduce(|| (f64::INFINITY, 0.0), |a, b| (a.0.min(b.0), a.1.max(b.1)));
    let need = |k: u64| n_k(k) / (k as f64).powf(qf);
    let first = (1..=lo).map(need).fold(0.0, f64::max);
    let second = (lo + 1..=k_max).map(need).fold(0.0, f64::max);
    let l = (second.is_finite() && second <= 2.0 * first).then_some(first.max(second));
    let profile = [lo, (lo + k_max) / 2, k_max]
        .iter()
        .map(|&k| ProfilePoint { s: None, n: k, numerator: k, denominator: n_k(k).min(u64::MAX as f64) as u64 })
        .collect();
    let result = DensityResult {
        kind: "lower-q".into(),
        value: ExtValue::Real(inf),
        exact: false,
        lower_bound: ExtValue::Real(inf),
        upper_bound: ExtValue::Real(sup),
        horizons: Horizons { n_max: k_max, s_max: 0, set_horizon: 0 },
        method: "estimate:enumeration".into(),
        profile,
    };
    LowerQReport { result, l, positive: if l.is_some() { Tri::Yes } else { Tri::No } }
}

/// A single failed comparison in a chain check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub relation: String,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub q: String,
    pub values: Vec<DensityResult>,
    pub violations: Vec<Violation>,
    pub ok: bool,
}

/// Checks `B̲d <= d̲ <= d̄ <= B̄d <= 1` on brackets and `d̲ <= d̲_q`, `d̄ <= d̄_q`,
/// the latter also pointwise on the profile.
pub fn density_chain_check(a: &IntegerSet, q: Rational, cfg: &EvalConfig) -> Result<ChainReport, DensityError> {
    let lbd = evaluate(a, &DensityKind::classic_banach(Side::Lower), cfg)?;
    let ld = evaluate(a, &DensityKind::classic(Side::Lower), cfg)?;
    let ud = evaluate(a, &DensityKind::classic(Side::Upper), cfg)?;
    let ubd = evaluate(a, &DensityKind::classic_banach(Side::Upper), cfg)?;
    let lq = evaluate(a, &DensityKind::new(KindTag::simple(Side::Lower, ScaleTag::Q), Some(q), None)?, cfg)?;
    let uq = evaluate(a, &DensityKind::new(KindTag::simple(Side::Upper, ScaleTag::Q), Some(q), None)?, cfg)?;
    let mut violations = vec![];
    let mut check = |x: &DensityResult, y: &DensityResult| {
        // Estimated brackets are heuristic; only flag conflicts beyond the estimate tolerance.
        let tol = if x.exact && y.exact { 1e-12 } else { ZERO_TOLERANCE };
        if x.lower_bound.to_f64() > y.upper_bound.to_f64() + tol {
            violations.push(Violation {
                relation: format!("{} <= {}", x.kind, y.kind),
                detail: format!("bracket [{}, {}] lies above [{}, {}]", x.lower_bound, x.upper_bound, y.lower_bound, y.upper_bound),
            });
        }
    };
    check(&lbd, &ld);
    check(&ld, &ud);
    check(&ud, &ubd);
    check(&ld, &lq);
    check(&ud, &uq);
    if ubd.lower_bound.to_f64() > 1.0 + 1e-12 {
        violations.push(Violation { relation: "upper-banach <= 1".into(), detail: format!("{}", ubd.lower_bound) });
    }
    // Pointwise: ⌊n^q⌋ >= n, so the q-profile dominates the classic one.
    let m = WeightSequence::power(q)?;
    let n_top = m.max_index(set_cap(a, cfg), cfg.n_max.min(100_000));
    if n_top >= 1 {
        let ext = a.ensure_horizon(m.floor(n_top)?, set_cap(a, cfg))?;
        for n in 1..=n_top {
            let (c1, cq) = (ext.count_to(n)?, ext.count_to(m.floor(n)?)?);
            if cq < c1 {
                violations.push(Violation {
                    relation: "pointwise q-dominance".into(),
                    detail: format!("n={n}: |A∩[1,n^q]|={cq} < |A∩[1,n]|={c1}"),
                });
                break;
            }
        }
    }
    let ok = violations.is_empty();
    Ok(ChainReport {
        q: ExtValue::Rational(q).to_string(),
        values: vec![lbd, ld, ud, ubd, lq, uq],
        violations,
        ok,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrichotomyCase {
    /// `liminf m_s / s = 0`.
    LiminfZero,
    /// `lim m_s / s = 0`.
    LimitZero,
    /// `lim m_s / s = ∞`, gaps bounded.
    LimitInfiniteBoundedGaps,
    /// `lim m_s / s = ∞`, gaps unbounded.
    LimitInfiniteUnboundedGaps,
    Inapplicable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Consistency {
    Consistent,
    Inconsistent,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub kind: KindTag,
    pub predicted: ExtValue,
    pub observed: DensityResult,
    pub consistency: Consistency,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrichotomyReport {
    pub case: TrichotomyCase,
    /// How the growth of `m_s / s` was decided: `analytic` or `horizon-trend`.
    pub growth_evidence: String,
    /// How bounded or unbounded gaps were decided: `structural` or `gap-profile`.
    pub gap_evidence: Option<String>,
    pub predictions: Vec<Prediction>,
    pub consistency: Consistency,
}

/// Zero verdicts need the bracket below this at the top horizon.
pub const ZERO_TOLERANCE: f64 = 0.05;

/// Compares a predicted value against an estimated bracket.
pub fn consistency(predicted: ExtValue, observed: &DensityResult, diverging: bool) -> Consistency {
    if is_inf(predicted) {
        if is_inf(observed.value) || diverging {
            Consistency::Consistent
        } else if observed.exact || observed.upper_bound.is_zero() && observed.horizons.n_max >= 1000 {
            Consistency::Inconsistent
        } else {
            Consistency::Inconclusive
        }
    } else if predicted.is_zero() {
        if observed.upper_bound.to_f64() < ZERO_TOLERANCE {
            Consistency::Consistent
        } else if is_inf(observed.value) {
            Consistency::Inconsistent
        } else {
            Consistency::Inconclusive
        }
    } else {
        let p = predicted.to_f64();
        let tol = 1e-2_f64.max(observed.width());
        if observed.lower_bound.to_f64() - tol <= p && p <= observed.upper_bound.to_f64() + tol {
            Consistency::Consistent
        } else if observed.exact {
            Consistency::Inconsistent
        } else {
            Consistency::Inconclusive
        }
    }
}

/// Combines per-item consistencies: any inconsistency wins, then inconclusive.
pub fn combine(items: impl IntoIterator<Item = Consistency>) -> Consistency {
    let mut out = Consistency::Consistent;
    for c in items {
        match c {
            Consistency::Inconsistent => return Consistency::Inconsistent,
            Consistency::Inconclusive => out = Consistency::Inconclusive,
            Consistency::Consistent => {}
        }
    }
    out
}

/// Classifies `(A, m)` by the growth of `m_s / s` and the gaps of `A`, predicts the
/// lower Banach pair and the lower (m_n)-density, and cross-checks by estimation.
pub fn trichotomy_classify(
    a: &IntegerSet,
    m: &WeightSequence,
    cfg: &EvalConfig,
) -> Result<TrichotomyReport, DensityError> {
    let (gl, gu, evidence) = match m.growth_limit() {
        Some(g) => (g.liminf, g.limsup, "analytic"),
        None => {
            let n = m.len().map_or(cfg.n_max, |l| l.min(cfg.n_max));
            match m.trend(n) {
                Trend::Vanishing => (ExtValue::ZERO, ExtValue::ZERO, "horizon-trend"),
                Trend::Diverging => (ExtValue::Infinite, ExtValue::Infinite, "horizon-trend"),
                Trend::Indeterminate => (ExtValue::Real(f64::NAN), ExtValue::Real(f64::NAN), "horizon-trend"),
            }
        }
    };
    let lower_l = DensityKind::banach(Side::Lower, Outer::L, m.clone());
    let lower_u = DensityKind::banach(Side::Lower, Outer::U, m.clone());
    let lower_mn = DensityKind::simple(Side::Lower, m.clone());
    let mut gap_evidence = None;
    let (case, preds): (TrichotomyCase, Vec<(DensityKind, ExtValue)>) = if gl.is_zero() && gu.is_zero() {
        (
            TrichotomyCase::LimitZero,
            vec![(lower_l, ExtValue::ZERO), (lower_u, ExtValue::ZERO), (lower_mn, ExtValue::ZERO)],
        )
    } else if gl.is_zero() {
        (TrichotomyCase::LiminfZero, vec![(lower_l, ExtValue::ZERO), (lower_mn, ExtValue::ZERO)])
    } else if is_inf(gl) && is_inf(gu) {
        let asym = a.asymptotics();
        let bounded = if asym.finite {
            gap_evidence = Some("structural".to_string());
            false
        } else {
            match asym.gaps {
                GapLaw::Bounded => {
                    gap_evidence = Some("structural".into());
                    true
                }
                GapLaw::Unbounded | GapLaw::Divergent => {
                    gap_evidence = Some("structural".into());
                    false
                }
                GapLaw::Unknown => {
                    gap_evidence = Some("gap-profile".into());
                    let members = a.len().min(100_000) as usize;
                    members >= 9 && !a.gap_profile(members - 1)?.looks_unbounded()
                }
            }
        };
        if bounded {
            (
                TrichotomyCase::LimitInfiniteBoundedGaps,
                vec![(lower_l, ExtValue::Infinite), (lower_u, ExtValue::Infinite), (lower_mn, ExtValue::Infinite)],
            )
        } else {
            // Only the Banach pair is forced to 0; the lower (m_n)-density can be positive.
            (
                TrichotomyCase::LimitInfiniteUnboundedGaps,
                vec![(lower_l, ExtValue::ZERO), (lower_u, ExtValue::ZERO)],
            )
        }
    } else {
        (TrichotomyCase::Inapplicable, vec![])
    };
    let est = cfg.clone().estimate_only();
    // Empty windows of length m_s need a gap longer than m_s among the scanned positions.
    let mut zero_est = est.clone();
    if case == TrichotomyCase::LimitInfiniteUnboundedGaps {
        let s = resolvable_scale(a, m, cfg)?;
        if s >= 2 && s < zero_est.s_max {
            zero_est.s_max = s;
            zero_est.clamp = true;
        }
        if let Some(ev) = gap_evidence.as_mut() {
            ev.push_str(&format!("; window scales up to s = {}", zero_est.s_max));
        }
    }
    let mut predictions = Vec::with_capacity(preds.len());
    for (kind, predicted) in preds {
        let est = if predicted.is_zero() && kind.tag.banach { &zero_est } else { &est };
        let observed = evaluate(a, &kind, est)?;
        let diverging = is_inf(predicted) && !is_inf(observed.value) && {
            let h = if kind.tag.banach { observed.horizons.s_max } else { observed.horizons.n_max };
            let mut half = est.clone();
            if kind.tag.banach {
                half.s_max = (h / 2).max(2);
            } else {
                half.n_max = (h / 2).max(2);
            }
            let prev = evaluate(a, &kind, &half)?;
            observed.lower_bound.to_f64() >= 1.5 * prev.lower_bound.to_f64() && observed.lower_bound > ExtValue::ZERO
        };
        let c = consistency(predicted, &observed, diverging);
        predictions.push(Prediction { kind: kind.tag, predicted, observed, consistency: c });
    }
    let overall = if case == TrichotomyCase::Inapplicable {
        Consistency::Inconclusive
    } else {
        combine(predictions.iter().map(|p| p.consistency))
    };
    Ok(TrichotomyReport {
        case,
        growth_evidence: evidence.into(),
        gap_evidence,
        predictions,
        consistency: overall,
    })
}

/// Largest `s <= cfg.s_max` whose window `m_s` fits inside a gap of `A` starting in the
/// tail positions `[N/2, N]`.
fn resolvable_scale(a: &IntegerSet, m: &WeightSequence, cfg: &EvalConfig) -> Result<u64, DensityError> {
    let cap = set_cap(a, cfg);
    let n = cfg.n_max.min(cap / 2).max(2);
    let a = a.ensure_horizon(2 * n, cap)?;
    let mut prev: Option<u64> = None;
    let mut widest = 0u64;
    for iv in a.intervals_in(n / 2, 2 * n) {
        if let Some(p) = prev {
            if p <= n {
                widest = widest.max(iv.lo - p - 1);
            }
        }
        prev = Some(iv.hi);
    }
    if widest == 0 {
        return Ok(0);
    }
    Ok(m.max_index(widest, cfg.s_max))
}

/// CSV with columns `kind,s,n,numerator,denominator`.
pub fn profile_csv<'a>(rows: impl IntoIterator<Item = (&'a str, &'a ProfilePoint)>) -> String {
    let mut out = String::from("kind,s,n,numerator,denominator\n");
    for (kind, p) in rows {
        let s = p.s.map(|s| s.to_string()).unwrap_or_default();
        out.push_str(&format!("{kind},{s},{},{},{}\n", p.n, p.numerator, p.denominator));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn squares(h: u64) -> IntegerSet {
        IntegerSet::from_members((1..).map(|n: u64| n * n).take_while(|&v| v <= h), h).unwrap()
    }

    fn w(s: &str) -> WeightSequence {
        s.parse().unwrap()
    }

    #[test]
    fn labels_round_trip() {
        let all = KindTag::all();
        assert_eq!(all.len(), 16);
        for t in all {
            assert_eq!(t.to_string().parse::<KindTag>().unwrap(), t);
        }
        assert_eq!("Upper-U-Banach-Mn".parse::<KindTag>().unwrap(), KindTag::banach(Side::Upper, Outer::U, ScaleTag::Mn));
    }

    #[test]
    fn squares_profile_examples() {
        let sq = squares(1_000_000);
        let p = simple_profile(&sq, &w("power:2"), 1000).unwrap();
        assert!(p.iter().all(|pt| pt.numerator == pt.denominator));
        let p = simple_profile(&sq, &WeightSequence::identity(), 1000).unwrap();
        for pt in &p {
            assert_eq!(pt.numerator, (pt.n as f64).sqrt().floor() as u64);
        }
    }

    #[test]
    fn window_extremes_match_scan() {
        let a = IntegerSet::from_intervals([(3, 9), (12, 12), (20, 31), (40, 41), (55, 70)], 200).unwrap();
        for wlen in [1u64, 2, 5, 9, 17] {
            for lo in [0u64, 1, 4, 13] {
                for hi in [lo, lo + 3, lo + 40, 120] {
                    if hi < lo {
                        continue;
                    }
                    let ((mn, _), (mx, _)) = window_extremes(&a, wlen, lo, hi);
                    let vals: Vec<u64> = (lo..=hi).map(|n| a.count_upto(n + wlen) - a.count_upto(n)).collect();
                    assert_eq!(mn, *vals.iter().min().unwrap());
                    assert_eq!(mx, *vals.iter().max().unwrap());
                }
            }
        }
    }

    #[test]
    fn banach_profile_examples() {
        let m3 = IntegerSet::arithmetic(3, 3, 10_000).unwrap();
        let e = banach_profile(&m3, &WeightSequence::identity(), 9, (1, 100)).unwrap();
        assert_eq!((e.inf_value(), e.sup_value()), (ExtValue::ratio(1, 3), ExtValue::ratio(1, 3)));
        let empty = IntegerSet::empty(10_000);
        let e = banach_profile(&empty, &WeightSequence::identity(), 9, (1, 100)).unwrap();
        assert!(e.sup_value().is_zero());
        let sq = squares(2_100_000);
        let e = banach_profile(&sq, &w("power:2"), 10, (1, 1_000_000)).unwrap();
        assert!(e.inf_value().is_zero());
        assert!(e.sup.numerator >= 1);
    }

    #[test]
    fn closed_forms_for_documented_cases() {
        let cfg = EvalConfig::default();
        let sq_rule = crate::examples_gen::generate(&crate::examples_gen::RuleSpec::Squares, 1000).unwrap();
        let r = evaluate(&sq_rule, &DensityKind::simple(Side::Lower, w("power:2")), &cfg).unwrap();
        assert!(r.exact);
        assert_eq!(r.value, ExtValue::ratio(1, 1));
        let evens = IntegerSet::arithmetic(2, 2, 100).unwrap();
        let r = evaluate(&evens, &DensityKind::banach(Side::Upper, Outer::U, w("linear:2")), &cfg).unwrap();
        assert_eq!(r.value, ExtValue::ratio(1, 1));
        let d = evens.dilate(2, u64::MAX).unwrap();
        let r = evaluate(&d, &DensityKind::classic(Side::Lower), &cfg).unwrap();
        assert_eq!(r.value, ExtValue::ratio(1, 4));
        let r = evaluate(&IntegerSet::empty(10), &DensityKind::classic_banach(Side::Upper), &cfg).unwrap();
        assert!(r.value.is_zero() && r.exact);
    }

    #[test]
    fn estimation_matches_closed_form_on_periodic_sets() {
        let cfg = EvalConfig::default().estimate_only().with_horizons(20_000, 200);
        let m3 = IntegerSet::arithmetic(3, 3, 100).unwrap();
        for tag in KindTag::all() {
            let kind = DensityKind::new(tag, Some(Rational::one()), Some(w("linear:2"))).unwrap();
            let exact = evaluate(&m3, &kind, &EvalConfig::default()).unwrap();
            let est = evaluate(&m3, &kind, &cfg).unwrap();
            let v = exact.value.to_f64();
            assert!(
                est.lower_bound.to_f64() - 0.02 <= v && v <= est.upper_bound.to_f64() + 0.02,
                "{tag}: exact {v} est [{}, {}]",
                est.lower_bound,
                est.upper_bound
            );
        }
    }

    #[test]
    fn blow_up_is_reported_as_infinite() {
        let mut cfg = EvalConfig::default().estimate_only().with_horizons(100_000, 100);
        cfg.max_horizon = 1 << 40;
        let evens = IntegerSet::arithmetic(2, 2, 100).unwrap();
        let r = evaluate(&evens, &DensityKind::simple(Side::Lower, w("power:2")), &cfg).unwrap();
        assert!(r.value.is_infinite());
        assert_eq!(r.method, "estimate:blow-up");
        assert!(r.lower_bound.to_f64() >= 1e3);
    }

    #[test]
    fn clamping_and_infeasibility() {
        let evens = IntegerSet::arithmetic(2, 2, 100).unwrap();
        let kind = DensityKind::simple(Side::Lower, w("expo:e"));
        let cfg = EvalConfig::default().estimate_only();
        let r = evaluate(&evens, &kind, &cfg).unwrap();
        assert_eq!(r.horizons.n_max, 21);
        let strict = EvalConfig { clamp: false, ..cfg };
        assert!(matches!(evaluate(&evens, &kind, &strict), Err(DensityError::HorizonInfeasible { .. })));
    }

    #[test]
    fn lower_q_enumeration_examples() {
        let r = closed_form_lower_q(|k| 2.0 * (k * k) as f64, Rational::from_integer(2), 10_000);
        assert!((r.result.value.to_f64() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        assert!(r.result.width() < 1e-3);
        assert_eq!(r.l, Some(2.0));
        let r = closed_form_lower_q(|k| k as f64, Rational::one(), 100);
        assert_eq!(r.result.value.to_f64(), 1.0);
        let r = closed_form_lower_q(|k| k as f64 * (k as f64).exp(), Rational::from_integer(2), 50);
        assert!(r.result.value.to_f64() < 1e-6);
        assert_eq!(r.positive, Tri::No);
    }

    #[test]
    fn chain_examples() {
        let cfg = EvalConfig::default().with_horizons(10_000, 100);
        let evens = IntegerSet::arithmetic(2, 2, 100).unwrap();
        let r = density_chain_check(&evens, Rational::from_integer(2), &cfg).unwrap();
        assert!(r.ok, "{:?}", r.violations);
        assert!(r.values[..4].iter().all(|v| v.value == ExtValue::ratio(1, 2)));
        let r = density_chain_check(&IntegerSet::empty(100), Rational::from_integer(2), &cfg).unwrap();
        assert!(r.values.iter().all(|v| v.value.is_zero()));
        let sq = squares(1_000_000);
        let r = density_chain_check(&sq, Rational::from_integer(2), &cfg.estimate_only()).unwrap();
        assert!(r.ok, "{:?}", r.violations);
    }
}
