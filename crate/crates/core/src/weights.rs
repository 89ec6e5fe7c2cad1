//! Increasing weight sequences `(m_n)` in `[1, ∞)` with exact floor and ceiling.

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use num_bigint::BigUint;
use num_integer::Roots;
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::value::{parse_rational, rational_to_f64, ExtValue, Rational, Tri};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WeightError {
    #[error("m_{n} does not fit the horizon cap {cap}")]
    Overflow { n: u64, cap: u64 },
    #[error("table has {len} entries, m_{n} requested")]
    TableExhausted { n: u64, len: usize },
    #[error("index must be >= 1")]
    ZeroIndex,
    #[error("invalid weight sequence: {0}")]
    Invalid(String),
}

/// Base `b > 1` of exponential kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Base {
    E,
    Rational(Rational),
}

impl Base {
    fn ln(self) -> f64 {
        match self {
            Base::E => 1.0,
            Base::Rational(r) => rational_to_f64(r).ln(),
        }
    }
}

impl fmt::Display for Base {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Base::E => f.write_str("e"),
            Base::Rational(r) => write!(f, "{}", ExtValue::Rational(*r)),
        }
    }
}

impl FromStr for Base {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.trim() == "e" {
            return Ok(Base::E);
        }
        let r = parse_rational(s)?;
        if r <= Rational::one() {
            return Err(format!("base must exceed 1, got {s}"));
        }
        Ok(Base::Rational(r))
    }
}

/// Signed rational used for affine offsets.
pub type SignedRational = Ratio<i64>;

fn parse_signed(s: &str) -> Result<SignedRational, String> {
    let t = s.trim();
    let (neg, body) = match t.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let r = parse_rational(body)?;
    let n = i64::try_from(*r.numer()).map_err(|_| format!("offset {s} out of range"))?;
    let d = i64::try_from(*r.denom()).map_err(|_| format!("offset {s} out of range"))?;
    Ok(SignedRational::new(if neg { -n } else { n }, d))
}

fn fmt_signed(r: SignedRational) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Shape of the sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WeightKind {
    /// `m_n = n^q`, `q >= 1`.
    Power { q: Rational },
    /// `m_n = slope * n + offset`.
    Linear { slope: Rational, offset: SignedRational },
    /// Explicit values `m_1, m_2, ...`; indices past the end are an error.
    Table(Arc<[Rational]>),
    /// `m_n = b^n`.
    Expo { base: Base },
    /// `m_n = n b^n`.
    Product { base: Base },
    /// Piecewise linear with slope `low` and `high` on alternating blocks
    /// `((j+1)!, (j+2)!]`, so `m_n / n` oscillates between `low` and `high`.
    Oscillating { low: Rational, high: Rational },
}

/// An increasing weight sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightSequence {
    kind: WeightKind,
}

/// Analytic value of `liminf` and `limsup` of `m_n / n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthLimit {
    pub liminf: ExtValue,
    pub limsup: ExtValue,
}

/// Behaviour of `m_n / n` read off successive horizon doublings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trend {
    Vanishing,
    Diverging,
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthDiagnostics {
    /// Analytic when a closed form decides it, else the tail infimum over `[N/2, N]`.
    pub liminf_ratio: ExtValue,
    pub limsup_ratio: ExtValue,
    pub limit_exists: Tri,
    pub analytic: bool,
    pub tail_inf: f64,
    pub tail_sup: f64,
    pub trend: Trend,
    pub horizon: u64,
}

/// Outcome of the bridge check `m_{⌈kc⌉} <= L m_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BridgeReport {
    /// Smallest `L` valid for all tested `k`, or `None` when the ratio diverges.
    pub l: Option<f64>,
    /// Analytic bound valid for all `k` (power kind only).
    pub certified: Option<f64>,
    pub tested_up_to: u64,
}

impl WeightSequence {
    pub fn new(kind: WeightKind) -> Result<Self, WeightError> {
        let bad = |m: &str| Err(WeightError::Invalid(m.to_string()));
        match &kind {
            WeightKind::Power { q } if *q < Rational::one() => return bad("power exponent must be >= 1"),
            WeightKind::Linear { slope, offset } => {
                let s1 = SignedRational::new(
                    i64::try_from(*slope.numer()).map_err(|_| WeightError::Invalid("slope too large".into()))?,
                    i64::try_from(*slope.denom()).map_err(|_| WeightError::Invalid("slope too large".into()))?,
                );
                if s1 + offset < SignedRational::one() {
                    return bad("linear sequence must satisfy m_1 >= 1");
                }
            }
            WeightKind::Table(v) => {
                if v.is_empty() {
                    return bad("table must be non-empty");
                }
                if v[0] < Rational::one() {
                    return bad("table values must be >= 1");
                }
                if let Some(i) = v.windows(2).position(|w| w[1] < w[0]) {
                    return Err(WeightError::Invalid(format!("table decreases at index {}", i + 2)));
                }
            }
            WeightKind::Expo { base: Base::Rational(b) } | WeightKind::Product { base: Base::Rational(b) }
                if *b <= Rational::one() =>
            {
                return bad("base must exceed 1")
            }
            WeightKind::Oscillating { low, high } if low > high => return bad("oscillating needs low <= high"),
            _ => {}
        }
        Ok(WeightSequence { kind })
    }

    pub fn power(q: Rational) -> Result<Self, WeightError> {
        Self::new(WeightKind::Power { q })
    }

    /// `m_n = n`.
    pub fn identity() -> Self {
        WeightSequence { kind: WeightKind::Power { q: Rational::one() } }
    }

    pub fn linear(slope: Rational, offset: SignedRational) -> Result<Self, WeightError> {
        Self::new(WeightKind::Linear { slope, offset })
    }

    pub fn table<I: IntoIterator<Item = Rational>>(values: I) -> Result<Self, WeightError> {
        Self::new(WeightKind::Table(values.into_iter().collect()))
    }

    pub fn expo(base: Base) -> Result<Self, WeightError> {
        Self::new(WeightKind::Expo { base })
    }

    pub fn product(base: Base) -> Result<Self, WeightError> {
        Self::new(WeightKind::Product { base })
    }

    pub fn oscillating(low: Rational, high: Rational) -> Result<Self, WeightError> {
        Self::new(WeightKind::Oscillating { low, high })
    }

    pub fn kind(&self) -> &WeightKind {
        &self.kind
    }

    /// Exponent `q` when the sequence is `n^q`.
    pub fn power_exponent(&self) -> Option<Rational> {
        match self.kind {
            WeightKind::Power { q } => Some(q),
            _ => None,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.power_exponent() == Some(Rational::one())
    }

    /// Number of defined indices (finite only for tables).
    pub fn len(&self) -> Option<u64> {
        match &self.kind {
            WeightKind::Table(v) => Some(v.len() as u64),
            _ => None,
        }
    }

    /// `m_n` in floating point.
    pub fn eval(&self, n: u64) -> Result<f64, WeightError> {
        if n == 0 {
            return Err(WeightError::ZeroIndex);
        }
        let x = n as f64;
        let v = match &self.kind {
            WeightKind::Power { q } => x.powf(rational_to_f64(*q)),
            WeightKind::Linear { slope, offset } => {
                rational_to_f64(*slope) * x + *offset.numer() as f64 / *offset.denom() as f64
            }
            WeightKind::Table(t) => rational_to_f64(self.table_entry(t, n)?),
            WeightKind::Expo { base } => (x * base.ln()).exp(),
            WeightKind::Product { base } => x * (x * base.ln()).exp(),
            WeightKind::Oscillating { low, high } => rational_to_f64(oscillating_value(*low, *high, n)),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(WeightError::Overflow { n, cap: u64::MAX })
        }
    }

    fn table_entry(&self, t: &[Rational], n: u64) -> Result<Rational, WeightError> {
        t.get((n - 1) as usize).copied().ok_or(WeightError::TableExhausted { n, len: t.len() })
    }

    /// Exact `⌊m_n⌋`.
    pub fn floor(&self, n: u64) -> Result<u64, WeightError> {
        self.rounded(n, false)
    }

    /// Exact `⌈m_n⌉`.
    pub fn ceil(&self, n: u64) -> Result<u64, WeightError> {
        self.rounded(n, true)
    }

    /// `⌊m_n⌋`, failing when it exceeds `cap`.
    pub fn floor_capped(&self, n: u64, cap: u64) -> Result<u64, WeightError> {
        match self.floor(n) {
            Ok(v) if v <= cap => Ok(v),
            Ok(_) | Err(WeightError::Overflow { .. }) => Err(WeightError::Overflow { n, cap }),
            Err(e) => Err(e),
        }
    }

    fn rounded(&self, n: u64, up: bool) -> Result<u64, WeightError> {
        if n == 0 {
            return Err(WeightError::ZeroIndex);
        }
        let overflow = WeightError::Overflow { n, cap: u64::MAX };
        let round_ratio = |num: u128, den: u128| -> Result<u64, WeightError> {
            let q = num / den + u128::from(up && num % den != 0);
            u64::try_from(q).map_err(|_| overflow.clone())
        };
        match &self.kind {
            WeightKind::Power { q } => power_rounded(n, *q, up).ok_or(overflow),
            WeightKind::Linear { slope, offset } => {
                // slope n + offset = (sn * od * n + on * sd) / (sd * od), positive by validation.
                let (sn, sd) = (*slope.numer() as i128, *slope.denom() as i128);
                let (on, od) = (*offset.numer() as i128, *offset.denom() as i128);
                let num = sn.checked_mul(od).and_then(|v| v.checked_mul(n as i128)).ok_or(overflow.clone())?
                    + on * sd;
                round_ratio(num as u128, (sd * od) as u128)
            }
            WeightKind::Table(t) => {
                let r = self.table_entry(t, n)?;
                round_ratio(*r.numer() as u128, *r.denom() as u128)
            }
            WeightKind::Expo { base } => exp_rounded(*base, n, 1, up).ok_or(overflow),
            WeightKind::Product { base } => exp_rounded(*base, n, n, up).ok_or(overflow),
            WeightKind::Oscillating { low, high } => {
                let (num, den) = oscillating_parts(*low, *high, n).ok_or(overflow.clone())?;
                round_ratio(num, den)
            }
        }
    }

    /// Largest `n` with `⌊m_n⌋ <= cap` (0 if even `m_1` exceeds it), bounded by `limit`.
    pub fn max_index(&self, cap: u64, limit: u64) -> u64 {
        let ok = |n: u64| self.floor_capped(n, cap).is_ok();
        let limit = self.len().map_or(limit, |l| l.min(limit));
        if limit == 0 || !ok(1) {
            return 0;
        }
        if ok(limit) {
            return limit;
        }
        let (mut lo, mut hi) = (1u64, 2u64);
        while hi < limit && ok(hi) {
            lo = hi;
            hi = hi.saturating_mul(2).min(limit);
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Closed-form `liminf` / `limsup` of `m_n / n`.
    pub fn growth_limit(&self) -> Option<GrowthLimit> {
        let same = |v: ExtValue| Some(GrowthLimit { liminf: v, limsup: v });
        match &self.kind {
            WeightKind::Power { q } if q.is_one() => same(ExtValue::ratio(1, 1)),
            WeightKind::Power { .. } | WeightKind::Expo { .. } | WeightKind::Product { .. } => {
                same(ExtValue::Infinite)
            }
            WeightKind::Linear { slope, .. } => same(ExtValue::Rational(*slope)),
            WeightKind::Oscillating { low, high } => {
                Some(GrowthLimit { liminf: ExtValue::Rational(*low), limsup: ExtValue::Rational(*high) })
            }
            WeightKind::Table(_) => None,
        }
    }

    /// Tail inf and sup of `m_n / n` over `n ∈ [max(1, n/2), n]`.
    fn tail_ratios(&self, n: u64) -> Option<(f64, f64)> {
        let lo = (n / 2).max(1);
        let mut inf = f64::INFINITY;
        let mut sup = 0.0f64;
        // Dense sampling up to 2^16 points, endpoints included.
        let span = n - lo;
        let step = (span / 65_536).max(1);
        let mut k = lo;
        loop {
            let r = self.eval(k).ok()? / k as f64;
            inf = inf.min(r);
            sup = sup.max(r);
            if k == n {
                break;
            }
            k = (k + step).min(n);
        }
        Some((inf, sup))
    }

    /// Growth diagnostics of `m_n / n` at horizon `n`.
    pub fn growth(&self, n: u64) -> GrowthDiagnostics {
        let n = self.len().map_or(n, |l| n.min(l)).max(1);
        let (tail_inf, tail_sup) = self.tail_ratios(n).unwrap_or((f64::INFINITY, f64::INFINITY));
        let trend = self.trend(n);
        match self.growth_limit() {
            Some(g) => GrowthDiagnostics {
                liminf_ratio: g.liminf,
                limsup_ratio: g.limsup,
                limit_exists: Tri::from_bool(g.liminf == g.limsup),
                analytic: true,
                tail_inf,
                tail_sup,
                trend,
                horizon: n,
            },
            None => GrowthDiagnostics {
                liminf_ratio: ExtValue::Real(tail_inf),
                limsup_ratio: ExtValue::Real(tail_sup),
                limit_exists: Tri::Undetermined,
                analytic: false,
                tail_inf,
                tail_sup,
                trend,
                horizon: n,
            },
        }
    }

    /// Reads the tail ratios at `n/4`, `n/2`, `n`: vanishing if the sup shrinks by
    /// at least 3/4 per doubling, diverging if the inf grows by at least 3/2.
    pub fn trend(&self, n: u64) -> Trend {
        if n < 16 {
            return Trend::Indeterminate;
        }
        let pts: Option<Vec<(f64, f64)>> = [n / 4, n / 2, n].iter().map(|&k| self.tail_ratios(k)).collect();
        let Some(p) = pts else {
            return Trend::Diverging;
        };
        if p.windows(2).all(|w| w[1].1 <= 0.75 * w[0].1) {
            Trend::Vanishing
        } else if p.windows(2).all(|w| w[1].0 >= 1.5 * w[0].0) {
            Trend::Diverging
        } else {
            Trend::Indeterminate
        }
    }

    /// Smallest `L` with `m_{⌈kc⌉} <= L m_k` for `k <= n`, plus an analytic bound
    /// for the power kind. `l` is `None` when the ratio still doubles in the top half.
    pub fn doubling_bridge(&self, c: Rational, n: u64) -> Result<BridgeReport, WeightError> {
        if c.is_zero() {
            return Err(WeightError::Invalid("c must be positive".into()));
        }
        let n = n.max(2);
        let mut first = 0.0f64;
        let mut second = 0.0f64;
        let mut tested = 0;
        for k in 1..=n {
            let kc = (Rational::from_integer(k) * c).ceil().to_integer();
            let (Ok(num), Ok(den)) = (self.eval(kc), self.eval(k)) else {
                break;
            };
            let r = num / den;
            if k <= n / 2 {
                first = first.max(r);
            } else {
                second = second.max(r);
            }
            tested = k;
        }
        let certified = self.power_exponent().map(|q| (rational_to_f64(c) + 1.0).powf(rational_to_f64(q)));
        let diverges = tested < n || second > 2.0 * first;
        Ok(BridgeReport {
            l: (!diverges).then_some(first.max(second)),
            certified,
            tested_up_to: tested,
        })
    }
}

/// `⌊n^q⌋` or `⌈n^q⌉` exactly.
fn power_rounded(n: u64, q: Rational, up: bool) -> Option<u64> {
    let (a, b) = (*q.numer(), *q.denom());
    let a32 = u32::try_from(a).ok()?;
    let b32 = u32::try_from(b).ok()?;
    if let Some(p) = (n as u128).checked_pow(a32) {
        let r = if b == 1 { p } else { p.nth_root(b32) };
        let exact = b == 1 || r.checked_pow(b32) == Some(p);
        let v = if up && !exact { r + 1 } else { r };
        return u64::try_from(v).ok();
    }
    let p = BigUint::from(n).pow(a32);
    let r = p.nth_root(b32);
    let exact = r.pow(b32) == p;
    let v = if up && !exact { r + 1u32 } else { r };
    v.to_u64()
}

/// Fixed-point bracket `[lo, hi] / 2^bits` around `e`.
fn e_bracket(bits: u32) -> (BigUint, BigUint) {
    let scale = BigUint::one() << bits;
    let mut sum = BigUint::zero();
    let mut fact = BigUint::one();
    let mut terms = 0u32;
    let mut k = 0u32;
    loop {
        if k > 0 {
            fact *= k;
        }
        let t = &scale / &fact;
        if t.is_zero() {
            break;
        }
        sum += t;
        terms += 1;
        k += 1;
    }
    // Each truncated term loses < 1 ulp; the discarded tail is < 1 ulp.
    let hi = &sum + BigUint::from(terms + 1);
    (sum, hi)
}

fn e_cached(bits: u32) -> std::borrow::Cow<'static, (BigUint, BigUint)> {
    static CACHE: OnceLock<(BigUint, BigUint)> = OnceLock::new();
    if bits == 512 {
        std::borrow::Cow::Borrowed(CACHE.get_or_init(|| e_bracket(512)))
    } else {
        std::borrow::Cow::Owned(e_bracket(bits))
    }
}

/// Exact `⌊mult b^n⌋` or `⌈mult b^n⌉`.
fn exp_rounded(base: Base, n: u64, mult: u64, up: bool) -> Option<u64> {
    let n32 = u32::try_from(n).ok()?;
    match base {
        Base::Rational(b) => {
            let num = BigUint::from(*b.numer()).pow(n32) * mult;
            let den = BigUint::from(*b.denom()).pow(n32);
            let q = &num / &den;
            let q = if up && !(&num % &den).is_zero() { q + 1u32 } else { q };
            q.to_u64()
        }
        Base::E => {
            // e^n > 2^64 for n >= 45, so large n overflow anyway.
            if n > 64 {
                return None;
            }
            let mut bits = 512u32;
            loop {
                let e = e_cached(bits);
                let (lo, hi) = (&e.0, &e.1);
                let shift = (bits as u64) * n;
                let f_lo = (lo.pow(n32) * mult) >> shift;
                let f_hi = (hi.pow(n32) * mult) >> shift;
                if f_lo == f_hi {
                    // mult e^n is irrational for n >= 1, so the ceiling is floor + 1.
                    let v = if up { f_lo + 1u32 } else { f_lo };
                    return v.to_u64();
                }
                if bits >= 8192 {
                    return None;
                }
                bits *= 2;
            }
        }
    }
}

/// Block boundaries `t_j = (j+1)!` as long as they fit in `u64`.
fn factorial_breaks() -> &'static [u64] {
    static B: OnceLock<Vec<u64>> = OnceLock::new();
    B.get_or_init(|| {
        let mut v = vec![1u64];
        let mut f = 1u64;
        let mut j = 2u64;
        while let Some(next) = f.checked_mul(j) {
            f = next;
            v.push(f);
            j += 1;
        }
        v
    })
}

/// Numbers of indices `i ∈ [2, n]` taking the low and high slope.
fn oscillating_counts(n: u64) -> (u64, u64) {
    let t = factorial_breaks();
    let (mut lows, mut highs) = (0u64, 0u64);
    for j in 0..t.len() {
        let lo = t[j] + 1;
        let hi = t.get(j + 1).copied().unwrap_or(u64::MAX);
        if lo > n {
            break;
        }
        let cnt = hi.min(n) - lo + 1;
        if j % 2 == 1 {
            highs += cnt;
        } else {
            lows += cnt;
        }
    }
    (lows, highs)
}

/// `m_n = 1 + low * lows + high * highs` as a fraction `num / den`.
fn oscillating_parts(low: Rational, high: Rational, n: u64) -> Option<(u128, u128)> {
    let (lows, highs) = oscillating_counts(n);
    let (ln, ld) = (*low.numer() as u128, *low.denom() as u128);
    let (hn, hd) = (*high.numer() as u128, *high.denom() as u128);
    let den = ld.checked_mul(hd)?;
    let num = den
        .checked_add(ln.checked_mul(hd)?.checked_mul(lows as u128)?)?
        .checked_add(hn.checked_mul(ld)?.checked_mul(highs as u128)?)?;
    Some((num, den))
}

fn oscillating_value(low: Rational, high: Rational, n: u64) -> Rational {
    let (lows, highs) = oscillating_counts(n);
    Rational::one() + low * Rational::from_integer(lows) + high * Rational::from_integer(highs)
}

impl fmt::Display for WeightSequence {
    /// Compact CLI form, e.g. `power:3/2`, `expo:e`, `table:1,1,2`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = |x: Rational| ExtValue::Rational(x).to_string();
        match &self.kind {
            WeightKind::Power { q } => write!(f, "power:{}", r(*q)),
            WeightKind::Linear { slope, offset } => write!(f, "linear:{}:{}", r(*slope), fmt_signed(*offset)),
            WeightKind::Table(t) => {
                write!(f, "table:{}", t.iter().map(|x| r(*x)).collect::<Vec<_>>().join(","))
            }
            WeightKind::Expo { base } => write!(f, "expo:{base}"),
            WeightKind::Product { base } => write!(f, "product:{base}"),
            WeightKind::Oscillating { low, high } => write!(f, "oscillating:{}:{}", r(*low), r(*high)),
        }
    }
}

impl FromStr for WeightSequence {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s == "identity" {
            return Ok(Self::identity());
        }
        let (kind, rest) = s.split_once(':').ok_or_else(|| format!("weight {s:?} needs the form kind:params"))?;
        let parts: Vec<&str> = rest.split(':').collect();
        let seq = match (kind, parts.as_slice()) {
            ("power", [q]) => Self::power(parse_rational(q)?),
            ("linear", [k]) => Self::linear(parse_rational(k)?, SignedRational::zero()),
            ("linear", [k, o]) => Self::linear(parse_rational(k)?, parse_signed(o)?),
            ("table", [vals]) => {
                Self::table(vals.split(',').map(parse_rational).collect::<Result<Vec<_>, _>>()?)
            }
            ("expo", [b]) => Self::expo(b.parse()?),
            ("product", [b]) => Self::product(b.parse()?),
            ("oscillating", [lo, hi]) => Self::oscillating(parse_rational(lo)?, parse_rational(hi)?),
            _ => return Err(format!("unknown weight {s:?}")),
        };
        seq.map_err(|e| e.to_string())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum WeightJson {
    Power {
        #[serde(with = "crate::value::rational_str")]
        q: Rational,
    },
    Linear {
        #[serde(with = "crate::value::rational_str")]
        slope: Rational,
        #[serde(default)]
        offset: Option<String>,
    },
    Table {
        values: Vec<String>,
    },
    Expo {
        base: String,
    },
    Product {
        base: String,
    },
    Oscillating {
        #[serde(with = "crate::value::rational_str")]
        low: Rational,
        #[serde(with = "crate::value::rational_str")]
        high: Rational,
    },
}

impl Serialize for WeightSequence {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let r = |x: &Rational| ExtValue::Rational(*x).to_string();
        let j = match &self.kind {
            WeightKind::Power { q } => WeightJson::Power { q: *q },
            WeightKind::Linear { slope, offset } => {
                WeightJson::Linear { slope: *slope, offset: Some(fmt_signed(*offset)) }
            }
            WeightKind::Table(t) => WeightJson::Table { values: t.iter().map(r).collect() },
            WeightKind::Expo { base } => WeightJson::Expo { base: base.to_string() },
            WeightKind::Product { base } => WeightJson::Product { base: base.to_string() },
            WeightKind::Oscillating { low, high } => WeightJson::Oscillating { low: *low, high: *high },
        };
        j.serialize(s)
    }
}

impl<'de> Deserialize<'de> for WeightSequence {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let j = WeightJson::deserialize(d)?;
        let seq = match j {
            WeightJson::Power { q } => Self::power(q),
            WeightJson::Linear { slope, offset } => {
                let off = offset.as_deref().map(parse_signed).transpose().map_err(D::Error::custom)?;
                Self::linear(slope, off.unwrap_or_default())
            }
            WeightJson::Table { values } => Self::table(
                values.iter().map(|v| parse_rational(v)).collect::<Result<Vec<_>, _>>().map_err(D::Error::custom)?,
            ),
            WeightJson::Expo { base } => Self::expo(base.parse().map_err(D::Error::custom)?),
            WeightJson::Product { base } => Self::product(base.parse().map_err(D::Error::custom)?),
            WeightJson::Oscillating { low, high } => Self::oscillating(low, high),
        };
        seq.map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> WeightSequence {
        s.parse().unwrap()
    }

    #[test]
    fn documented_evaluations() {
        assert_eq!(w("power:2").eval(7).unwrap(), 49.0);
        assert!((w("product:e").eval(3).unwrap() - 60.2566).abs() < 1e-4);
        assert_eq!(w("table:1,1,2,3,5").eval(5).unwrap(), 5.0);
        assert!(w("table:1,1,2,3,5").eval(6).is_err());
    }

    #[test]
    fn exact_floors() {
        assert_eq!(w("power:3/2").floor(4).unwrap(), 8);
        assert_eq!(w("power:3/2").floor(2).unwrap(), 2);
        assert_eq!(w("power:3/2").ceil(2).unwrap(), 3);
        assert_eq!(w("power:2").ceil(5).unwrap(), 25);
        let kexp: Vec<u64> = (1..=5).map(|k| w("product:e").floor(k).unwrap()).collect();
        assert_eq!(kexp, vec![2, 14, 60, 218, 742]);
        assert_eq!(w("expo:e").floor(10).unwrap(), 22026);
        assert_eq!(w("expo:e").floor(44).unwrap(), 12_851_600_114_359_308_275);
        assert!(w("expo:e").floor(45).is_err());
        assert_eq!(w("expo:3/2").floor(3).unwrap(), 3);
        assert_eq!(w("linear:2:-1/2").floor(3).unwrap(), 5);
        assert_eq!(w("linear:2:-1/2").ceil(3).unwrap(), 6);
    }

    #[test]
    fn floor_matches_float_for_moderate_values() {
        for s in ["power:3/2", "power:5/3", "expo:e", "product:e", "expo:7/5", "oscillating:1:3"] {
            let m = w(s);
            for n in 1..40 {
                let f = m.eval(n).unwrap();
                if f < 1e12 {
                    assert_eq!(m.floor(n).unwrap(), f.floor() as u64, "{s} n={n}");
                }
            }
        }
    }

    #[test]
    fn growth_classification() {
        let g = w("power:1").growth(1000);
        assert_eq!((g.liminf_ratio, g.limsup_ratio, g.limit_exists), (ExtValue::ratio(1, 1), ExtValue::ratio(1, 1), Tri::Yes));
        assert!(w("power:2").growth(1000).liminf_ratio.is_infinite());
        assert!(w("expo:e").growth(100).limsup_ratio.is_infinite());
        let osc = w("oscillating:1:3").growth(1000);
        assert_eq!(osc.limit_exists, Tri::No);
        let sqrt = WeightSequence::table((1..=100_000u64).map(|s| Rational::from_integer(s.sqrt() + u64::from(s.sqrt().pow(2) != s)))).unwrap();
        let g = sqrt.growth(100_000);
        assert!(!g.analytic);
        assert_eq!(g.trend, Trend::Vanishing);
        assert_eq!(WeightSequence::table((1..=10_000u64).map(|s| Rational::from_integer(s * s))).unwrap().trend(10_000), Trend::Diverging);
    }

    #[test]
    fn oscillating_ratio_reaches_both_ends() {
        let m = w("oscillating:1:3");
        // End of a high block (j = 7): t_8 = 9!.
        let hi = m.eval(362_880).unwrap() / 362_880.0;
        let lo = m.eval(3_628_800).unwrap() / 3_628_800.0;
        assert!(hi > 2.7 && lo < 1.3, "{hi} {lo}");
        for n in 1..2000 {
            assert!(m.eval(n + 1).unwrap() >= m.eval(n).unwrap());
        }
    }

    #[test]
    fn bridge_examples() {
        let r = w("power:2").doubling_bridge(Rational::from_integer(3), 1000).unwrap();
        assert_eq!(r.certified, Some(16.0));
        assert!(r.l.unwrap() <= 16.0);
        assert!(w("expo:e").doubling_bridge(Rational::from_integer(2), 50).unwrap().l.is_none());
        assert_eq!(w("expo:e").doubling_bridge(Rational::from_integer(1), 50).unwrap().l, Some(1.0));
    }

    #[test]
    fn max_index_inverts_floor() {
        assert_eq!(w("power:2").max_index(100, u64::MAX), 10);
        assert_eq!(w("power:2").max_index(99, u64::MAX), 9);
        assert_eq!(w("expo:e").max_index(u64::MAX, u64::MAX), 44);
        assert_eq!(w("table:1,2,3").max_index(100, 1000), 3);
    }

    #[test]
    fn validation() {
        assert!("power:1/2".parse::<WeightSequence>().is_err());
        assert!("table:2,1".parse::<WeightSequence>().is_err());
        assert!("expo:1".parse::<WeightSequence>().is_err());
        assert!("linear:0:0".parse::<WeightSequence>().is_err());
        assert!("linear:0:1".parse::<WeightSequence>().is_ok());
    }

    #[test]
    fn json_and_string_round_trip() {
        for s in ["power:3/2", "linear:2:-1/2", "table:1,3/2,2", "expo:e", "product:5/2", "oscillating:1:3"] {
            let m = w(s);
            assert_eq!(m.to_string(), s);
            let j = serde_json::to_string(&m).unwrap();
            assert_eq!(serde_json::from_str::<WeightSequence>(&j).unwrap(), m);
        }
        let m: WeightSequence = serde_json::from_str(r#"{"kind":"power","q":"3/2"}"#).unwrap();
        assert_eq!(m, w("power:3/2"));
        let m: WeightSequence = serde_json::from_str(r#"{"kind":"power","q":1.5}"#).unwrap();
        assert_eq!(m, w("power:3/2"));
    }
}
