//! Catalogue of concrete set families as rule-backed [`IntegerSet`]s, with the
//! density values known for them and the block bounds for the upper q-density.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::{combine, consistency, evaluate, Consistency, DensityError, DensityKind, DensityResult, EvalConfig, KindTag, Outer, ScaleTag, Side};
use crate::intset::{Asymptotics, CountingLaw, GapLaw, IntegerSet, Interval, RunLaw, SetError, SetRule, MAX_INTERVALS};
use crate::value::{parse_rational, rational_to_f64, ExtValue, Rational};
use crate::weights::{Base, WeightSequence};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("unknown rule {0:?}")]
    UnknownRule(String),
    #[error(transparent)]
    Set(#[from] SetError),
    #[error(transparent)]
    Density(#[from] DensityError),
}

impl From<GenError> for SetError {
    fn from(e: GenError) -> Self {
        match e {
            GenError::Set(s) => s,
            other => SetError::InvalidParameters(other.to_string()),
        }
    }
}

/// Length of the blocks `[a_n, b_n]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockLen {
    /// `b_n = a_n + n`.
    Linear,
    /// `b_n = a_n + c`.
    Const(u64),
}

/// Generator of a subset of ℕ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum RuleSpec {
    Empty,
    Naturals,
    /// `{offset, offset + step, offset + 2 step, ...}`.
    Arithmetic { step: u64, offset: u64 },
    Squares,
    /// `{⌊coef k^exp⌋ : k ∈ ℕ}` with `coef >= 1`, `exp >= 1`.
    Monomial {
        #[serde(with = "crate::value::rational_str")]
        coef: Rational,
        #[serde(with = "crate::value::rational_str")]
        exp: Rational,
    },
    /// `{⌊k e^k⌋ : k ∈ ℕ}`.
    Kexp,
    /// Union of `[a_n, b_n]` with `a_n = ⌊n^p⌋` for `n >= n0`, where `n0` is the least
    /// index after which the blocks are separated. `q` is the exponent whose
    /// q-densities the expectations describe.
    Blocks {
        #[serde(with = "crate::value::rational_str")]
        p: Rational,
        len: BlockLen,
        #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_rational")]
        q: Option<Rational>,
    },
    /// Sparse points spread evenly over sub-blocks of `[s'_k + 1, s'_k + s'_k^q]`.
    SparseBlocks {
        #[serde(with = "crate::value::rational_str")]
        q: Rational,
        #[serde(with = "crate::value::rational_str")]
        eps: Rational,
    },
    /// Random gaps uniform in `[1, max_gap]`.
    BoundedGap { max_gap: u64, seed: u64 },
    /// Random gaps in `[1, 4]` plus a gap of `2^j` after member `2^j`.
    UnboundedGap { seed: u64 },
    /// Explicit finite set.
    Finite { intervals: Vec<Interval> },
    /// Explicit prefix below `start`, then `pattern` offsets repeated with `period`.
    Periodic { prefix: Vec<Interval>, start: u64, period: u64, pattern: Vec<Interval> },
}

mod opt_rational {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        match r {
            Some(r) => crate::value::rational_str::serialize(r, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        let v: Option<serde_json::Value> = Option::deserialize(d)?;
        match v {
            None | Some(serde_json::Value::Null) => Ok(None),
            Some(serde_json::Value::String(s)) => parse_rational(&s).map(Some).map_err(serde::de::Error::custom),
            Some(serde_json::Value::Number(n)) => {
                parse_rational(&n.to_string()).map(Some).map_err(serde::de::Error::custom)
            }
            Some(other) => Err(serde::de::Error::custom(format!("expected rational, got {other}"))),
        }
    }
}

fn r(n: u64) -> Rational {
    Rational::from_integer(n)
}

impl RuleSpec {
    pub fn multiples(k: u64) -> Self {
        RuleSpec::Arithmetic { step: k, offset: k }
    }

    pub fn evens() -> Self {
        Self::multiples(2)
    }

    /// Blocks `[n^{2q}, n^{2q} + n]`.
    pub fn wide_blocks(q: Rational) -> Self {
        RuleSpec::Blocks { p: q * r(2), len: BlockLen::Linear, q: Some(q) }
    }

    /// Blocks `[⌊n^{p}⌋, ⌊n^{p}⌋ + 1]` read against the exponent `q > p`.
    pub fn thin_blocks(p: Rational, q: Rational) -> Self {
        RuleSpec::Blocks { p, len: BlockLen::Const(1), q: Some(q) }
    }

    /// Checks the defining inequalities, naming the violated one.
    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: String| Err(GenError::InvalidParameters(m));
        match self {
            RuleSpec::Arithmetic { step, offset } if *step == 0 || *offset == 0 => {
                bad("arithmetic needs step >= 1 and offset >= 1".into())
            }
            RuleSpec::Monomial { coef, exp } if *coef < Rational::one() || *exp < Rational::one() => {
                bad("monomial needs coef >= 1 and exp >= 1".into())
            }
            RuleSpec::Blocks { p, len, .. } => {
                match len {
                    BlockLen::Linear if *p <= r(2) => bad(format!(
                        "blocks [n^p, n^p + n] need p > 2 so that n^p + n < (n+1)^p eventually, got p = {}",
                        ExtValue::Rational(*p)
                    )),
                    BlockLen::Const(_) if *p <= Rational::one() => bad(format!(
                        "blocks [n^p, n^p + c] need p > 1 so that n^p + c < (n+1)^p eventually, got p = {}",
                        ExtValue::Rational(*p)
                    )),
                    _ => Ok(()),
                }?;
                if p.numer() > &64 || p.denom() > &64 {
                    return bad("block exponent numerator and denominator must be <= 64".into());
                }
                Ok(())
            }
            RuleSpec::SparseBlocks { q, eps } => {
                if *q <= Rational::one() {
                    return bad("sparse block family needs q > 1".into());
                }
                if *eps == r(0) || *eps >= Rational::one() {
                    return bad("sparse block family needs 0 < eps < 1".into());
                }
                sparse_block_schedule(*q, *eps, 2).map(|_| ())
            }
            RuleSpec::BoundedGap { max_gap, .. } if *max_gap == 0 => bad("bounded gap needs max_gap >= 1".into()),
            RuleSpec::Periodic { start, period, .. } if *start == 0 || *period == 0 => {
                bad("periodic needs start >= 1 and period >= 1".into())
            }
            _ => Ok(()),
        }
    }

    /// Structural facts used by the closed-form evaluators.
    pub fn asymptotics(&self) -> Asymptotics {
        let one = Rational::one();
        match self {
            RuleSpec::Empty | RuleSpec::Finite { .. } => Asymptotics::FINITE,
            // Periodic kinds are described by their tails.
            RuleSpec::Naturals | RuleSpec::Arithmetic { .. } | RuleSpec::Periodic { .. } => Asymptotics::UNKNOWN,
            RuleSpec::Squares => Asymptotics {
                finite: false,
                gaps: GapLaw::Divergent,
                runs: RunLaw::Bounded,
                counting: Some(CountingLaw::Power { coef: 1.0, exponent: Rational::new(1, 2) }),
            },
            RuleSpec::Monomial { coef, exp } => {
                let e = rational_to_f64(*exp);
                let counting = Some(CountingLaw::Power {
                    coef: rational_to_f64(*coef).powf(-1.0 / e),
                    exponent: exp.recip(),
                });
                if *exp == one {
                    Asymptotics {
                        finite: false,
                        gaps: GapLaw::Bounded,
                        runs: if *coef == one { RunLaw::Unbounded } else { RunLaw::Bounded },
                        counting,
                    }
                } else {
                    Asymptotics { finite: false, gaps: GapLaw::Divergent, runs: RunLaw::Bounded, counting }
                }
            }
            RuleSpec::Kexp => Asymptotics {
                finite: false,
                gaps: GapLaw::Divergent,
                runs: RunLaw::Bounded,
                counting: Some(CountingLaw::Log { coef: 1.0 }),
            },
            RuleSpec::Blocks { p, len, .. } => match len {
                BlockLen::Linear => Asymptotics {
                    finite: false,
                    gaps: GapLaw::Divergent,
                    runs: RunLaw::Unbounded,
                    counting: Some(CountingLaw::Power { coef: 0.5, exponent: r(2) / *p }),
                },
                BlockLen::Const(c) => Asymptotics {
                    finite: false,
                    gaps: GapLaw::Divergent,
                    runs: RunLaw::Bounded,
                    counting: Some(CountingLaw::Power { coef: (*c + 1) as f64, exponent: p.recip() }),
                },
            },
            RuleSpec::SparseBlocks { .. } => {
                Asymptotics { finite: false, gaps: GapLaw::Divergent, runs: RunLaw::Bounded, counting: None }
            }
            RuleSpec::BoundedGap { .. } => {
                Asymptotics { finite: false, gaps: GapLaw::Bounded, runs: RunLaw::Unknown, counting: None }
            }
            RuleSpec::UnboundedGap { .. } => {
                Asymptotics { finite: false, gaps: GapLaw::Unbounded, runs: RunLaw::Unknown, counting: None }
            }
        }
    }

    pub fn name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for RuleSpec {
    /// Short name accepted by [`RuleSpec::from_str`] where one exists, else JSON.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rs = |x: &Rational| ExtValue::Rational(*x).to_string();
        match self {
            RuleSpec::Empty => f.write_str("empty"),
            RuleSpec::Naturals => f.write_str("naturals"),
            RuleSpec::Arithmetic { step, offset } => write!(f, "arithmetic:{step}:{offset}"),
            RuleSpec::Squares => f.write_str("squares"),
            RuleSpec::Monomial { coef, exp } => write!(f, "monomial:{}:{}", rs(coef), rs(exp)),
            RuleSpec::Kexp => f.write_str("kexp"),
            RuleSpec::Blocks { p, len, q } => {
                let l = match len {
                    BlockLen::Linear => "linear".to_string(),
                    BlockLen::Const(c) => c.to_string(),
                };
                write!(f, "blocks:{}:{l}", rs(p))?;
                if let Some(q) = q {
                    write!(f, ":{}", rs(q))?;
                }
                Ok(())
            }
            RuleSpec::SparseBlocks { q, eps } => write!(f, "sparse-blocks:{}:{}", rs(q), rs(eps)),
            RuleSpec::BoundedGap { max_gap, seed } => write!(f, "bounded-gap:{max_gap}:{seed}"),
            RuleSpec::UnboundedGap { seed } => write!(f, "unbounded-gap:{seed}"),
            RuleSpec::Finite { .. } | RuleSpec::Periodic { .. } => {
                write!(f, "{}", serde_json::to_string(self).map_err(|_| fmt::Error)?)
            }
        }
    }
}

impl FromStr for RuleSpec {
    type Err = GenError;

    /// `squares`, `evens`, `odds`, `multiples:3`, `kexp`, `blocks:4:linear`, `blocks:3/2:1:2`,
    /// `sparse-blocks:2:1/2`, `bounded-gap:5:0`, `unbounded-gap:0`, `monomial:2:2`, ...
    fn from_str(s: &str) -> Result<Self, GenError> {
        let s = s.trim();
        if s.starts_with('{') {
            return serde_json::from_str(s).map_err(|e| GenError::InvalidParameters(e.to_string()));
        }
        let parts: Vec<&str> = s.split(':').collect();
        let rat = |x: &str| parse_rational(x).map_err(GenError::InvalidParameters);
        let int = |x: &str| x.parse::<u64>().map_err(|e| GenError::InvalidParameters(format!("{x:?}: {e}")));
        let spec = match parts.as_slice() {
            ["empty"] => RuleSpec::Empty,
            ["naturals"] => RuleSpec::Naturals,
            ["evens"] => RuleSpec::evens(),
            ["odds"] => RuleSpec::Arithmetic { step: 2, offset: 1 },
            ["multiples", k] => RuleSpec::multiples(int(k)?),
            ["arithmetic", k, o] => RuleSpec::Arithmetic { step: int(k)?, offset: int(o)? },
            ["squares"] => RuleSpec::Squares,
            ["monomial", c, e] => RuleSpec::Monomial { coef: rat(c)?, exp: rat(e)? },
            ["kexp"] => RuleSpec::Kexp,
            ["blocks", p, l, rest @ ..] => {
                let len = if *l == "linear" { BlockLen::Linear } else { BlockLen::Const(int(l)?) };
                let q = match rest {
                    [] => None,
                    [q] => Some(rat(q)?),
                    _ => return Err(GenError::UnknownRule(s.into())),
                };
                RuleSpec::Blocks { p: rat(p)?, len, q }
            }
            ["sparse-blocks", q, e] => RuleSpec::SparseBlocks { q: rat(q)?, eps: rat(e)? },
            ["bounded-gap", m, seed] => RuleSpec::BoundedGap { max_gap: int(m)?, seed: int(seed)? },
            ["bounded-gap", m] => RuleSpec::BoundedGap { max_gap: int(m)?, seed: 0 },
            ["unbounded-gap", seed] => RuleSpec::UnboundedGap { seed: int(seed)? },
            ["unbounded-gap"] => RuleSpec::UnboundedGap { seed: 0 },
            _ => return Err(GenError::UnknownRule(s.into())),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug)]
struct GeneratedRule {
    spec: RuleSpec,
}

impl SetRule for GeneratedRule {
    fn materialize(&self, horizon: u64) -> Result<IntegerSet, SetError> {
        Ok(materialize(&self.spec, horizon)?)
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::to_value(&self.spec).expect("rule spec serializes")
    }

    fn asymptotics(&self) -> Asymptotics {
        self.spec.asymptotics()
    }
}

/// Materializes `rule` on `[1, horizon]` with the rule attached for later extension.
pub fn generate(rule: &RuleSpec, horizon: u64) -> Result<IntegerSet, GenError> {
    rule.validate()?;
    Ok(materialize(rule, horizon)?.with_rule(Arc::new(GeneratedRule { spec: rule.clone() })))
}

/// Recovers the generator of a set built by [`generate`] or by the periodic and finite constructors.
pub fn rule_of(set: &IntegerSet) -> Option<RuleSpec> {
    serde_json::from_value(set.rule()?.describe()).ok()
}

fn points(v: Vec<u64>, horizon: u64) -> Result<IntegerSet, GenError> {
    if v.len() > MAX_INTERVALS {
        return Err(SetError::TooLarge { limit: MAX_INTERVALS }.into());
    }
    Ok(IntegerSet::from_members(v, horizon)?)
}

fn materialize(rule: &RuleSpec, h: u64) -> Result<IntegerSet, GenError> {
    match rule {
        RuleSpec::Empty => Ok(IntegerSet::empty(h)),
        RuleSpec::Naturals => Ok(IntegerSet::naturals(h)),
        RuleSpec::Arithmetic { step, offset } => Ok(IntegerSet::arithmetic(*step, *offset, h)?),
        RuleSpec::Squares => points((1..).map(|k: u64| k * k).take_while(|&v| v <= h).collect(), h),
        RuleSpec::Monomial { coef, exp } if exp.is_one() => {
            // ⌊(a/b) k⌋ grows by a every b steps.
            let (a, b) = (*coef.numer(), *coef.denom());
            let vals: Vec<u64> = (1..=b).map(|k| ((a as u128 * k as u128) / b as u128) as u64).collect();
            let start = vals[0];
            let pattern = canonical_offsets(vals.iter().map(|v| v - start));
            Ok(IntegerSet::eventually_periodic(vec![], start, a, pattern, h)?)
        }
        RuleSpec::Monomial { coef, exp } => {
            let mut v = Vec::new();
            for k in 1u64.. {
                match monomial_floor(*coef, *exp, k) {
                    Some(x) if x <= h => v.push(x),
                    _ => break,
                }
                if v.len() > MAX_INTERVALS {
                    return Err(SetError::TooLarge { limit: MAX_INTERVALS }.into());
                }
            }
            points(v, h)
        }
        RuleSpec::Kexp => {
            let m = WeightSequence::product(Base::E).expect("valid weight");
            let v = (1u64..).map_while(|k| m.floor(k).ok().filter(|&x| x <= h)).collect();
            points(v, h)
        }
        RuleSpec::Blocks { p, len, .. } => {
            let n0 = blocks_start(*p, *len)?;
            let m = WeightSequence::power(*p).map_err(|e| GenError::InvalidParameters(e.to_string()))?;
            let mut ivs = Vec::new();
            for n in n0.. {
                let Ok(a) = m.floor(n) else { break };
                if a > h {
                    break;
                }
                let b = a + match len {
                    BlockLen::Linear => n,
                    BlockLen::Const(c) => *c,
                };
                ivs.push(Interval::new(a, b.min(h)));
                if ivs.len() > MAX_INTERVALS {
                    return Err(SetError::TooLarge { limit: MAX_INTERVALS }.into());
                }
            }
            Ok(IntegerSet::from_intervals(ivs, h)?)
        }
        RuleSpec::SparseBlocks { q, eps } => sparse_blocks_materialize(*q, *eps, h),
        RuleSpec::BoundedGap { max_gap, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut v = Vec::new();
            let mut x = rng.gen_range(1..=*max_gap);
            while x <= h {
                v.push(x);
                x += rng.gen_range(1..=*max_gap);
                if v.len() > MAX_INTERVALS {
                    return Err(SetError::TooLarge { limit: MAX_INTERVALS }.into());
                }
            }
            points(v, h)
        }
        RuleSpec::UnboundedGap { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut v = Vec::new();
            let mut x = 1u64;
            let mut k = 1u64;
            while x <= h {
                v.push(x);
                let extra = if k.is_power_of_two() { k } else { 0 };
                x = x.saturating_add(rng.gen_range(1..=4) + extra);
                k += 1;
                if v.len() > MAX_INTERVALS {
                    return Err(SetError::TooLarge { limit: MAX_INTERVALS }.into());
                }
            }
            points(v, h)
        }
        RuleSpec::Finite { intervals } => Ok(IntegerSet::finite(intervals.iter().copied(), h)?),
        RuleSpec::Periodic { prefix, start, period, pattern } => {
            Ok(IntegerSet::eventually_periodic(prefix.clone(), *start, *period, pattern.clone(), h)?)
        }
    }
}

fn canonical_offsets(it: impl Iterator<Item = u64>) -> Vec<Interval> {
    crate::intset::canonicalize(it.map(|o| Interval::new(o, o)).collect())
}

/// `⌊c k^e⌋` exactly: with `c = a/b`, `e = p/r` it is the integer r-th root of `⌊a^r k^p / b^r⌋`.
fn monomial_floor(c: Rational, e: Rational, k: u64) -> Option<u64> {
    let (a, b) = (*c.numer(), *c.denom());
    let (p, rr) = (u32::try_from(*e.numer()).ok()?, u32::try_from(*e.denom()).ok()?);
    let num = BigUint::from(a).pow(rr) * BigUint::from(k).pow(p);
    let den = BigUint::from(b).pow(rr);
    (num / den).nth_root(rr).to_u64()
}

/// Least `n0` with `b_n < a_{n+1}` for all `n >= n0`.
pub fn blocks_start(p: Rational, len: BlockLen) -> Result<u64, GenError> {
    RuleSpec::Blocks { p, len, q: None }.validate()?;
    let pf = rational_to_f64(p);
    let c = match len {
        BlockLen::Linear => None,
        BlockLen::Const(c) => Some(c as f64),
    };
    // Past `bound` the real increment (n+1)^p - n^p >= p n^{p-1} exceeds len + 2,
    // which absorbs the two floors, and it keeps growing.
    let mut bound = 1u64;
    loop {
        let n = bound as f64;
        let need = c.unwrap_or(n) + 2.0;
        if pf * n.powf(pf - 1.0) > need {
            break;
        }
        bound = bound.saturating_mul(2);
        if bound > 1 << 40 {
            return Err(GenError::InvalidParameters("blocks never separate".into()));
        }
    }
    let m = WeightSequence::power(p).map_err(|e| GenError::InvalidParameters(e.to_string()))?;
    let mut last_bad = 0;
    for n in 1..=bound {
        let (Ok(a), Ok(a_next)) = (m.floor(n), m.floor(n + 1)) else { break };
        let b = a + c.map_or(n, |c| c as u64);
        if b >= a_next {
            last_bad = n;
        }
    }
    Ok(last_bad + 1)
}

/// Parameters of one block of the sparse family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseBlock {
    /// Block occupies `[start + 1, start + start^q]`.
    pub start: u64,
    /// Sub-block scale; sub-blocks have length `scale^q`.
    pub scale: u64,
    /// Number of sub-blocks minus one.
    pub last_sub_block: u64,
    /// Members per sub-block.
    pub per_sub_block: u64,
}

fn pow_floor(x: u64, e: Rational) -> Option<u64> {
    WeightSequence::power(e).ok().and_then(|m| m.floor(x).ok())
}

/// Least schedule `s'_1 < s'_2 < ...` meeting the separation and size inequalities,
/// with every sub-block scale at least 2. Returns up to `count` blocks that fit in `u64`.
pub fn sparse_block_schedule(q: Rational, eps: Rational, count: usize) -> Result<Vec<SparseBlock>, GenError> {
    let qf = rational_to_f64(q);
    let ef = rational_to_f64(eps);
    let a = (qf - 1.0) / (2.0 * qf);
    let b = (qf - 1.0) / (2.0 * qf * (qf + ef - 1.0));
    let mut out: Vec<SparseBlock> = Vec::new();
    let mut next_min = 1u64;
    for k in 1..=count as u64 {
        let kf = k as f64;
        let ok = |s: u64| {
            let x = s as f64;
            let scale = x.powf(b).floor();
            // Each sub-block must also fit its interior members.
            let fits = pow_floor(scale as u64, q).is_some_and(|sub| sub as f64 >= scale.powf(1.0 - ef).ceil() + 1.0);
            x >= kf * x.powf(a) + 2.0 * x.powf(b) && scale >= 2.0 && fits
        };
        // The inequality is eventually monotone; step up geometrically, then bisect.
        let mut hi = next_min.max(2);
        while !ok(hi) {
            hi = match hi.checked_mul(2) {
                Some(v) => v,
                None => return Ok(out),
            };
        }
        let mut lo = next_min.max(1);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if ok(mid) && (mid..=hi).step_by(((hi - mid) / 64).max(1) as usize).all(ok) {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let s = hi;
        let scale = (s as f64).powf(b).floor() as u64;
        let Some(span) = pow_floor(s, q) else { return Ok(out) };
        let sub = pow_floor(scale, q).expect("small power");
        let last_sub_block = pow_floor(s / scale, q).map_or(u64::MAX, |v| v.min(span / sub.max(1) + 1));
        let per = (scale as f64).powf(1.0 - ef).ceil() as u64;
        if per + 1 > sub {
            return Err(GenError::InvalidParameters(format!(
                "sub-blocks of length {sub} cannot hold {per} interior members"
            )));
        }
        out.push(SparseBlock { start: s, scale, last_sub_block, per_sub_block: per });
        match s.checked_add(span).and_then(|v| v.checked_add(1)) {
            Some(v) => next_min = v,
            None => return Ok(out),
        }
    }
    Ok(out)
}

fn sparse_blocks_materialize(q: Rational, eps: Rational, h: u64) -> Result<IntegerSet, GenError> {
    let blocks = sparse_block_schedule(q, eps, 64)?;
    let mut v: Vec<u64> = Vec::new();
    for blk in blocks {
        if blk.start + 1 > h {
            break;
        }
        let span = pow_floor(blk.start, q).unwrap_or(u64::MAX);
        let end = blk.start.saturating_add(span).min(h);
        let sub = pow_floor(blk.scale, q).expect("small power");
        // Interior offsets 1..sub-1, evenly spread, so shared endpoints hold no member.
        let offs: Vec<u64> = (0..blk.per_sub_block).map(|i| 1 + i * (sub - 1) / blk.per_sub_block).collect();
        for l in 0..=blk.last_sub_block {
            let base = match l.checked_mul(sub).and_then(|x| x.checked_add(blk.start)) {
                Some(b) if b < end => b,
                _ => break,
            };
            for &o in &offs {
                let x = base + o;
                if x <= end {
                    v.push(x);
                }
            }
            if v.len() > MAX_INTERVALS {
                return Err(SetError::TooLarge { limit: MAX_INTERVALS }.into());
            }
        }
    }
    points(v, h)
}

/// Qualitative or exact expectation for one functional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "value", rename_all = "kebab-case")]
pub enum Verdict {
    Exactly(ExtValue),
    Zero,
    PositiveFinite,
    Infinite,
    BoundedBy(ExtValue),
    /// A claimed value that no finite computation under the iterated-limit reading confirms.
    NotFinitelyCheckable(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    pub kind: KindTag,
    pub weight: WeightSequence,
    pub verdict: Verdict,
    pub note: String,
}

impl Expectation {
    fn new(tag: KindTag, weight: WeightSequence, verdict: Verdict, note: &str) -> Self {
        Expectation { kind: tag, weight, verdict, note: note.into() }
    }

    pub fn density_kind(&self) -> DensityKind {
        DensityKind { tag: self.kind, weight: self.weight.clone() }
    }
}

fn power(q: Rational) -> WeightSequence {
    WeightSequence::power(q).expect("q >= 1")
}

/// Known values for the catalogued families.
pub fn expected_densities(rule: &RuleSpec) -> Result<Vec<Expectation>, GenError> {
    use Side::*;
    let id = WeightSequence::identity;
    let sq = || power(r(2));
    let simple = |s, sc| KindTag::simple(s, sc);
    let banach = |s, o, sc| KindTag::banach(s, o, sc);
    let e = Expectation::new;
    let v = match rule {
        RuleSpec::Empty => vec![
            e(simple(Lower, ScaleTag::Classic), id(), Verdict::Zero, "empty set"),
            e(KindTag::classic_banach(Upper), id(), Verdict::Zero, "empty set"),
            e(simple(Upper, ScaleTag::Mn), sq(), Verdict::Zero, "empty set"),
            e(banach(Upper, Outer::U, ScaleTag::Mn), sq(), Verdict::Zero, "empty set"),
        ],
        RuleSpec::Finite { .. } => vec![
            e(simple(Upper, ScaleTag::Q), sq(), Verdict::Zero, "finite set"),
            e(KindTag::classic_banach(Upper), id(), Verdict::Zero, "finite set"),
        ],
        RuleSpec::Naturals => vec![
            e(simple(Lower, ScaleTag::Classic), id(), Verdict::Exactly(ExtValue::ratio(1, 1)), "full set"),
            e(KindTag::classic_banach(Upper), id(), Verdict::Exactly(ExtValue::ratio(1, 1)), "full set"),
            e(simple(Lower, ScaleTag::Mn), sq(), Verdict::Infinite, "bounded gaps, m_n / n -> inf"),
        ],
        RuleSpec::Arithmetic { step, .. } => {
            let d = ExtValue::ratio(1, *step);
            let two = WeightSequence::linear(r(2), Default::default()).expect("valid");
            let twice = d.times(ExtValue::ratio(2, 1));
            let mut v = vec![
                e(simple(Lower, ScaleTag::Classic), id(), Verdict::Exactly(d), "periodic set"),
                e(simple(Upper, ScaleTag::Classic), id(), Verdict::Exactly(d), "periodic set"),
                e(KindTag::classic_banach(Lower), id(), Verdict::Exactly(d), "periodic set"),
                e(KindTag::classic_banach(Upper), id(), Verdict::Exactly(d), "periodic set"),
                e(simple(Lower, ScaleTag::Mn), sq(), Verdict::Infinite, "bounded gaps, m_n / n -> inf"),
                e(banach(Lower, Outer::L, ScaleTag::Mn), sq(), Verdict::Infinite, "bounded gaps, m_n / n -> inf"),
            ];
            for side in [Lower, Upper] {
                for outer in [Outer::L, Outer::U] {
                    v.push(e(banach(side, outer, ScaleTag::Mn), two.clone(), Verdict::Exactly(twice), "slope 2 scales the Banach density by 2"));
                }
            }
            v
        }
        RuleSpec::Squares => vec![
            e(simple(Lower, ScaleTag::Mn), sq(), Verdict::Exactly(ExtValue::ratio(1, 1)), "|A ∩ [1, n^2]| = n"),
            e(simple(Lower, ScaleTag::Classic), id(), Verdict::Zero, "⌊√n⌋ / n -> 0"),
            e(simple(Upper, ScaleTag::Classic), id(), Verdict::Zero, "⌊√n⌋ / n -> 0"),
            e(simple(Upper, ScaleTag::Q), sq(), Verdict::Exactly(ExtValue::ratio(1, 1)), "|A ∩ [1, n^2]| = n"),
            e(banach(Lower, Outer::L, ScaleTag::Mn), sq(), Verdict::Zero, "unbounded gaps"),
            e(banach(Lower, Outer::U, ScaleTag::Mn), sq(), Verdict::Zero, "unbounded gaps"),
        ],
        RuleSpec::Monomial { coef, exp } => {
            let c = rational_to_f64(*coef).powf(-1.0 / rational_to_f64(*exp));
            vec![e(
                simple(Lower, ScaleTag::Q),
                power(*exp),
                Verdict::Exactly(if c.fract() == 0.0 { ExtValue::ratio(c as u64, 1) } else { ExtValue::Real(c) }),
                "liminf k / n_k^{1/q} with n_k = c k^q",
            )]
        }
        RuleSpec::Kexp => vec![
            e(simple(Lower, ScaleTag::Mn), WeightSequence::expo(Base::E).expect("valid"), Verdict::Exactly(ExtValue::ratio(1, 1)), "n_k = k e^k against m_k = e^k"),
            e(simple(Lower, ScaleTag::Q), sq(), Verdict::Zero, "liminf k / (k e^k)^{1/q} = 0"),
        ],
        RuleSpec::Blocks { p, len, q } => {
            let q = q.unwrap_or_else(|| match len {
                BlockLen::Linear => *p / r(2),
                BlockLen::Const(_) => p.floor() + Rational::one(),
            });
            let pw = power(q);
            match len {
                BlockLen::Linear => vec![
                    e(simple(Upper, ScaleTag::Q), pw.clone(), Verdict::BoundedBy(ExtValue::ratio(1, 1)), "block sums bound the upper q-density"),
                    e(banach(Upper, Outer::L, ScaleTag::Q), pw.clone(), Verdict::Infinite, "blocks longer than any window"),
                    e(banach(Lower, Outer::U, ScaleTag::Q), pw, Verdict::Zero, "unbounded gaps"),
                ],
                BlockLen::Const(_) => vec![
                    e(simple(Upper, ScaleTag::Q), pw.clone(), Verdict::Infinite, "block count grows faster than n^{1/q}"),
                    e(banach(Upper, Outer::L, ScaleTag::Q), pw, Verdict::Zero, "windows eventually meet one short block"),
                ],
            }
        }
        RuleSpec::SparseBlocks { q, .. } => {
            let pw = power(*q);
            vec![
                e(banach(Upper, Outer::L, ScaleTag::Q), pw.clone(), Verdict::Zero, "windows of length s^q hold few members"),
                e(banach(Lower, Outer::L, ScaleTag::Q), pw.clone(), Verdict::Zero, "unbounded gaps"),
                e(
                    banach(Upper, Outer::U, ScaleTag::Q),
                    pw,
                    Verdict::NotFinitelyCheckable("claimed +inf along windows [s'_k + 1, s'_k + s'_k^q]; the inner limsup over n at fixed s gives at most 1/s".into()),
                    "diagonal windows versus iterated limits",
                ),
            ]
        }
        RuleSpec::BoundedGap { .. } => vec![
            e(simple(Lower, ScaleTag::Mn), sq(), Verdict::Infinite, "bounded gaps, m_n / n -> inf"),
            e(banach(Lower, Outer::L, ScaleTag::Mn), sq(), Verdict::Infinite, "bounded gaps, m_n / n -> inf"),
            e(simple(Lower, ScaleTag::Classic), id(), Verdict::PositiveFinite, "gaps at most M give density >= 1/M"),
        ],
        RuleSpec::UnboundedGap { .. } => vec![
            e(banach(Lower, Outer::L, ScaleTag::Mn), sq(), Verdict::Zero, "unbounded gaps"),
            e(banach(Lower, Outer::U, ScaleTag::Mn), sq(), Verdict::Zero, "unbounded gaps"),
        ],
        RuleSpec::Periodic { pattern, period, .. } => {
            let cnt: u64 = pattern.iter().map(|iv| iv.len()).sum();
            let d = ExtValue::ratio(cnt, *period);
            vec![
                e(simple(Lower, ScaleTag::Classic), id(), Verdict::Exactly(d), "periodic set"),
                e(KindTag::classic_banach(Upper), id(), Verdict::Exactly(d), "periodic set"),
            ]
        }
    };
    Ok(v)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectationCheck {
    pub expectation: Expectation,
    pub result: DensityResult,
    pub consistency: Consistency,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectationReport {
    pub rule: RuleSpec,
    pub checks: Vec<ExpectationCheck>,
    pub consistency: Consistency,
}

/// Compares one verdict with a computed bracket.
pub fn verdict_consistency(v: &Verdict, res: &DensityResult) -> Consistency {
    match v {
        Verdict::Exactly(x) => {
            if res.exact {
                if (res.value.to_f64() - x.to_f64()).abs() <= 1e-12 || res.value == *x {
                    Consistency::Consistent
                } else {
                    Consistency::Inconsistent
                }
            } else if res.width() < 1e-2 {
                consistency(*x, res, false)
            } else {
                Consistency::Inconclusive
            }
        }
        Verdict::Zero => consistency(ExtValue::ZERO, res, false),
        Verdict::Infinite => consistency(ExtValue::Infinite, res, false),
        Verdict::PositiveFinite => {
            if res.positive() && !res.upper_bound.is_infinite() {
                Consistency::Consistent
            } else if res.exact {
                Consistency::Inconsistent
            } else {
                Consistency::Inconclusive
            }
        }
        Verdict::BoundedBy(c) => {
            if res.upper_bound.to_f64() <= c.to_f64() + 0.05 {
                Consistency::Consistent
            } else if res.exact || res.lower_bound.to_f64() > c.to_f64() + 0.05 {
                Consistency::Inconsistent
            } else {
                Consistency::Inconclusive
            }
        }
        Verdict::NotFinitelyCheckable(_) => Consistency::Inconclusive,
    }
}

/// Evaluates every expectation for `rule` and compares.
pub fn expected_check(rule: &RuleSpec, horizon: u64, cfg: &EvalConfig) -> Result<ExpectationReport, GenError> {
    let set = generate(rule, horizon)?;
    let mut checks = Vec::new();
    for exp in expected_densities(rule)? {
        let result = evaluate(&set, &exp.density_kind(), cfg)?;
        let c = verdict_consistency(&exp.verdict, &result);
        checks.push(ExpectationCheck { expectation: exp, result, consistency: c });
    }
    let consistency = combine(
        checks
            .iter()
            .filter(|c| !matches!(c.expectation.verdict, Verdict::NotFinitelyCheckable(_)))
            .map(|c| c.consistency),
    );
    Ok(ExpectationReport { rule: rule.clone(), checks, consistency })
}

/// Blocks given either by a rule or explicitly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockSource {
    Rule(RuleSpec),
    Explicit(Vec<Interval>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QwsReport {
    /// Tail sup of `(c_1 + ... + c_n) / a_{n+1}^{1/q}`.
    pub lower: f64,
    /// Tail sup of `(c_1 + ... + c_n) / a_n^{1/q}`.
    pub upper: f64,
    /// Same sequences at a sixteenth of the block count, to read the trend.
    pub lower_early: f64,
    pub upper_early: f64,
    pub blocks: u64,
    pub density: Option<DensityResult>,
    pub within: Consistency,
}

/// Bounds on the upper q-density of a union of blocks from partial block sums.
pub fn qws_bounds(src: &BlockSource, q: Rational, n: u64, cfg: &EvalConfig) -> Result<QwsReport, GenError> {
    let qf = rational_to_f64(q);
    let blocks: Vec<(u64, u64)> = match src {
        BlockSource::Explicit(v) => v.iter().map(|iv| (iv.lo, iv.hi)).collect(),
        BlockSource::Rule(RuleSpec::Blocks { p, len, .. }) => {
            let n0 = blocks_start(*p, *len)?;
            let m = power(*p);
            (n0..)
                .take(n as usize + 1)
                .map_while(|k| {
                    let a = m.floor(k).ok()?;
                    let c = match len {
                        BlockLen::Linear => k,
                        BlockLen::Const(c) => *c,
                    };
                    Some((a, a.checked_add(c)?))
                })
                .collect()
        }
        BlockSource::Rule(other) => {
            return Err(GenError::InvalidParameters(format!("{other} is not a block rule")));
        }
    };
    if blocks.len() < 2 {
        let set = IntegerSet::finite(blocks.iter().map(|&(a, b)| Interval::new(a, b)), 1 << 20)?;
        let res = evaluate(&set, &DensityKind { tag: KindTag::simple(Side::Upper, ScaleTag::Q), weight: power(q) }, cfg)?;
        let within = verdict_consistency(&Verdict::Zero, &res);
        return Ok(QwsReport { lower: 0.0, upper: 0.0, lower_early: 0.0, upper_early: 0.0, blocks: blocks.len() as u64, density: Some(res), within });
    }
    let tail_sup = |top: usize| {
        let mut sums = 0u64;
        let (mut lo, mut hi) = (0.0f64, 0.0f64);
        for i in 0..top {
            sums += blocks[i].1 - blocks[i].0 + 1;
            if i + 1 >= top / 2 {
                hi = hi.max(sums as f64 / (blocks[i].0 as f64).powf(1.0 / qf));
                lo = lo.max(sums as f64 / (blocks[i + 1].0 as f64).powf(1.0 / qf));
            }
        }
        (lo, hi)
    };
    let top = blocks.len() - 1;
    let (lower, upper) = tail_sup(top);
    let (lower_early, upper_early) = tail_sup((top / 16).max(1));
    let density = match src {
        BlockSource::Rule(rule) => {
            let set = generate(rule, 1 << 20)?;
            Some(evaluate(&set, &DensityKind { tag: KindTag::simple(Side::Upper, ScaleTag::Q), weight: power(q) }, cfg)?)
        }
        BlockSource::Explicit(v) => {
            let h = v.iter().map(|iv| iv.hi).max().unwrap_or(1);
            let set = IntegerSet::from_intervals(v.iter().copied(), h)?;
            evaluate(&set, &DensityKind { tag: KindTag::simple(Side::Upper, ScaleTag::Q), weight: power(q) }, cfg).ok()
        }
    };
    let growing = lower > 1.5 * lower_early && lower > cfg.blow_up_threshold.min(10.0);
    let within = match &density {
        None => Consistency::Inconclusive,
        Some(d) if d.value.is_infinite() => {
            if growing {
                Consistency::Consistent
            } else {
                Consistency::Inconclusive
            }
        }
        Some(d) => {
            let tol = 0.05 + d.width();
            if growing {
                Consistency::Inconsistent
            } else if d.lower_bound.to_f64() >= lower - tol && d.upper_bound.to_f64() <= upper + tol {
                Consistency::Consistent
            } else {
                Consistency::Inconclusive
            }
        }
    };
    Ok(QwsReport { lower, upper, lower_early, upper_early, blocks: top as u64, density, within })
}

/// One catalogue entry for listings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalogueEntry {
    pub name: String,
    pub rule: RuleSpec,
    pub description: String,
}

/// The catalogued families checked by the reference-values suite.
pub fn catalogue() -> Vec<CatalogueEntry> {
    let e = |rule: RuleSpec, d: &str| CatalogueEntry { name: rule.to_string(), rule, description: d.into() };
    vec![
        e(RuleSpec::Empty, "empty set"),
        e(RuleSpec::Naturals, "all positive integers"),
        e(RuleSpec::evens(), "even numbers"),
        e(RuleSpec::multiples(3), "multiples of 3"),
        e(RuleSpec::Squares, "perfect squares"),
        e(RuleSpec::Monomial { coef: r(2), exp: r(2) }, "n_k = 2k^2"),
        e(RuleSpec::Kexp, "n_k = ⌊k e^k⌋, lower density 1 against e^k with no linear bound"),
        e(RuleSpec::wide_blocks(r(2)), "blocks [n^4, n^4 + n]"),
        e(RuleSpec::thin_blocks(Rational::new(3, 2), r(2)), "blocks [⌊n^{3/2}⌋, ⌊n^{3/2}⌋ + 1]"),
        e(RuleSpec::SparseBlocks { q: r(2), eps: Rational::new(1, 2) }, "evenly spread members in sub-blocks of growing blocks"),
        e(RuleSpec::BoundedGap { max_gap: 5, seed: 0 }, "random gaps in [1, 5]"),
        e(RuleSpec::UnboundedGap { seed: 0 }, "random gaps with occasional long jumps"),
        e(RuleSpec::Finite { intervals: vec![Interval::new(1, 10)] }, "single block [1, 10]"),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_generations() {
        let s = generate(&RuleSpec::Squares, 100).unwrap();
        assert_eq!(s.members().collect::<Vec<_>>(), (1..=10).map(|k| k * k).collect::<Vec<_>>());
        let b = generate(&RuleSpec::wide_blocks(r(2)), 10_000).unwrap();
        assert_eq!(b.intervals().take(3).collect::<Vec<_>>(), vec![Interval::new(1, 2), Interval::new(16, 18), Interval::new(81, 84)]);
        let k = generate(&RuleSpec::Kexp, 1_000_000).unwrap();
        assert_eq!(k.members().take(5).collect::<Vec<_>>(), vec![2, 14, 60, 218, 742]);
        assert!(k.gap_profile(10).unwrap().looks_unbounded());
    }

    #[test]
    fn block_thresholds_are_least_valid() {
        assert_eq!(blocks_start(r(4), BlockLen::Linear).unwrap(), 1);
        let n2 = blocks_start(Rational::new(3, 2), BlockLen::Const(1)).unwrap();
        let m = power(Rational::new(3, 2));
        for n in n2..n2 + 2000 {
            assert!(m.floor(n).unwrap() + 1 < m.floor(n + 1).unwrap());
        }
        assert!(n2 == 1 || m.floor(n2 - 1).unwrap() + 1 >= m.floor(n2).unwrap());
        assert!(RuleSpec::Blocks { p: r(2), len: BlockLen::Linear, q: None }.validate().is_err());
    }

    #[test]
    fn sparse_schedule_satisfies_inequalities() {
        let (q, eps) = (r(2), Rational::new(1, 2));
        let sch = sparse_block_schedule(q, eps, 4).unwrap();
        assert!(sch.len() >= 2);
        for w in sch.windows(2) {
            let s = w[0].start;
            assert!(s + s * s < w[1].start);
        }
        for (k, blk) in sch.iter().enumerate() {
            let x = blk.start as f64;
            assert!(x >= (k + 1) as f64 * x.powf(0.25) + 2.0 * x.powf(1.0 / 6.0));
            assert!(blk.scale >= 2);
        }
        let set = generate(&RuleSpec::SparseBlocks { q, eps }, 2_000_000).unwrap();
        let blk = sch[1];
        let sub = blk.scale * blk.scale;
        for l in 0..50 {
            let lo = blk.start + l * sub;
            let c = set.count(lo, lo + sub).unwrap();
            let target = (blk.scale as f64).sqrt();
            assert!(c as f64 >= target && c as f64 <= target + 1.0, "sub-block {l}: {c}");
        }
    }

    #[test]
    fn rule_names_and_json_round_trip() {
        for e in catalogue() {
            let j = serde_json::to_string(&e.rule).unwrap();
            assert_eq!(serde_json::from_str::<RuleSpec>(&j).unwrap(), e.rule);
            if !matches!(e.rule, RuleSpec::Finite { .. } | RuleSpec::Periodic { .. }) {
                assert_eq!(e.rule.to_string().parse::<RuleSpec>().unwrap(), e.rule);
            }
        }
        assert!(matches!("nope".parse::<RuleSpec>(), Err(GenError::UnknownRule(_))));
    }

    #[test]
    fn monomial_floors() {
        assert_eq!(monomial_floor(r(2), r(2), 3), Some(18));
        assert_eq!(monomial_floor(Rational::new(3, 2), Rational::new(3, 2), 4), Some(12));
        let s = generate(&RuleSpec::Monomial { coef: Rational::new(3, 2), exp: r(1) }, 30).unwrap();
        assert_eq!(s.members().collect::<Vec<_>>(), (1..=20u64).map(|k| 3 * k / 2).collect::<Vec<_>>());
    }

    #[test]
    fn expectations_hold_for_catalogue_closed_forms() {
        let cfg = EvalConfig::default();
        for e in catalogue() {
            let rep = expected_check(&e.rule, 1 << 16, &cfg).unwrap();
            for c in &rep.checks {
                assert_ne!(c.consistency, Consistency::Inconsistent, "{}: {:?}", e.name, c);
            }
        }
    }

    #[test]
    fn qws_documented_cases() {
        let cfg = EvalConfig::default();
        let rep = qws_bounds(&BlockSource::Rule(RuleSpec::wide_blocks(r(2))), r(2), 1000, &cfg).unwrap();
        assert!((rep.lower - 0.5).abs() < 0.01 && (rep.upper - 0.5).abs() < 0.01, "{rep:?}");
        let rep = qws_bounds(&BlockSource::Rule(RuleSpec::thin_blocks(Rational::new(3, 2), r(2))), r(2), 10_000, &cfg).unwrap();
        assert!(rep.lower > 1.5 * rep.lower_early);
        assert_eq!(rep.within, Consistency::Consistent);
        let rep = qws_bounds(&BlockSource::Explicit(vec![Interval::new(1, 10)]), r(2), 10, &cfg).unwrap();
        assert_eq!(rep.within, Consistency::Consistent);
    }
}
