//! Weighted backward shifts and planted-orbit oracles on truncated sequence spaces:
//! orbits, hitting sets of balls, and classification against the density families.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::{closed_form_lower_q, evaluate, DensityError, DensityKind, DensityResult, EvalConfig, Side};
use crate::families::{is_member, FamilyLabel, FamilySpec};
use crate::intset::{IntegerSet, Interval, SetError};
use crate::value::{Rational, Tri};
use crate::weights::WeightSequence;

/// Orbit coordinates beyond this magnitude stop the orbit.
pub const OVERFLOW_LIMIT: f64 = 1e300;
/// Distances this close to the radius are neither inside nor outside.
pub const DEAD_ZONE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("vector has dimension {got}, space has {dim}")]
    Dimension { got: usize, dim: usize },
    #[error("shift weights must be positive and finite")]
    InvalidWeights,
    #[error("ball grid is empty")]
    EmptyGrid,
    #[error(transparent)]
    Set(#[from] SetError),
    #[error(transparent)]
    Density(#[from] DensityError),
}

/// Truncated sequence space of dimension `dim`, with the metric
/// `d(x, y) = Σ_n 2^{-n} p_n(x - y) / (1 + p_n(x - y))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SpaceModel {
    /// `p_n(z) = max_{j <= n} |z_j|`.
    FrechetOmega { dim: usize },
    /// Every `p_n` is the weighted norm `Σ w_j |z_j|`.
    BanachEll1 {
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
}

impl SpaceModel {
    pub fn dim(&self) -> usize {
        match self {
            SpaceModel::FrechetOmega { dim } | SpaceModel::BanachEll1 { dim, .. } => *dim,
        }
    }

    pub fn check(&self, x: &[f64]) -> Result<(), DynamicsError> {
        if x.len() != self.dim() {
            return Err(DynamicsError::Dimension { got: x.len(), dim: self.dim() });
        }
        Ok(())
    }

    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        let phi = |p: f64| if p.is_infinite() { 1.0 } else { p / (1.0 + p) };
        match self {
            SpaceModel::FrechetOmega { dim } => {
                let mut p = 0.0f64;
                let mut sum = 0.0;
                let mut scale = 1.0;
                for j in 0..*dim {
                    p = p.max((x[j] - y[j]).abs());
                    scale *= 0.5;
                    sum += scale * phi(p);
                }
                // p_n = p_dim for every n > dim; the geometric tail sums to 2^{-dim}.
                sum + scale * phi(p)
            }
            SpaceModel::BanachEll1 { dim, weights } => {
                let norm: f64 = (0..*dim)
                    .map(|j| weights.as_ref().map_or(1.0, |w| w[j]) * (x[j] - y[j]).abs())
                    .sum();
                phi(norm)
            }
        }
    }
}

/// Open ball `{y : d(y, center) < radius}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Centers supported on the first four coordinates with entries in `{0, ±1, ±1/2}`,
/// radii `{1/4, 1/16}`.
pub fn default_grid(dim: usize) -> Vec<Ball> {
    let vals = [0.0, 1.0, -1.0, 0.5, -0.5];
    let support = dim.min(4);
    let mut out = Vec::new();
    let total = 5usize.pow(support as u32);
    for code in 0..total {
        let mut c = vec![0.0; dim];
        let mut k = code;
        for slot in c.iter_mut().take(support) {
            *slot = vals[k % 5];
            k /= 5;
        }
        for r in [0.25, 0.0625] {
            out.push(Ball { center: c.clone(), radius: r });
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ShiftWeights {
    Constant { value: f64 },
    /// `w_1, w_2, ...`; the last entry repeats.
    List { values: Vec<f64> },
    /// Uniform in `[lo, hi]` from a seed.
    Seeded { lo: f64, hi: f64, seed: u64 },
}

impl ShiftWeights {
    fn materialize(&self, len: usize) -> Result<Vec<f64>, DynamicsError> {
        let v: Vec<f64> = match self {
            ShiftWeights::Constant { value } => vec![*value; len],
            ShiftWeights::List { values } => {
                let last = *values.last().ok_or(DynamicsError::InvalidWeights)?;
                (0..len).map(|i| values.get(i).copied().unwrap_or(last)).collect()
            }
            ShiftWeights::Seeded { lo, hi, seed } => {
                if !(lo <= hi) {
                    return Err(DynamicsError::InvalidWeights);
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..len).map(|_| rng.gen_range(*lo..=*hi)).collect()
            }
        };
        if v.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(DynamicsError::InvalidWeights);
        }
        Ok(v)
    }
}

/// An operator on the truncated space.
#[derive(Clone, Debug)]
pub enum OperatorSpec {
    /// `(T x)_j = w_{j+1} x_{j+1}`, coordinates past the dimension read as 0.
    WeightedShift { weights: ShiftWeights },
    /// `T^n x = target` for `n ∈ planted`, `far` otherwise.
    SyntheticOracle { planted: IntegerSet, target: Vec<f64>, far: Vec<f64> },
}

impl OperatorSpec {
    pub fn name(&self) -> String {
        match self {
            OperatorSpec::WeightedShift { weights } => format!("weighted-shift {}", serde_json::to_string(weights).unwrap_or_default()),
            OperatorSpec::SyntheticOracle { .. } => "synthetic-oracle".into(),
        }
    }
}

/// Orbit `T x, T^2 x, ..., T^N x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    pub vectors: Vec<Vec<f64>>,
    /// First `n` whose coordinates exceeded [`OVERFLOW_LIMIT`]; the orbit stops before it.
    pub overflow_at: Option<u64>,
    /// Largest coordinate magnitude seen.
    pub max_magnitude: f64,
}

/// `(T^n x)_j = (w_{j+1} ... w_{j+n}) x_{j+n}`, multiplied from the right.
pub fn shift_power(w: &[f64], x: &[f64], n: usize) -> Vec<f64> {
    let d = x.len();
    (0..d)
        .map(|j| {
            // 0-based: coordinate j+1 reads x_{j+1+n} through weights w_{j+2..=j+1+n}.
            if j + n >= d {
                return 0.0;
            }
            let mut acc = x[j + n];
            for i in (j + 1..=j + n).rev() {
                acc *= w[i];
            }
            acc
        })
        .collect()
}

/// One application of the shift.
pub fn shift_step(w: &[f64], x: &[f64]) -> Vec<f64> {
    let d = x.len();
    (0..d).map(|j| if j + 1 < d { w[j + 1] * x[j + 1] } else { 0.0 }).collect()
}

pub fn orbit(op: &OperatorSpec, x: &[f64], n: u64) -> Result<Orbit, DynamicsError> {
    let mut vectors = Vec::new();
    let mut max_magnitude = 0.0f64;
    let mut overflow_at = None;
    match op {
        OperatorSpec::WeightedShift { weights } => {
            let w = weights.materialize(x.len() + 1)?;
            let mut cur = x.to_vec();
            for k in 1..=n {
                cur = shift_step(&w, &cur);
                let mag = cur.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                if mag > OVERFLOW_LIMIT || !mag.is_finite() {
                    overflow_at = Some(k);
                    break;
                }
                max_magnitude = max_magnitude.max(mag);
                vectors.push(cur.clone());
            }
        }
        OperatorSpec::SyntheticOracle { planted, target, far } => {
            let s = planted.ensure_horizon(n, n.max(planted.horizon()))?;
            for k in 1..=n {
                let v = if s.contains(k) { target } else { far };
                max_magnitude = max_magnitude.max(v.iter().fold(0.0f64, |a, c| a.max(c.abs())));
                vectors.push(v.clone());
            }
        }
    }
    Ok(Orbit { vectors, overflow_at, max_magnitude })
}

/// Strict membership with the dead zone: `Some(inside)` or `None` when ambiguous.
fn inside(space: &SpaceModel, v: &[f64], ball: &Ball) -> Option<bool> {
    let d = space.distance(v, &ball.center);
    if (d - ball.radius).abs() < DEAD_ZONE {
        None
    } else {
        Some(d < ball.radius)
    }
}

/// `S(x, V) = {n : T^n x ∈ V}` on `[1, horizon]`, extended symbolically when the orbit is
/// eventually constant.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HittingSet {
    #[serde(serialize_with = "ser_set", deserialize_with = "de_set")]
    pub set: IntegerSet,
    pub ball: Ball,
    pub horizon: u64,
    /// Indices within the horizon excluded as boundary-ambiguous.
    pub ambiguous: u64,
    /// Whether every index past the horizon is ambiguous too.
    pub ambiguous_tail: bool,
    pub overflow_at: Option<u64>,
    /// `exact` when the set is known for every `n`, else `horizon`.
    pub extent: String,
}

fn ser_set<S: serde::Serializer>(set: &IntegerSet, s: S) -> Result<S::Ok, S::Error> {
    crate::setspec::SetSpec::from_set(set).serialize(s)
}

fn de_set<'de, D: serde::Deserializer<'de>>(d: D) -> Result<IntegerSet, D::Error> {
    let spec = crate::setspec::SetSpec::deserialize(d)?;
    spec.build(1).map_err(serde::de::Error::custom)
}

/// Tail `{n >= start}` or nothing, plus the explicit members below `start`.
fn eventually_constant(members: Vec<u64>, start: u64, tail_in: bool, horizon: u64) -> Result<IntegerSet, SetError> {
    let prefix: Vec<Interval> = members.into_iter().map(|m| Interval::new(m, m)).collect();
    if tail_in {
        IntegerSet::eventually_periodic(prefix, start, 1, vec![Interval::new(0, 0)], horizon)
    } else {
        IntegerSet::finite(prefix, horizon)
    }
}

pub fn hitting_set(
    op: &OperatorSpec,
    space: &SpaceModel,
    x: &[f64],
    ball: &Ball,
    horizon: u64,
) -> Result<HittingSet, DynamicsError> {
    space.check(x)?;
    space.check(&ball.center)?;
    let horizon = horizon.max(1);
    match op {
        OperatorSpec::WeightedShift { .. } => {
            let d = x.len() as u64;
            // T^n x = 0 for n >= dim.
            let steps = horizon.min(d.max(1));
            let orb = orbit(op, x, steps)?;
            let mut members = Vec::new();
            let mut ambiguous = 0;
            for (i, v) in orb.vectors.iter().enumerate() {
                match inside(space, v, ball) {
                    Some(true) => members.push(i as u64 + 1),
                    Some(false) => {}
                    None => ambiguous += 1,
                }
            }
            if let Some(k) = orb.overflow_at {
                let set = IntegerSet::from_members(members, k - 1)?;
                return Ok(HittingSet {
                    set,
                    ball: ball.clone(),
                    horizon: k - 1,
                    ambiguous,
                    ambiguous_tail: false,
                    overflow_at: Some(k),
                    extent: "horizon".into(),
                });
            }
            if horizon < d.max(1) {
                let set = IntegerSet::from_members(members, horizon)?;
                return Ok(HittingSet { set, ball: ball.clone(), horizon, ambiguous, ambiguous_tail: false, overflow_at: None, extent: "horizon".into() });
            }
            let zero = vec![0.0; x.len()];
            let tail = inside(space, &zero, ball);
            // Orbit index d (if d >= 1) is already the zero vector; the tail starts there.
            let start = d.max(1);
            members.retain(|&m| m < start);
            let set = eventually_constant(members, start, tail == Some(true), horizon)?;
            let ambiguous_tail = tail.is_none();
            let ambiguous = if ambiguous_tail { ambiguous + horizon.saturating_sub(start - 1).saturating_sub(1) } else { ambiguous };
            Ok(HittingSet { set, ball: ball.clone(), horizon, ambiguous, ambiguous_tail, overflow_at: None, extent: "exact".into() })
        }
        OperatorSpec::SyntheticOracle { planted, target, far } => {
            space.check(target)?;
            space.check(far)?;
            let t = inside(space, target, ball);
            let f = inside(space, far, ball);
            let a = planted.ensure_horizon(horizon, horizon.max(planted.horizon()))?;
            let set = match (t == Some(true), f == Some(true)) {
                (true, true) => IntegerSet::naturals(horizon),
                (true, false) => a.clone(),
                (false, true) => a.complement()?,
                (false, false) => IntegerSet::empty(horizon),
            };
            let in_a = a.count(1, horizon)?;
            let ambiguous = if t.is_none() { in_a } else { 0 } + if f.is_none() { horizon - in_a } else { 0 };
            Ok(HittingSet {
                set,
                ball: ball.clone(),
                horizon,
                ambiguous,
                ambiguous_tail: t.is_none() || f.is_none(),
                overflow_at: None,
                extent: "exact".into(),
            })
        }
    }
}

/// Re-derives membership from the orbit on `[1, limit]` and compares with the stored set.
pub fn recheck(op: &OperatorSpec, space: &SpaceModel, x: &[f64], hs: &HittingSet, limit: u64) -> Result<bool, DynamicsError> {
    let n = limit.min(hs.horizon);
    let orb = orbit(op, x, n)?;
    Ok(orb.vectors.iter().enumerate().all(|(i, v)| {
        let k = i as u64 + 1;
        match inside(space, v, &hs.ball) {
            Some(b) => b == hs.set.contains(k),
            None => !hs.set.contains(k),
        }
    }))
}

/// Smallest `L` with `n_k <= L m_k`, where `n_k` is the k-th member.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub l: Option<f64>,
    /// Number of indices `k` checked.
    pub coverage: u64,
    /// `max_{k <= K} n_k / m_k` at `K/4`, `K/2` and `K`.
    pub required: [f64; 3],
    /// The required constant grows by at least half at each doubling of `K`.
    pub diverging: bool,
    /// Sequence-form positivity of the lower q-density when the weight is a power.
    pub lower_q_positive: Option<Tri>,
}

/// Default grid of constants `L`: `{1, 1.5, 2, 3, 5, 7.5} × 10^j` up to `10^6`.
pub fn default_l_grid() -> Vec<f64> {
    let mut v = Vec::new();
    for j in 0..=6 {
        for c in [1.0, 1.5, 2.0, 3.0, 5.0, 7.5] {
            let x = c * 10f64.powi(j);
            if x <= 1e6 {
                v.push(x);
            }
        }
    }
    v
}

/// Witness from an explicit increasing sequence `n_1 < n_2 < ...`.
pub fn mn_witness_seq(n: &[u64], m: &WeightSequence, grid: &[f64]) -> WitnessReport {
    let mut req = Vec::with_capacity(n.len());
    let mut run = 0.0f64;
    for (i, &nk) in n.iter().enumerate() {
        let Ok(mk) = m.eval(i as u64 + 1) else { break };
        run = run.max(nk as f64 / mk);
        req.push(run);
    }
    let k = req.len();
    let at = |j: usize| if j == 0 { 0.0 } else { req[j - 1] };
    let required = [at(k / 4), at(k / 2), at(k)];
    let diverging = k >= 8 && required[1] >= 1.5 * required[0] && required[2] >= 1.5 * required[1];
    let l = if k == 0 || diverging {
        None
    } else {
        let need = required[2];
        grid.iter().copied().filter(|&g| g >= need * (1.0 - 1e-12)).reduce(f64::min)
    };
    let lower_q_positive = m.power_exponent().filter(|_| k >= 4).map(|q| {
        let v: Vec<f64> = n[..k].iter().map(|&x| x as f64).collect();
        closed_form_lower_q(|i| v[(i as usize - 1).min(k - 1)], q, k as u64).positive
    });
    WitnessReport { l, coverage: k as u64, required, diverging, lower_q_positive }
}

/// First `count` members of `s`, extending its horizon up to `cap`.
pub fn first_members(s: &IntegerSet, count: usize, cap: u64) -> Result<Vec<u64>, SetError> {
    let mut set = s.clone();
    loop {
        if set.len() as usize >= count || set.horizon() >= cap || set.rule().is_none() {
            return Ok(set.members().take(count).collect());
        }
        let next = set.horizon().saturating_mul(2).min(cap);
        set = set.ensure_horizon(next, cap)?;
    }
}

pub fn mn_witness(s: &IntegerSet, m: &WeightSequence, grid: &[f64], count: usize, cap: u64) -> Result<WitnessReport, SetError> {
    Ok(mn_witness_seq(&first_members(s, count, cap)?, m, grid))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyVerdict {
    pub family: FamilyLabel,
    pub verdict: Tri,
    /// Grid index deciding the verdict: the first `no`, else the first `undetermined`,
    /// else the smallest lower bound.
    pub weakest_ball: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallReport {
    pub index: usize,
    pub ball: Ball,
    pub hitting_set: SetSummary,
    pub verdicts: Vec<(FamilyLabel, Tri)>,
    pub witness: WitnessReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetSummary {
    pub spec: crate::setspec::SetSpec,
    pub members_within_horizon: u64,
    pub ambiguous: u64,
    pub extent: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub operator: String,
    pub grid_size: usize,
    pub horizon: u64,
    pub families: Vec<FamilyVerdict>,
    pub balls: Vec<BallReport>,
    /// Largest per-ball witness constant, `None` if some ball has none.
    pub witness_sup: Option<f64>,
}

/// Evaluates every family on every ball's hitting set. Verdicts hold on the grid only.
#[allow(clippy::too_many_arguments)]
pub fn classify(
    op: &OperatorSpec,
    space: &SpaceModel,
    x: &[f64],
    grid: &[Ball],
    m: &WeightSequence,
    q: Rational,
    horizon: u64,
    cfg: &EvalConfig,
) -> Result<ClassificationReport, DynamicsError> {
    if grid.is_empty() {
        return Err(DynamicsError::EmptyGrid);
    }
    let families = FamilySpec::taxonomy(q, m);
    let per_ball: Vec<Result<(BallReport, Vec<DensityResult>), DynamicsError>> = grid
        .par_iter()
        .enumerate()
        .map(|(i, ball)| {
            let hs = hitting_set(op, space, x, ball, horizon)?;
            let mut verdicts = Vec::with_capacity(families.len());
            let mut results = Vec::with_capacity(families.len());
            for f in &families {
                let mem = is_member(f, &hs.set, cfg)?;
                verdicts.push((f.label, mem.verdict));
                results.push(mem.result);
            }
            let witness = mn_witness(&hs.set, m, &default_l_grid(), 100_000, horizon.max(hs.set.horizon()))?;
            let summary = SetSummary {
                spec: crate::setspec::SetSpec::from_set(&hs.set),
                members_within_horizon: hs.set.count(1, hs.horizon)?,
                ambiguous: hs.ambiguous,
                extent: hs.extent.clone(),
            };
            Ok((BallReport { index: i, ball: ball.clone(), hitting_set: summary, verdicts, witness }, results))
        })
        .collect();
    let mut balls = Vec::with_capacity(grid.len());
    let mut results = Vec::with_capacity(grid.len());
    for r in per_ball {
        let (b, res) = r?;
        balls.push(b);
        results.push(res);
    }
    let fams = families
        .iter()
        .enumerate()
        .map(|(fi, f)| {
            let vs: Vec<Tri> = balls.iter().map(|b| b.verdicts[fi].1).collect();
            let (verdict, weakest) = if let Some(i) = vs.iter().position(|v| *v == Tri::No) {
                (Tri::No, i)
            } else if let Some(i) = vs.iter().position(|v| *v == Tri::Undetermined) {
                (Tri::Undetermined, i)
            } else {
                let i = (0..results.len())
                    .min_by(|&a, &b| {
                        results[a][fi].lower_bound.partial_cmp(&results[b][fi].lower_bound).unwrap_or(std::cmp::Ordering::Equal)
                    })
                    .unwrap_or(0);
                (Tri::Yes, i)
            };
            FamilyVerdict { family: f.label, verdict, weakest_ball: weakest }
        })
        .collect();
    let witness_sup = balls.iter().try_fold(0.0f64, |acc, b| b.witness.l.map(|l| acc.max(l)));
    Ok(ClassificationReport {
        operator: op.name(),
        grid_size: grid.len(),
        horizon,
        families: fams,
        balls,
        witness_sup,
    })
}

/// Lower (m_n)-density of a hitting set, as reported alongside witnesses.
pub fn lower_mn_density(s: &IntegerSet, m: &WeightSequence, cfg: &EvalConfig) -> Result<DensityResult, DensityError> {
    evaluate(s, &DensityKind::simple(Side::Lower, m.clone()), cfg)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub samples: u64,
    pub symmetry_failures: u64,
    pub identity_failures: u64,
    pub subadditivity_failures: u64,
    pub scaling_failures: u64,
}

impl MetricReport {
    pub fn ok(&self) -> bool {
        self.symmetry_failures + self.identity_failures + self.subadditivity_failures + self.scaling_failures == 0
    }
}

fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            let scale = 10f64.powi(rng.gen_range(-3..=3));
            rng.gen_range(-1.0..=1.0) * scale
        })
        .collect()
}

/// Samples `d(x+u, y+v) <= d(x,y) + d(u,v)` and `d(cx, cy) <= (|c|+1) d(x,y)`.
pub fn metric_property_samples(space: &SpaceModel, samples: u64, seed: u64) -> MetricReport {
    let dim = space.dim();
    let slack = |v: f64| v * 1e-12 + 1e-15;
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ i.wrapping_mul(0x2545_F491_4F6C_DD1D));
            let (x, y, u, v) = (random_vector(&mut rng, dim), random_vector(&mut rng, dim), random_vector(&mut rng, dim), random_vector(&mut rng, dim));
            let c = rng.gen_range(-10.0..=10.0);
            let mut r = MetricReport { samples: 1, ..Default::default() };
            let dxy = space.distance(&x, &y);
            if dxy != space.distance(&y, &x) {
                r.symmetry_failures += 1;
            }
            if space.distance(&x, &x) != 0.0 || (x != y && dxy == 0.0) {
                r.identity_failures += 1;
            }
            let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p + q).collect::<Vec<_>>();
            let lhs = space.distance(&add(&x, &u), &add(&y, &v));
            let rhs = dxy + space.distance(&u, &v);
            if lhs > rhs + slack(rhs) {
                r.subadditivity_failures += 1;
            }
            let cx: Vec<f64> = x.iter().map(|a| c * a).collect();
            let cy: Vec<f64> = y.iter().map(|a| c * a).collect();
            let bound = (c.abs() + 1.0) * dxy;
            if space.distance(&cx, &cy) > bound + slack(bound) {
                r.scaling_failures += 1;
            }
            r
        })
        .reduce(MetricReport::default, |a, b| MetricReport {
            samples: a.samples + b.samples,
            symmetry_failures: a.symmetry_failures + b.symmetry_failures,
            identity_failures: a.identity_failures + b.identity_failures,
            subadditivity_failures: a.subadditivity_failures + b.subadditivity_failures,
            scaling_failures: a.scaling_failures + b.scaling_failures,
        })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftFormulaReport {
    pub cases: u64,
    pub mismatches: u64,
}

/// Compares the closed-form shift power with repeated single steps for `n <= max_n`.
pub fn shift_formula_check(cases: u64, max_n: usize, max_dim: usize, seed: u64) -> ShiftFormulaReport {
    let mismatches = (0..cases)
        .into_par_iter()
        .filter(|&i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i));
            let d = rng.gen_range(1..=max_dim);
            let w = ShiftWeights::Seeded { lo: 0.5, hi: 2.0, seed: rng.gen() }.materialize(d + 1).expect("positive weights");
            let x = random_vector(&mut rng, d);
            let mut cur = x.clone();
            (1..=max_n).any(|n| {
                cur = shift_step(&w, &cur);
                shift_power(&w, &x, n) != cur
            })
        })
        .count() as u64;
    ShiftFormulaReport { cases, mismatches }
}

/// Synthetic oracle whose orbit visits `target` exactly on `planted`.
pub fn planted_oracle(planted: IntegerSet, dim: usize) -> (OperatorSpec, Vec<f64>) {
    let mut target = vec![0.0; dim];
    target[0] = 1.0;
    let far = vec![0.0; dim];
    (OperatorSpec::SyntheticOracle { planted, target, far }, vec![0.0; dim])
}

/// Balls around `target` that exclude `far`.
pub fn separating_grid(space: &SpaceModel, target: &[f64], far: &[f64], count: usize) -> Vec<Ball> {
    let sep = space.distance(target, far);
    (0..count.max(1))
        .map(|i| {
            let mut c = target.to_vec();
            let jitter = sep * 0.05 * (i as f64) / (count.max(1) as f64);
            if let Some(last) = c.last_mut() {
                *last += jitter;
            }
            Ball { center: c, radius: sep * (0.3 + 0.2 * (i % 3) as f64 / 3.0) }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples_gen::{generate, RuleSpec};

    fn unit(dim: usize, k: usize) -> Vec<f64> {
        let mut v = vec![0.0; dim];
        v[k - 1] = 1.0;
        v
    }

    #[test]
    fn documented_orbits() {
        let op = OperatorSpec::WeightedShift { weights: ShiftWeights::Constant { value: 2.0 } };
        let o = orbit(&op, &unit(8, 5), 5).unwrap();
        assert_eq!(o.vectors[1], { let mut v = vec![0.0; 8]; v[2] = 4.0; v });
        assert!(o.vectors[4].iter().all(|&c| c == 0.0));
        let id = OperatorSpec::WeightedShift { weights: ShiftWeights::Constant { value: 1.0 } };
        let x: Vec<f64> = (1..=6).map(|i| i as f64).collect();
        assert_eq!(orbit(&id, &x, 2).unwrap().vectors[1], vec![3.0, 4.0, 5.0, 6.0, 0.0, 0.0]);
        let (oracle, x0) = planted_oracle(generate(&RuleSpec::evens(), 100).unwrap(), 3);
        let o = orbit(&oracle, &x0, 4).unwrap();
        assert_eq!(o.vectors[0], vec![0.0; 3]);
        assert_eq!(o.vectors[1], vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn documented_hitting_sets() {
        let space = SpaceModel::FrechetOmega { dim: 8 };
        let op = OperatorSpec::WeightedShift { weights: ShiftWeights::Constant { value: 2.0 } };
        let hs = hitting_set(&op, &space, &unit(8, 5), &Ball { center: vec![0.0; 8], radius: 0.01 }, 1000).unwrap();
        assert!((5..=1000).all(|n| hs.set.contains(n)));
        assert_eq!(hs.extent, "exact");
        assert!(recheck(&op, &space, &unit(8, 5), &hs, 100).unwrap());

        let (oracle, x0) = planted_oracle(generate(&RuleSpec::evens(), 100).unwrap(), 8);
        let OperatorSpec::SyntheticOracle { target, far, .. } = &oracle else { unreachable!() };
        let ball = Ball { center: target.clone(), radius: 0.5 * space.distance(target, far) };
        let hs = hitting_set(&oracle, &space, &x0, &ball, 1000).unwrap();
        assert_eq!(hs.set.members().collect::<Vec<_>>(), (1..=500).map(|k| 2 * k).collect::<Vec<_>>());
        assert!(recheck(&oracle, &space, &x0, &hs, 1000).unwrap());

        let mut c = vec![0.0; 8];
        c[0] = 1.0;
        let hs = hitting_set(&op, &space, &vec![0.0; 8], &Ball { center: c, radius: 0.01 }, 1000).unwrap();
        assert!(hs.set.is_empty());
    }

    #[test]
    fn frechet_tail_is_exact() {
        // Constant difference 1 in every coordinate: d = Σ_n 2^{-n} / 2 = 1/2.
        let space = SpaceModel::FrechetOmega { dim: 10 };
        let d = space.distance(&vec![1.0; 10], &vec![0.0; 10]);
        assert!((d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn classify_documented_oracles() {
        let space = SpaceModel::FrechetOmega { dim: 4 };
        let cfg = EvalConfig::default().with_horizons(4096, 64);
        let q = Rational::from_integer(2);
        let m = WeightSequence::power(q).unwrap();
        let get = |r: &ClassificationReport, f: FamilyLabel| r.families.iter().find(|v| v.family == f).unwrap().verdict;
        for (rule, freq, qfreq) in [(RuleSpec::evens(), Tri::Yes, Tri::Yes), (RuleSpec::Squares, Tri::No, Tri::Yes)] {
            let (op, x) = planted_oracle(generate(&rule, 1 << 12).unwrap(), 4);
            let OperatorSpec::SyntheticOracle { target, far, .. } = &op else { unreachable!() };
            let grid = separating_grid(&space, target, far, 3);
            let rep = classify(&op, &space, &x, &grid, &m, q, 1 << 12, &cfg).unwrap();
            assert_eq!(get(&rep, FamilyLabel::Frequently), freq, "{rule}");
            assert_eq!(get(&rep, FamilyLabel::QFrequently), qfreq, "{rule}");
        }
        let op = OperatorSpec::WeightedShift { weights: ShiftWeights::Constant { value: 2.0 } };
        let grid: Vec<Ball> = default_grid(4).into_iter().filter(|b| b.center.iter().any(|&c| c != 0.0)).take(20).collect();
        let rep = classify(&op, &space, &vec![0.0; 4], &grid, &m, q, 1000, &cfg).unwrap();
        assert!(rep.families.iter().all(|f| f.verdict == Tri::No));
    }

    #[test]
    fn documented_witnesses() {
        let id = WeightSequence::identity();
        let evens: Vec<u64> = (1..=1000).map(|k| 2 * k).collect();
        assert_eq!(mn_witness_seq(&evens, &id, &default_l_grid()).l, Some(2.0));
        let sq2: Vec<u64> = (1..=1000).map(|k| 2 * k * k).collect();
        let p2 = WeightSequence::power(Rational::from_integer(2)).unwrap();
        let r = mn_witness_seq(&sq2, &p2, &default_l_grid());
        assert_eq!(r.l, Some(2.0));
        assert_eq!(r.lower_q_positive, Some(Tri::Yes));
        let kexp = generate(&RuleSpec::Kexp, u64::MAX / 2).unwrap();
        let r = mn_witness(&kexp, &"expo:e".parse().unwrap(), &default_l_grid(), 1000, u64::MAX / 2).unwrap();
        assert_eq!(r.l, None);
        assert!(r.diverging);
    }

    #[test]
    fn metric_and_shift_formula() {
        for space in [SpaceModel::FrechetOmega { dim: 12 }, SpaceModel::BanachEll1 { dim: 12, weights: None }] {
            let r = metric_property_samples(&space, 1000, 3);
            assert!(r.ok(), "{r:?}");
        }
        assert_eq!(shift_formula_check(200, 30, 100, 1).mismatches, 0);
    }
}
