use std::collections::BTreeSet;

use densitylab::density::{density_chain_check, evaluate, DensityKind, EvalConfig, Side};
use densitylab::intset::{canonicalize, Interval};
use densitylab::setspec::SetSpec;
use densitylab::{ExtValue, IntegerSet, Rational, SetOp, WeightSequence};
use proptest::prelude::*;

const H: u64 = 400;

fn members() -> impl Strategy<Value = BTreeSet<u64>> {
    prop::collection::btree_set(1..=H, 0..200)
}

fn set_of(m: &BTreeSet<u64>) -> IntegerSet {
    IntegerSet::from_members(m.iter().copied(), H).unwrap()
}

fn periodic() -> impl Strategy<Value = (u64, u64, Vec<u64>)> {
    (1u64..50, 1u64..12).prop_flat_map(|(start, period)| {
        (Just(start), Just(period), prop::collection::vec(0..period, 0..period as usize))
    })
}

fn periodic_set((start, period, offs): &(u64, u64, Vec<u64>), h: u64) -> IntegerSet {
    let pattern = canonicalize(offs.iter().map(|&o| Interval::new(o, o)).collect());
    IntegerSet::eventually_periodic(vec![], *start, *period, pattern, h).unwrap()
}

fn weight() -> impl Strategy<Value = WeightSequence> {
    prop_oneof![
        (2u64..8, 1u64..4).prop_filter_map("q >= 1", |(n, d)| WeightSequence::power(Rational::new(n, d)).ok()),
        (1u64..9, 1u64..4).prop_filter_map("slope >= 1", |(n, d)| WeightSequence::linear(Rational::new(n, d), Default::default()).ok()),
        (1u64..3, 3u64..6).prop_map(|(l, h)| WeightSequence::oscillating(Rational::from_integer(l), Rational::from_integer(h)).unwrap()),
        Just(WeightSequence::identity()),
        Just("expo:e".parse().unwrap()),
        Just("expo:3/2".parse().unwrap()),
    ]
}

fn apply(op: SetOp, a: bool, b: bool) -> bool {
    match op {
        SetOp::Union => a || b,
        SetOp::Intersection => a && b,
        SetOp::Difference => a && !b,
        SetOp::SymmetricDifference => a != b,
        SetOp::Complement => !a,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn canonical_intervals_are_sorted_and_separated(m in members()) {
        let s = set_of(&m);
        let ivs: Vec<Interval> = s.intervals().collect();
        for w in ivs.windows(2) {
            prop_assert!(w[0].hi + 1 < w[1].lo);
        }
        prop_assert!(ivs.iter().all(|iv| iv.lo <= iv.hi));
        prop_assert_eq!(s.members().collect::<BTreeSet<_>>(), m);
    }

    #[test]
    fn window_counts_match_members(m in members(), a in 1..=H, b in 1..=H) {
        let (lo, hi) = (a.min(b), a.max(b));
        let s = set_of(&m);
        prop_assert_eq!(s.count(lo, hi).unwrap(), m.range(lo..=hi).count() as u64);
        prop_assert_eq!(s.count(lo, hi).unwrap() + s.complement().unwrap().count(lo, hi).unwrap(), hi - lo + 1);
    }

    #[test]
    fn boolean_ops_match_sets(x in members(), y in members()) {
        let (a, b) = (set_of(&x), set_of(&y));
        let cases = [
            (SetOp::Union, x.union(&y).copied().collect::<BTreeSet<_>>()),
            (SetOp::Intersection, x.intersection(&y).copied().collect()),
            (SetOp::Difference, x.difference(&y).copied().collect()),
            (SetOp::SymmetricDifference, x.symmetric_difference(&y).copied().collect()),
        ];
        for (op, want) in cases {
            prop_assert_eq!(a.boolean(&b, op).unwrap().members().collect::<BTreeSet<_>>(), want);
        }
    }

    #[test]
    fn translate_and_dilate_move_members(m in members(), k in -60i64..60, d in 1u64..5) {
        let s = set_of(&m);
        let t = s.translate(k).unwrap();
        let want: BTreeSet<u64> = m.iter().filter_map(|&x| x.checked_add_signed(k)).filter(|&x| x >= 1).collect();
        prop_assert_eq!(t.members().collect::<BTreeSet<_>>(), want);
        let dl = s.dilate(d, u64::MAX).unwrap();
        prop_assert_eq!(dl.members().collect::<BTreeSet<_>>(), m.iter().map(|&x| x * d).collect::<BTreeSet<_>>());
    }

    #[test]
    fn periodic_tails_count_like_their_pattern(p in periodic(), a in 1u64..5000, len in 0u64..5000) {
        let s = periodic_set(&p, 20_000);
        let (start, period, _) = &p;
        let member = |x: u64| x >= *start && s.contains(start + (x - start) % period);
        let hi = a + len;
        let direct = (a..=hi).filter(|&x| member(x)).count() as u64;
        prop_assert_eq!(s.count(a, hi).unwrap(), direct);
        let c = s.complement().unwrap();
        prop_assert_eq!(c.count(a, hi).unwrap(), hi - a + 1 - direct);
    }

    #[test]
    fn periodic_booleans_agree_with_materialized(p in periodic(), q in periodic(), lo in 1u64..3000) {
        let (a, b) = (periodic_set(&p, 6000), periodic_set(&q, 6000));
        let hi = lo + 2000;
        for op in [SetOp::Union, SetOp::Intersection, SetOp::Difference, SetOp::SymmetricDifference] {
            let sym = a.boolean(&b, op).unwrap();
            let direct = (lo..=hi).filter(|&x| apply(op, a.contains(x), b.contains(x))).count() as u64;
            prop_assert_eq!(sym.count(lo, hi).unwrap(), direct);
        }
    }

    #[test]
    fn rounding_brackets_the_weight(w in weight(), n in 1u64..5000) {
        if let (Ok(f), Ok(c), Ok(v)) = (w.floor(n), w.ceil(n), w.eval(n)) {
            prop_assert!(f <= c && c <= f + 1);
            prop_assert!(f as f64 <= v * (1.0 + 1e-12) && v <= c as f64 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn weights_are_nondecreasing_and_round_trip(w in weight(), n in 1u64..5000) {
        if let (Ok(a), Ok(b)) = (w.floor(n), w.floor(n + 1)) {
            prop_assert!(a <= b);
        }
        let again: WeightSequence = w.to_string().parse().unwrap();
        prop_assert_eq!(again.floor(n).ok(), w.floor(n).ok());
    }

    #[test]
    fn ext_values_round_trip(num in 0u64..10_000, den in 1u64..10_000) {
        let v = ExtValue::ratio(num, den);
        let s = serde_json::to_string(&v).unwrap();
        prop_assert_eq!(serde_json::from_str::<ExtValue>(&s).unwrap(), v);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn density_chain_holds(p in periodic(), extra in prop::collection::btree_set(1u64..2000, 0..50)) {
        let base = periodic_set(&p, 1 << 14);
        let bumps = IntegerSet::from_members(extra.iter().copied(), 1 << 14).unwrap();
        let a = base.boolean(&bumps, SetOp::SymmetricDifference).unwrap();
        let cfg = EvalConfig::default().with_horizons(4096, 64);
        let rep = density_chain_check(&a, Rational::from_integer(2), &cfg).unwrap();
        prop_assert!(rep.ok, "{:?}", rep.violations);
    }

    #[test]
    fn periodic_chain_is_exact(p in periodic()) {
        let a = periodic_set(&p, 1 << 14);
        let rep = density_chain_check(&a, Rational::from_integer(2), &EvalConfig::default()).unwrap();
        prop_assert!(rep.values.iter().all(|v| v.exact));
        prop_assert!(rep.ok, "{:?}", rep.violations);
        let (_, period, offs) = &p;
        let want = Rational::new(offs.iter().collect::<BTreeSet<_>>().len() as u64, *period);
        prop_assert!(rep.values[..4].iter().all(|v| v.value == ExtValue::Rational(want)));
    }

    #[test]
    fn brackets_are_ordered_and_lower_below_upper(m in members(), w in weight()) {
        let a = set_of(&m);
        let cfg = EvalConfig::default().estimate_only().with_horizons(200, 16);
        let lo = evaluate(&a, &DensityKind::simple(Side::Lower, w.clone()), &cfg);
        let hi = evaluate(&a, &DensityKind::simple(Side::Upper, w), &cfg);
        if let (Ok(lo), Ok(hi)) = (lo, hi) {
            prop_assert!(lo.lower_bound <= lo.upper_bound);
            prop_assert!(hi.lower_bound <= hi.upper_bound);
            if lo.horizons == hi.horizons {
                prop_assert!(lo.value <= hi.value);
            }
        }
    }

    #[test]
    fn set_specs_round_trip(m in members()) {
        let a = set_of(&m);
        let spec = SetSpec::from_set(&a);
        let text = serde_json::to_string(&spec).unwrap();
        let back: SetSpec = serde_json::from_str(&text).unwrap();
        let b = back.build(H).unwrap();
        prop_assert_eq!(b.members().collect::<BTreeSet<_>>(), m);
    }
}
