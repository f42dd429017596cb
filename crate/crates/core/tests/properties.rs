mod common;

use std::collections::BTreeSet;

use famsynth::baselines::{one_by_one, BaselineConfig};
use famsynth::engine::{solve, CheckResult, Mdp, SolverConfig};
use famsynth::exact::{exact_value, ExactValue};
use famsynth::format::{parse_document, serialize_document};
use famsynth::generator::{random_document, random_family, Bounds, GOAL_LABEL};
use famsynth::quotient::{build_quotient, RestrictedQuotient};
use famsynth::synthesis::{optimum_synthesis, threshold_synthesis, QueueOrder, RefinementConfig, Strategy as SplitStrategy};
use famsynth::{Direction, FamilyModel, Measure, Realisation, SolveError, Subfamily};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use proptest::prelude::*;

use common::spec_named;

const TOL: f64 = 1e-6;

fn bounds() -> impl Strategy<Value = Bounds> {
    (2usize..=8, 1usize..=3, 1usize..=3).prop_map(|(s, p, d)| Bounds::new(s, p, d))
}

/// A random non-empty subset of every domain, chosen by bit masks.
fn subfamily(family: &FamilyModel, masks: &[u8]) -> Subfamily {
    let subsets = family
        .params()
        .iter()
        .zip(masks.iter().cycle())
        .map(|(p, &mask)| {
            let picked: Vec<usize> =
                p.domain.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, &v)| v).collect();
            if picked.is_empty() { vec![p.domain[0]] } else { picked }
        })
        .collect();
    Subfamily::new(family, subsets).expect("subsets of the domains")
}

fn member_set(sub: &Subfamily) -> BTreeSet<Vec<usize>> {
    sub.members().map(|r| r.values).collect()
}

fn exact(family: &FamilyModel, r: &Realisation, measure: Measure, goal: &[bool]) -> Option<f64> {
    match exact_value(&family.instantiate(r).unwrap(), measure, goal).unwrap() {
        ExactValue::Finite(v) => Some(v.to_f64().unwrap()),
        ExactValue::Undefined => None,
    }
}

fn extremes(view: &RestrictedQuotient<'_, '_>, goal: &[bool], measure: Measure) -> (Option<f64>, f64) {
    let config = SolverConfig::default();
    let max: CheckResult = solve(view, goal, measure, Direction::Max, &config).unwrap();
    let min = match solve(view, goal, measure, Direction::Min, &config) {
        Ok(r) => Some(r.value_at_initial()),
        Err(SolveError::UndefinedReward { .. }) => None,
        Err(e) => panic!("{e}"),
    };
    (min, max.value_at_initial())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_partitions_members(seed in any::<u64>(), b in bounds(), masks in prop::collection::vec(any::<u8>(), 4), cut in any::<u8>()) {
        let family = random_family(seed, b);
        let sub = subfamily(&family, &masks);
        if let Some(k) = (0..family.params().len()).find(|&k| sub.subset(k).len() > 1) {
            let subset = sub.subset(k);
            let mut keep: Vec<usize> = subset.iter().enumerate().filter(|(i, _)| cut & (1 << i) != 0).map(|(_, &v)| v).collect();
            if keep.is_empty() || keep.len() == subset.len() {
                keep = subset[..1].to_vec();
            }
            let (top, bottom) = sub.split(k, &keep).unwrap();
            let (a, b) = (member_set(&top), member_set(&bottom));
            prop_assert!(a.is_disjoint(&b));
            prop_assert_eq!(top.size() + bottom.size(), sub.size());
            prop_assert_eq!(a.union(&b).cloned().collect::<BTreeSet<_>>(), member_set(&sub));
            prop_assert!(sub.split(k, subset).is_err());
        }
    }

    #[test]
    fn documents_round_trip(seed in any::<u64>(), b in bounds()) {
        let doc = random_document(seed, b);
        let text = serialize_document(&doc);
        let back = parse_document(&text).unwrap();
        prop_assert_eq!(&back, &doc);
        prop_assert_eq!(serialize_document(&back), text);
    }

    #[test]
    fn enumeration_is_exhaustive(seed in any::<u64>(), b in bounds()) {
        let family = random_family(seed, b);
        let all: Vec<Realisation> = family.all_realisations().collect();
        let product: u128 = family.params().iter().map(|p| p.domain.len() as u128).product();
        prop_assert_eq!(all.len() as u128, product);
        prop_assert!(all.windows(2).all(|w| w[0].values < w[1].values));
        let full = family.full_subfamily();
        for r in &all {
            prop_assert!(full.contains(r));
            let single = Subfamily::from_realisation(r);
            prop_assert_eq!(single.to_realisation(), Some(r.clone()));
        }
    }

    #[test]
    fn instantiated_rows_are_distributions(seed in any::<u64>(), b in bounds()) {
        let family = random_family(seed, b);
        for r in family.all_realisations() {
            let mc = family.instantiate(&r).unwrap();
            for s in mc.reachable_states() {
                let sum: BigRational = mc.row(s).iter().map(|(_, p)| p.clone()).sum();
                prop_assert!(sum.is_one());
                prop_assert!(mc.row(s).iter().all(|(_, p)| *p > BigRational::zero()));
            }
        }
    }

    /// Every member's distribution is some merged action whose signature
    /// it matches, and no action exceeds the product of its domains.
    #[test]
    fn merged_actions_are_sound(seed in any::<u64>(), b in bounds()) {
        let family = random_family(seed, b);
        let quotient = build_quotient(&family);
        for s in 0..family.num_states() {
            let support = quotient.support(s);
            let bound: usize = support.iter().map(|&k| family.params()[k].domain.len()).product();
            prop_assert!(quotient.actions(s).len() <= bound);
            for r in family.all_realisations() {
                let row = family.instantiate(&r).unwrap().row(s).to_vec();
                let sig: Vec<usize> = support.iter().map(|&k| r.get(k)).collect();
                let owners: Vec<_> = quotient.actions(s).iter().filter(|a| a.signatures.contains(&sig)).collect();
                prop_assert_eq!(owners.len(), 1);
                prop_assert_eq!(&owners[0].distribution, &row);
            }
        }
    }

    /// Every member's value lies between the restricted quotient's extremes.
    #[test]
    fn restricted_bounds_sandwich_members(seed in any::<u64>(), b in bounds(), masks in prop::collection::vec(any::<u8>(), 4)) {
        let family = random_family(seed, b);
        let goal = family.goal_mask(GOAL_LABEL).unwrap();
        let quotient = build_quotient(&family);
        let sub = subfamily(&family, &masks);
        let view = quotient.restrict(&sub);
        for measure in [Measure::Probability, Measure::Reward] {
            let (min, max) = extremes(&view, &goal, measure);
            for r in sub.members() {
                match exact(&family, &r, measure, &goal) {
                    Some(v) => {
                        prop_assert!(min.is_some_and(|lo| lo <= v + TOL * v.abs().max(1.0)));
                        prop_assert!(v <= max + TOL * v.abs().max(1.0));
                    }
                    None => prop_assert!(max.is_infinite()),
                }
            }
        }
    }

    /// Shrinking the subfamily can only tighten the extremes.
    #[test]
    fn extremes_are_monotone(seed in any::<u64>(), b in bounds(), masks in prop::collection::vec(any::<u8>(), 4)) {
        let family = random_family(seed, b);
        let goal = family.goal_mask(GOAL_LABEL).unwrap();
        let quotient = build_quotient(&family);
        let full = quotient.restrict(&family.full_subfamily());
        let sub = subfamily(&family, &masks);
        let part = quotient.restrict(&sub);
        for measure in [Measure::Probability, Measure::Reward] {
            let (lo_full, hi_full) = extremes(&full, &goal, measure);
            let (lo_sub, hi_sub) = extremes(&part, &goal, measure);
            let slack = |v: f64| TOL * v.abs().max(1.0);
            prop_assert!(hi_sub <= hi_full + slack(hi_sub) || hi_full.is_infinite());
            if let Some(lo_sub) = lo_sub {
                let lo_full = lo_full.expect("a defined member keeps the minimum defined");
                prop_assert!(lo_full <= lo_sub + slack(lo_sub));
            }
        }
    }

    /// A singleton restriction leaves exactly one scheduler, and its value is
    /// the member's own.
    #[test]
    fn singleton_restriction_is_the_member(seed in any::<u64>(), b in bounds()) {
        let family = random_family(seed, b);
        let goal = family.goal_mask(GOAL_LABEL).unwrap();
        let quotient = build_quotient(&family);
        let r = family.all_realisations().last().unwrap();
        let view = quotient.restrict(&Subfamily::from_realisation(&r));
        prop_assert!((0..view.num_states()).all(|s| view.num_choices(s) == 1));
        let (min, max) = extremes(&view, &goal, Measure::Probability);
        let v = exact(&family, &r, Measure::Probability, &goal).unwrap();
        prop_assert!((max - v).abs() <= TOL);
        prop_assert!((min.unwrap() - v).abs() <= TOL);
    }

    /// Threshold partitions match the exact oracle under every configuration.
    #[test]
    fn threshold_matches_oracle_for_any_config(
        seed in any::<u64>(),
        b in bounds(),
        delta in 0.0f64..=1.0,
        strategy in prop_oneof![Just(SplitStrategy::Auto), Just(SplitStrategy::VarianceFirst), Just(SplitStrategy::ConsistencyFirst)],
        largest in any::<bool>(),
        parallel in any::<bool>(),
    ) {
        let doc = random_document(seed, b);
        let config = RefinementConfig {
            delta,
            strategy,
            queue: if largest { QueueOrder::LargestFirst } else { QueueOrder::Fifo },
            parallel,
            ..Default::default()
        };
        for name in ["prob", "reward"] {
            let spec = spec_named(&doc, name);
            let oracle = one_by_one(&doc.model, &spec, &BaselineConfig::default()).unwrap();
            let out = threshold_synthesis(&doc.model, &spec, &config).unwrap();
            let got: BTreeSet<Vec<usize>> = out.accepted.iter().flat_map(|s| s.members()).map(|r| r.values).collect();
            let want: BTreeSet<Vec<usize>> = oracle.accepted().map(|r| r.values.clone()).collect();
            prop_assert_eq!(got, want, "{}", name);
            prop_assert!((out.stats.iterations as u128) < 2 * doc.model.num_realisations());
        }
    }

    #[test]
    fn optimum_matches_oracle_for_any_config(
        seed in any::<u64>(),
        b in bounds(),
        delta in 0.0f64..=1.0,
        variance in any::<bool>(),
        parallel in any::<bool>(),
    ) {
        let doc = random_document(seed, b);
        let config = RefinementConfig {
            delta,
            strategy: if variance { SplitStrategy::VarianceFirst } else { SplitStrategy::Auto },
            parallel,
            ..Default::default()
        };
        for name in ["pmax", "pmin", "emax", "emin"] {
            let spec = spec_named(&doc, name);
            let oracle = one_by_one(&doc.model, &spec, &BaselineConfig::default()).unwrap();
            let want = oracle.optimum(spec.direction().unwrap()).map(|(_, v)| v);
            let out = optimum_synthesis(&doc.model, &spec, &config).unwrap();
            match (want, out.value) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() <= TOL * a.abs().max(1.0), "{} {} vs {}", name, a, b),
                (None, None) => {}
                other => prop_assert!(false, "{}: {:?}", name, other),
            }
        }
    }
}
