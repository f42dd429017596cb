//! Seeded random families for tests and benchmarks.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::family::{Direction, FamilyModel, Measure, Parameter, Query, Relation, Specification, Weight};
use crate::format::FamilyDocument;

/// Name of the goal label in generated families.
pub const GOAL_LABEL: &str = "goal";

/// Upper bounds for generated families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bounds {
    pub states: usize,
    pub params: usize,
    pub domain: usize,
}

impl Bounds {
    pub const MAX: Bounds = Bounds { states: 12, params: 4, domain: 4 };

    pub fn new(states: usize, params: usize, domain: usize) -> Self {
        Self {
            states: states.clamp(1, Self::MAX.states),
            params: params.clamp(1, Self::MAX.params),
            domain: domain.clamp(1, Self::MAX.domain),
        }
    }
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds { states: 8, params: 3, domain: 3 }
    }
}

fn dyadic(numer: i64, denom: i64) -> BigRational {
    BigRational::new(BigInt::from(numer), BigInt::from(denom))
}

/// Splits 1 into `parts` positive multiples of 1/8.
fn dyadic_partition(rng: &mut ChaCha8Rng, parts: usize) -> Vec<BigRational> {
    let mut cuts: Vec<i64> = (1..8).collect();
    cuts.shuffle(rng);
    let mut cuts: Vec<i64> = cuts.into_iter().take(parts - 1).collect();
    cuts.sort_unstable();
    let mut prev = 0;
    let mut out = Vec::with_capacity(parts);
    for c in cuts.into_iter().chain([8]) {
        out.push(dyadic(c - prev, 8));
        prev = c;
    }
    out
}

/// A random valid family within `bounds`, identical for identical seeds.
///
/// Weights are multiples of 1/8 and rewards multiples of 1/2. The label
/// `goal` marks one state reached by at least one member (falling back to
/// the initial state when no other state qualifies).
pub fn random_family(seed: u64, bounds: Bounds) -> FamilyModel {
    let bounds = Bounds::new(bounds.states, bounds.params, bounds.domain);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(bounds.states.min(2)..=bounds.states);
    let nk = rng.gen_range(1..=bounds.params);
    let states: Vec<usize> = (0..n).collect();
    let params: Vec<Parameter> = (0..nk)
        .map(|k| {
            let size = rng.gen_range(1..=bounds.domain.min(n));
            let mut domain: Vec<usize> = states.choose_multiple(&mut rng, size).copied().collect();
            domain.sort_unstable();
            Parameter { name: format!("k{k}"), domain }
        })
        .collect();
    let rows: Vec<Vec<Weight>> = (0..n)
        .map(|_| {
            let parts = rng.gen_range(1..=nk.min(3));
            let mut ks: Vec<usize> = (0..nk).collect();
            ks.shuffle(&mut rng);
            ks.truncate(parts);
            ks.sort_unstable();
            dyadic_partition(&mut rng, parts).into_iter().zip(ks).map(|(prob, param)| Weight { prob, param }).collect()
        })
        .collect();
    let rewards: Vec<BigRational> = (0..n).map(|_| dyadic(rng.gen_range(0..=6), 2)).collect();
    let unlabeled = FamilyModel::new(n, 0, params.clone(), rows.clone(), Some(rewards.clone()), BTreeMap::new())
        .expect("generated family is valid");

    let mut candidates: Vec<usize> = (1..n).collect();
    candidates.shuffle(&mut rng);
    let goal = candidates
        .into_iter()
        .find(|&g| {
            unlabeled.all_realisations().any(|r| {
                unlabeled.instantiate(&r).expect("member of the family").reachable()[g]
            })
        })
        .unwrap_or(0);
    let labels = BTreeMap::from([(GOAL_LABEL.to_string(), BTreeSet::from([goal]))]);
    FamilyModel::new(n, 0, params, rows, Some(rewards), labels).expect("generated family is valid")
}

/// A random family together with a set of named specifications over the
/// goal label: one probability threshold, one reward threshold, and the
/// four objectives.
pub fn random_document(seed: u64, bounds: Bounds) -> FamilyDocument {
    let model = random_family(seed, bounds);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let relations = [Relation::Lt, Relation::Le, Relation::Ge, Relation::Gt];
    let goal = GOAL_LABEL.to_string();
    let pick = |rng: &mut ChaCha8Rng| relations[rng.gen_range(0..relations.len())];
    let spec = |measure, query| Specification { measure, query, goal: goal.clone() };
    let mut prob_rel = pick(&mut rng);
    let lambda = dyadic(rng.gen_range(1..16), 16);
    if prob_rel == Relation::Gt && lambda == dyadic(1, 1) {
        prob_rel = Relation::Ge;
    }
    let kappa = dyadic(rng.gen_range(0..=40), 4);
    let reward_rel = pick(&mut rng);
    let reward_rel = if reward_rel == Relation::Lt && kappa == dyadic(0, 1) { Relation::Le } else { reward_rel };
    let specs = vec![
        ("prob".to_string(), spec(Measure::Probability, Query::Threshold { relation: prob_rel, threshold: lambda })),
        ("reward".to_string(), spec(Measure::Reward, Query::Threshold { relation: reward_rel, threshold: kappa })),
        ("pmax".to_string(), spec(Measure::Probability, Query::Optimum(Direction::Max))),
        ("pmin".to_string(), spec(Measure::Probability, Query::Optimum(Direction::Min))),
        ("emax".to_string(), spec(Measure::Reward, Query::Optimum(Direction::Max))),
        ("emin".to_string(), spec(Measure::Reward, Query::Optimum(Direction::Min))),
    ];
    FamilyDocument { model, specs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::{parse_document, serialize_document};

    #[test]
    fn deterministic_per_seed() {
        let b = Bounds::new(6, 3, 3);
        assert_eq!(random_family(11, b), random_family(11, b));
        assert_ne!(random_family(11, b), random_family(12, b));
    }

    #[test]
    fn small_bounds_round_trip() {
        let doc = random_document(0, Bounds::new(4, 2, 2));
        let text = serialize_document(&doc);
        let back = parse_document(&text).unwrap();
        assert_eq!(back.model, doc.model);
        assert_eq!(back.specs, doc.specs);
    }

    #[test]
    fn hundred_seeds_are_valid() {
        for seed in 0..100 {
            let fam = random_family(seed, Bounds::MAX);
            assert!(fam.num_states() <= 12 && fam.params().len() <= 4);
            assert!(fam.params().iter().all(|p| p.domain.len() <= 4));
            let goal = fam.goal_mask(GOAL_LABEL).unwrap();
            let g = goal.iter().position(|x| *x).unwrap();
            assert!(fam.all_realisations().any(|r| fam.instantiate(&r).unwrap().reachable()[g]));
        }
    }
}
