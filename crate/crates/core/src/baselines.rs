//! Reference approaches: member-by-member checking, the all-in-one MDP, and
//! enumeration of consistent schedulers through singleton restrictions.

use std::time::{Duration, Instant};

use num_traits::ToPrimitive;
use rayon::prelude::*;

use crate::allinone::{build_all_in_one, DEFAULT_ALL_IN_ONE_CAP};
use crate::engine::{solve, SolverConfig};
use crate::error::{SolveError, SynthesisError};
use crate::exact::{exact_check, ExactValue};
use crate::family::{Direction, FamilyModel, Realisation, Specification, Subfamily};
use crate::quotient::build_quotient;

/// Default bound on the number of members for enumeration.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BaselineConfig {
    /// Size cap; `None` picks the approach's default.
    pub cap: Option<u128>,
    pub solver: SolverConfig,
    pub parallel: bool,
}

/// Result for one member.
#[derive(Debug, Clone, PartialEq)]
pub struct MemberResult {
    pub realisation: Realisation,
    /// `None` for an undefined expected reward.
    pub value: Option<f64>,
    /// Threshold verdict; `None` for objectives and undefined values.
    pub satisfied: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnumerationOutcome {
    /// In enumeration order.
    pub members: Vec<MemberResult>,
    pub elapsed: Duration,
    /// Engine calls made (one per member, two for the all-in-one MDP).
    pub solver_calls: usize,
}

impl EnumerationOutcome {
    pub fn accepted(&self) -> impl Iterator<Item = &Realisation> {
        self.members.iter().filter(|m| m.satisfied == Some(true)).map(|m| &m.realisation)
    }

    pub fn rejected(&self) -> impl Iterator<Item = &Realisation> {
        self.members.iter().filter(|m| m.satisfied == Some(false)).map(|m| &m.realisation)
    }

    pub fn undefined(&self) -> impl Iterator<Item = &Realisation> {
        self.members.iter().filter(|m| m.value.is_none()).map(|m| &m.realisation)
    }

    /// Best defined member; the first in enumeration order wins ties.
    pub fn optimum(&self, direction: Direction) -> Option<(&Realisation, f64)> {
        let mut best: Option<(&Realisation, f64)> = None;
        for m in &self.members {
            let Some(v) = m.value else { continue };
            let better = match best {
                None => true,
                Some((_, b)) => match direction {
                    Direction::Max => v > b,
                    Direction::Min => v < b,
                },
            };
            if better {
                best = Some((&m.realisation, v));
            }
        }
        best
    }

    /// Some member satisfying the threshold, if any.
    pub fn feasible(&self) -> Option<&Realisation> {
        self.accepted().next()
    }
}

fn check_cap(family: &FamilyModel, cap: u128) -> Result<(), SynthesisError> {
    let size = family.num_realisations();
    if size > cap {
        return Err(SynthesisError::SizeCap { size, cap });
    }
    Ok(())
}

/// Threshold verdict from an engine value. Values within `NEAR` of the
/// threshold are too close to call in floating point and go to the exact
/// solver instead.
fn float_verdict(
    family: &FamilyModel,
    spec: &Specification,
    goal: &[bool],
    r: &Realisation,
    value: Option<f64>,
) -> Result<Option<bool>, SynthesisError> {
    const NEAR: f64 = 1e-6;
    let Some((relation, threshold)) = spec.threshold() else { return Ok(None) };
    let Some(v) = value else { return Ok(None) };
    let t = threshold.to_f64().unwrap_or(f64::NAN);
    if (v - t).abs() > NEAR * t.abs().max(1.0) {
        return Ok(Some(relation.holds(&v, &t)));
    }
    let (_, verdict) = exact_check(&family.instantiate(r)?, spec, goal)?;
    Ok(verdict)
}

/// Checks every member with the exact rational solver.
pub fn one_by_one(
    family: &FamilyModel,
    spec: &Specification,
    config: &BaselineConfig,
) -> Result<EnumerationOutcome, SynthesisError> {
    crate::format::validate_spec(spec, family)?;
    check_cap(family, config.cap.unwrap_or(DEFAULT_ENUMERATION_CAP))?;
    let goal = family.goal_mask(&spec.goal)?;
    let start = Instant::now();
    let check = |r: Realisation| -> Result<MemberResult, SynthesisError> {
        let mc = family.instantiate(&r)?;
        let (value, verdict) = exact_check(&mc, spec, &goal)?;
        let (value, satisfied) = match value {
            ExactValue::Finite(v) => (Some(v.to_f64().unwrap_or(f64::NAN)), verdict),
            ExactValue::Undefined => (None, None),
        };
        Ok(MemberResult { realisation: r, value, satisfied })
    };
    let members: Vec<MemberResult> = if config.parallel {
        let all: Vec<Realisation> = family.all_realisations().collect();
        all.into_par_iter().map(check).collect::<Result<_, _>>()?
    } else {
        family.all_realisations().map(check).collect::<Result<_, _>>()?
    };
    let solver_calls = members.len();
    Ok(EnumerationOutcome { members, elapsed: start.elapsed(), solver_calls })
}

/// Per-member values read off the all-in-one MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct AllInOneOutcome {
    pub outcome: EnumerationOutcome,
    /// Family-level optimum over all members.
    pub max: f64,
    /// `None` when every member's reward is undefined.
    pub min: Option<f64>,
    pub build_time: Duration,
}

/// Solves the all-in-one MDP once per direction.
pub fn all_in_one_check(
    family: &FamilyModel,
    spec: &Specification,
    config: &BaselineConfig,
) -> Result<AllInOneOutcome, SynthesisError> {
    crate::format::validate_spec(spec, family)?;
    let goal_states = family.goal_mask(&spec.goal)?;
    let start = Instant::now();
    let aio = build_all_in_one(family, config.cap.unwrap_or(DEFAULT_ALL_IN_ONE_CAP))?;
    let build_time = start.elapsed();
    let goal = aio.goal_mask(&goal_states);
    let max = solve(&aio.mdp, &goal, spec.measure, Direction::Max, &config.solver)?;
    let min = match solve(&aio.mdp, &goal, spec.measure, Direction::Min, &config.solver) {
        Ok(r) => Some(r.value_at_initial()),
        Err(SolveError::UndefinedReward { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let members = aio
        .members
        .iter()
        .zip(&aio.entries)
        .map(|(r, &e)| {
            // Below the fresh initial state every state has one action, so
            // the maximum is the member's own value.
            let value = Some(max.values[e]).filter(|v| v.is_finite());
            let satisfied = float_verdict(family, spec, &goal_states, r, value)?;
            Ok(MemberResult { realisation: r.clone(), value, satisfied })
        })
        .collect::<Result<_, SynthesisError>>()?;
    let outcome = EnumerationOutcome { members, elapsed: start.elapsed(), solver_calls: 2 };
    Ok(AllInOneOutcome { outcome, max: max.value_at_initial(), min, build_time })
}

/// Evaluates each member as the unique scheduler of its singleton
/// restriction of the quotient.
pub fn enumerate_consistent(
    family: &FamilyModel,
    spec: &Specification,
    config: &BaselineConfig,
) -> Result<EnumerationOutcome, SynthesisError> {
    crate::format::validate_spec(spec, family)?;
    check_cap(family, config.cap.unwrap_or(DEFAULT_ENUMERATION_CAP))?;
    let goal = family.goal_mask(&spec.goal)?;
    let start = Instant::now();
    let quotient = build_quotient(family);
    let check = |r: Realisation| -> Result<MemberResult, SynthesisError> {
        let view = quotient.restrict(&Subfamily::from_realisation(&r));
        let result = solve(&view, &goal, spec.measure, Direction::Max, &config.solver)?;
        let value = Some(result.value_at_initial()).filter(|v| v.is_finite());
        let satisfied = float_verdict(family, spec, &goal, &r, value)?;
        Ok(MemberResult { satisfied, realisation: r, value })
    };
    let members: Vec<MemberResult> = if config.parallel {
        let all: Vec<Realisation> = family.all_realisations().collect();
        all.into_par_iter().map(check).collect::<Result<_, _>>()?
    } else {
        family.all_realisations().map(check).collect::<Result<_, _>>()?
    };
    let solver_calls = members.len();
    Ok(EnumerationOutcome { members, elapsed: start.elapsed(), solver_calls })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::tests::{example1, q};
    use crate::family::{Measure, Query, Relation};

    fn phi() -> Specification {
        Specification {
            measure: Measure::Probability,
            query: Query::Threshold { relation: Relation::Ge, threshold: q(1, 10) },
            goal: "one".into(),
        }
    }

    fn values(out: &EnumerationOutcome) -> Vec<Vec<usize>> {
        out.accepted().map(|r| r.values.clone()).collect()
    }

    #[test]
    fn example_partition() {
        let fam = example1();
        let out = one_by_one(&fam, &phi(), &BaselineConfig::default()).unwrap();
        assert_eq!(values(&out), vec![vec![0, 1, 2], vec![0, 1, 3]]);
        let rejected: Vec<_> = out.rejected().map(|r| r.values.clone()).collect();
        assert_eq!(rejected, vec![vec![0, 0, 2], vec![0, 0, 3]]);
    }

    #[test]
    fn example_optimum_is_first_tie() {
        let fam = example1();
        let spec = Specification { measure: Measure::Probability, query: Query::Optimum(Direction::Max), goal: "one".into() };
        let out = one_by_one(&fam, &spec, &BaselineConfig::default()).unwrap();
        let (r, v) = out.optimum(Direction::Max).unwrap();
        assert_eq!(r.values, vec![0, 1, 2]);
        assert_eq!(v, 1.0);
    }

    #[test]
    fn approaches_agree_on_example() {
        let fam = example1();
        let a = one_by_one(&fam, &phi(), &BaselineConfig::default()).unwrap();
        let b = all_in_one_check(&fam, &phi(), &BaselineConfig::default()).unwrap();
        let c = enumerate_consistent(&fam, &phi(), &BaselineConfig::default()).unwrap();
        assert_eq!(values(&a), values(&b.outcome));
        assert_eq!(values(&a), values(&c));
        assert_eq!(b.outcome.members[0].value, Some(0.0));
        assert!((b.max - 1.0).abs() < 1e-6);
        assert_eq!(b.min, Some(0.0));
    }

    #[test]
    fn zero_threshold_accepts_all() {
        let fam = example1();
        let mut spec = phi();
        spec.query = Query::Threshold { relation: Relation::Ge, threshold: q(0, 1) };
        assert_eq!(one_by_one(&fam, &spec, &BaselineConfig::default()).unwrap().accepted().count(), 4);
    }

    #[test]
    fn caps() {
        let fam = example1();
        let config = BaselineConfig { cap: Some(3), ..Default::default() };
        assert!(matches!(one_by_one(&fam, &phi(), &config), Err(SynthesisError::SizeCap { size: 4, cap: 3 })));
        assert!(matches!(enumerate_consistent(&fam, &phi(), &config), Err(SynthesisError::SizeCap { .. })));
        assert!(matches!(all_in_one_check(&fam, &phi(), &config), Err(SynthesisError::SizeCap { .. })));
    }

    #[test]
    fn threshold_ties_use_the_exact_value() {
        // Only k1=1, k2=2 reaches state 2; its expected reward is exactly 4,
        // which value iteration approaches from below.
        let text = include_str!("../../../models/example1-reward.fmc");
        let fam = crate::format::parse_document(text).unwrap().model;
        let spec = crate::format::parse_spec(r#"E>=4 F "two""#).unwrap();
        for out in [
            one_by_one(&fam, &spec, &BaselineConfig::default()).unwrap(),
            all_in_one_check(&fam, &spec, &BaselineConfig::default()).unwrap().outcome,
            enumerate_consistent(&fam, &spec, &BaselineConfig::default()).unwrap(),
        ] {
            assert_eq!(values(&out), vec![vec![0, 1, 2]]);
        }
    }
}
