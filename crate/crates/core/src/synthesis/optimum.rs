//! Max and min synthesis.

use std::time::Instant;

use super::threshold::{record_iteration, split, trace_entry};
use super::{analyse_batch, prepare, Decision, RefinementConfig, Stats, Strategy, TraceRecord, WorkQueue};
use crate::engine::solve_mc;
use crate::error::SynthesisError;
use crate::family::{Direction, FamilyModel, Measure, Query, Realisation, Specification};

#[derive(Debug, Clone)]
pub struct OptimumOutcome {
    pub direction: Direction,
    /// `None` only when no member has a defined value.
    pub realisation: Option<Realisation>,
    pub value: Option<f64>,
    pub stats: Stats,
    pub trace: Vec<TraceRecord>,
}

pub fn max_synthesis(
    family: &FamilyModel,
    measure: Measure,
    goal: &str,
    config: &RefinementConfig,
) -> Result<OptimumOutcome, SynthesisError> {
    let spec = Specification { measure, query: Query::Optimum(Direction::Max), goal: goal.into() };
    optimum_synthesis(family, &spec, config)
}

pub fn min_synthesis(
    family: &FamilyModel,
    measure: Measure,
    goal: &str,
    config: &RefinementConfig,
) -> Result<OptimumOutcome, SynthesisError> {
    let spec = Specification { measure, query: Query::Optimum(Direction::Min), goal: goal.into() };
    optimum_synthesis(family, &spec, config)
}

/// Finds a member with the optimal value in the direction of an
/// objective-only specification. Members with undefined rewards are
/// ignored.
///
/// Values are handled in an oriented space where larger is better. The
/// incumbent is the best member found so far through a consistent optimal
/// scheduler. `bound` is the best guaranteed value of some not yet resolved
/// subfamily: every member there is at least that good. A subfamily is
/// dropped when it cannot beat the incumbent, or cannot reach the bound.
pub fn optimum_synthesis(
    family: &FamilyModel,
    spec: &Specification,
    config: &RefinementConfig,
) -> Result<OptimumOutcome, SynthesisError> {
    let Some(direction) = spec.direction() else {
        return Err(SynthesisError::UnsupportedSpec(spec.to_string()));
    };
    let sign = if direction == Direction::Max { 1.0 } else { -1.0 };
    let variance_first = config.strategy == Strategy::VarianceFirst;
    let mut stats = Stats::default();
    let mut trace = Vec::new();
    let (goal, quotient) = prepare(family, spec, &mut stats)?;
    let mut queue = WorkQueue::new(family.full_subfamily(), config.queue);
    let mut incumbent: Option<(Realisation, f64)> = None;
    let mut bound = f64::NEG_INFINITY;
    let slack = |v: f64| match spec.measure {
        Measure::Probability => config.tolerance,
        Measure::Reward => config.tolerance * v.abs().max(1.0),
    };
    loop {
        let batch = queue.next_batch(config.parallel);
        if batch.is_empty() {
            break;
        }
        if let Some(budget) = config.budget {
            if stats.iterations + batch.len() > budget {
                return Err(SynthesisError::BudgetExhausted { budget });
            }
        }
        for (sub, analysis) in batch.iter().zip(analyse_batch(&quotient, &batch, &goal, spec.measure, config)) {
            let analysis = analysis?;
            record_iteration(&mut stats, &analysis);
            let start = Instant::now();
            let mut split_record = None;
            let decision = match &analysis.min {
                None => Decision::Discard,
                Some(min) => {
                    let (best, worst) = match direction {
                        Direction::Max => (&analysis.max, min),
                        Direction::Min => (min, &analysis.max),
                    };
                    let opt = sign * best.value_at_initial();
                    let guaranteed = sign * worst.value_at_initial();
                    // With an infinite maximum some members may be undefined,
                    // so nothing is guaranteed.
                    let all_defined = analysis.max_value().is_finite();
                    if incumbent.as_ref().is_some_and(|(_, v)| opt <= *v) || opt + slack(opt) < bound {
                        Decision::Discard
                    } else if opt.is_finite() && analysis.view.is_consistent(&best.scheduler, &goal) {
                        let members = analysis.view.scheduler_to_realisations(&best.scheduler, &goal)?;
                        incumbent = Some((members.first_member(), opt));
                        Decision::Improve
                    } else if sub.is_singleton() {
                        // The only member has an undefined reward.
                        Decision::Discard
                    } else {
                        if all_defined && guaranteed > bound {
                            bound = guaranteed;
                        }
                        let (top, bottom, rec) = split(&analysis, &goal, config, variance_first)?;
                        queue.push(top);
                        queue.push(bottom);
                        split_record = Some(rec);
                        Decision::Split
                    }
                }
            };
            stats.analysis_time += start.elapsed();
            if config.trace {
                let best_known = incumbent.as_ref().map_or(bound, |(_, v)| v.max(bound));
                let shown = best_known.is_finite().then_some(sign * best_known);
                trace.push(trace_entry(family, &stats, &analysis, decision, split_record, shown));
            }
        }
    }
    let realisation = incumbent.map(|(r, _)| r);
    let value = match &realisation {
        Some(r) => Some(solve_mc(&family.instantiate(r)?, spec, &goal, &config.solver)?.value),
        None => None,
    };
    Ok(OptimumOutcome { direction, realisation, value, stats, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::tests::example1;

    #[test]
    fn example_maximum() {
        let fam = example1();
        let out = max_synthesis(&fam, Measure::Probability, "one", &RefinementConfig::default()).unwrap();
        let r = out.realisation.unwrap();
        assert_eq!(r.values[1], 1);
        assert!((out.value.unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn example_minimum() {
        let fam = example1();
        let out = min_synthesis(&fam, Measure::Probability, "one", &RefinementConfig::default()).unwrap();
        assert_eq!(out.realisation.unwrap().values[1], 0);
        assert_eq!(out.value, Some(0.0));
    }

    #[test]
    fn single_member() {
        use crate::family::{Parameter, Weight};
        use num_rational::BigRational;
        let params = vec![Parameter { name: "k".into(), domain: vec![1] }, Parameter { name: "j".into(), domain: vec![1] }];
        let half = BigRational::new(1.into(), 2.into());
        let rows = vec![
            vec![Weight { prob: half.clone(), param: 0 }, Weight { prob: half, param: 1 }],
            vec![Weight { prob: BigRational::from_integer(1.into()), param: 0 }],
        ];
        let labels = [("g".to_string(), [1].into())].into();
        let fam = FamilyModel::new(2, 0, params, rows, None, labels).unwrap();
        let out = max_synthesis(&fam, Measure::Probability, "g", &RefinementConfig::default()).unwrap();
        assert_eq!(out.realisation.unwrap().values, vec![1, 1]);
        assert_eq!(out.value, Some(1.0));
        assert_eq!(out.stats.iterations, 1);
    }

    #[test]
    fn trace_bound_is_monotone() {
        let fam = example1();
        let config = RefinementConfig { trace: true, ..Default::default() };
        let out = max_synthesis(&fam, Measure::Probability, "one", &config).unwrap();
        let bounds: Vec<f64> = out.trace.iter().filter_map(|t| t.bound).collect();
        assert!(bounds.windows(2).all(|w| w[0] <= w[1]));
    }
}
