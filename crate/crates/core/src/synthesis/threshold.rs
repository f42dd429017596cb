//! Threshold synthesis and feasibility.

use std::time::Instant;

use num_rational::BigRational;
use num_traits::ToPrimitive;

use super::scores::split_scores;
use super::{
    analyse_batch, finite, prepare, Analysis, Decision, RefinementConfig, SplitRecord, Stats,
    Strategy, TraceRecord, WorkQueue,
};
use crate::engine::CheckResult;
use crate::error::SynthesisError;
use crate::exact::{exact_check, ExactValue};
use crate::family::{FamilyModel, Measure, Realisation, Relation, Specification, Subfamily};

/// Partition of the family into satisfying, violating and (for rewards)
/// undefined subfamilies.
#[derive(Debug, Clone, Default)]
pub struct ThresholdOutcome {
    pub accepted: Vec<Subfamily>,
    pub rejected: Vec<Subfamily>,
    pub undefined: Vec<Subfamily>,
    pub stats: Stats,
    pub trace: Vec<TraceRecord>,
}

impl ThresholdOutcome {
    pub fn accepted_members(&self) -> u128 {
        self.accepted.iter().map(Subfamily::size).sum()
    }

    pub fn rejected_members(&self) -> u128 {
        self.rejected.iter().map(Subfamily::size).sum()
    }

    pub fn undefined_members(&self) -> u128 {
        self.undefined.iter().map(Subfamily::size).sum()
    }

    /// Verdict of one member: `Some(true)` accepted, `Some(false)` rejected,
    /// `None` undefined.
    pub fn verdict(&self, r: &Realisation) -> Option<bool> {
        if self.accepted.iter().any(|s| s.contains(r)) {
            Some(true)
        } else if self.rejected.iter().any(|s| s.contains(r)) {
            Some(false)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone)]
pub struct FeasibilityOutcome {
    pub realisation: Option<Realisation>,
    pub stats: Stats,
    pub trace: Vec<TraceRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Verdict {
    Accept,
    Reject,
    Undefined,
    Open,
}

/// Whether every true value compatible with the engine's answer `value`
/// satisfies `relation threshold`.
///
/// Exact values are compared as they are. Other values may be off by the
/// tolerance (relative for rewards), and a probability that graph analysis
/// did not pin lies strictly between 0 and 1.
pub(crate) fn surely(
    relation: Relation,
    threshold: &BigRational,
    value: f64,
    exact: bool,
    measure: Measure,
    tolerance: f64,
) -> bool {
    if exact {
        return match BigRational::from_float(value) {
            Some(v) => relation.holds(&v, threshold),
            None => false,
        };
    }
    let t = threshold.to_f64().unwrap_or(f64::NAN);
    let tol = match measure {
        Measure::Probability => tolerance,
        Measure::Reward => tolerance * value.abs().max(1.0),
    };
    let (mut lo, mut lo_open) = (value - tol, false);
    let (mut hi, mut hi_open) = (value + tol, false);
    if lo <= 0.0 {
        lo = 0.0;
        lo_open = measure == Measure::Probability;
    }
    if measure == Measure::Probability && hi >= 1.0 {
        hi = 1.0;
        hi_open = true;
    }
    match relation {
        Relation::Ge => lo >= t,
        Relation::Gt => if lo_open { lo >= t } else { lo > t },
        Relation::Le => hi <= t,
        Relation::Lt => if hi_open { hi <= t } else { hi < t },
    }
}

fn bound(result: &CheckResult) -> (f64, bool) {
    (result.value_at_initial(), result.is_exact_at_initial())
}

pub(crate) fn classify(
    family: &FamilyModel,
    spec: &Specification,
    goal: &[bool],
    analysis: &Analysis<'_, '_>,
    tolerance: f64,
) -> Result<Verdict, SynthesisError> {
    let (relation, threshold) = spec.threshold().expect("threshold specification");
    let Some(min) = &analysis.min else {
        return Ok(Verdict::Undefined);
    };
    let sub = analysis.view.subfamily();
    if !analysis.max_value().is_finite() {
        // Some member may be undefined; only singletons are decided here.
        debug_assert!(!sub.is_singleton());
        return Ok(Verdict::Open);
    }
    let (worst, best) = if relation.is_lower_bound() { (bound(min), bound(&analysis.max)) } else { (bound(&analysis.max), bound(min)) };
    let measure = spec.measure;
    if surely(relation, threshold, worst.0, worst.1, measure, tolerance) {
        return Ok(Verdict::Accept);
    }
    if surely(relation.negate(), threshold, best.0, best.1, measure, tolerance) {
        return Ok(Verdict::Reject);
    }
    if let Some(r) = sub.to_realisation() {
        // Too close to call with floats: ask the exact oracle.
        let mc = family.instantiate(&r)?;
        return Ok(match exact_check(&mc, spec, goal)? {
            (ExactValue::Undefined, _) => Verdict::Undefined,
            (_, Some(true)) => Verdict::Accept,
            _ => Verdict::Reject,
        });
    }
    Ok(Verdict::Open)
}

fn by_variance(strategy: Strategy) -> bool {
    strategy != Strategy::ConsistencyFirst
}

pub(crate) fn split(
    analysis: &Analysis<'_, '_>,
    goal: &[bool],
    config: &RefinementConfig,
    variance_first: bool,
) -> Result<(Subfamily, Subfamily, SplitRecord), SynthesisError> {
    let min = analysis.min.as_ref().expect("split needs both bounds");
    let report = split_scores(&analysis.view, min, &analysis.max, goal, config.delta, variance_first);
    let sub = analysis.view.subfamily();
    let (top, bottom) = sub.split(report.param, &report.keep)?;
    let family = analysis.view.quotient().family();
    let record = SplitRecord { param: family.params()[report.param].name.clone(), keep: report.keep };
    Ok((top, bottom, record))
}

pub(crate) fn record_iteration(stats: &mut Stats, analysis: &Analysis<'_, '_>) {
    stats.iterations += 1;
    stats.solver_calls += 2;
    stats.build_time += analysis.build_time;
    stats.check_time += analysis.check_time;
    if analysis.view.subfamily().is_singleton() {
        stats.singletons += 1;
    }
}

pub(crate) fn trace_entry(
    family: &FamilyModel,
    stats: &Stats,
    analysis: &Analysis<'_, '_>,
    decision: Decision,
    split: Option<SplitRecord>,
    bound: Option<f64>,
) -> TraceRecord {
    let sub = analysis.view.subfamily();
    TraceRecord {
        iteration: stats.iterations,
        subfamily: sub.display(family).to_string(),
        size: sub.size(),
        min: analysis.min_value().and_then(finite),
        max: finite(analysis.max_value()),
        decision,
        split,
        bound,
    }
}

/// Partitions all members into those satisfying and violating a threshold
/// specification.
pub fn threshold_synthesis(
    family: &FamilyModel,
    spec: &Specification,
    config: &RefinementConfig,
) -> Result<ThresholdOutcome, SynthesisError> {
    if spec.threshold().is_none() {
        return Err(SynthesisError::UnsupportedSpec(spec.to_string()));
    }
    let mut out = ThresholdOutcome::default();
    let (goal, quotient) = prepare(family, spec, &mut out.stats)?;
    let mut queue = WorkQueue::new(family.full_subfamily(), config.queue);
    loop {
        let batch = queue.next_batch(config.parallel);
        if batch.is_empty() {
            break;
        }
        if let Some(budget) = config.budget {
            if out.stats.iterations + batch.len() > budget {
                return Err(SynthesisError::BudgetExhausted { budget });
            }
        }
        for (sub, analysis) in batch.iter().zip(analyse_batch(&quotient, &batch, &goal, spec.measure, config)) {
            let analysis = analysis?;
            record_iteration(&mut out.stats, &analysis);
            let start = Instant::now();
            let verdict = classify(family, spec, &goal, &analysis, config.tolerance)?;
            let (decision, split_record) = match verdict {
                Verdict::Accept => {
                    out.accepted.push(sub.clone());
                    (Decision::Accept, None)
                }
                Verdict::Reject => {
                    out.rejected.push(sub.clone());
                    (Decision::Reject, None)
                }
                Verdict::Undefined => {
                    out.undefined.push(sub.clone());
                    (Decision::Undefined, None)
                }
                Verdict::Open => {
                    let (top, bottom, rec) = split(&analysis, &goal, config, by_variance(config.strategy))?;
                    queue.push(top);
                    queue.push(bottom);
                    (Decision::Split, Some(rec))
                }
            };
            out.stats.analysis_time += start.elapsed();
            if config.trace {
                out.trace.push(trace_entry(family, &out.stats, &analysis, decision, split_record, None));
            }
        }
    }
    out.stats.accepted = out.accepted.len();
    out.stats.rejected = out.rejected.len();
    out.stats.undefined = out.undefined.len();
    Ok(out)
}

/// Finds one member satisfying a threshold specification, if any.
///
/// Stops at the first accepted subfamily. A consistent best-case scheduler
/// whose value already satisfies the specification also ends the search;
/// its member is confirmed with the exact oracle first.
pub fn feasibility(
    family: &FamilyModel,
    spec: &Specification,
    config: &RefinementConfig,
) -> Result<FeasibilityOutcome, SynthesisError> {
    let Some((relation, threshold)) = spec.threshold() else {
        return Err(SynthesisError::UnsupportedSpec(spec.to_string()));
    };
    let mut stats = Stats::default();
    let mut trace = Vec::new();
    let (goal, quotient) = prepare(family, spec, &mut stats)?;
    let mut queue = WorkQueue::new(family.full_subfamily(), config.queue);
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
            let verdict = classify(family, spec, &goal, &analysis, config.tolerance)?;
            let mut found = None;
            let mut split_record = None;
            let decision = match verdict {
                Verdict::Accept => {
                    found = Some(sub.first_member());
                    Decision::Accept
                }
                Verdict::Reject => Decision::Reject,
                Verdict::Undefined => Decision::Undefined,
                Verdict::Open => {
                    let best = if relation.is_lower_bound() { Some(&analysis.max) } else { analysis.min.as_ref() };
                    if let Some(best) = best {
                        if best.value_at_initial().is_finite()
                            && surely(relation, threshold, best.value_at_initial(), best.is_exact_at_initial(), spec.measure, config.tolerance)
                        {
                            if let Ok(members) = analysis.view.scheduler_to_realisations(&best.scheduler, &goal) {
                                let r = members.first_member();
                                if exact_check(&family.instantiate(&r)?, spec, &goal)?.1 == Some(true) {
                                    found = Some(r);
                                }
                            }
                        }
                    }
                    if found.is_some() {
                        Decision::Accept
                    } else {
                        let (top, bottom, rec) = split(&analysis, &goal, config, by_variance(config.strategy))?;
                        queue.push(top);
                        queue.push(bottom);
                        split_record = Some(rec);
                        Decision::Split
                    }
                }
            };
            stats.analysis_time += start.elapsed();
            if config.trace {
                trace.push(trace_entry(family, &stats, &analysis, decision, split_record, None));
            }
            if let Some(r) = found {
                stats.accepted = 1;
                return Ok(FeasibilityOutcome { realisation: Some(r), stats, trace });
            }
        }
    }
    Ok(FeasibilityOutcome { realisation: None, stats, trace })
}
