//! Splitting heuristics: important states, choice counts, scores and the
//! split predicate.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::engine::{reachable_under, CheckResult};
use crate::family::{ParamId, StateId, Subfamily};
use crate::quotient::RestrictedQuotient;

/// States reached by either extremal scheduler whose row can still change
/// within the subfamily and whose min/max gap is at least `delta` times the
/// gap at the initial state. Goal states are never important.
///
/// A zero gap at the initial state yields no important states. With an
/// infinite gap (rewards) exactly the states with infinite maximum qualify.
pub fn important_states(
    view: &RestrictedQuotient<'_, '_>,
    min: &CheckResult,
    max: &CheckResult,
    goal: &[bool],
    delta: f64,
) -> Vec<bool> {
    let n = goal.len();
    let init = max.initial;
    let gap = max.values[init] - min.values[init];
    if gap.is_nan() || gap <= 0.0 {
        return vec![false; n];
    }
    let under_max = reachable_under(view, &max.scheduler, goal);
    let under_min = reachable_under(view, &min.scheduler, goal);
    (0..n)
        .map(|s| {
            if goal[s] || !(under_max[s] || under_min[s]) || !view.is_parameter_dependent(s) {
                return false;
            }
            let ratio = if gap.is_infinite() {
                if max.values[s].is_infinite() { 1.0 } else { 0.0 }
            } else {
                (max.values[s] - min.values[s]) / gap
            };
            ratio >= delta
        })
        .collect()
}

/// Per parameter, how often the scheduler's choices at important states
/// assign each domain value. Only states reading the parameter count.
pub fn extract_counts(
    view: &RestrictedQuotient<'_, '_>,
    scheduler: &crate::engine::Scheduler,
    important: &[bool],
) -> Vec<BTreeMap<StateId, u64>> {
    let family = view.quotient().family();
    let mut counts: Vec<BTreeMap<StateId, u64>> =
        family.params().iter().map(|p| p.domain.iter().map(|&t| (t, 0)).collect()).collect();
    for s in (0..important.len()).filter(|&s| important[s]) {
        for (k, v) in view.assignment(s, scheduler.choice(s)) {
            *counts[k].get_mut(&v).expect("value in domain") += 1;
        }
    }
    counts
}

/// Scores of every parameter and the chosen split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScoreReport {
    pub c_max: Vec<BTreeMap<StateId, u64>>,
    pub c_min: Vec<BTreeMap<StateId, u64>>,
    pub variance: Vec<u64>,
    pub consistency: Vec<i64>,
    pub param: ParamId,
    pub keep: Vec<StateId>,
}

pub fn variance(c_max: &BTreeMap<StateId, u64>, c_min: &BTreeMap<StateId, u64>) -> u64 {
    c_max.iter().map(|(t, a)| a.abs_diff(c_min[t])).sum()
}

pub fn consistency(c_max: &BTreeMap<StateId, u64>, c_min: &BTreeMap<StateId, u64>) -> i64 {
    let part = |c: &BTreeMap<StateId, u64>| {
        let size = c.values().filter(|v| **v > 0).count() as i64 - 1;
        let max = c.values().copied().max().unwrap_or(0) as i64;
        size * max
    };
    part(c_max) + part(c_min)
}

/// Picks the split parameter and the values kept in the first half.
///
/// Only parameters with at least two remaining values qualify. The primary
/// score decides, then the other score, then `activity` (how many relevant
/// states read the parameter), then declaration order. The kept half has
/// `max(1, n/2)` of the `n` current values, those with the largest
/// `C_max - C_min`, ties by domain order.
pub fn select_predicate(
    sub: &Subfamily,
    c_max: Vec<BTreeMap<StateId, u64>>,
    c_min: Vec<BTreeMap<StateId, u64>>,
    activity: &[usize],
    by_variance: bool,
) -> Option<ScoreReport> {
    let variance: Vec<u64> = c_max.iter().zip(&c_min).map(|(a, b)| variance(a, b)).collect();
    let consistency: Vec<i64> = c_max.iter().zip(&c_min).map(|(a, b)| consistency(a, b)).collect();
    let key = |k: ParamId| {
        let (v, c) = (variance[k] as i128, consistency[k] as i128);
        if by_variance { (v, c, activity[k]) } else { (c, v, activity[k]) }
    };
    let mut best: Option<ParamId> = None;
    for k in (0..sub.subsets().len()).filter(|&k| sub.subset(k).len() >= 2) {
        if best.is_none_or(|b| key(k) > key(b)) {
            best = Some(k);
        }
    }
    let param = best?;
    let current = sub.subset(param);
    let take = (current.len() / 2).max(1);
    let mut ranked: Vec<(usize, StateId)> = current.iter().copied().enumerate().collect();
    let diff = |t: StateId| c_max[param][&t] as i128 - c_min[param][&t] as i128;
    ranked.sort_by(|a, b| diff(b.1).cmp(&diff(a.1)).then(a.0.cmp(&b.0)));
    let mut chosen: Vec<(usize, StateId)> = ranked.into_iter().take(take).collect();
    chosen.sort();
    let keep = chosen.into_iter().map(|(_, t)| t).collect();
    Some(ScoreReport { c_max, c_min, variance, consistency, param, keep })
}

/// Number of states reachable under either scheduler that read each
/// parameter, for tie-breaking.
pub(crate) fn activity(view: &RestrictedQuotient<'_, '_>, min: &CheckResult, max: &CheckResult, goal: &[bool]) -> Vec<usize> {
    let quotient = view.quotient();
    let mut out = vec![0; quotient.family().params().len()];
    let a = reachable_under(view, &max.scheduler, goal);
    let b = reachable_under(view, &min.scheduler, goal);
    for s in (0..goal.len()).filter(|&s| (a[s] || b[s]) && !goal[s]) {
        for &k in quotient.support(s) {
            out[k] += 1;
        }
    }
    out
}

/// Full split decision for an analysed subfamily.
pub(crate) fn split_scores(
    view: &RestrictedQuotient<'_, '_>,
    min: &CheckResult,
    max: &CheckResult,
    goal: &[bool],
    delta: f64,
    by_variance: bool,
) -> ScoreReport {
    let important = important_states(view, min, max, goal, delta);
    let c_max = extract_counts(view, &max.scheduler, &important);
    let c_min = extract_counts(view, &min.scheduler, &important);
    let act = activity(view, min, max, goal);
    select_predicate(view.subfamily(), c_max, c_min, &act, by_variance)
        .expect("a non-singleton subfamily has a splittable parameter")
}
