//! Abstraction-refinement synthesis over the quotient MDP.
//!
//! Each loop pops a subfamily, solves the restricted quotient for both
//! directions and either decides the whole subfamily or splits it on a
//! parameter chosen from the two extremal schedulers.

mod optimum;
mod scores;
mod threshold;

pub use optimum::{max_synthesis, min_synthesis, optimum_synthesis, OptimumOutcome};
pub use scores::{extract_counts, important_states, select_predicate, ScoreReport};
pub use threshold::{feasibility, threshold_synthesis, FeasibilityOutcome, ThresholdOutcome};

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::engine::{solve, CheckResult, SolverConfig};
use crate::error::{SolveError, SynthesisError};
use crate::family::{Direction, FamilyModel, Measure, Specification, Subfamily};
use crate::quotient::{build_quotient, Quotient, RestrictedQuotient};

/// Which score picks the split parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    VarianceFirst,
    ConsistencyFirst,
    /// Variance for threshold queries, consistency for optimum queries.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueueOrder {
    Fifo,
    LargestFirst,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementConfig {
    /// Importance cutoff in `[0, 1]`.
    pub delta: f64,
    pub strategy: Strategy,
    pub queue: QueueOrder,
    pub solver: SolverConfig,
    /// Slack around engine values before a subfamily is classified.
    pub tolerance: f64,
    /// Maximum number of analysed subfamilies.
    pub budget: Option<usize>,
    /// Analyse queued subfamilies concurrently, one batch at a time.
    pub parallel: bool,
    pub trace: bool,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        Self {
            delta: 0.5,
            strategy: Strategy::Auto,
            queue: QueueOrder::Fifo,
            solver: SolverConfig::default(),
            tolerance: 1e-6,
            budget: None,
            parallel: false,
            trace: false,
        }
    }
}

/// Counters and phase timings of one run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Stats {
    pub iterations: usize,
    pub solver_calls: usize,
    pub singletons: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub undefined: usize,
    #[serde(skip)]
    pub build_time: Duration,
    #[serde(skip)]
    pub check_time: Duration,
    #[serde(skip)]
    pub analysis_time: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Accept,
    Reject,
    Undefined,
    Split,
    /// Optimum search: the subfamily cannot beat the incumbent.
    Discard,
    /// Optimum search: a consistent optimal scheduler gave a new incumbent.
    Improve,
}

/// One loop iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub subfamily: String,
    pub size: u128,
    /// `None` when the value is undefined.
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub decision: Decision,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitRecord>,
    /// Optimum search only: the running bound after this iteration.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitRecord {
    pub param: String,
    pub keep: Vec<usize>,
}

/// Engine results for one subfamily.
pub(crate) struct Analysis<'q, 'f> {
    pub view: RestrictedQuotient<'q, 'f>,
    /// `None` when the minimal expected reward is undefined, which means
    /// every member's reward is undefined.
    pub min: Option<CheckResult>,
    pub max: CheckResult,
    pub check_time: Duration,
    pub build_time: Duration,
}

impl Analysis<'_, '_> {
    pub fn min_value(&self) -> Option<f64> {
        self.min.as_ref().map(CheckResult::value_at_initial)
    }

    pub fn max_value(&self) -> f64 {
        self.max.value_at_initial()
    }
}

pub(crate) fn analyse<'q, 'f>(
    quotient: &'q Quotient<'f>,
    sub: &Subfamily,
    goal: &[bool],
    measure: Measure,
    solver: &SolverConfig,
) -> Result<Analysis<'q, 'f>, SynthesisError> {
    let start = Instant::now();
    let view = quotient.restrict(sub);
    let build_time = start.elapsed();
    let start = Instant::now();
    let max = solve(&view, goal, measure, Direction::Max, solver)?;
    let min = match solve(&view, goal, measure, Direction::Min, solver) {
        Ok(r) => Some(r),
        Err(SolveError::UndefinedReward { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(Analysis { view, min, max, check_time: start.elapsed(), build_time })
}

/// Runs `analyse` for a batch of subfamilies, concurrently if asked.
pub(crate) fn analyse_batch<'q, 'f>(
    quotient: &'q Quotient<'f>,
    batch: &[Subfamily],
    goal: &[bool],
    measure: Measure,
    config: &RefinementConfig,
) -> Vec<Result<Analysis<'q, 'f>, SynthesisError>> {
    if config.parallel && batch.len() > 1 {
        use rayon::prelude::*;
        batch.par_iter().map(|sub| analyse(quotient, sub, goal, measure, &config.solver)).collect()
    } else {
        batch.iter().map(|sub| analyse(quotient, sub, goal, measure, &config.solver)).collect()
    }
}

/// The work list `U`.
pub(crate) struct WorkQueue {
    items: VecDeque<Subfamily>,
    order: QueueOrder,
}

impl WorkQueue {
    pub fn new(first: Subfamily, order: QueueOrder) -> Self {
        Self { items: VecDeque::from([first]), order }
    }

    pub fn push(&mut self, sub: Subfamily) {
        self.items.push_back(sub);
    }

    pub fn pop(&mut self) -> Option<Subfamily> {
        match self.order {
            QueueOrder::Fifo => self.items.pop_front(),
            QueueOrder::LargestFirst => {
                // First of the largest, so equal sizes stay FIFO.
                let best = self.items.iter().enumerate().fold(None, |acc: Option<(usize, u128)>, (i, s)| match acc {
                    Some((_, size)) if size >= s.size() => acc,
                    _ => Some((i, s.size())),
                })?;
                self.items.remove(best.0)
            }
        }
    }

    /// Next batch: one item sequentially, the whole queue in parallel mode.
    pub fn next_batch(&mut self, parallel: bool) -> Vec<Subfamily> {
        if parallel {
            let mut out = Vec::with_capacity(self.items.len());
            while let Some(s) = self.pop() {
                out.push(s);
            }
            out
        } else {
            self.pop().into_iter().collect()
        }
    }
}

/// Shared setup of every loop: goal mask and quotient.
pub(crate) fn prepare<'f>(
    family: &'f FamilyModel,
    spec: &Specification,
    stats: &mut Stats,
) -> Result<(Vec<bool>, Quotient<'f>), SynthesisError> {
    crate::format::validate_spec(spec, family)?;
    let goal = family.goal_mask(&spec.goal)?;
    let start = Instant::now();
    let quotient = build_quotient(family);
    stats.build_time += start.elapsed();
    Ok((goal, quotient))
}

pub(crate) fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}
