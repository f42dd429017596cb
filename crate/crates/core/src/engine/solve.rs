//! Value iteration with qualitative precomputation.

use std::collections::VecDeque;

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use super::graph::{
    prob0_exists_with_witness, prob0_forall, prob1_exists_with_witness, prob1_forall_with_witness,
};
use super::{predecessors, CheckResult, Mdp, Scheduler, SolverConfig, SparseMdpBuilder};
use crate::error::SolveError;
use crate::family::{ConcreteMc, Direction, Measure, Specification, StateId};

pub fn solve<M: Mdp + ?Sized>(
    mdp: &M,
    goal: &[bool],
    measure: Measure,
    direction: Direction,
    config: &SolverConfig,
) -> Result<CheckResult, SolveError> {
    match measure {
        Measure::Probability => solve_prob(mdp, goal, direction, config),
        Measure::Reward => solve_reward(mdp, goal, direction, config),
    }
}

fn q_value<M: Mdp + ?Sized>(mdp: &M, s: StateId, c: usize, x: &[f64]) -> f64 {
    mdp.successors(s, c).iter().map(|&(t, p)| p * x[t]).sum()
}

/// Gauss-Seidel sweeps over `states` until the largest change drops below
/// epsilon. `update` returns the new value of a state.
fn iterate<F>(states: &[StateId], x: &mut [f64], config: &SolverConfig, mut update: F) -> Result<usize, SolveError>
where
    F: FnMut(StateId, &[f64]) -> f64,
{
    if states.is_empty() {
        return Ok(0);
    }
    let mut residual = f64::INFINITY;
    for it in 1..=config.max_iterations {
        residual = 0.0f64;
        for &s in states {
            let new = update(s, x);
            residual = residual.max((new - x[s]).abs());
            x[s] = new;
        }
        if residual < config.epsilon {
            return Ok(it);
        }
    }
    Err(SolveError::NotConverged { iterations: config.max_iterations, residual })
}

fn best_choice<M: Mdp + ?Sized>(
    mdp: &M,
    s: StateId,
    x: &[f64],
    maximise: bool,
    allowed: impl Fn(usize) -> bool,
) -> (usize, f64) {
    let mut best: Option<(usize, f64)> = None;
    for c in 0..mdp.num_choices(s) {
        if !allowed(c) {
            continue;
        }
        let v = q_value(mdp, s, c, x);
        let better = match best {
            None => true,
            Some((_, b)) => if maximise { v > b } else { v < b },
        };
        if better {
            best = Some((c, v));
        }
    }
    best.unwrap_or((0, 0.0))
}

fn slack(config: &SolverConfig, value: f64) -> f64 {
    config.tie_slack * value.abs().max(1.0)
}

/// Chooses, for every state in `pending`, an optimal choice that moves
/// towards `target`. Optimal means within the tie slack of the best
/// `reward + Q` value; among those the lowest index wins. States where no
/// optimal choice makes progress fall back to the best progressing choice.
#[allow(clippy::too_many_arguments)]
fn progressive_choices<M: Mdp + ?Sized>(
    mdp: &M,
    goal: &[bool],
    x: &[f64],
    pending: &[bool],
    target: &[bool],
    maximise: bool,
    config: &SolverConfig,
    allowed: &dyn Fn(StateId, usize) -> bool,
    choices: &mut [usize],
) {
    let n = mdp.num_states();
    let optimal: Vec<Vec<bool>> = (0..n)
        .map(|s| {
            if !pending[s] {
                return Vec::new();
            }
            let (_, best) = best_choice(mdp, s, x, maximise, |c| allowed(s, c));
            (0..mdp.num_choices(s))
                .map(|c| {
                    allowed(s, c) && {
                        let v = q_value(mdp, s, c, x);
                        if maximise {
                            v >= best - slack(config, best)
                        } else {
                            v <= best + slack(config, best)
                        }
                    }
                })
                .collect()
        })
        .collect();
    let preds = predecessors(mdp, goal);
    let mut done = target.to_vec();
    let mut remaining: usize = (0..n).filter(|&s| pending[s] && !done[s]).count();
    let mut queue: VecDeque<StateId> = (0..n).filter(|&s| done[s]).collect();
    let progress = |s: StateId, c: usize, done: &[bool]| mdp.successors(s, c).iter().any(|&(t, _)| done[t]);
    while remaining > 0 {
        while let Some(t) = queue.pop_front() {
            for &s in &preds[t] {
                if done[s] || !pending[s] {
                    continue;
                }
                if let Some(c) = (0..mdp.num_choices(s)).find(|&c| optimal[s][c] && progress(s, c, &done)) {
                    choices[s] = c;
                    done[s] = true;
                    remaining -= 1;
                    queue.push_back(s);
                }
            }
        }
        if remaining == 0 {
            break;
        }
        // Numerical noise can hide the optimal progressing choice; take the
        // best progressing one instead.
        let mut fallback = None;
        for s in (0..n).filter(|&s| pending[s] && !done[s]) {
            let cand = (0..mdp.num_choices(s))
                .filter(|&c| allowed(s, c) && progress(s, c, &done))
                .map(|c| (c, q_value(mdp, s, c, x)))
                .reduce(|a, b| {
                    let better = if maximise { b.1 > a.1 } else { b.1 < a.1 };
                    if better { b } else { a }
                });
            if let Some((c, _)) = cand {
                fallback = Some((s, c));
                break;
            }
        }
        match fallback {
            Some((s, c)) => {
                choices[s] = c;
                done[s] = true;
                remaining -= 1;
                queue.push_back(s);
            }
            None => break,
        }
    }
}

/// Optimal reachability probabilities for the given direction.
pub fn solve_prob<M: Mdp + ?Sized>(
    mdp: &M,
    goal: &[bool],
    direction: Direction,
    config: &SolverConfig,
) -> Result<CheckResult, SolveError> {
    let n = mdp.num_states();
    let mut x = vec![0.0; n];
    let mut choices = vec![0usize; n];
    let (zero, one, zero_witness, one_witness) = match direction {
        Direction::Max => {
            let zero = prob0_forall(mdp, goal);
            let (one, w) = prob1_exists_with_witness(mdp, goal);
            (zero, one, vec![None; n], w)
        }
        Direction::Min => {
            let (zero, w) = prob0_exists_with_witness(mdp, goal);
            let (one, _) = prob1_forall_with_witness(mdp, goal);
            (zero, one, w, vec![None; n])
        }
    };
    let mut exact = vec![false; n];
    for s in 0..n {
        if one[s] {
            x[s] = 1.0;
            exact[s] = true;
            choices[s] = one_witness[s].unwrap_or(0);
        } else if zero[s] {
            exact[s] = true;
            choices[s] = zero_witness[s].unwrap_or(0);
        }
    }
    let unknown: Vec<StateId> = (0..n).filter(|&s| !exact[s]).collect();
    let maximise = direction == Direction::Max;
    let iterations = iterate(&unknown, &mut x, config, |s, x| best_choice(mdp, s, x, maximise, |_| true).1)?;

    let pending: Vec<bool> = (0..n).map(|s| !exact[s]).collect();
    match direction {
        Direction::Max => {
            progressive_choices(mdp, goal, &x, &pending, &one, true, config, &|_, _| true, &mut choices);
        }
        Direction::Min => {
            for &s in &unknown {
                choices[s] = lowest_within_slack(mdp, s, &x, false, config, |_| true);
            }
        }
    }
    Ok(CheckResult {
        direction,
        measure: Measure::Probability,
        values: x,
        exact,
        scheduler: Scheduler::new(choices),
        initial: mdp.initial(),
        iterations,
    })
}

fn lowest_within_slack<M: Mdp + ?Sized>(
    mdp: &M,
    s: StateId,
    x: &[f64],
    maximise: bool,
    config: &SolverConfig,
    allowed: impl Fn(usize) -> bool + Copy,
) -> usize {
    let (_, best) = best_choice(mdp, s, x, maximise, allowed);
    (0..mdp.num_choices(s))
        .find(|&c| {
            allowed(c) && {
                let v = q_value(mdp, s, c, x);
                if maximise {
                    v >= best - slack(config, best)
                } else {
                    v <= best + slack(config, best)
                }
            }
        })
        .unwrap_or(0)
}

/// Optimal expected rewards until the goal.
///
/// States where the value is undefined for the chosen direction get `+inf`
/// (for `Max`: some scheduler misses the goal with positive probability; for
/// `Min`: no scheduler reaches it almost surely). An undefined minimum at the
/// initial state is an error.
pub fn solve_reward<M: Mdp + ?Sized>(
    mdp: &M,
    goal: &[bool],
    direction: Direction,
    config: &SolverConfig,
) -> Result<CheckResult, SolveError> {
    let n = mdp.num_states();
    let mut x = vec![0.0; n];
    let mut choices = vec![0usize; n];
    let mut exact = vec![false; n];
    let iterations;
    match direction {
        Direction::Max => {
            let (one, escape_witness) = prob1_forall_with_witness(mdp, goal);
            for s in 0..n {
                if goal[s] {
                    exact[s] = true;
                } else if !one[s] {
                    x[s] = f64::INFINITY;
                    exact[s] = true;
                    choices[s] = escape_witness[s].unwrap_or(0);
                }
            }
            let unknown: Vec<StateId> = (0..n).filter(|&s| !exact[s]).collect();
            iterations = iterate(&unknown, &mut x, config, |s, x| {
                mdp.state_reward(s) + best_choice(mdp, s, x, true, |_| true).1
            })?;
            for &s in &unknown {
                choices[s] = lowest_within_slack(mdp, s, &x, true, config, |_| true);
            }
        }
        Direction::Min => {
            let (one, proper) = prob1_exists_with_witness(mdp, goal);
            if !one[mdp.initial()] {
                return Err(SolveError::UndefinedReward { state: mdp.initial() });
            }
            for s in 0..n {
                if goal[s] {
                    exact[s] = true;
                } else if !one[s] {
                    x[s] = f64::INFINITY;
                    exact[s] = true;
                } else {
                    choices[s] = proper[s].unwrap_or(0);
                }
            }
            let unknown: Vec<StateId> = (0..n).filter(|&s| !exact[s]).collect();
            let stays = |s: StateId, c: usize| mdp.successors(s, c).iter().all(|&(t, _)| one[t]);
            // Start from the value of a proper scheduler and descend; starting
            // from zero could get stuck in zero-reward end components.
            let warmup = iterate(&unknown, &mut x, config, |s, x| {
                mdp.state_reward(s) + q_value(mdp, s, choices[s], x)
            })?;
            let descent = iterate(&unknown, &mut x, config, |s, x| {
                mdp.state_reward(s) + best_choice(mdp, s, x, false, |c| stays(s, c)).1
            })?;
            iterations = warmup + descent;
            let pending: Vec<bool> = (0..n).map(|s| !exact[s]).collect();
            progressive_choices(mdp, goal, &x, &pending, goal, false, config, &stays, &mut choices);
        }
    }
    Ok(CheckResult {
        direction,
        measure: Measure::Reward,
        values: x,
        exact,
        scheduler: Scheduler::new(choices),
        initial: mdp.initial(),
        iterations,
    })
}

/// Result of checking a single concrete chain.
#[derive(Debug, Clone, PartialEq)]
pub struct McVerdict {
    pub value: f64,
    pub exact: bool,
    /// `None` for objective-only specifications.
    pub satisfied: Option<bool>,
}

/// Checks one chain against a specification with the float engine.
pub fn solve_mc(
    mc: &ConcreteMc,
    spec: &Specification,
    goal: &[bool],
    config: &SolverConfig,
) -> Result<McVerdict, SolveError> {
    let mut b = SparseMdpBuilder::new();
    for s in 0..mc.num_states() {
        let reward = match (spec.measure, mc.rewards()) {
            (Measure::Reward, Some(r)) => r[s].to_f64().unwrap_or(f64::INFINITY),
            _ => 0.0,
        };
        b.add_state(reward);
        b.add_action(0, mc.row(s).iter().map(|(t, p)| (*t, p.to_f64().unwrap_or(0.0))));
    }
    let mdp = b.build(mc.initial())?;
    let result = solve(&mdp, goal, spec.measure, Direction::Min, config)?;
    let value = result.value_at_initial();
    let exact = result.is_exact_at_initial();
    let satisfied = spec.threshold().map(|(rel, t)| {
        if exact && value.is_finite() {
            let v = BigRational::from_float(value).unwrap_or_else(BigRational::zero);
            rel.holds(&v, t)
        } else {
            rel.holds(&value, &t.to_f64().unwrap_or(f64::NAN))
        }
    });
    Ok(McVerdict { value, exact, satisfied })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::tests::mdp;
    use crate::engine::SparseMdp;
    use crate::family::{Query, Relation};

    const CFG: SolverConfig = SolverConfig { epsilon: 1e-8, max_iterations: 1_000_000, tie_slack: 1e-9 };

    fn example_quotient() -> SparseMdp {
        mdp(
            0,
            &[
                &[&[(0, 1.0)], &[(0, 0.5), (1, 0.5)]],
                &[&[(0, 0.5), (2, 0.5)], &[(0, 0.5), (3, 0.5)], &[(1, 0.5), (2, 0.5)], &[(1, 0.5), (3, 0.5)]],
                &[&[(2, 1.0)], &[(3, 1.0)]],
                &[&[(0, 0.5), (2, 0.5)], &[(0, 0.5), (3, 0.5)], &[(1, 0.5), (2, 0.5)], &[(1, 0.5), (3, 0.5)]],
            ],
            &[],
        )
    }

    #[test]
    fn direct_step() {
        let m = mdp(0, &[&[&[(1, 1.0)]], &[&[(1, 1.0)]]], &[]);
        let r = solve_prob(&m, &[false, true], Direction::Max, &CFG).unwrap();
        assert_eq!(r.value_at_initial(), 1.0);
    }

    #[test]
    fn geometric_series() {
        let m = mdp(0, &[&[&[(0, 0.5), (1, 0.5)]], &[&[(1, 1.0)]]], &[]);
        for dir in [Direction::Min, Direction::Max] {
            let r = solve_prob(&m, &[false, true], dir, &CFG).unwrap();
            assert_eq!(r.value_at_initial(), 1.0);
        }
    }

    #[test]
    fn example_quotient_extremes() {
        let m = example_quotient();
        let goal = [false, true, false, false];
        let max = solve_prob(&m, &goal, Direction::Max, &CFG).unwrap();
        assert!((max.value_at_initial() - 1.0).abs() < 1e-6);
        assert_eq!(max.scheduler.choice(0), 1, "must leave the self-loop");
        let min = solve_prob(&m, &goal, Direction::Min, &CFG).unwrap();
        assert_eq!(min.value_at_initial(), 0.0);
        assert_eq!(min.scheduler.choice(0), 0);
    }

    #[test]
    fn pinned_values_are_exact() {
        let m = example_quotient();
        let goal = [false, true, false, false];
        let min = solve_prob(&m, &goal, Direction::Min, &CFG).unwrap();
        assert_eq!(min.values, vec![0.0, 1.0, 0.0, 0.0]);
        assert!(min.exact.iter().all(|e| *e));
    }

    #[test]
    fn unknown_states_converge() {
        // 0: a -> {0:.25, 1:.25, 2:.5}, b -> {1:.5, 2:.5}; 1 goal; 2 sink.
        let m = mdp(0, &[&[&[(0, 0.25), (1, 0.25), (2, 0.5)], &[(1, 0.5), (2, 0.5)]], &[&[(1, 1.0)]], &[&[(2, 1.0)]]], &[]);
        let goal = [false, true, false];
        let max = solve_prob(&m, &goal, Direction::Max, &CFG).unwrap();
        assert!((max.value_at_initial() - 0.5).abs() < 1e-7);
        assert_eq!(max.scheduler.choice(0), 1);
        let min = solve_prob(&m, &goal, Direction::Min, &CFG).unwrap();
        assert!((min.value_at_initial() - 1.0 / 3.0).abs() < 1e-7);
        assert_eq!(min.scheduler.choice(0), 0);
        assert!(!min.exact[0]);
    }

    #[test]
    fn reward_direct() {
        let m = mdp(0, &[&[&[(1, 1.0)]], &[&[(1, 1.0)]]], &[1.0, 0.0]);
        let r = solve_reward(&m, &[false, true], Direction::Min, &CFG).unwrap();
        assert_eq!(r.value_at_initial(), 1.0);
    }

    #[test]
    fn reward_geometric() {
        let m = mdp(0, &[&[&[(0, 0.5), (1, 0.5)]], &[&[(1, 1.0)]]], &[1.0, 0.0]);
        for dir in [Direction::Min, Direction::Max] {
            let r = solve_reward(&m, &[false, true], dir, &CFG).unwrap();
            assert!((r.value_at_initial() - 2.0).abs() < 1e-7);
        }
    }

    #[test]
    fn zero_rewards() {
        let m = mdp(0, &[&[&[(0, 0.5), (1, 0.5)]], &[&[(1, 1.0)]]], &[0.0, 0.0]);
        let r = solve_reward(&m, &[false, true], Direction::Min, &CFG).unwrap();
        assert_eq!(r.value_at_initial(), 0.0);
    }

    #[test]
    fn reward_infinite_and_undefined() {
        // 0: a -> goal, b -> sink.
        let m = mdp(0, &[&[&[(1, 1.0)], &[(2, 1.0)]], &[&[(1, 1.0)]], &[&[(2, 1.0)]]], &[1.0, 0.0, 1.0]);
        let goal = [false, true, false];
        let max = solve_reward(&m, &goal, Direction::Max, &CFG).unwrap();
        assert_eq!(max.value_at_initial(), f64::INFINITY);
        assert_eq!(max.scheduler.choice(0), 1);
        let min = solve_reward(&m, &goal, Direction::Min, &CFG).unwrap();
        assert_eq!(min.value_at_initial(), 1.0);
        assert_eq!(min.values[2], f64::INFINITY);

        let sink_only = mdp(0, &[&[&[(1, 1.0)]], &[&[(1, 1.0)]], &[&[(2, 1.0)]]], &[1.0, 0.0, 0.0]);
        assert!(matches!(
            solve_reward(&sink_only, &[false, false, true], Direction::Min, &CFG),
            Err(SolveError::UndefinedReward { state: 0 })
        ));
    }

    #[test]
    fn zero_reward_end_component() {
        // 0 <-> 1 for free; 1 can pay 3 to reach the goal 2; 0 can pay 5.
        let m = mdp(
            0,
            &[&[&[(1, 1.0)], &[(2, 1.0)]], &[&[(0, 1.0)], &[(2, 1.0)]], &[&[(2, 1.0)]]],
            &[0.0, 0.0, 0.0],
        );
        // Rewards are per state; model the exit costs with intermediate states.
        let m2 = mdp(
            0,
            &[
                &[&[(1, 1.0)], &[(3, 1.0)]],
                &[&[(0, 1.0)], &[(4, 1.0)]],
                &[&[(2, 1.0)]],
                &[&[(2, 1.0)]],
                &[&[(2, 1.0)]],
            ],
            &[0.0, 0.0, 0.0, 5.0, 3.0],
        );
        let goal = [false, false, true];
        assert_eq!(solve_reward(&m, &goal, Direction::Min, &CFG).unwrap().value_at_initial(), 0.0);
        let goal2 = [false, false, true, false, false];
        let r = solve_reward(&m2, &goal2, Direction::Min, &CFG).unwrap();
        assert!((r.value_at_initial() - 3.0).abs() < 1e-7);
        // The extracted scheduler must actually leave the free cycle.
        let s = &r.scheduler;
        assert!(s.choice(0) == 1 || s.choice(1) == 1);
        assert_eq!(s.choice(1), 1);
    }

    #[test]
    fn solve_mc_threshold() {
        use crate::family::tests::{example1, q};
        let fam = example1();
        let goal = fam.goal_mask("one").unwrap();
        let spec = Specification {
            measure: Measure::Probability,
            query: Query::Threshold { relation: Relation::Ge, threshold: q(1, 10) },
            goal: "one".into(),
        };
        let r1 = fam.instantiate(&crate::family::Realisation::new(vec![0, 0, 2])).unwrap();
        let v = solve_mc(&r1, &spec, &goal, &CFG).unwrap();
        assert_eq!((v.value, v.satisfied), (0.0, Some(false)));
        let r2 = fam.instantiate(&crate::family::Realisation::new(vec![0, 1, 2])).unwrap();
        let v = solve_mc(&r2, &spec, &goal, &CFG).unwrap();
        assert_eq!((v.value, v.satisfied), (1.0, Some(true)));
        let trivial = Specification {
            query: Query::Threshold { relation: Relation::Ge, threshold: q(0, 1) },
            ..spec
        };
        for r in fam.all_realisations() {
            let mc = fam.instantiate(&r).unwrap();
            assert_eq!(solve_mc(&mc, &trivial, &goal, &CFG).unwrap().satisfied, Some(true));
        }
    }
}
