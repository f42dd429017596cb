//! Qualitative (graph-based) precomputations.
//!
//! Goal states are treated as absorbing throughout: their outgoing actions
//! are never explored.

use std::collections::VecDeque;

use super::{predecessors, Mdp, Scheduler};
use crate::family::StateId;

/// Predecessor actions `(state, choice)` of every state.
fn action_predecessors<M: Mdp + ?Sized>(mdp: &M, goal: &[bool]) -> Vec<Vec<(StateId, usize)>> {
    let mut preds = vec![Vec::new(); mdp.num_states()];
    for s in 0..mdp.num_states() {
        if goal[s] {
            continue;
        }
        for c in 0..mdp.num_choices(s) {
            for &(t, _) in mdp.successors(s, c) {
                if preds[t].last() != Some(&(s, c)) {
                    preds[t].push((s, c));
                }
            }
        }
    }
    preds
}

/// States from which every scheduler reaches the goal with probability 0.
pub fn prob0_forall<M: Mdp + ?Sized>(mdp: &M, goal: &[bool]) -> Vec<bool> {
    let preds = predecessors(mdp, goal);
    let mut reach = goal.to_vec();
    let mut queue: VecDeque<StateId> = (0..mdp.num_states()).filter(|&s| goal[s]).collect();
    while let Some(t) = queue.pop_front() {
        for &s in &preds[t] {
            if !reach[s] {
                reach[s] = true;
                queue.push_back(s);
            }
        }
    }
    reach.iter().map(|r| !r).collect()
}

/// States from which some scheduler avoids the goal surely (`pZeroE`).
pub fn prob0_exists<M: Mdp + ?Sized>(mdp: &M, goal: &[bool]) -> Vec<bool> {
    prob0_exists_with_witness(mdp, goal).0
}

/// `pZeroE` plus, for its states, the lowest choice whose successors all stay
/// inside the set.
pub(crate) fn prob0_exists_with_witness<M: Mdp + ?Sized>(
    mdp: &M,
    goal: &[bool],
) -> (Vec<bool>, Vec<Option<usize>>) {
    let n = mdp.num_states();
    let preds = action_predecessors(mdp, goal);
    let mut hit: Vec<Vec<bool>> = (0..n).map(|s| vec![false; mdp.num_choices(s)]).collect();
    let mut hit_count = vec![0usize; n];
    let mut positive = goal.to_vec();
    let mut queue: VecDeque<StateId> = (0..n).filter(|&s| goal[s]).collect();
    while let Some(t) = queue.pop_front() {
        for &(s, c) in &preds[t] {
            if positive[s] || hit[s][c] {
                continue;
            }
            hit[s][c] = true;
            hit_count[s] += 1;
            if hit_count[s] == mdp.num_choices(s) {
                positive[s] = true;
                queue.push_back(s);
            }
        }
    }
    let zero: Vec<bool> = positive.iter().map(|p| !p).collect();
    let witness = (0..n)
        .map(|s| zero[s].then(|| hit[s].iter().position(|h| !h).unwrap_or(0)))
        .collect();
    (zero, witness)
}

/// States from which some scheduler reaches the goal almost surely.
pub fn prob1_exists<M: Mdp + ?Sized>(mdp: &M, goal: &[bool]) -> Vec<bool> {
    prob1_exists_with_witness(mdp, goal).0
}

/// Greatest-fixpoint computation of `prob1E`. The witness choices stay
/// inside the set and make progress towards the goal.
pub(crate) fn prob1_exists_with_witness<M: Mdp + ?Sized>(
    mdp: &M,
    goal: &[bool],
) -> (Vec<bool>, Vec<Option<usize>>) {
    let n = mdp.num_states();
    let preds = action_predecessors(mdp, goal);
    let mut inside = vec![true; n];
    loop {
        let stays: Vec<Vec<bool>> = (0..n)
            .map(|s| {
                (0..mdp.num_choices(s))
                    .map(|c| mdp.successors(s, c).iter().all(|&(t, _)| inside[t]))
                    .collect()
            })
            .collect();
        let (attr, witness) = attractor(mdp, goal, &preds, &stays, goal);
        let next: Vec<bool> = attr.iter().zip(&inside).map(|(a, i)| *a && *i).collect();
        if next == inside {
            return (inside, witness);
        }
        inside = next;
    }
}

/// Backward attractor of `target` using only `allowed` choices. Each added
/// state records the lowest allowed choice with a successor already inside.
fn attractor<M: Mdp + ?Sized>(
    mdp: &M,
    goal: &[bool],
    preds: &[Vec<(StateId, usize)>],
    allowed: &[Vec<bool>],
    target: &[bool],
) -> (Vec<bool>, Vec<Option<usize>>) {
    let n = mdp.num_states();
    let mut inside = target.to_vec();
    let mut witness = vec![None; n];
    let mut queue: VecDeque<StateId> = (0..n).filter(|&s| target[s]).collect();
    while let Some(t) = queue.pop_front() {
        for &(s, c) in &preds[t] {
            if inside[s] || goal[s] || !allowed[s][c] {
                continue;
            }
            let choice = (0..mdp.num_choices(s))
                .find(|&d| allowed[s][d] && mdp.successors(s, d).iter().any(|&(u, _)| inside[u]))
                .unwrap_or(c);
            inside[s] = true;
            witness[s] = Some(choice);
            queue.push_back(s);
        }
    }
    (inside, witness)
}

/// States from which every scheduler reaches the goal almost surely (`pOneA`).
pub fn prob1_forall<M: Mdp + ?Sized>(mdp: &M, goal: &[bool]) -> Vec<bool> {
    prob1_forall_with_witness(mdp, goal).0
}

/// `pOneA`, plus for the complement a choice of a scheduler that misses the
/// goal with positive probability.
pub(crate) fn prob1_forall_with_witness<M: Mdp + ?Sized>(
    mdp: &M,
    goal: &[bool],
) -> (Vec<bool>, Vec<Option<usize>>) {
    let n = mdp.num_states();
    let (zero, zero_witness) = prob0_exists_with_witness(mdp, goal);
    let preds = action_predecessors(mdp, goal);
    let allowed: Vec<Vec<bool>> = (0..n).map(|s| vec![true; mdp.num_choices(s)]).collect();
    let (escape, attr_witness) = attractor(mdp, goal, &preds, &allowed, &zero);
    let witness = (0..n)
        .map(|s| if zero[s] { zero_witness[s] } else { attr_witness[s] })
        .collect();
    (escape.iter().map(|e| !e).collect(), witness)
}

/// States visited by the chain a scheduler induces, not expanding goal states.
pub fn reachable_under<M: Mdp + ?Sized>(mdp: &M, scheduler: &Scheduler, goal: &[bool]) -> Vec<bool> {
    let mut seen = vec![false; mdp.num_states()];
    let mut queue = VecDeque::from([mdp.initial()]);
    seen[mdp.initial()] = true;
    while let Some(s) = queue.pop_front() {
        if goal[s] {
            continue;
        }
        for &(t, _) in mdp.successors(s, scheduler.choice(s)) {
            if !seen[t] {
                seen[t] = true;
                queue.push_back(t);
            }
        }
    }
    seen
}
