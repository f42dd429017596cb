//! Sparse MDP core: qualitative graph analysis, value iteration for
//! reachability probabilities and expected rewards, and memoryless
//! deterministic scheduler extraction.

mod graph;
mod solve;

pub use graph::{prob0_exists, prob0_forall, prob1_exists, prob1_forall, reachable_under};
pub use solve::{solve, solve_mc, solve_prob, solve_reward, McVerdict};

use std::collections::VecDeque;

use crate::error::SolveError;
use crate::family::{Direction, Measure, StateId};

/// Read access to an MDP whose choices are indexed per state.
///
/// Both [`SparseMdp`] and restricted quotient views implement this, so the
/// solvers never need a rebuilt matrix.
pub trait Mdp {
    fn num_states(&self) -> usize;
    fn initial(&self) -> StateId;
    fn num_choices(&self, state: StateId) -> usize;
    fn successors(&self, state: StateId, choice: usize) -> &[(StateId, f64)];
    fn state_reward(&self, state: StateId) -> f64;
}

/// CSR-encoded MDP with float probabilities and an opaque tag per action.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMdp {
    initial: StateId,
    state_offsets: Vec<usize>,
    choice_offsets: Vec<usize>,
    entries: Vec<(StateId, f64)>,
    tags: Vec<usize>,
    rewards: Vec<f64>,
}

impl SparseMdp {
    pub fn num_actions(&self) -> usize {
        self.tags.len()
    }

    /// Global index of the `choice`-th action of `state`.
    pub fn action_index(&self, state: StateId, choice: usize) -> usize {
        self.state_offsets[state] + choice
    }

    pub fn action_successors(&self, action: usize) -> &[(StateId, f64)] {
        &self.entries[self.choice_offsets[action]..self.choice_offsets[action + 1]]
    }

    pub fn tag(&self, state: StateId, choice: usize) -> usize {
        self.tags[self.action_index(state, choice)]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }
}

impl Mdp for SparseMdp {
    fn num_states(&self) -> usize {
        self.state_offsets.len() - 1
    }

    fn initial(&self) -> StateId {
        self.initial
    }

    fn num_choices(&self, state: StateId) -> usize {
        self.state_offsets[state + 1] - self.state_offsets[state]
    }

    fn successors(&self, state: StateId, choice: usize) -> &[(StateId, f64)] {
        self.action_successors(self.action_index(state, choice))
    }

    fn state_reward(&self, state: StateId) -> f64 {
        self.rewards[state]
    }
}

/// Builds a [`SparseMdp`] state by state; states must be added in order.
#[derive(Debug, Default)]
pub struct SparseMdpBuilder {
    state_offsets: Vec<usize>,
    choice_offsets: Vec<usize>,
    entries: Vec<(StateId, f64)>,
    tags: Vec<usize>,
    rewards: Vec<f64>,
}

impl SparseMdpBuilder {
    pub fn new() -> Self {
        Self { state_offsets: vec![0], choice_offsets: vec![0], ..Default::default() }
    }

    /// Opens a new state; subsequent actions belong to it.
    pub fn add_state(&mut self, reward: f64) -> StateId {
        if self.rewards.is_empty() {
            self.rewards.push(reward);
            return 0;
        }
        self.state_offsets.push(self.tags.len());
        self.rewards.push(reward);
        self.rewards.len() - 1
    }

    pub fn add_action(&mut self, tag: usize, distribution: impl IntoIterator<Item = (StateId, f64)>) {
        self.entries.extend(distribution);
        self.choice_offsets.push(self.entries.len());
        self.tags.push(tag);
    }

    pub fn build(mut self, initial: StateId) -> Result<SparseMdp, SolveError> {
        let n = self.rewards.len();
        if n == 0 {
            return Err(SolveError::Malformed { reason: "no states".into() });
        }
        self.state_offsets.push(self.tags.len());
        if initial >= n {
            return Err(SolveError::Malformed { reason: format!("initial state {initial} out of range") });
        }
        let mdp = SparseMdp {
            initial,
            state_offsets: self.state_offsets,
            choice_offsets: self.choice_offsets,
            entries: self.entries,
            tags: self.tags,
            rewards: self.rewards,
        };
        for s in 0..n {
            if mdp.num_choices(s) == 0 {
                return Err(SolveError::Malformed { reason: format!("state {s} has no action") });
            }
            for c in 0..mdp.num_choices(s) {
                let succ = mdp.successors(s, c);
                if let Some(&(t, _)) = succ.iter().find(|(t, _)| *t >= n) {
                    return Err(SolveError::Malformed { reason: format!("successor {t} out of range") });
                }
                let sum: f64 = succ.iter().map(|(_, p)| p).sum();
                if (sum - 1.0).abs() > 1e-9 || succ.iter().any(|(_, p)| *p <= 0.0) {
                    return Err(SolveError::Malformed {
                        reason: format!("action {c} of state {s} is not a distribution (sum {sum})"),
                    });
                }
            }
        }
        Ok(mdp)
    }
}

/// A memoryless deterministic scheduler: one choice index per state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Scheduler {
    choices: Vec<usize>,
}

impl Scheduler {
    pub fn new(choices: Vec<usize>) -> Self {
        Self { choices }
    }

    pub fn choice(&self, state: StateId) -> usize {
        self.choices[state]
    }

    pub fn choices(&self) -> &[usize] {
        &self.choices
    }

    /// Checks that every chosen index exists in `mdp`.
    pub fn is_valid_for<M: Mdp + ?Sized>(&self, mdp: &M) -> bool {
        self.choices.len() == mdp.num_states()
            && self.choices.iter().enumerate().all(|(s, &c)| c < mdp.num_choices(s))
    }
}

/// Numeric parameters of value iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Slack used when comparing action values during scheduler extraction.
    pub tie_slack: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { epsilon: 1e-8, max_iterations: 1_000_000, tie_slack: 1e-9 }
    }
}

/// Per-state optimal values and an optimal memoryless scheduler.
///
/// `exact[s]` marks values fixed by graph analysis (0 or 1 probabilities,
/// infinite rewards, zero reward at goals); those are not approximations.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub direction: Direction,
    pub measure: Measure,
    pub values: Vec<f64>,
    pub exact: Vec<bool>,
    pub scheduler: Scheduler,
    pub initial: StateId,
    pub iterations: usize,
}

impl CheckResult {
    pub fn value_at_initial(&self) -> f64 {
        self.values[self.initial]
    }

    pub fn is_exact_at_initial(&self) -> bool {
        self.exact[self.initial]
    }
}

pub(crate) fn predecessors<M: Mdp + ?Sized>(mdp: &M, goal: &[bool]) -> Vec<Vec<StateId>> {
    let mut preds = vec![Vec::new(); mdp.num_states()];
    for s in 0..mdp.num_states() {
        if goal[s] {
            continue;
        }
        for c in 0..mdp.num_choices(s) {
            for &(t, _) in mdp.successors(s, c) {
                if preds[t].last() != Some(&s) {
                    preds[t].push(s);
                }
            }
        }
    }
    preds
}

/// States reachable from `from` over any action, not expanding goal states.
pub fn reachable_states<M: Mdp + ?Sized>(mdp: &M, goal: &[bool]) -> Vec<bool> {
    let mut seen = vec![false; mdp.num_states()];
    let mut queue = VecDeque::from([mdp.initial()]);
    seen[mdp.initial()] = true;
    while let Some(s) = queue.pop_front() {
        if goal[s] {
            continue;
        }
        for c in 0..mdp.num_choices(s) {
            for &(t, _) in mdp.successors(s, c) {
                if !seen[t] {
                    seen[t] = true;
                    queue.push_back(t);
                }
            }
        }
    }
    seen
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Builds an MDP from `[state][action] -> [(succ, prob)]`.
    pub fn mdp(initial: StateId, rows: &[&[&[(StateId, f64)]]], rewards: &[f64]) -> SparseMdp {
        let mut b = SparseMdpBuilder::new();
        for (s, actions) in rows.iter().enumerate() {
            b.add_state(rewards.get(s).copied().unwrap_or(0.0));
            for (i, a) in actions.iter().enumerate() {
                b.add_action(i, a.iter().copied());
            }
        }
        b.build(initial).unwrap()
    }

    #[test]
    fn builder_rejects_bad_rows() {
        let mut b = SparseMdpBuilder::new();
        b.add_state(0.0);
        b.add_action(0, [(0, 0.5)]);
        assert!(matches!(b.build(0), Err(SolveError::Malformed { .. })));

        let mut b = SparseMdpBuilder::new();
        b.add_state(0.0);
        b.add_state(0.0);
        b.add_action(0, [(0, 1.0)]);
        assert!(matches!(b.build(0), Err(SolveError::Malformed { .. })));
    }

    #[test]
    fn csr_layout() {
        let m = mdp(0, &[&[&[(1, 1.0)], &[(0, 0.5), (1, 0.5)]], &[&[(1, 1.0)]]], &[2.0, 0.0]);
        assert_eq!(m.num_states(), 2);
        assert_eq!(m.num_choices(0), 2);
        assert_eq!(m.num_choices(1), 1);
        assert_eq!(m.successors(0, 1), &[(0, 0.5), (1, 0.5)]);
        assert_eq!(m.tag(0, 1), 1);
        assert_eq!(m.state_reward(0), 2.0);
        assert_eq!(m.num_actions(), 3);
    }
}
