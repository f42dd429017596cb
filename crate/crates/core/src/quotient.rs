//! The quotient MDP of a family and its restrictions to subfamilies.
//!
//! Every state of the family becomes one state of the quotient. Its actions
//! are the distinct successor distributions the state can take over all
//! assignments of the parameters in its support. Each such merged action
//! remembers every assignment ("signature") that produces it, so a
//! restriction can keep exactly the actions some member of the subfamily
//! could take, without rebuilding anything.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::engine::{reachable_under, Mdp, Scheduler};
use crate::error::SynthesisError;
use crate::family::{ConcreteMc, FamilyModel, ParamId, StateId, Subfamily};
use crate::format::format_rational;

/// One action of the quotient: a distribution plus all parameter
/// assignments over the state's support that produce it.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedAction {
    pub distribution: Vec<(StateId, BigRational)>,
    float: Vec<(StateId, f64)>,
    /// Values aligned with the state's support, in enumeration order, so
    /// the first entry is the lexicographically smallest.
    pub signatures: Vec<Vec<StateId>>,
}

#[derive(Debug, Clone)]
pub struct Quotient<'f> {
    family: &'f FamilyModel,
    supports: Vec<Vec<ParamId>>,
    actions: Vec<Vec<MergedAction>>,
    rewards: Vec<f64>,
}

/// Odometer over the cartesian product of `domains`, last index fastest.
fn for_each_assignment(domains: &[&[StateId]], mut f: impl FnMut(&[StateId])) {
    if domains.iter().any(|d| d.is_empty()) {
        return;
    }
    let mut idx = vec![0usize; domains.len()];
    let mut values: Vec<StateId> = domains.iter().map(|d| d[0]).collect();
    loop {
        f(&values);
        let mut pos = domains.len();
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < domains[pos].len() {
                values[pos] = domains[pos][idx[pos]];
                break;
            }
            idx[pos] = 0;
            values[pos] = domains[pos][0];
        }
    }
}

/// Builds the quotient MDP with merged actions.
pub fn build_quotient(family: &FamilyModel) -> Quotient<'_> {
    let n = family.num_states();
    let mut supports = Vec::with_capacity(n);
    let mut actions = Vec::with_capacity(n);
    for s in 0..n {
        let support = family.support(s);
        let domains: Vec<&[StateId]> = support.iter().map(|&k| family.params()[k].domain.as_slice()).collect();
        let mut groups: BTreeMap<Vec<(StateId, BigRational)>, usize> = BTreeMap::new();
        let mut merged: Vec<MergedAction> = Vec::new();
        for_each_assignment(&domains, |values| {
            let mut dist: BTreeMap<StateId, BigRational> = BTreeMap::new();
            for w in family.row(s) {
                let pos = support.binary_search(&w.param).expect("support covers the row");
                *dist.entry(values[pos]).or_insert_with(BigRational::zero) += &w.prob;
            }
            let dist: Vec<(StateId, BigRational)> = dist.into_iter().collect();
            match groups.get(&dist) {
                Some(&i) => merged[i].signatures.push(values.to_vec()),
                None => {
                    groups.insert(dist.clone(), merged.len());
                    let float = dist.iter().map(|(t, p)| (*t, p.to_f64().unwrap_or(0.0))).collect();
                    merged.push(MergedAction { distribution: dist, float, signatures: vec![values.to_vec()] });
                }
            }
        });
        supports.push(support);
        actions.push(merged);
    }
    let rewards = match family.rewards() {
        Some(r) => r.iter().map(|v| v.to_f64().unwrap_or(f64::INFINITY)).collect(),
        None => vec![0.0; n],
    };
    Quotient { family, supports, actions, rewards }
}

impl<'f> Quotient<'f> {
    pub fn family(&self) -> &'f FamilyModel {
        self.family
    }

    /// Parameters occurring in the row of `state`, ascending.
    pub fn support(&self, state: StateId) -> &[ParamId] {
        &self.supports[state]
    }

    pub fn actions(&self, state: StateId) -> &[MergedAction] {
        &self.actions[state]
    }

    pub fn action_counts(&self) -> Vec<usize> {
        self.actions.iter().map(Vec::len).collect()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.iter().map(Vec::len).sum()
    }

    /// The view of the quotient allowed by `sub`.
    pub fn restrict(&self, sub: &Subfamily) -> RestrictedQuotient<'_, 'f> {
        let kept = (0..self.actions.len())
            .map(|s| {
                let support = &self.supports[s];
                self.actions[s]
                    .iter()
                    .enumerate()
                    .filter_map(|(a, action)| {
                        action
                            .signatures
                            .iter()
                            .position(|sig| support.iter().zip(sig).all(|(&k, &v)| sub.allows(k, v)))
                            .map(|sig| (a, sig))
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        RestrictedQuotient { quotient: self, sub: sub.clone(), kept }
    }

    /// Writes the quotient in the `.mdp` dump format.
    pub fn dump(&self) -> String {
        let family = self.family;
        let mut out = String::new();
        let _ = writeln!(out, "mdp {} {}", self.actions.len(), family.initial());
        for (s, actions) in self.actions.iter().enumerate() {
            for (a, action) in actions.iter().enumerate() {
                let sigs: Vec<String> = action
                    .signatures
                    .iter()
                    .map(|sig| {
                        let parts: Vec<String> = self.supports[s]
                            .iter()
                            .zip(sig)
                            .map(|(&k, v)| format!("{}={v}", family.params()[k].name))
                            .collect();
                        if parts.is_empty() { "-".to_string() } else { parts.join(",") }
                    })
                    .collect();
                let succ: Vec<String> =
                    action.distribution.iter().map(|(t, p)| format!("{t}:{}", format_rational(p))).collect();
                let _ = writeln!(out, "{s} {a} {} : {}", sigs.join("|"), succ.join(" "));
            }
        }
        out
    }
}

impl Mdp for Quotient<'_> {
    fn num_states(&self) -> usize {
        self.actions.len()
    }

    fn initial(&self) -> StateId {
        self.family.initial()
    }

    fn num_choices(&self, state: StateId) -> usize {
        self.actions[state].len()
    }

    fn successors(&self, state: StateId, choice: usize) -> &[(StateId, f64)] {
        &self.actions[state][choice].float
    }

    fn state_reward(&self, state: StateId) -> f64 {
        self.rewards[state]
    }
}

/// Two reachable choices that disagree on a parameter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conflict {
    pub param: ParamId,
    pub states: (StateId, StateId),
    pub values: (StateId, StateId),
}

/// The quotient seen through a subfamily. Choice `c` of state `s` is the
/// `c`-th merged action that some member of the subfamily can take; its
/// representative is the smallest signature inside the subfamily.
#[derive(Debug, Clone)]
pub struct RestrictedQuotient<'q, 'f> {
    quotient: &'q Quotient<'f>,
    sub: Subfamily,
    kept: Vec<Vec<(usize, usize)>>,
}

impl<'q, 'f> RestrictedQuotient<'q, 'f> {
    pub fn quotient(&self) -> &'q Quotient<'f> {
        self.quotient
    }

    pub fn subfamily(&self) -> &Subfamily {
        &self.sub
    }

    /// Index of the underlying merged action.
    pub fn action(&self, state: StateId, choice: usize) -> &'q MergedAction {
        &self.quotient.actions[state][self.kept[state][choice].0]
    }

    /// Representative assignment of a choice, aligned with the support.
    pub fn signature(&self, state: StateId, choice: usize) -> &'q [StateId] {
        let (a, sig) = self.kept[state][choice];
        &self.quotient.actions[state][a].signatures[sig]
    }

    /// Parameter values fixed by the scheduler's choice at `state`.
    pub fn assignment(&self, state: StateId, choice: usize) -> impl Iterator<Item = (ParamId, StateId)> + 'q {
        self.quotient.supports[state].iter().copied().zip(self.signature(state, choice).iter().copied())
    }

    /// Checks that the choices made at states reachable under `scheduler`
    /// agree on every parameter. Goal states are not expanded.
    pub fn check_consistency(&self, scheduler: &Scheduler, goal: &[bool]) -> Result<(), Conflict> {
        let reach = reachable_under(self, scheduler, goal);
        let mut fixed: Vec<Option<(StateId, StateId)>> = vec![None; self.quotient.family.params().len()];
        for s in (0..reach.len()).filter(|&s| reach[s] && !goal[s]) {
            for (k, v) in self.assignment(s, scheduler.choice(s)) {
                match fixed[k] {
                    None => fixed[k] = Some((s, v)),
                    Some((t, w)) if w != v => {
                        return Err(Conflict { param: k, states: (t, s), values: (w, v) });
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(())
    }

    pub fn is_consistent(&self, scheduler: &Scheduler, goal: &[bool]) -> bool {
        self.check_consistency(scheduler, goal).is_ok()
    }

    /// The members of the subfamily that agree with a consistent scheduler:
    /// parameters set by a reachable choice are fixed, the rest keep their
    /// current subsets.
    pub fn scheduler_to_realisations(&self, scheduler: &Scheduler, goal: &[bool]) -> Result<Subfamily, SynthesisError> {
        self.check_consistency(scheduler, goal).map_err(|_| SynthesisError::Inconsistent)?;
        let reach = reachable_under(self, scheduler, goal);
        let mut subsets: Vec<Vec<StateId>> = self.sub.subsets().to_vec();
        for s in (0..reach.len()).filter(|&s| reach[s] && !goal[s]) {
            for (k, v) in self.assignment(s, scheduler.choice(s)) {
                subsets[k] = vec![v];
            }
        }
        Ok(Subfamily::new(self.quotient.family, subsets)?)
    }

    /// The chain induced by a scheduler, with exact probabilities.
    pub fn induced_mc(&self, scheduler: &Scheduler) -> ConcreteMc {
        let rows = (0..self.num_states())
            .map(|s| self.action(s, scheduler.choice(s)).distribution.clone())
            .collect();
        ConcreteMc::new(rows, self.initial(), self.quotient.family.rewards().map(<[_]>::to_vec))
    }

    /// Whether `state` can still vary within the subfamily.
    pub fn is_parameter_dependent(&self, state: StateId) -> bool {
        self.quotient.supports[state].iter().any(|&k| self.sub.subset(k).len() >= 2)
    }
}

impl Mdp for RestrictedQuotient<'_, '_> {
    fn num_states(&self) -> usize {
        self.kept.len()
    }

    fn initial(&self) -> StateId {
        self.quotient.family.initial()
    }

    fn num_choices(&self, state: StateId) -> usize {
        self.kept[state].len()
    }

    fn successors(&self, state: StateId, choice: usize) -> &[(StateId, f64)] {
        &self.action(state, choice).float
    }

    fn state_reward(&self, state: StateId) -> f64 {
        self.quotient.rewards[state]
    }
}
