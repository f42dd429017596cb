//! The all-in-one MDP: a fresh initial state picks a member, then the chosen
//! chain runs on its own copy of the state space.

use std::collections::{HashMap, VecDeque};

use num_traits::ToPrimitive;

use crate::engine::{SparseMdp, SparseMdpBuilder};
use crate::error::SynthesisError;
use crate::family::{ConcreteMc, FamilyModel, Realisation, StateId};

/// Default bound on `states x members`.
pub const DEFAULT_ALL_IN_ONE_CAP: u128 = 100_000;

#[derive(Debug, Clone)]
pub struct AllInOne {
    pub mdp: SparseMdp,
    pub members: Vec<Realisation>,
    /// MDP state of `(s0, r)` for every member.
    pub entries: Vec<StateId>,
    /// `(state, member)` behind every MDP state except the fresh initial one.
    pub origin: Vec<Option<(StateId, usize)>>,
}

impl AllInOne {
    /// Lifts a goal mask over family states to the product.
    pub fn goal_mask(&self, goal: &[bool]) -> Vec<bool> {
        self.origin.iter().map(|o| o.is_some_and(|(s, _)| goal[s])).collect()
    }
}

/// Builds the part of the all-in-one MDP reachable from its fresh initial
/// state. Fails when `states x members` exceeds `cap`.
pub fn build_all_in_one(family: &FamilyModel, cap: u128) -> Result<AllInOne, SynthesisError> {
    let size = family.num_states() as u128 * family.num_realisations();
    if size > cap {
        return Err(SynthesisError::SizeCap { size, cap });
    }
    let members: Vec<Realisation> = family.all_realisations().collect();
    let chains: Vec<ConcreteMc> = members.iter().map(|r| family.instantiate(r)).collect::<Result<_, _>>()?;
    let reward = |s: StateId| family.rewards().map_or(0.0, |r| r[s].to_f64().unwrap_or(f64::INFINITY));

    // Number the product states in BFS order, fresh initial first.
    let mut index: HashMap<(StateId, usize), StateId> = HashMap::new();
    let mut origin = vec![None];
    let mut queue = VecDeque::new();
    let mut entries = Vec::with_capacity(members.len());
    for m in 0..members.len() {
        let key = (family.initial(), m);
        let id = *index.entry(key).or_insert_with(|| {
            origin.push(Some(key));
            queue.push_back(key);
            origin.len() - 1
        });
        entries.push(id);
    }
    let mut rows: Vec<Vec<(StateId, f64)>> = vec![Vec::new(); origin.len()];
    while let Some((s, m)) = queue.pop_front() {
        let id = index[&(s, m)];
        let mut row = Vec::new();
        for (t, p) in chains[m].row(s) {
            let key = (*t, m);
            let tid = *index.entry(key).or_insert_with(|| {
                origin.push(Some(key));
                queue.push_back(key);
                origin.len() - 1
            });
            row.push((tid, p.to_f64().unwrap_or(0.0)));
        }
        if rows.len() < origin.len() {
            rows.resize(origin.len(), Vec::new());
        }
        rows[id] = row;
    }

    let mut b = SparseMdpBuilder::new();
    b.add_state(0.0);
    for (m, &e) in entries.iter().enumerate() {
        b.add_action(m, [(e, 1.0)]);
    }
    for (id, o) in origin.iter().enumerate().skip(1) {
        let (s, _) = o.expect("product state");
        b.add_state(reward(s));
        b.add_action(0, rows[id].iter().copied());
    }
    let mdp = b.build(0)?;
    Ok(AllInOne { mdp, members, entries, origin })
}
