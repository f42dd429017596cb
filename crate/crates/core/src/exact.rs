//! Exact rational solver for concrete chains.
//!
//! Used as the ground truth for the float engine and by the one-by-one
//! baseline. Solves the reachability (or reward) linear system by Gaussian
//! elimination over `BigRational`.

use std::collections::VecDeque;

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::ModelError;
use crate::family::{ConcreteMc, Measure, Specification, StateId};

/// Value of a chain at one state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExactValue {
    Finite(BigRational),
    /// Expected reward where the goal is not reached almost surely.
    Undefined,
}

impl ExactValue {
    pub fn finite(&self) -> Option<&BigRational> {
        match self {
            ExactValue::Finite(v) => Some(v),
            ExactValue::Undefined => None,
        }
    }

    /// Float view; `Undefined` maps to `+inf`.
    pub fn to_f64(&self) -> f64 {
        use num_traits::ToPrimitive;
        match self {
            ExactValue::Finite(v) => v.to_f64().unwrap_or(f64::NAN),
            ExactValue::Undefined => f64::INFINITY,
        }
    }
}

/// States reachable from the initial state without expanding goal states.
fn relevant_states(mc: &ConcreteMc, goal: &[bool]) -> Vec<bool> {
    let mut seen = vec![false; mc.num_states()];
    let mut queue = VecDeque::from([mc.initial()]);
    seen[mc.initial()] = true;
    while let Some(s) = queue.pop_front() {
        if goal[s] {
            continue;
        }
        for (t, _) in mc.row(s) {
            if !seen[*t] {
                seen[*t] = true;
                queue.push_back(*t);
            }
        }
    }
    seen
}

/// States with a path to the goal.
fn can_reach(mc: &ConcreteMc, goal: &[bool]) -> Vec<bool> {
    let n = mc.num_states();
    let mut preds = vec![Vec::new(); n];
    for s in (0..n).filter(|&s| !goal[s]) {
        for (t, _) in mc.row(s) {
            preds[*t].push(s);
        }
    }
    let mut reach = goal.to_vec();
    let mut queue: VecDeque<StateId> = (0..n).filter(|&s| goal[s]).collect();
    while let Some(t) = queue.pop_front() {
        for &s in &preds[t] {
            if !reach[s] {
                reach[s] = true;
                queue.push_back(s);
            }
        }
    }
    reach
}

/// Solves `A x = b` for a non-singular square system.
fn gauss(mut a: Vec<Vec<BigRational>>, mut b: Vec<BigRational>) -> Vec<BigRational> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero()).expect("singular system");
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = BigRational::one() / &a[col][col];
        for j in col..n {
            a[col][j] = &a[col][j] * &inv;
        }
        b[col] = &b[col] * &inv;
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone();
            for j in col..n {
                let delta = &factor * &a[col][j];
                a[r][j] -= delta;
            }
            let delta = &factor * &b[col];
            b[r] -= delta;
        }
    }
    b
}

/// Builds and solves `x_s = c_s + sum_t P(s,t) x_t` over `unknown` states,
/// where successors outside `unknown` contribute `known(t)`.
fn solve_system(
    mc: &ConcreteMc,
    unknown: &[StateId],
    constant: impl Fn(StateId) -> BigRational,
    known: impl Fn(StateId) -> BigRational,
) -> Vec<Option<BigRational>> {
    let n = mc.num_states();
    let mut index = vec![usize::MAX; n];
    for (i, &s) in unknown.iter().enumerate() {
        index[s] = i;
    }
    let m = unknown.len();
    let mut a = vec![vec![BigRational::zero(); m]; m];
    let mut b = vec![BigRational::zero(); m];
    for (i, &s) in unknown.iter().enumerate() {
        a[i][i] += BigRational::one();
        b[i] = constant(s);
        for (t, p) in mc.row(s) {
            if index[*t] != usize::MAX {
                a[i][index[*t]] -= p;
            } else {
                b[i] += p * known(*t);
            }
        }
    }
    let x = gauss(a, b);
    let mut out = vec![None; n];
    for (i, &s) in unknown.iter().enumerate() {
        out[s] = Some(x[i].clone());
    }
    out
}

/// Reachability probabilities of every state relevant from the initial
/// state. Irrelevant states get `None`.
pub fn reach_probabilities(mc: &ConcreteMc, goal: &[bool]) -> Vec<Option<BigRational>> {
    let relevant = relevant_states(mc, goal);
    let reach = can_reach(mc, goal);
    let unknown: Vec<StateId> = (0..mc.num_states()).filter(|&s| relevant[s] && reach[s] && !goal[s]).collect();
    let mut out = solve_system(mc, &unknown, |_| BigRational::zero(), |t| {
        if goal[t] { BigRational::one() } else { BigRational::zero() }
    });
    for s in 0..mc.num_states() {
        if relevant[s] && out[s].is_none() {
            out[s] = Some(if goal[s] { BigRational::one() } else { BigRational::zero() });
        }
    }
    out
}

/// Expected rewards until the goal for every relevant state.
pub fn expected_rewards(mc: &ConcreteMc, goal: &[bool]) -> Result<Vec<Option<ExactValue>>, ModelError> {
    let rewards = mc.rewards().ok_or(ModelError::MissingRewards)?;
    let probs = reach_probabilities(mc, goal);
    let sure: Vec<bool> = probs.iter().map(|p| p.as_ref().is_some_and(|p| p.is_one())).collect();
    let unknown: Vec<StateId> = (0..mc.num_states()).filter(|&s| sure[s] && !goal[s]).collect();
    let values = solve_system(mc, &unknown, |s| rewards[s].clone(), |_| BigRational::zero());
    Ok((0..mc.num_states())
        .map(|s| {
            probs[s].as_ref().map(|_| {
                if goal[s] {
                    ExactValue::Finite(BigRational::zero())
                } else if let Some(v) = &values[s] {
                    ExactValue::Finite(v.clone())
                } else {
                    ExactValue::Undefined
                }
            })
        })
        .collect())
}

/// Value of the chain at its initial state.
pub fn exact_value(mc: &ConcreteMc, measure: Measure, goal: &[bool]) -> Result<ExactValue, ModelError> {
    let init = mc.initial();
    match measure {
        Measure::Probability => Ok(ExactValue::Finite(
            reach_probabilities(mc, goal)[init].clone().expect("initial state is relevant"),
        )),
        Measure::Reward => Ok(expected_rewards(mc, goal)?[init].clone().expect("initial state is relevant")),
    }
}

/// Exact value and, for threshold specifications, the verdict. An undefined
/// reward satisfies no threshold.
pub fn exact_check(
    mc: &ConcreteMc,
    spec: &Specification,
    goal: &[bool],
) -> Result<(ExactValue, Option<bool>), ModelError> {
    let value = exact_value(mc, spec.measure, goal)?;
    let verdict = spec.threshold().map(|(rel, t)| match &value {
        ExactValue::Finite(v) => rel.holds(v, t),
        ExactValue::Undefined => false,
    });
    Ok((value, verdict))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::tests::{example1, q};
    use crate::family::Realisation;

    fn mc(rows: Vec<Vec<(StateId, BigRational)>>, rewards: Option<Vec<BigRational>>) -> ConcreteMc {
        ConcreteMc::new(rows, 0, rewards)
    }

    #[test]
    fn example_members() {
        let fam = example1();
        let goal = fam.goal_mask("one").unwrap();
        let expect = [(vec![0, 0, 2], 0), (vec![0, 0, 3], 0), (vec![0, 1, 2], 1), (vec![0, 1, 3], 1)];
        for (r, v) in expect {
            let d = fam.instantiate(&Realisation::new(r)).unwrap();
            assert_eq!(exact_value(&d, Measure::Probability, &goal).unwrap(), ExactValue::Finite(q(v, 1)));
        }
    }

    #[test]
    fn two_outcomes() {
        // 0 -> {0:1/4, 1:1/4, 2:1/2}; 1 goal; 2 sink. Value 1/3.
        let d = mc(
            vec![vec![(0, q(1, 4)), (1, q(1, 4)), (2, q(1, 2))], vec![(1, q(1, 1))], vec![(2, q(1, 1))]],
            None,
        );
        let v = exact_value(&d, Measure::Probability, &[false, true, false]).unwrap();
        assert_eq!(v, ExactValue::Finite(q(1, 3)));
    }

    #[test]
    fn rewards() {
        let d = mc(vec![vec![(0, q(1, 2)), (1, q(1, 2))], vec![(1, q(1, 1))]], Some(vec![q(1, 1), q(0, 1)]));
        let v = exact_value(&d, Measure::Reward, &[false, true]).unwrap();
        assert_eq!(v, ExactValue::Finite(q(2, 1)));

        let leaky = mc(
            vec![vec![(1, q(1, 2)), (2, q(1, 2))], vec![(1, q(1, 1))], vec![(2, q(1, 1))]],
            Some(vec![q(1, 1), q(0, 1), q(0, 1)]),
        );
        assert_eq!(exact_value(&leaky, Measure::Reward, &[false, true, false]).unwrap(), ExactValue::Undefined);
    }

    #[test]
    fn goal_initial() {
        let d = mc(vec![vec![(0, q(1, 1))]], Some(vec![q(5, 1)]));
        assert_eq!(exact_value(&d, Measure::Reward, &[true]).unwrap(), ExactValue::Finite(q(0, 1)));
        assert_eq!(exact_value(&d, Measure::Probability, &[true]).unwrap(), ExactValue::Finite(q(1, 1)));
    }
}
