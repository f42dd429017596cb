//! Families of Markov chains: parameters, realisations, subfamilies and
//! instantiation of concrete chains.
//!
//! A family shares one state space. Each state carries a distribution over
//! *parameters*, and every parameter ranges over a finite, ordered set of
//! successor states. Fixing one value per parameter (a [`Realisation`]) turns
//! the family into an ordinary Markov chain.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::ModelError;

pub type StateId = usize;
pub type ParamId = usize;

/// A discrete parameter together with its ordered domain of successor states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Parameter {
    pub name: String,
    pub domain: Vec<StateId>,
}

/// One `prob : param` summand of a parametric row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Weight {
    pub prob: BigRational,
    pub param: ParamId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilyModel {
    num_states: usize,
    initial: StateId,
    params: Vec<Parameter>,
    rows: Vec<Vec<Weight>>,
    rewards: Option<Vec<BigRational>>,
    labels: BTreeMap<String, BTreeSet<StateId>>,
}

impl FamilyModel {
    pub fn new(
        num_states: usize,
        initial: StateId,
        params: Vec<Parameter>,
        rows: Vec<Vec<Weight>>,
        rewards: Option<Vec<BigRational>>,
        labels: BTreeMap<String, BTreeSet<StateId>>,
    ) -> Result<Self, ModelError> {
        if num_states == 0 {
            return Err(ModelError::NoStates);
        }
        if initial >= num_states {
            return Err(ModelError::StateOutOfRange { state: initial });
        }
        let mut names = BTreeSet::new();
        for p in &params {
            if !names.insert(p.name.as_str()) {
                return Err(ModelError::DuplicateParameter { name: p.name.clone() });
            }
            if p.domain.is_empty() {
                return Err(ModelError::EmptyDomain { param: p.name.clone() });
            }
            let mut seen = BTreeSet::new();
            for &v in &p.domain {
                if v >= num_states {
                    return Err(ModelError::StateOutOfRange { state: v });
                }
                if !seen.insert(v) {
                    return Err(ModelError::DuplicateDomainValue { param: p.name.clone(), value: v });
                }
            }
        }
        if rows.len() != num_states {
            return Err(ModelError::MissingRow { state: rows.len().min(num_states) });
        }
        for (s, row) in rows.iter().enumerate() {
            if row.is_empty() {
                return Err(ModelError::MissingRow { state: s });
            }
            let mut used = BTreeSet::new();
            let mut sum = BigRational::zero();
            for w in row {
                if w.param >= params.len() {
                    return Err(ModelError::UnknownParameter { name: format!("#{}", w.param) });
                }
                if !w.prob.is_positive() || w.prob > BigRational::one() {
                    return Err(ModelError::InvalidWeight { state: s });
                }
                if !used.insert(w.param) {
                    return Err(ModelError::RepeatedParameter {
                        state: s,
                        param: params[w.param].name.clone(),
                    });
                }
                sum += &w.prob;
            }
            if !sum.is_one() {
                return Err(ModelError::RowSum { state: s, sum: sum.to_string() });
            }
        }
        if let Some(rew) = &rewards {
            if rew.len() != num_states {
                return Err(ModelError::MissingRow { state: rew.len().min(num_states) });
            }
            if let Some(s) = rew.iter().position(|r| r.is_negative()) {
                return Err(ModelError::NegativeReward { state: s });
            }
        }
        for states in labels.values() {
            if let Some(&s) = states.iter().find(|&&s| s >= num_states) {
                return Err(ModelError::StateOutOfRange { state: s });
            }
        }
        Ok(Self { num_states, initial, params, rows, rewards, labels })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn params(&self) -> &[Parameter] {
        &self.params
    }

    pub fn param_index(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn row(&self, state: StateId) -> &[Weight] {
        &self.rows[state]
    }

    pub fn rewards(&self) -> Option<&[BigRational]> {
        self.rewards.as_deref()
    }

    pub fn labels(&self) -> &BTreeMap<String, BTreeSet<StateId>> {
        &self.labels
    }

    /// Parameters occurring in the row of `state`, in declaration order.
    pub fn support(&self, state: StateId) -> Vec<ParamId> {
        let mut ks: Vec<ParamId> = self.rows[state].iter().map(|w| w.param).collect();
        ks.sort_unstable();
        ks
    }

    /// Goal set of a label as a state mask.
    pub fn goal_mask(&self, label: &str) -> Result<Vec<bool>, ModelError> {
        let states = self
            .labels
            .get(label)
            .ok_or_else(|| ModelError::UnknownLabel { name: label.to_string() })?;
        let mut mask = vec![false; self.num_states];
        for &s in states {
            mask[s] = true;
        }
        Ok(mask)
    }

    /// `|R^D|`, saturating at `u128::MAX`.
    pub fn num_realisations(&self) -> u128 {
        self.params
            .iter()
            .fold(1u128, |acc, p| acc.saturating_mul(p.domain.len() as u128))
    }

    pub fn full_subfamily(&self) -> Subfamily {
        Subfamily { subsets: self.params.iter().map(|p| p.domain.clone()).collect() }
    }

    /// All realisations in lexicographic order over the ordered domains.
    pub fn all_realisations(&self) -> Members {
        self.full_subfamily().members()
    }

    pub fn check_realisation(&self, r: &Realisation) -> Result<(), ModelError> {
        if r.values.len() != self.params.len() {
            return Err(ModelError::InvalidRealisation {
                reason: format!("expected {} values, got {}", self.params.len(), r.values.len()),
            });
        }
        for (p, &v) in self.params.iter().zip(&r.values) {
            if !p.domain.contains(&v) {
                return Err(ModelError::InvalidRealisation {
                    reason: format!("value {v} outside the domain of {}", p.name),
                });
            }
        }
        Ok(())
    }

    /// Builds the chain `D_r`. Weights of distinct parameters that resolve to
    /// the same successor are added up.
    pub fn instantiate(&self, r: &Realisation) -> Result<ConcreteMc, ModelError> {
        self.check_realisation(r)?;
        let rows: Vec<Vec<(StateId, BigRational)>> = self
            .rows
            .iter()
            .map(|row| {
                let mut dist: BTreeMap<StateId, BigRational> = BTreeMap::new();
                for w in row {
                    *dist.entry(r.values[w.param]).or_insert_with(BigRational::zero) += &w.prob;
                }
                dist.into_iter().collect()
            })
            .collect();
        Ok(ConcreteMc::new(rows, self.initial, self.rewards.clone()))
    }
}

/// A total assignment of parameters to domain values, indexed by [`ParamId`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Realisation {
    pub values: Vec<StateId>,
}

impl Realisation {
    pub fn new(values: Vec<StateId>) -> Self {
        Self { values }
    }

    pub fn get(&self, k: ParamId) -> StateId {
        self.values[k]
    }

    /// Renders the assignment as `k0=0 k1=1 ...`.
    pub fn display<'a>(&'a self, family: &'a FamilyModel) -> impl fmt::Display + 'a {
        DisplayRealisation { r: self, family }
    }
}

struct DisplayRealisation<'a> {
    r: &'a Realisation,
    family: &'a FamilyModel,
}

impl fmt::Display for DisplayRealisation<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (p, v)) in self.family.params().iter().zip(&self.r.values).enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{}={}", p.name, v)?;
        }
        Ok(())
    }
}

/// A Cartesian product of per-parameter value subsets. Subsets keep the
/// order of the parameter's domain.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Subfamily {
    subsets: Vec<Vec<StateId>>,
}

impl Subfamily {
    /// Builds a subfamily, checking every subset against the family domains.
    pub fn new(family: &FamilyModel, subsets: Vec<Vec<StateId>>) -> Result<Self, ModelError> {
        if subsets.len() != family.params().len() {
            return Err(ModelError::InvalidSubfamily {
                reason: format!("expected {} subsets, got {}", family.params().len(), subsets.len()),
            });
        }
        let mut ordered = Vec::with_capacity(subsets.len());
        for (p, subset) in family.params().iter().zip(subsets) {
            if subset.is_empty() {
                return Err(ModelError::InvalidSubfamily {
                    reason: format!("empty subset for {}", p.name),
                });
            }
            if let Some(v) = subset.iter().find(|v| !p.domain.contains(v)) {
                return Err(ModelError::InvalidSubfamily {
                    reason: format!("value {v} outside the domain of {}", p.name),
                });
            }
            ordered.push(p.domain.iter().copied().filter(|v| subset.contains(v)).collect());
        }
        Ok(Self { subsets: ordered })
    }

    pub fn from_realisation(r: &Realisation) -> Self {
        Self { subsets: r.values.iter().map(|&v| vec![v]).collect() }
    }

    pub fn subsets(&self) -> &[Vec<StateId>] {
        &self.subsets
    }

    pub fn subset(&self, k: ParamId) -> &[StateId] {
        &self.subsets[k]
    }

    pub fn size(&self) -> u128 {
        self.subsets
            .iter()
            .fold(1u128, |acc, s| acc.saturating_mul(s.len() as u128))
    }

    pub fn is_singleton(&self) -> bool {
        self.subsets.iter().all(|s| s.len() == 1)
    }

    pub fn to_realisation(&self) -> Option<Realisation> {
        self.is_singleton()
            .then(|| Realisation::new(self.subsets.iter().map(|s| s[0]).collect()))
    }

    /// The lexicographically smallest member.
    pub fn first_member(&self) -> Realisation {
        Realisation::new(self.subsets.iter().map(|s| s[0]).collect())
    }

    pub fn contains(&self, r: &Realisation) -> bool {
        r.values.len() == self.subsets.len()
            && self.subsets.iter().zip(&r.values).all(|(s, v)| s.contains(v))
    }

    pub fn allows(&self, k: ParamId, value: StateId) -> bool {
        self.subsets[k].contains(&value)
    }

    pub fn members(&self) -> Members {
        Members { subsets: self.subsets.clone(), cursor: Some(vec![0; self.subsets.len()]) }
    }

    /// Splits on parameter `k` into the members taking a value in `keep` and
    /// the rest.
    pub fn split(&self, k: ParamId, keep: &[StateId]) -> Result<(Subfamily, Subfamily), ModelError> {
        let current = self.subsets.get(k).ok_or_else(|| ModelError::InvalidSplit {
            reason: format!("no parameter #{k}"),
        })?;
        if keep.is_empty() {
            return Err(ModelError::InvalidSplit { reason: "empty predicate".into() });
        }
        if let Some(v) = keep.iter().find(|v| !current.contains(v)) {
            return Err(ModelError::InvalidSplit {
                reason: format!("value {v} not in the current subset"),
            });
        }
        let (inside, outside): (Vec<StateId>, Vec<StateId>) =
            current.iter().partition(|v| keep.contains(v));
        if outside.is_empty() {
            return Err(ModelError::InvalidSplit { reason: "predicate is not a proper subset".into() });
        }
        let mut top = self.clone();
        top.subsets[k] = inside;
        let mut bottom = self.clone();
        bottom.subsets[k] = outside;
        Ok((top, bottom))
    }

    /// Renders as `k0={0} k1={0,1} ...`.
    pub fn display<'a>(&'a self, family: &'a FamilyModel) -> impl fmt::Display + 'a {
        DisplaySubfamily { sub: self, family }
    }
}

struct DisplaySubfamily<'a> {
    sub: &'a Subfamily,
    family: &'a FamilyModel,
}

impl fmt::Display for DisplaySubfamily<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (p, subset)) in self.family.params().iter().zip(&self.sub.subsets).enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{}={{", p.name)?;
            for (j, v) in subset.iter().enumerate() {
                if j > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{v}")?;
            }
            f.write_str("}")?;
        }
        Ok(())
    }
}

/// Odometer over the members of a subfamily; the last parameter varies fastest.
#[derive(Debug, Clone)]
pub struct Members {
    subsets: Vec<Vec<StateId>>,
    cursor: Option<Vec<usize>>,
}

impl Iterator for Members {
    type Item = Realisation;

    fn next(&mut self) -> Option<Realisation> {
        let cursor = self.cursor.as_mut()?;
        let item = Realisation::new(
            cursor.iter().zip(&self.subsets).map(|(&i, s)| s[i]).collect(),
        );
        let mut pos = cursor.len();
        loop {
            if pos == 0 {
                self.cursor = None;
                break;
            }
            pos -= 1;
            cursor[pos] += 1;
            if cursor[pos] < self.subsets[pos].len() {
                break;
            }
            cursor[pos] = 0;
        }
        Some(item)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Measure {
    Probability,
    Reward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Lt,
    Le,
    Ge,
    Gt,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Lt => "<",
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Gt => ">",
        }
    }

    pub fn negate(self) -> Relation {
        match self {
            Relation::Lt => Relation::Ge,
            Relation::Le => Relation::Gt,
            Relation::Ge => Relation::Lt,
            Relation::Gt => Relation::Le,
        }
    }

    /// Whether the relation prefers larger values.
    pub fn is_lower_bound(self) -> bool {
        matches!(self, Relation::Ge | Relation::Gt)
    }

    pub fn holds<T: PartialOrd>(self, value: &T, threshold: &T) -> bool {
        match self {
            Relation::Lt => value < threshold,
            Relation::Le => value <= threshold,
            Relation::Ge => value >= threshold,
            Relation::Gt => value > threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Query {
    Threshold { relation: Relation, threshold: BigRational },
    Optimum(Direction),
}

/// An unbounded reachability (or reachability-reward) specification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Specification {
    pub measure: Measure,
    pub query: Query,
    pub goal: String,
}

impl Specification {
    pub fn threshold(&self) -> Option<(Relation, &BigRational)> {
        match &self.query {
            Query::Threshold { relation, threshold } => Some((*relation, threshold)),
            Query::Optimum(_) => None,
        }
    }

    pub fn direction(&self) -> Option<Direction> {
        match self.query {
            Query::Optimum(d) => Some(d),
            Query::Threshold { .. } => None,
        }
    }
}

impl fmt::Display for Specification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.measure {
            Measure::Probability => "P",
            Measure::Reward => "E",
        };
        match &self.query {
            Query::Threshold { relation, threshold } => {
                write!(f, "{op}{}{}", relation.symbol(), crate::format::format_rational(threshold))?
            }
            Query::Optimum(Direction::Max) => write!(f, "{op}max")?,
            Query::Optimum(Direction::Min) => write!(f, "{op}min")?,
        }
        write!(f, " F \"{}\"", self.goal)
    }
}

/// A concrete chain `D_r` with exact transition probabilities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConcreteMc {
    rows: Vec<Vec<(StateId, BigRational)>>,
    initial: StateId,
    rewards: Option<Vec<BigRational>>,
    reachable: Vec<bool>,
}

impl ConcreteMc {
    pub fn new(
        rows: Vec<Vec<(StateId, BigRational)>>,
        initial: StateId,
        rewards: Option<Vec<BigRational>>,
    ) -> Self {
        let mut reachable = vec![false; rows.len()];
        let mut queue = VecDeque::from([initial]);
        reachable[initial] = true;
        while let Some(s) = queue.pop_front() {
            for (t, _) in &rows[s] {
                if !reachable[*t] {
                    reachable[*t] = true;
                    queue.push_back(*t);
                }
            }
        }
        Self { rows, initial, rewards, reachable }
    }

    pub fn num_states(&self) -> usize {
        self.rows.len()
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn row(&self, s: StateId) -> &[(StateId, BigRational)] {
        &self.rows[s]
    }

    pub fn rewards(&self) -> Option<&[BigRational]> {
        self.rewards.as_deref()
    }

    pub fn reachable(&self) -> &[bool] {
        &self.reachable
    }

    pub fn reachable_states(&self) -> Vec<StateId> {
        (0..self.rows.len()).filter(|&s| self.reachable[s]).collect()
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    pub fn example1() -> FamilyModel {
        let params = vec![
            Parameter { name: "k0".into(), domain: vec![0] },
            Parameter { name: "k1".into(), domain: vec![0, 1] },
            Parameter { name: "k2".into(), domain: vec![2, 3] },
        ];
        let w = |p, k| Weight { prob: q(p, 2), param: k };
        let rows = vec![
            vec![w(1, 0), w(1, 1)],
            vec![w(1, 1), w(1, 2)],
            vec![w(2, 2)],
            vec![w(1, 1), w(1, 2)],
        ];
        let labels = BTreeMap::from([("one".to_string(), BTreeSet::from([1]))]);
        FamilyModel::new(4, 0, params, rows, None, labels).unwrap()
    }

    #[test]
    fn instantiate_merges_weights_on_shared_successor() {
        let fam = example1();
        let mc = fam.instantiate(&Realisation::new(vec![0, 0, 2])).unwrap();
        assert_eq!(mc.row(0), &[(0, q(1, 1))]);
        assert_eq!(mc.reachable_states(), vec![0]);
    }

    #[test]
    fn instantiate_r2() {
        let fam = example1();
        let mc = fam.instantiate(&Realisation::new(vec![0, 1, 2])).unwrap();
        assert_eq!(mc.row(0), &[(0, q(1, 2)), (1, q(1, 2))]);
        assert_eq!(mc.reachable_states(), vec![0, 1, 2]);
    }

    #[test]
    fn instantiate_single_state_self_loop() {
        let fam = FamilyModel::new(
            1,
            0,
            vec![Parameter { name: "k0".into(), domain: vec![0] }],
            vec![vec![Weight { prob: q(1, 1), param: 0 }]],
            None,
            BTreeMap::new(),
        )
        .unwrap();
        let rs: Vec<_> = fam.all_realisations().collect();
        assert_eq!(rs.len(), 1);
        let mc = fam.instantiate(&rs[0]).unwrap();
        assert_eq!(mc.row(0), &[(0, q(1, 1))]);
        assert_eq!(mc.reachable_states(), vec![0]);
    }

    #[test]
    fn invalid_realisations_are_rejected() {
        let fam = example1();
        assert!(matches!(
            fam.instantiate(&Realisation::new(vec![0, 1])),
            Err(ModelError::InvalidRealisation { .. })
        ));
        assert!(matches!(
            fam.instantiate(&Realisation::new(vec![0, 2, 2])),
            Err(ModelError::InvalidRealisation { .. })
        ));
    }

    #[test]
    fn realisations_of_example1() {
        let fam = example1();
        let all: Vec<_> = fam.all_realisations().map(|r| r.values).collect();
        assert_eq!(all, vec![vec![0, 0, 2], vec![0, 0, 3], vec![0, 1, 2], vec![0, 1, 3]]);
        assert_eq!(fam.num_realisations(), 4);
    }

    #[test]
    fn realisations_count_matches_product() {
        let params = vec![
            Parameter { name: "a".into(), domain: vec![0, 1] },
            Parameter { name: "b".into(), domain: vec![0, 1, 2] },
            Parameter { name: "c".into(), domain: vec![0, 1, 2, 3] },
        ];
        let rows = (0..4).map(|_| vec![Weight { prob: q(1, 1), param: 2 }]).collect();
        let fam = FamilyModel::new(4, 0, params, rows, None, BTreeMap::new()).unwrap();
        let set: BTreeSet<_> = fam.all_realisations().collect();
        assert_eq!(set.len(), 24);
        let single = FamilyModel::new(
            3,
            0,
            vec![Parameter { name: "k".into(), domain: vec![0, 1, 2] }],
            (0..3).map(|_| vec![Weight { prob: q(1, 1), param: 0 }]).collect(),
            None,
            BTreeMap::new(),
        )
        .unwrap();
        assert_eq!(single.all_realisations().count(), 3);
    }

    #[test]
    fn split_partitions_members() {
        let fam = example1();
        let sub = fam.full_subfamily();
        let (top, bottom) = sub.split(1, &[1]).unwrap();
        assert_eq!(top.subsets(), &[vec![0], vec![1], vec![2, 3]]);
        assert_eq!(bottom.subsets(), &[vec![0], vec![0], vec![2, 3]]);
        assert_eq!(top.size() + bottom.size(), sub.size());

        let mut union: BTreeSet<_> = top.members().collect();
        union.extend(bottom.members());
        assert_eq!(union, sub.members().collect());
    }

    #[test]
    fn split_three_values() {
        let fam = FamilyModel::new(
            3,
            0,
            vec![Parameter { name: "k".into(), domain: vec![0, 1, 2] }],
            (0..3).map(|_| vec![Weight { prob: q(1, 1), param: 0 }]).collect(),
            None,
            BTreeMap::new(),
        )
        .unwrap();
        let (a, b) = fam.full_subfamily().split(0, &[0, 1]).unwrap();
        assert_eq!((a.size(), b.size()), (2, 1));
    }

    #[test]
    fn invalid_splits() {
        let fam = example1();
        let sub = fam.full_subfamily();
        assert!(matches!(sub.split(0, &[0]), Err(ModelError::InvalidSplit { .. })));
        assert!(matches!(sub.split(1, &[]), Err(ModelError::InvalidSplit { .. })));
        assert!(matches!(sub.split(1, &[0, 1]), Err(ModelError::InvalidSplit { .. })));
    }

    #[test]
    fn singleton_round_trip() {
        let fam = example1();
        for r in fam.all_realisations() {
            let sub = Subfamily::from_realisation(&r);
            assert!(sub.is_singleton());
            assert_eq!(sub.to_realisation(), Some(r));
        }
    }

    #[test]
    fn model_validation() {
        let p = vec![Parameter { name: "k".into(), domain: vec![0] }];
        let bad_sum = FamilyModel::new(
            1,
            0,
            p.clone(),
            vec![vec![Weight { prob: q(9, 10), param: 0 }]],
            None,
            BTreeMap::new(),
        );
        assert!(matches!(bad_sum, Err(ModelError::RowSum { .. })));
        let empty = FamilyModel::new(
            1,
            0,
            vec![Parameter { name: "k".into(), domain: vec![] }],
            vec![vec![Weight { prob: q(1, 1), param: 0 }]],
            None,
            BTreeMap::new(),
        );
        assert!(matches!(empty, Err(ModelError::EmptyDomain { .. })));
        let dup = FamilyModel::new(
            1,
            0,
            p,
            vec![vec![Weight { prob: q(1, 2), param: 0 }, Weight { prob: q(1, 2), param: 0 }]],
            None,
            BTreeMap::new(),
        );
        assert!(matches!(dup, Err(ModelError::RepeatedParameter { .. })));
    }
}
