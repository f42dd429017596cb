#![allow(dead_code)]

use std::time::Duration;

use famsynth::family::{FamilyModel, Measure, Query, Relation, Specification};
use famsynth::format::FamilyDocument;
use num_rational::BigRational;

pub const SOLVER_TIMEOUT: Duration = Duration::from_secs(60);

/// Solver command from `FAMSYNTH_SOLVER`, else `z3` if it runs.
pub fn solver_command() -> Option<String> {
    if let Ok(cmd) = std::env::var("FAMSYNTH_SOLVER") {
        if !cmd.trim().is_empty() {
            return Some(cmd);
        }
    }
    std::process::Command::new("z3")
        .arg("-version")
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|_| "z3".to_string())
}

pub fn spec_named(doc: &FamilyDocument, name: &str) -> Specification {
    doc.specs.iter().find(|(n, _)| n == name).map(|(_, s)| s.clone()).expect("named spec")
}

pub fn reward_le(goal: &str, kappa: BigRational) -> Specification {
    Specification {
        measure: Measure::Reward,
        query: Query::Threshold { relation: Relation::Le, threshold: kappa },
        goal: goal.into(),
    }
}

pub fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

pub fn has_rewards(family: &FamilyModel) -> bool {
    family.rewards().is_some()
}
