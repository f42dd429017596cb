//! Synthesis for finite families of Markov chains.
//!
//! A family fixes a state space and lets discrete parameters choose
//! successors. The crate answers threshold, optimum and feasibility queries
//! over all members by abstraction refinement on a quotient MDP, and ships
//! the brute-force baselines it is checked against.

pub mod engine;
pub mod error;
pub mod exact;
pub mod family;
pub mod format;
pub mod quotient;
pub mod synthesis;
pub mod allinone;
pub mod baselines;
pub mod generator;
pub mod smt;

pub use error::{FormatError, ModelError, SmtError, SolveError, SynthesisError};
pub use family::{
    ConcreteMc, Direction, FamilyModel, Measure, ParamId, Parameter, Query, Realisation, Relation, Specification,
    StateId, Subfamily, Weight,
};
