use thiserror::Error;

use crate::family::StateId;

/// Violations of the family-model invariants.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("model has no states")]
    NoStates,
    #[error("state {state} is out of range")]
    StateOutOfRange { state: StateId },
    #[error("parameter `{name}` is declared twice")]
    DuplicateParameter { name: String },
    #[error("parameter `{param}` has an empty domain")]
    EmptyDomain { param: String },
    #[error("value {value} occurs twice in the domain of `{param}`")]
    DuplicateDomainValue { param: String, value: StateId },
    #[error("state {state} has no transition row")]
    MissingRow { state: StateId },
    #[error("unknown parameter `{name}`")]
    UnknownParameter { name: String },
    #[error("row of state {state} has a weight outside (0, 1]")]
    InvalidWeight { state: StateId },
    #[error("row of state {state} mentions `{param}` more than once")]
    RepeatedParameter { state: StateId, param: String },
    #[error("row of state {state} sums to {sum}, not 1")]
    RowSum { state: StateId, sum: String },
    #[error("state {state} has a negative reward")]
    NegativeReward { state: StateId },
    #[error("unknown label `{name}`")]
    UnknownLabel { name: String },
    #[error("invalid realisation: {reason}")]
    InvalidRealisation { reason: String },
    #[error("invalid subfamily: {reason}")]
    InvalidSubfamily { reason: String },
    #[error("invalid split: {reason}")]
    InvalidSplit { reason: String },
    #[error("threshold {threshold} is out of range for this measure")]
    ThresholdOutOfRange { threshold: String },
    #[error("specification `{spec}` can never hold")]
    UnsatisfiableThreshold { spec: String },
    #[error("reward specification on a model without rewards")]
    MissingRewards,
}

impl ModelError {
    /// Stable diagnostic code.
    pub fn code(&self) -> &'static str {
        match self {
            ModelError::NoStates => "E100",
            ModelError::StateOutOfRange { .. } => "E101",
            ModelError::DuplicateParameter { .. } => "E102",
            ModelError::EmptyDomain { .. } => "E103",
            ModelError::DuplicateDomainValue { .. } => "E104",
            ModelError::MissingRow { .. } => "E105",
            ModelError::UnknownParameter { .. } => "E106",
            ModelError::InvalidWeight { .. } => "E107",
            ModelError::RepeatedParameter { .. } => "E108",
            ModelError::RowSum { .. } => "E109",
            ModelError::NegativeReward { .. } => "E110",
            ModelError::UnknownLabel { .. } => "E111",
            ModelError::InvalidRealisation { .. } => "E112",
            ModelError::InvalidSubfamily { .. } => "E113",
            ModelError::InvalidSplit { .. } => "E114",
            ModelError::ThresholdOutOfRange { .. } => "E115",
            ModelError::UnsatisfiableThreshold { .. } => "E116",
            ModelError::MissingRewards => "E117",
        }
    }
}

/// Errors raised while reading `.fmc` documents.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("{line}:{column}: syntax error: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("line {line}: {source}")]
    Semantic {
        line: usize,
        #[source]
        source: ModelError,
    },
}

impl FormatError {
    pub fn code(&self) -> &'static str {
        match self {
            FormatError::Syntax { .. } => "E001",
            FormatError::Semantic { source, .. } => source.code(),
        }
    }
}

/// Errors of the numeric engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("value iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("expected reward is undefined: no scheduler reaches the goal almost surely from state {state}")]
    UndefinedReward { state: StateId },
    #[error("malformed MDP: {reason}")]
    Malformed { reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Errors of the synthesis loops and baselines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthesisError {
    #[error("specification `{0}` is not supported here")]
    UnsupportedSpec(String),
    #[error("family is too large: {size} exceeds the cap of {cap}")]
    SizeCap { size: u128, cap: u128 },
    #[error("subfamily budget of {budget} exhausted")]
    BudgetExhausted { budget: usize },
    #[error("scheduler is not consistent")]
    Inconsistent,
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Errors of the SMT exporter and solver bridge.
#[derive(Debug, Error)]
pub enum SmtError {
    #[error("unsupported specification for the SMT encoding: {0}")]
    UnsupportedSpec(String),
    #[error("malformed solver model: {0}")]
    MalformedModel(String),
    #[error("solver failed: {0}")]
    Solver(String),
    #[error("solver timed out after {0:?}")]
    Timeout(std::time::Duration),
    #[error("decoded realisation does not satisfy the specification (value {value})")]
    VerificationFailed { value: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}
