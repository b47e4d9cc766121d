use thiserror::Error;

/// Reasons an instance is rejected at construction.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum InstanceError {
    #[error("instance has no units")]
    Empty,
    #[error("values has {values} entries but costs has {costs}")]
    LengthMismatch { values: usize, costs: usize },
    #[error("non-finite entry in {field} at index {index}")]
    NonFiniteEntry { field: &'static str, index: usize },
    #[error("cost of unit {index} is {cost}, costs must be strictly positive")]
    NonPositiveCost { index: usize, cost: f64 },
    #[error("budget {0} must be strictly positive and finite")]
    NonPositiveBudget(f64),
    #[error("coverage floor {floor} outside 0..={n}")]
    CoverageOutOfRange { floor: usize, n: usize },
}

/// Failures raised by the solvers and the analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("infeasible: the {floor} cheapest units cost {min_cost}, budget is {budget}")]
    Infeasible {
        floor: usize,
        min_cost: f64,
        budget: f64,
    },
    #[error("instance with {n} units exceeds the limit of {max} for this method")]
    TooLarge { n: usize, max: usize },
    #[error("no prefix of the ratio ranking meets both budget and coverage")]
    NoFeasibleCutoff,
    #[error("the top {floor} units by ratio cost {cost}, above the budget {budget}")]
    CoreInfeasible {
        floor: usize,
        cost: f64,
        budget: f64,
    },
    #[error("target count {target} outside 0..={n}")]
    TargetOutOfRange { target: usize, n: usize },
    #[error("rounding the LP solution cannot restore coverage within budget")]
    RoundingInfeasible,
    #[error("allocation has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("budget multiplier bracket exceeded {0:e} without reaching feasibility")]
    BracketOverflow(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

/// Failures of the Monte Carlo harnesses.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
    #[error("{infeasible} of {draws} draws at n={n} were infeasible")]
    TooManyInfeasibleDraws {
        n: usize,
        infeasible: usize,
        draws: usize,
    },
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error(transparent)]
    Solve(#[from] SolveError),
}

impl From<InstanceError> for ExperimentError {
    fn from(e: InstanceError) -> Self {
        ExperimentError::Solve(e.into())
    }
}
