use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("agent {agent}: allocation {allocation} exceeds demand {demand}")]
    AllocationExceedsDemand {
        agent: usize,
        allocation: f64,
        demand: f64,
    },
    #[error("DP state budget exceeded: {states} states reached (budget {budget})")]
    BudgetExceeded { states: usize, budget: usize },
    #[error("LP solver failure: {0}")]
    Solver(String),
    #[error("dual certificate violated: {0}")]
    Certificate(String),
    #[error("SEIR integration unstable at day {day}, location {location}: compartment value {value}")]
    Unstable {
        day: usize,
        location: usize,
        value: f64,
    },
    #[error("infeasible budget: {0}")]
    InfeasibleBudget(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad inputs rather than numerical failure.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidInstance(_)
                | Error::InvalidArgument(_)
                | Error::InfeasibleBudget(_)
                | Error::Io(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
