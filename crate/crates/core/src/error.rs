use thiserror::Error;

use crate::solvers::RunTrace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("transition row (state {state}, action {action}) sums to {sum}, expected 1")]
    RowNotStochastic { state: usize, action: usize, sum: f64 },

    #[error("transition p[{state}][{action}][{next}] = {value} is negative or not finite")]
    InvalidProbability {
        state: usize,
        action: usize,
        next: usize,
        value: f64,
    },

    #[error("discount factor {0} is outside the open interval (0, 1)")]
    GammaOutOfRange(f64),

    #[error("reward r({state}, {action}) = {value} is not finite")]
    NonFiniteReward { state: usize, action: usize, value: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("policy is invalid for this MDP: {0}")]
    InvalidPolicy(String),

    #[error("linear system (I - gamma P) is singular")]
    SingularSystem,

    #[error("advantage at state {state} is {value}, below the negative tolerance")]
    NegativeAdvantage { state: usize, value: f64 },

    #[error("switch set is empty")]
    EmptySwitchSet,

    #[error("state {0} is not switchable")]
    NotSwitchable(usize),

    #[error("iteration limit {limit} reached before termination")]
    MaxIterExceeded { limit: usize, trace: Box<RunTrace> },

    #[error("cached inverse is inconsistent with the current policy (residual {residual:e})")]
    CacheInconsistent { residual: f64 },

    #[error("policy enumeration needs {policies} policies, budget is {budget}")]
    BudgetExceeded { policies: u128, budget: u128 },

    #[error("optimal-value oracle is inconsistent: {0}")]
    OracleInconsistent(String),

    #[error("internal consistency check failed: {0}")]
    Internal(String),

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
