//! Process exit codes.

use pi_bounds::Error;

pub const PASS: i32 = 0;
pub const VIOLATION: i32 = 1;
pub const LIMIT: i32 = 2;
pub const INPUT: i32 = 3;
pub const INTERNAL: i32 = 4;

/// Result of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Violation,
    /// Stopped at an iteration cap without a violation.
    Limit,
}

impl Outcome {
    pub fn code(self) -> i32 {
        match self {
            Outcome::Pass => PASS,
            Outcome::Violation => VIOLATION,
            Outcome::Limit => LIMIT,
        }
    }

    pub fn from_passed(passed: bool) -> Self {
        if passed {
            Outcome::Pass
        } else {
            Outcome::Violation
        }
    }
}

pub fn error_code(err: &Error) -> i32 {
    match err {
        Error::BudgetExceeded { .. } | Error::MaxIterExceeded { .. } => LIMIT,
        Error::RowNotStochastic { .. }
        | Error::InvalidProbability { .. }
        | Error::GammaOutOfRange(_)
        | Error::NonFiniteReward { .. }
        | Error::DimensionMismatch(_)
        | Error::InvalidPolicy(_)
        | Error::InvalidSpec(_)
        | Error::Parse(_)
        | Error::Io(_) => INPUT,
        Error::SingularSystem
        | Error::NegativeAdvantage { .. }
        | Error::EmptySwitchSet
        | Error::NotSwitchable(_)
        | Error::CacheInconsistent { .. }
        | Error::OracleInconsistent(_)
        | Error::Internal(_) => INTERNAL,
    }
}

/// Variant name of an error, printed alongside its message.
pub fn error_kind(err: &Error) -> &'static str {
    match err {
        Error::RowNotStochastic { .. } => "RowNotStochastic",
        Error::InvalidProbability { .. } => "InvalidProbability",
        Error::GammaOutOfRange(_) => "GammaOutOfRange",
        Error::NonFiniteReward { .. } => "NonFiniteReward",
        Error::DimensionMismatch(_) => "DimensionMismatch",
        Error::InvalidPolicy(_) => "InvalidPolicy",
        Error::SingularSystem => "SingularSystem",
        Error::NegativeAdvantage { .. } => "NegativeAdvantage",
        Error::EmptySwitchSet => "EmptySwitchSet",
        Error::NotSwitchable(_) => "NotSwitchable",
        Error::MaxIterExceeded { .. } => "MaxIterExceeded",
        Error::CacheInconsistent { .. } => "CacheInconsistent",
        Error::BudgetExceeded { .. } => "BudgetExceeded",
        Error::OracleInconsistent(_) => "OracleInconsistent",
        Error::Internal(_) => "Internal",
        Error::InvalidSpec(_) => "InvalidSpec",
        Error::Parse(_) => "Parse",
        Error::Io(_) => "Io",
    }
}
