use std::fmt;

use thiserror::Error;

/// One violated scenario invariant, located by a field path such as
/// `products[1].frat5[4]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub rule: String,
}

impl Violation {
    pub fn new(path: impl Into<String>, rule: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.rule)
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid scenario: {}", join_violations(.0))]
    Validation(Vec<Violation>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no demand: every demand cell is zero")]
    NoDemand,

    #[error("dual solve did not converge after {iterations} iterations (|gradient| = {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("branch and bound exceeded its node budget of {limit}")]
    NodeBudgetExceeded { limit: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("malformed policy: {0}")]
    MalformedPolicy(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_)
            | Error::Validation(_)
            | Error::InvalidArgument(_)
            | Error::ShapeMismatch(_)
            | Error::MalformedPolicy(_)
            | Error::Io(_) => 1,
            Error::NoDemand | Error::NonConvergence { .. } | Error::NodeBudgetExceeded { .. } => 2,
            Error::Infeasible(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
