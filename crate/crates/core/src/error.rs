//! Error type shared across the crate.

use crate::data_model::EditionId;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A row could not be parsed at all (wrong arity, bad number, bad JSON).
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A row parsed but violates the schema's invariants.
    #[error("validation error{}: {message}", fmt_line(.line))]
    Validation { line: Option<usize>, message: String },

    #[error("edition {0} has no matches")]
    EmptyEdition(EditionId),

    #[error("lambda must be in [0, 1], got {0}")]
    InvalidLambda(f64),

    #[error("team '{0}' not present in ranking")]
    TeamNotFound(String),

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("need at least {needed} groups, got {got}")]
    TooFewGroups { needed: usize, got: usize },

    #[error("group {0} is empty")]
    EmptyGroup(usize),

    #[error("chart center {0} is degenerate (all conforming or all nonconforming)")]
    DegenerateCenter(f64),

    #[error("column '{0}' is constant; min-max normalization is undefined")]
    ConstantColumn(String),

    #[error("column '{0}' has no non-missing values")]
    AllMissing(String),

    #[error("no edition has a defined underdog score")]
    AllUndefined,

    #[error("no matches with a weak team across all editions")]
    ZeroDenominator,

    #[error("edition {0} has no prior weighted ranking")]
    NoPriorRanking(EditionId),

    #[error("degenerate matrix: {0}")]
    DegenerateMatrix(String),

    #[error("need at least {needed} components, got {got}")]
    TooFewComponents { needed: usize, got: usize },

    #[error("invalid simulator config: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn fmt_line(line: &Option<usize>) -> String {
    match line {
        Some(n) => format!(" at line {n}"),
        None => String::new(),
    }
}

impl Error {
    pub fn validation(message: impl Into<String>) -> Self {
        Error::Validation { line: None, message: message.into() }
    }

    pub fn validation_at(line: usize, message: impl Into<String>) -> Self {
        Error::Validation { line: Some(line), message: message.into() }
    }

    /// CLI exit code: 1 for internal failures, 2 for input/validation problems.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Io(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
