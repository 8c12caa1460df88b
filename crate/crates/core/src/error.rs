use thiserror::Error;

use crate::symbolic::ValueIssue;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed document: bad JSON, unknown keys, wrong cell shape.
    #[error("parse error{}: {message}", location(*row, column.as_deref()))]
    Parse {
        row: Option<usize>,
        column: Option<String>,
        message: String,
    },

    /// A well-formed cell whose value breaks a variable invariant.
    #[error("validation error at row {row}, column `{column}`: {}", join_issues(issues))]
    Validation {
        row: usize,
        column: String,
        issues: Vec<ValueIssue>,
    },

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("cannot encode `{variable}`: {message}")]
    Encode { variable: String, message: String },

    #[error("missing value in `{variable}` at row {row}; impute the table before encoding")]
    MissingValue { variable: String, row: usize },

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    Dimension {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("invalid architecture: {0}")]
    Architecture(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("imputation failed: {0}")]
    Imputation(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(row: Option<usize>, column: Option<&str>, message: impl Into<String>) -> Self {
        Error::Parse {
            row,
            column: column.map(str::to_owned),
            message: message.into(),
        }
    }

    pub(crate) fn encode(variable: &str, message: impl Into<String>) -> Self {
        Error::Encode {
            variable: variable.to_owned(),
            message: message.into(),
        }
    }
}

fn location(row: Option<usize>, column: Option<&str>) -> String {
    match (row, column) {
        (Some(r), Some(c)) => format!(" at row {r}, column `{c}`"),
        (Some(r), None) => format!(" at row {r}"),
        (None, Some(c)) => format!(" in `{c}`"),
        (None, None) => String::new(),
    }
}

fn join_issues(issues: &[ValueIssue]) -> String {
    issues
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub(crate) fn check_len(expected: usize, actual: usize, context: &'static str) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension {
            expected,
            actual,
            context,
        })
    }
}
