// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("not enough data: {0}")]
    NotEnoughData(String),

    #[error("no co-present samples: {0}")]
    AllAbsent(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("{malformed} of {rows} rows malformed (limit {limit:.3}); first bad lines: {lines:?}")]
    TooManyMalformed {
        rows: u64,
        malformed: u64,
        limit: f64,
        lines: Vec<u64>,
    },

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn not_enough(msg: impl Into<String>) -> Self {
        Error::NotEnoughData(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
