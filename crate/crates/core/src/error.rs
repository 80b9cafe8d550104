// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("address error: {0}")]
    Address(String),
    #[error("protection error: row {row} is a protected reserved row")]
    Protection { row: usize },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("size error: {0}")]
    Size(String),
    #[error("placement error: {0}")]
    Placement(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("state error: {0}")]
    State(String),
    #[error("capacity error: {0}")]
    Capacity(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("non-Eulerian graph: {0}")]
    NonEulerian(String),
    #[error("disconnected graph: {0}")]
    Disconnected(String),
    #[error("consistency error: {0}")]
    Consistency(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("self-check failed: {0}")]
    SelfCheck(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::SelfCheck(_) => 1,
            Error::Parse(_) => 2,
            Error::Capacity(_) => 3,
            Error::Config(_) | Error::Json(_) => 4,
            _ => 1,
        }
    }
}
