use thiserror::Error;

use crate::arith::Natural;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter `{name}` out of range: {detail}")]
    Param { name: &'static str, detail: String },

    #[error("element budget of {budget} exceeded ({needed} elements requested)")]
    Budget { budget: u64, needed: Natural },

    #[error("set exhausted after {available} elements, {requested} requested")]
    Exhausted { requested: usize, available: Natural },

    #[error("index {index} out of range 1..={len}")]
    Index { index: usize, len: usize },

    #[error("empty window")]
    EmptyWindow,

    #[error("counting function vanishes at checkpoint t = {t}")]
    ZeroCount { t: Natural },

    #[error("invariant violated at k = {k}: {detail}")]
    Invariant { k: usize, detail: String },

    #[error("union parts {first} and {second} overlap and neither is finite")]
    Overlap { first: usize, second: usize },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn param(name: &'static str, detail: impl Into<String>) -> Error {
    Error::Param {
        name,
        detail: detail.into(),
    }
}
