use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter space: {0}")]
    InvalidSpace(String),

    #[error("invalid design point: {0}")]
    InvalidPoint(String),

    #[error("parse error in structure code {code:?}: {reason}")]
    BadFingerCode { code: String, reason: String },

    #[error("geometry error: {0}")]
    Geometry(String),

    /// A design whose generated geometry cannot be assembled (e.g. a base
    /// pushed so far the outline union disconnects). Scored as 0, not fatal.
    #[error("infeasible design: {0}")]
    Infeasible(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("linear program error: {0}")]
    Lp(String),

    #[error("optimizer error: {0}")]
    Optimizer(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}
