use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible shapes or an invalid network/layer configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// A caller violated an API precondition.
    #[error("usage error: {0}")]
    Usage(String),
    /// The synapse graph admits no causal evaluation order.
    #[error("topology error: {0}")]
    Topology(String),
    /// A dataset is malformed or incomplete.
    #[error("dataset error: {0}")]
    Dataset(String),
    /// A loss or gradient became non-finite.
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// Config-file or spec-string parsing failed.
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
