use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("enumeration of {requested} words exceeds the configured cap of {cap}")]
    CapExceeded { requested: u128, cap: u128 },

    #[error("cannot parse word {input:?}: {reason}")]
    WordParse { input: String, reason: String },

    #[error("argument {value} outside the open interval (0, 1)")]
    Domain { value: f64 },

    #[error("point is not in the open simplex: {0}")]
    NotInSimplex(String),

    #[error("pair ({gamma}, {s}) does not transport cones onto cones")]
    NotARelation { gamma: String, s: String },

    #[error("permutation does not preserve the function family: {0}")]
    InvalidPermutation(String),

    #[error("Schottky sampling failed after {attempts} attempts: {last_failure}")]
    SamplingFailed { attempts: usize, last_failure: String },

    #[error("golden table {table}: {reason}")]
    Golden { table: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
