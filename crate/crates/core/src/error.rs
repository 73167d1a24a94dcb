use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{function}: argument {value} outside the domain")]
    Domain { function: &'static str, value: f64 },

    #[error("log_sum_exp of an empty sequence")]
    EmptyInput,

    #[error("Stirling table of size {requested} exceeds the cap of {cap}")]
    StirlingCapacity { requested: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),
}
