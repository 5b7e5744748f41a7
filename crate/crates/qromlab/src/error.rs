use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("register layout: {0}")]
    Layout(String),
    #[error("unknown register `{0}`")]
    UnknownRegister(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),
    #[error("basis map is not reversible on the state's support")]
    NotReversible,
    #[error("forced outcome {outcome} on register `{register}` has zero probability")]
    ZeroProbabilityOutcome { register: String, outcome: u64 },
    #[error("density matrix is invalid: {0}")]
    InvalidDensity(String),
    #[error("domain too large: {size} points (limit {limit})")]
    DomainTooLarge { size: u128, limit: u128 },
    #[error("point {0} is outside the oracle domain")]
    PointOutOfDomain(u64),
    #[error("value {value} is outside the oracle range {range}")]
    ValueOutOfRange { value: u64, range: u64 },
    #[error("encoding overflow: {0}")]
    EncodingOverflow(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("query budget exceeded: {used} > {budget}")]
    BudgetExceeded { used: usize, budget: usize },
    #[error("strategy space too large: {0}")]
    StrategySpaceTooLarge(String),
    #[error("run touched oracle point {0} outside the materialized support")]
    SupportViolation(String),
    #[error("protocol `{name}` is not {property}")]
    ProtocolProperty { name: String, property: String },
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
