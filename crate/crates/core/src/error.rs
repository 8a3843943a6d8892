use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("kernel output has total mass {mass}, expected 1")]
    MassNormalization { mass: f64 },
    #[error("invalid split law `{spec}`: {reason}")]
    InvalidLaw { spec: String, reason: String },
    #[error("time index {index} beyond path horizon index {last}")]
    BeyondHorizon { index: usize, last: usize },
    #[error("window end lies beyond the first range-hitting time of its start")]
    BeyondRho,
    #[error("chaos order {order} exceeds configured truncation {max}")]
    OrderTooHigh { order: usize, max: usize },
    #[error("Wiener solution requires both split laws to be dirac:0.5")]
    NotWiener,
}

pub type Result<T> = std::result::Result<T, Error>;
