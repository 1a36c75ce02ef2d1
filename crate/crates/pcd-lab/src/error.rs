use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice spec: {0}")]
    InvalidSpec(String),
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("lattice spec mismatch")]
    SpecMismatch,
    #[error("block index {j} outside [-1, {j_max}]")]
    IndexError { j: i32, j_max: i32 },
    #[error("only {usable} usable dyadic blocks, need at least 3")]
    InsufficientScales { usable: usize },
    #[error("invalid time: {0}")]
    InvalidTime(String),
    #[error("time grids do not match")]
    GridMismatch,
    #[error("covariance requested for the zero mode")]
    ZeroMode,
    #[error("truncation radius {radius} does not cover mollifier support {needed:.3}")]
    TruncationError { radius: usize, needed: f64 },
    #[error("invalid exponents: {0}")]
    InvalidExponents(String),
    #[error("controlled distribution violates its structural identity (residual {residual:.3e})")]
    InvalidControlled { residual: f64 },
    #[error("no local solution down to T = {t_min}; last contraction ratios {ratios:?}")]
    NoLocalSolution { t_min: f64, ratios: Vec<f64> },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("decode error: {0}")]
    Decode(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
