use thiserror::Error;

/// Errors raised by the library. Numerical failures carry the offending value.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("grid functions live on different domains")]
    DomainMismatch,
    #[error("non-finite sample at flat index {0}")]
    NonFinite(usize),
    #[error("scale below resolution: t = {t}, h = {h}")]
    ScaleBelowResolution { t: f64, h: f64 },
    #[error("invalid scale {0}: expected 2^-j with j >= 0")]
    InvalidScale(f64),
    #[error("invalid exponent: {0}")]
    InvalidExponent(String),
    #[error("invalid weight: {0}")]
    InvalidWeight(String),
    #[error("norm overflow: modular still exceeds 1 at lambda = 1e30")]
    NormOverflow,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("not in A^loc_inf numerically: constant unstable up to p = {0}")]
    NotAInfinity(f64),
    #[error("no exterior: the open set fills the whole window")]
    NoExterior,
    #[error("degenerate bump: Gram condition number {0:e}")]
    DegenerateBump(f64),
    #[error("admissibility violated: {0}")]
    Inadmissible(String),
    #[error("singular Gram matrix in moment correction")]
    SingularGram,
    #[error("unsupported wavelet order {0}: expected 2..=10")]
    UnsupportedOrder(usize),
    #[error("level overflow: {0}")]
    LevelOverflow(String),
    #[error("moment bound violated: need L >= {required}, system has {available}")]
    MomentBound { required: i32, available: i32 },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("square function too deep: J = {j} exceeds {max}")]
    TooDeep { j: u32, max: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
