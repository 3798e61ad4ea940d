use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty mode set")]
    EmptyModeSet,

    #[error("degenerate domain")]
    DegenerateDomain,

    #[error("degenerate evaluation point at x = {x}")]
    DegeneratePoint { x: f64 },

    #[error("unsupported weight exponents ({p}, {q})")]
    UnsupportedWeight { p: u8, q: u8 },

    #[error("point ({x}, {y}) lies outside the unit square")]
    OutsideSquare { x: f64, y: f64 },

    #[error("no zeros predicted")]
    NoZeros,

    #[error("step exceeds resolution bound (step = {step}, bound = {bound})")]
    StepTooCoarse { step: f64, bound: f64 },

    #[error("cannot allocate a {n}x{n} grid")]
    Resource { n: usize },

    #[error("closed form needs N to be a multiple of n (n = {n}, N = {total})")]
    NotFullPeriod { n: u64, total: u64 },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
