use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("point {point:?} lies outside the grid box")]
    OutOfBox { point: Vec<f64> },

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("density has zero total mass")]
    ZeroMass,

    #[error("reference field is identically zero")]
    ZeroReference,

    #[error("non-finite {what} at node {node:?} with control {control:?}")]
    NonFinite {
        what: &'static str,
        node: Vec<f64>,
        control: Vec<f64>,
    },

    #[error("operation requires dimension {expected}, grid has {found}")]
    Dimension { expected: usize, found: usize },

    #[error("mollifier support contains only the origin (eps = {eps}, dx = {dx})")]
    DegenerateKernel { eps: f64, dx: f64 },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
