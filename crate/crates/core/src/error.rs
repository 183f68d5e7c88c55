use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("measure size mismatch: {left} vs {right} samples")]
    SizeMismatch { left: usize, right: usize },

    #[error("empty measure")]
    EmptyMeasure,

    #[error("non-finite position {value} for particle {particle} at step {step}")]
    NonFinite {
        step: usize,
        particle: usize,
        value: f64,
    },

    #[error("time step {dt} exceeds the stability bound {bound}")]
    StabilityBound { dt: f64, bound: f64 },

    #[error("solver instability at t={time}: {reason}")]
    Instability { time: f64, reason: String },

    #[error("boundary density {density:.3e} exceeds tolerance {tol:.3e} at t={time}")]
    BoundaryMass { time: f64, density: f64, tol: f64 },

    #[error("grid too coarse: eps={eps} below floor 4*dx^2={floor}")]
    GridTooCoarse { eps: f64, floor: f64 },

    #[error("incompatible flow: {0}")]
    IncompatibleFlow(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
