use thiserror::Error;

/// Errors raised by the billiard laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain is not strictly convex: min radius of curvature {min_rho:.3e} (max {max_rho:.3e})")]
    ConvexityViolation { min_rho: f64, max_rho: f64 },

    #[error("bad domain spec: {0}")]
    BadSpec(String),

    #[error("curvature jet order {order} exceeds the supported maximum {max}")]
    OrderTooHigh { order: usize, max: usize },

    #[error("integrand is not finite at theta = {theta}")]
    NonFiniteIntegrand { theta: f64 },

    #[error("chord endpoints coincide (separation {separation:.3e})")]
    CoincidentPoints { separation: f64 },

    #[error("incidence angle {phi} is outside the tangency guard band [{min}, pi - {min}]")]
    TangencyGuard { phi: f64, min: f64 },

    #[error("{what} did not converge (residual {residual:.3e})")]
    NoConvergence { what: &'static str, residual: f64 },

    #[error("cyclic order of orbit vertices collapsed for p/q = {p}/{q}")]
    OrderCollapse { p: u32, q: u32 },

    #[error("invalid rotation number {p}/{q}: {reason}")]
    BadRotationNumber { p: u32, q: u32, reason: &'static str },

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("caustic length is not increasing toward the perimeter at q = {q}")]
    NonMonotone { q: u32 },

    #[error("least-squares design is ill conditioned (condition number {cond:.3e})")]
    IllConditioned { cond: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad configuration or input files rather
    /// than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::ConvexityViolation { .. }
                | Error::BadSpec(_)
                | Error::OrderTooHigh { .. }
                | Error::TangencyGuard { .. }
                | Error::BadRotationNumber { .. }
                | Error::InsufficientSamples { .. }
                | Error::InvalidInput(_)
                | Error::Io(_)
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
