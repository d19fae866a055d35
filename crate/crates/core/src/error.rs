use thiserror::Error;

/// Errors raised by the propagator library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("derivative order {order} exceeds supported maximum {max}")]
    UnsupportedOrder { order: usize, max: usize },

    #[error("invalid coefficient: {0}")]
    InvalidCoefficient(String),

    #[error("invalid mollifier: {0}")]
    InvalidMollifier(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("point ({t}, |xi|={xi}, eps={eps}) lies outside the hyperbolic zone")]
    ZoneViolation { t: f64, xi: f64, eps: f64 },

    #[error("transformation N1 nearly singular (|det| = {det}); zone constant too small")]
    ZoneConstant { det: f64 },

    #[error("integration failed at t = {at}: {reason}")]
    Integration { at: f64, reason: String },

    #[error("grid resolution insufficient: {0}")]
    Resolution(String),

    #[error("series truncation: {0}")]
    Truncation(String),

    #[error("measurement error: {0}")]
    Measurement(String),

    #[error("packet specification error: {0}")]
    Packet(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
