//! Per-frequency propagators for `u_tt - u_xx + (b'/b) u_t = 0` where `b`
//! jumps at `t = 1`, regularised by a mollifier of width `ε`.
//!
//! The library is generic over [`scalar::Real`] (`f32`, `f64`); the aliases
//! below fix it to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod assembly;
pub mod coefficients;
pub mod config;
pub mod convergence;
pub mod error;
pub mod hyperbolic;
pub mod integrator;
pub mod linalg;
pub mod oracle;
pub mod quadrature;
pub mod scalar;
pub mod singular;
pub mod wavepacket;
pub mod zones;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Mat2C = linalg::Mat2<f64>;
pub type Coefficient = coefficients::JumpCoefficient<f64>;
pub type Mollifier = coefficients::MollifierPair<f64>;
pub type Evaluator = coefficients::RegularizedEval<f64>;
pub type ZoneConstant = zones::ZoneConstant<f64>;
pub type IntegratorConfig = integrator::IntegratorConfig<f64>;
pub type FullPropagator = assembly::FullPropagator<f64>;
pub type HypPropagator = hyperbolic::HypPropagator<f64>;
pub type SingPropagator = singular::SingPropagator<f64>;
pub type PacketSpec = wavepacket::PacketSpec<f64>;
pub type ReflectionReport = wavepacket::ReflectionReport<f64>;
pub type RateFit = oracle::RateFit<f64>;
