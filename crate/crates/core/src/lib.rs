//! Gaussian-moment simulation of phase estimation with a probe that is
//! repeatedly teleported through the phase shift, with closed-form oracles,
//! a strategy optimizer and a Monte Carlo trajectory sampler.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod formulas;
pub mod gaussian;
pub mod linalg;
pub mod montecarlo;
pub mod optimizer;
pub mod parallel;
pub mod protocol;
pub mod real;
pub mod verify;

pub use error::{Error, Result};
pub use real::Real;

pub type GaussianState = gaussian::GaussianState<f64>;
pub type AffineMap = gaussian::AffineMap<f64>;
pub type Matrix = linalg::Matrix<f64>;
pub type ProtocolParams = protocol::ProtocolParams<f64>;
pub type ProtocolMoments = protocol::ProtocolMoments<f64>;
pub type Constraint = optimizer::Constraint<f64>;
pub type Optimum = optimizer::Optimum<f64>;
pub type SweepRow = optimizer::SweepRow<f64>;
pub type EnsembleEstimate = montecarlo::EnsembleEstimate<f64>;
