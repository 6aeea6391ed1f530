//! Multimodal corridor equilibrium with tradable driving credits, scheduled
//! buses and threshold-dispatched shuttles.
//!
//! The forward model is generic over [`Scalar`] so the same code runs in
//! `f32`, `f64` and forward-mode dual numbers.

pub mod bilevel;
pub mod cost;
pub mod error;
pub mod io;
pub mod market;
pub mod mfd;
pub mod queue;
pub mod scalar;
pub mod scenario;
pub mod solver;
pub mod transit;

pub use error::{Error, Result};
pub use scalar::{Dual, Scalar};
pub use scenario::{load_scenario, Mode, PolicyParams, Scenario, ServiceMode};
pub use solver::{solve_equilibrium, warm_start_chain, DecisionVector, EquilibriumResult};

pub type NetworkStateF64 = mfd::NetworkState<f64>;
pub type NetworkStateF32 = mfd::NetworkState<f32>;
pub type ArrivalCurveF64 = queue::ArrivalCurve<f64>;
pub type ArrivalCurveF32 = queue::ArrivalCurve<f32>;
pub type ForwardPassF64 = solver::ForwardPass<f64>;
pub type ForwardPassDual = solver::ForwardPass<solver::GradientDual>;
pub type GeneralizedCostF64 = cost::GeneralizedCost<f64>;
