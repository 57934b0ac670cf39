//! Adaptive stochastic model predictive control for finite impulse response
//! plants with bounded additive disturbances.
//!
//! The building blocks, bottom up:
//!
//! * [`fir`]: regressor bookkeeping and plant simulation.
//! * [`solver`]: dense LP / QP / second-order-cone solvers.
//! * [`polytope`]: halfspace polytopes (redundancy removal, vertices,
//!   Chebyshev center).
//! * [`fps`]: set-membership tracking of every model consistent with the
//!   data.
//! * [`rls`]: recursive least-squares estimate and its projection onto the
//!   feasible set.
//! * [`chance`]: distributionally robust tightening of the output chance
//!   constraint.
//! * [`mpc`]: the receding-horizon program in stochastic and robust mode.
//!
//! All numeric code is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`.

// `!(x > 0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chance;
pub mod error;
pub mod fir;
pub mod fps;
pub mod mpc;
pub mod polytope;
pub mod rls;
pub mod scalar;
pub mod solver;

pub use error::{Error, Result};
pub use fir::FirDims;
pub use scalar::Real;

pub type Regressor64 = fir::Regressor<f64>;
pub type FirModel64 = fir::FirModel<f64>;
pub type HPolytope64 = polytope::HPolytope<f64>;
pub type FeasibleParamSet64 = fps::FeasibleParamSet<f64>;
pub type ModelEstimate64 = rls::ModelEstimate<f64>;
pub type ChanceSpec64 = chance::ChanceSpec<f64>;
pub type MpcConfig64 = mpc::MpcConfig<f64>;
pub type MpcSolution64 = mpc::MpcSolution<f64>;
pub type ConicProgram64 = solver::ConicProgram<f64>;
pub type SolveReport64 = solver::SolveReport<f64>;

pub type Regressor32 = fir::Regressor<f32>;
pub type FirModel32 = fir::FirModel<f32>;
pub type HPolytope32 = polytope::HPolytope<f32>;
pub type FeasibleParamSet32 = fps::FeasibleParamSet<f32>;
pub type ModelEstimate32 = rls::ModelEstimate<f32>;
pub type ChanceSpec32 = chance::ChanceSpec<f32>;
pub type MpcConfig32 = mpc::MpcConfig<f32>;
pub type MpcSolution32 = mpc::MpcSolution<f32>;
pub type ConicProgram32 = solver::ConicProgram<f32>;
pub type SolveReport32 = solver::SolveReport<f32>;
