//! Finite-volume solvers and entropy diagnostics for drift-diffusion models in
//! which the drift is set by the density's own boundary value.
//!
//! Every model is generic over the scalar type ([`Real`], implemented for `f32`
//! and `f64`); the aliases at the crate root fix `f64`.

// Validation is written as `!(x > 0)` so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod driver;
pub mod error;
pub mod exchange1d;
pub mod field;
pub mod flux;
pub mod grid;
pub mod initial;
pub mod quadrature;
pub mod rescaled1d;
pub mod scalar;
pub mod solver1d;
pub mod solver2d;
pub mod variants1d;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Grid1D = grid::Grid1D<f64>;
pub type Grid2D = grid::Grid2D<f64>;
pub type DensityField = field::DensityField<f64>;
pub type Field2D = solver2d::Field2D<f64>;
pub type Velocity2D = solver2d::Velocity2D<f64>;
pub type InitialCondition = initial::InitialCondition<f64>;
pub type Profile = initial::Profile<f64>;
pub type DiagnosticsRecord = diagnostics::DiagnosticsRecord<f64>;
pub type ReferenceProfile = diagnostics::ReferenceProfile<f64>;
pub type Monitors = diagnostics::Monitors<f64>;
pub type BlowUpReport = driver::BlowUpReport<f64>;
pub type BlowupCaps = driver::BlowupCaps<f64>;
pub type RunControl = driver::RunControl<f64>;
pub type RunOutput = driver::RunOutput<f64>;
pub type Bks1dState = solver1d::Bks1dState<f64>;
pub type RescaledState = rescaled1d::RescaledState<f64>;
pub type ExchangeState = exchange1d::ExchangeState<f64>;
pub type IntervalState = variants1d::IntervalState<f64>;
pub type IntervalEquilibrium = variants1d::IntervalEquilibrium<f64>;
