//! Exact Newton-map dynamics on piecewise-affine C¹ models, the perturbation
//! procedures that build nice families, cycles and nested period-multiplying
//! towers, and finite-depth adding-machine (odometer) algebra.
//!
//! Every quantity that decides dynamics is an [`ExactScalar`]; no tolerance is
//! used when classifying orbits.

#![allow(clippy::result_large_err, clippy::large_enum_variant)]

pub mod exact;
pub mod fixtures;
pub mod newton_dynamics;
pub mod odometer;
pub mod poly;
pub mod pw_model;
pub mod synthesis;

pub use exact::{q, ExactScalar};
