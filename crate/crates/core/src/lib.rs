//! Hyperbolic fillings of sampled compact metric spaces, with bounds for weak p-capacity and
//! discrete p-modulus computed on the filling graph.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`); the aliases at the crate root
//! fix the scalar to `f64`.

// `!(x > y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod capacity;
pub mod error;
pub mod exponents;
pub mod filling;
pub mod graph;
pub(crate) mod index;
pub mod level_modulus;
pub mod metric_space;
pub mod paths;
pub mod scalar;
pub mod weak_norm;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Space = metric_space::PointCloudSpace<f64>;
pub type Filling = filling::Filling<f64>;
pub type Region = filling::Region<f64>;
pub type SetPair = filling::SetPair<f64>;
pub type Weights = weak_norm::WeightFunction<f64>;
pub type Estimate = capacity::CapacityEstimate<f64>;
