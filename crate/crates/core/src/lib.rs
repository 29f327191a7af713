//! Probabilistic frequency-hazard engine.
//!
//! Computes annual exceedance rates of frequency-deviation thresholds by
//! summing, over a source catalogue, loss-size PMFs and weighted system-state
//! bins, the log-normal probability that the nadir exceeds each threshold.
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the crate
//! root re-exports `f64` aliases for the common case.

// `!(x > 0.0)` is used on purpose so NaN fails validation; index loops over
// parallel arrays read better than zipped iterators here.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod catalogue;
pub mod config;
pub mod controls;
pub mod disagg;
pub mod error;
pub mod frpe;
pub mod hazard;
pub mod io;
pub mod layers;
pub mod logictree;
pub mod pipeline;
pub mod rates;
pub mod report;
pub mod scalar;
pub mod state;
pub mod synth;
pub mod validate;

pub use error::{Error, ErrorClass, Result};
pub use scalar::{kahan_sum, normal_cdf, KahanSum, Real};

pub type LossPmf = catalogue::LossPmf<f64>;
pub type SourceRecord = catalogue::SourceRecord<f64>;
pub type StateRecord = state::StateRecord<f64>;
pub type StateBin = state::StateBin<f64>;
pub type IncidentRecord = rates::IncidentRecord<f64>;
pub type GammaPrior = rates::GammaPrior<f64>;
pub type PairSpec = layers::PairSpec<f64>;
pub type CascadeSpec = layers::CascadeSpec<f64>;
pub type OperatingPoint = frpe::OperatingPoint<f64>;
pub type SfrParams = frpe::sfr::SfrParams<f64>;
pub type SimConfig = frpe::physics::SimConfig<f64>;
pub type NadirGrid = frpe::physics::NadirGrid<f64>;
pub type PhysicsModel = frpe::physics::PhysicsModel<f64>;
pub type ControlsConfig = controls::ControlsConfig<f64>;
pub type TreeSpec = logictree::TreeSpec<f64>;
pub type LogicTreePath = logictree::LogicTreePath<f64>;
pub type HazardResult = hazard::HazardResult<f64>;
pub type TreeResult = logictree::TreeResult<f64>;
