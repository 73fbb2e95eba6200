//! Flow-level load balancing with stickiness constraints.
//!
//! The crate has three layers. [`metrics`] and [`dist`] turn an occupancy
//! distribution into packet-level performance. [`mean_field`] computes the
//! large-`n` occupancy distribution of each scheme, either by integrating the
//! mean-field ODE or through closed-form fixed points. [`flow_sim`] and
//! [`bin_sim`] are finite-`n` discrete-event simulators used to check both.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bin_sim;
pub mod dist;
pub mod error;
pub mod flow_sim;
pub mod mean_field;
pub mod metrics;
pub mod params;
pub mod poisson;
pub mod scheme;

pub use dist::FlowDistribution;
pub use error::{Error, Result};
pub use params::{ChiDelayParams, SystemParams};
pub use scheme::{Choices, SchemeConfig, Threshold};
