//! Link-level simulation of RIS-assisted multiuser downlinks: cascaded
//! channel estimation baselines, the superimposed channel-training protocol,
//! closed-form performance laws and the experiment harness.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamforming;
pub mod channel;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod numerics;
pub mod theory;
pub mod training;

pub use error::{Error, Result};
