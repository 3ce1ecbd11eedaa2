//! Cross-field channel model selection for array-of-subarrays (AoSA) links.
//!
//! The crate simulates beam training between two ultra-massive AoSA arrays,
//! computes a selection metric from the per-subarray training observations,
//! and decides whether the link should be estimated with the spherical wave
//! model (near field) or the hybrid spherical-planar wave model (far field).
//! Decisions can be taken from a single snapshot, by majority vote over a
//! sliding window, or by Viterbi decoding of a two-state hidden Markov model.
//!
//! Module map:
//!
//! - [`geometry`]: element coordinates, rotations, path lengths and angles.
//! - [`channel`]: SWM and HSPWM sub-channel generation, array responses.
//! - [`training`]: quantized random codebooks and training observations.
//! - [`metric`]: the selection metric and the threshold rule.
//! - [`calibration`]: offline sweeps, threshold fitting, HMM estimation.
//! - [`hmm`]: observation windows, majority vote and Viterbi decoding.
//! - [`harness`]: Monte-Carlo sweeps and moving-receiver experiments.
//! - [`config`]: run configuration and named profiles.
//! - [`io`]: CSV tables and model files shared with external tooling.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod channel;
pub mod config;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod hmm;
pub mod io;
pub mod metric;
pub mod rng;
pub mod training;

pub use calibration::{OfflineSample, ThresholdModel};
pub use channel::{ChannelModel, ChannelTensor, SystemConfig};
pub use config::{Profile, RunConfig};
pub use error::{Error, Result};
pub use geometry::{AePositions, ArrayConfig, PathSet, PathSpec, Vec3};
pub use harness::{ExperimentResult, Scenario, TrajectorySpec};
pub use hmm::{DecisionMethod, HmmModel, ObservationWindow};
pub use metric::{Observation, Region, SelectionDecision};
pub use training::{Codebook, MeasurementSet};

pub use num_complex::Complex64;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
