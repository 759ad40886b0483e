//! Single-spike temporal coding, Average Delay Response (ADR) spiking
//! networks, temporal error backpropagation and temporal readout.
//!
//! The pipeline is: encode records into spike delays ([`coding`],
//! [`datasets`]), propagate them through an ADR network ([`network`]), read a
//! class from the output delays ([`readout`]) and train by backpropagating the
//! temporal error ([`learning`]). [`metrics`] counts spikes and energy,
//! [`srm`] is a classic Spike Response Model neuron kept for comparison, and
//! [`config`], [`model_file`] and [`commands`] back the command-line tool.

// `!(a > b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coding;
pub mod commands;
pub mod config;
pub mod datasets;
pub mod error;
pub mod learning;
pub mod metrics;
pub mod model_file;
pub mod network;
pub mod readout;
pub mod srm;

pub use coding::{CodingParams, DelayVector};
pub use config::RunConfig;
pub use datasets::{CodingScheme, CodingSnapshot, EncodedDataset, EncodedSample, RawDataset};
pub use error::{Error, Result};
pub use learning::{GradientMode, TrainConfig};
pub use model_file::ModelFile;
pub use network::{Activation, Network};
pub use readout::{ReadoutMode, TargetScheme};
