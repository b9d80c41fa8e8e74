//! EEG-to-command pipeline for a brain-controlled wheelchair prototype.
//!
//! Epochs of 14-channel EEG are cleaned ([`preprocess`]), reduced to the
//! five maximum-power channels ([`spectral`]), summarized by db4 wavelet
//! subband statistics ([`wavelet`]) and classified into one of five
//! commands ([`classify`]). The [`runtime`] module runs the same chain over
//! a live sample stream and [`vehicle`] turns the decisions into motion of a
//! simulated, obstacle-aware differential-drive platform.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod config;
pub mod error;
pub mod preprocess;
pub mod runtime;
pub mod signal_io;
pub mod spectral;
pub mod vehicle;
pub mod wavelet;
pub mod workflow;

pub use error::{Error, ErrorClass, Result};
pub use signal_io::{ChannelId, Command, EegEpoch, SessionDataset};
