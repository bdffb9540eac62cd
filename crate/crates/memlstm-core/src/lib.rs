//! Numerical core of a hardware-aware LSTM forecaster: the floating-point
//! cell, a BPTT trainer, and a behavioral model of the same cell evaluated on
//! a 16-level memristive crossbar.
//!
//! The crate only needs `alloc`; disable the default `std` feature to build
//! it for `no_std` targets.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod activation;
pub mod crossbar;
pub mod data;
pub mod error;
pub mod init;
pub mod lstm;
pub mod training;

pub use crossbar::{
    build_level_set, crossbar_dot, crossbar_forward, crossbar_lstm_step, crossbar_predict,
    map_weight_to_pair, program_crossbar, quantize_weight, reconstruct_weights, CrossbarConfig,
    CrossbarProgram, LevelPair, LevelSet, Spacing,
};
pub use data::{make_windows, rmse, split, Normalizer, Sample, TimeSeries, WindowedSeries};
pub use error::{Error, Result};
pub use lstm::{
    dense_output, forward_sequence, lstm_step, Dims, Gate, GateActivations, GateParams,
    LstmParams, LstmState, Matrix, OutputLayer,
};
pub use training::{
    bptt_gradients, finite_difference_check, mse_loss, predict, train, GradientSet, Optimizer,
    TrainConfig, TrainOutcome,
};
