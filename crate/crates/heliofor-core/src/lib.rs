//! Photovoltaic power forecasting toolkit.
//!
//! Implements a hybrid forecaster that feeds one-step predictions from a
//! NARX neural network into an LSTM as an extra input feature, alongside the
//! classical and machine-learning baselines it is measured against:
//! AR/ARMA/ARIMA, elastic-net regression, k-nearest-neighbour regression and
//! extremely randomized trees. Evaluation (RMSE/MAE/MAPE, chronological
//! k-fold cross-validation, randomized hyperparameter search, model
//! comparison) and a synthetic plant-data generator live here too, so the
//! whole pipeline can run without any external dataset.
//!
//! The crate is `no_std` (`alloc` required). All float math goes through
//! libm rather than platform intrinsics, all randomness flows through
//! explicitly seeded ChaCha streams, and every algorithm is
//! single-threaded, so the same inputs and seeds produce bit-identical
//! outputs on any platform.

#![no_std]

extern crate alloc;

pub mod data;
mod error;
pub mod eval;
mod float;
pub mod hybrid;
pub mod linear;
pub mod lstm;
mod matrix;
pub mod narx;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
pub use matrix::Matrix;
