//! Adaptive design (active learning) for computer experiments whose inputs
//! mix quantitative variables on the unit hypercube with qualitative factors.
//!
//! The crate provides the EzGP emulator, point-selection criteria for
//! optimization, contour estimation and global prediction, a hybrid
//! tree-search optimizer, the adaptive loops that tie them together, and a
//! replicated benchmark harness.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acquisition;
pub mod adaptive;
pub mod benchmarks;
pub mod cli;
pub mod config;
pub mod design_space;
pub mod emulator;
pub mod error;
pub mod hybrid;
pub mod normal;
pub mod optim;
pub mod report;
pub mod rng;
pub mod sampling;

pub use design_space::{Dataset, DesignSpace, LevelCombination, MixedPoint};
pub use emulator::{fit, FitOptions, FittedGp, Posterior, Predictor};
pub use error::{Error, Result};
pub use rng::RngStream;
