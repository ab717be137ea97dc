//! Adaptive graph convolutional recurrent forecasting.
//!
//! The crate holds the whole model family: node-adaptive graph convolution,
//! the learned graph, the recurrent cell and stack, the baselines, and the
//! training and evaluation pipeline. Everything runs in `f64` on a small
//! reverse-mode tape with hand-written gradients.

pub mod data;
pub mod error;
pub mod graph;
pub mod layers;
pub mod model;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
