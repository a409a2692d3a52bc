//! Sub-path linear approximation distillation at desk scale.
//!
//! A small diffusion teacher is trained on synthetic 2-D data, then
//! distilled into a 1-4 step consistency generator by regressing over
//! linear sub-paths of the probability-flow ODE. The crate provides the
//! f64 tensor/autodiff engine, the variance-preserving schedule and its
//! sub-path extensions, the DDIM solver with guidance mixing, both training
//! loops, evaluation statistics, and the checkpoint/config plumbing the CLI
//! builds on.

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod distill;
pub mod error;
pub mod metrics;
pub mod net;
pub mod optim;
pub mod parallel;
pub mod plot;
pub mod report;
pub mod rng;
pub mod schedule;
pub mod solver;
pub mod subpath;
pub mod teacher;
pub mod tensor;

pub use error::{Error, Result};
