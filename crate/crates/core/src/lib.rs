//! Masked-item transformer recommenders with teacher-student distillation.
//!
//! The crate covers the whole pipeline on a single machine:
//!
//! - [`tensor`]: a small `f64` tensor engine with a reverse-mode tape.
//! - [`corpus`]: interaction logs, min-count filtering, leave-one-out
//!   splits and the seeded item-to-token map.
//! - [`masking`]: cloze-style training inputs and the append-`[MASK]` query.
//! - [`model`]: the bidirectional encoder shared by teacher and student,
//!   initialization modes and the checkpoint format.
//! - [`train`] and [`distill`]: masked-prediction training and tempered
//!   knowledge distillation, both with Adam and early stopping.
//! - [`evaluate`]: HR@K / NDCG@K under full ranking, plus the experiment
//!   runners (mapping stability, hyperparameter sweeps, init ablations).
//! - [`service`]: top-K recommendation, latency benchmarking and the HTTP
//!   endpoint.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod cli;
pub mod config;
pub mod corpus;
pub mod distill;
pub mod error;
pub mod evaluate;
pub mod masking;
pub mod model;
pub mod rng;
pub mod service;
pub mod synthetic;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::{Gradients, Tape, Tensor, Var};
