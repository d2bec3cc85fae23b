//! Self-supervised graph collaborative filtering: LightGCN, SGL, SimGCL and
//! DirectAU on a shared linear propagation backbone, with data preprocessing,
//! a deterministic trainer, full-ranking evaluation and grid search.
//!
//! Every random draw comes from a stream derived from one master seed (see
//! [`rng`]), so a run is bitwise reproducible on any thread count.

// `!(x > 0.0)` rejects NaN together with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod augment;
pub mod cli;
pub mod config;
pub mod datahub;
pub mod engine;
pub mod error;
pub mod evalkit;
pub mod kvtext;
pub mod models;
pub mod objectives;
pub mod rng;
pub mod sparse;
pub mod synthetic;

pub use error::{Error, Result};
pub use sparse::CsrMatrix;
