//! Structure-free MLPs for graphs trained by aligning them with a
//! propagation-based encoder, plus the supervised and distillation baselines,
//! evaluation protocols and inference benchmarks used to compare them.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below pin the common instantiations.

pub mod baselines;
pub mod bench;
mod error;
pub mod eval;
pub mod graph;
pub mod model;
pub mod numeric;
pub mod pretrain;
pub mod rng;

pub use error::{Error, Result};
pub use numeric::{Scalar, Tensor};

pub type Tensor32 = numeric::Tensor<f32>;
pub type Tensor64 = numeric::Tensor<f64>;
pub type Graph32 = graph::Graph<f32>;
pub type Graph64 = graph::Graph<f64>;
pub type SimMlp32 = model::SimMlp<f32>;
pub type SimMlp64 = model::SimMlp<f64>;
pub type Gcn32 = model::GcnBaseline<f32>;
pub type Gcn64 = model::GcnBaseline<f64>;
