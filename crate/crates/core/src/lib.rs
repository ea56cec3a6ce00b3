#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifact;
pub mod dantzig;
pub mod data;
pub mod error;
pub mod instrument;
mod linalg;
pub mod lp;
pub mod pipeline;
pub mod predict;
pub mod report;
pub mod scalar;
pub mod screening;
pub mod semiparam;
pub mod simulate;

pub use data::{CoefficientTruth, Dataset, ModelPartition};
pub use error::{Error, Result, Stage};
pub use scalar::Real;

pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type FittedModel64 = pipeline::FittedModel<f64>;
pub type FittedModel32 = pipeline::FittedModel<f32>;
pub type FitOptions64 = pipeline::FitOptions<f64>;
pub type FitOptions32 = pipeline::FitOptions<f32>;
pub type FitOutput64 = pipeline::FitOutput<f64>;
pub type FitOutput32 = pipeline::FitOutput<f32>;
