//! Bi-fidelity surrogate modeling: neural networks trained on plentiful
//! low-fidelity data and adapted with a handful of high-fidelity samples.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`). The aliases at
//! the crate root fix the scalar to `f64`, which is what the experiment
//! harness uses.

pub mod benchmarks;
pub mod cokriging;
pub mod data;
pub mod error;
pub mod gp;
pub mod linalg;
pub mod nn;
pub mod optim;
pub mod scalar;
pub mod transfer;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix = linalg::Matrix<f64>;
pub type Dataset = data::Dataset<f64>;
pub type NetworkSpec = nn::NetworkSpec<f64>;
pub type NetworkParams = nn::NetworkParams<f64>;
pub type Activation = nn::Activation<f64>;
pub type AdamConfig = optim::AdamConfig<f64>;
pub type KernelSpec = gp::KernelSpec<f64>;
pub type GPModel = gp::GPModel<f64>;
pub type CoKrigingModel = cokriging::CoKrigingModel<f64>;
pub type TransferConfig = transfer::TransferConfig<f64>;
pub type StackedModel = transfer::StackedModel<f64>;
