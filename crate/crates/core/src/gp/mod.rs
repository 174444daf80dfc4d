//! Zero-mean Gaussian-process regression.

mod kernel;
mod regression;
pub mod search;

pub use kernel::{kernel_eval, Hyper, KernelSpec, MaternNu};
pub(crate) use regression::{nll_from, KernelSlots, Slot};
pub use regression::{gp_fit, gp_nll, gp_optimize, gp_predict, GPModel, Prediction};
pub use search::SearchOptions;
