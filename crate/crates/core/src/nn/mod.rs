//! Dense feed-forward and residual networks with a scalar output.

mod activation;
mod network;
mod params;
mod spec;
pub mod store;

pub use activation::{activation_eval, activation_grad, Activation, ActivationKind};
pub(crate) use network::{backprop_into, forward_into};
pub use network::{forward, grad_sample, loss_mse, predict, predict_batch, Trace, Workspace};
pub use params::{init_params, LayerBlock, LayerRef, NetworkParams};
pub use spec::{NetworkSpec, Skip, DEFAULT_WIDTH_CAP};
