//! Layer primitives with hand-derived backward passes, losses and Adam.

mod adam;
mod container;
mod conv;
mod dense;
mod loss;
mod network;

pub use adam::{adam_step, Adam, AdamConfig, AdamState};
pub use container::{read_params, write_params};
pub use conv::{Conv3d, ConvTranspose3d, LayerGrads, Padding};
pub use dense::{relu, relu_backward, sigmoid, sigmoid_backward, Dense};
pub use loss::{kl_divergence, mse_loss, KlTerms};
pub use network::{Layer, Network, Trace};
