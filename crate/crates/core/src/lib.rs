//! Volumetric representation learning and hearing-threshold regression.
//!
//! Phase one compresses 3D gray-matter-like volumes with a convolutional
//! autoencoder (or VAE); phase two regresses the PT500/PT4000 thresholds
//! from the latent codes with a random forest, gradient-boosted trees, a
//! two-hidden-layer MLP and an MLP+GBT ensemble.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod augment;
pub mod error;
pub mod gradcheck;
pub mod latent;
pub mod nnops;
pub mod par;
pub mod pipeline;
pub mod regress;
pub mod tensor;
pub mod volio;

pub use error::{Error, Result};
pub use par::Parallelism;
pub use tensor::{Rng, Scalar, Tensor};
