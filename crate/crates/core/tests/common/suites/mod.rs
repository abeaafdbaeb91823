//! Test bodies shared by the per-module test targets and the acceptance run.

pub mod augment;
pub mod fft;
pub mod gradients;
pub mod regress;
pub mod volio;
