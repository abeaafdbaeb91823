//! Phase one: 3D convolutional autoencoder and VAE, training and latent
//! feature extraction.

mod checkpoint;
mod model;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointManifest, CheckpointMeta};
pub use model::{
    build_model, encode, reconstruct, reparameterize, reparameterize_with, volume_input, EncoderDecoder,
    LatentDistribution, LossParts, ModelConfig, ModelKind, VaeHeads,
};
pub use train::{params_checksum, train, EpochLoss, TrainConfig, TrainReport};
