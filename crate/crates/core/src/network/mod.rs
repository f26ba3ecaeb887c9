//! Forward-only encoder/decoder with de-pooling between blocks.

pub mod conv;
pub mod forward;
pub mod gradcheck;
pub mod loss;
pub mod model;
pub mod weights;

pub use conv::{conv2d_forward, conv2d_forward_with, Activation, ConvLayer};
pub use forward::{
    decoder_forward, decoder_forward_traced, encoder_forward, encoder_forward_with, fuse_network, EncoderOutput, InferenceOptions,
};
pub use gradcheck::{gradcheck_depool, gradcheck_depool_with, GradcheckReport, GRADCHECK_EPS};
pub use loss::{loss_pixel, loss_ssim, loss_total, ssim, LossReport, DEFAULT_LAMBDA};
pub use model::{layer_specs, LayerSpec, Model};
pub use weights::{decode_weights, encode_layers, encode_weights, load_weights, save_weights};
