//! Masked simplicial convolutional autoencoder.
//!
//! Each order has its own encoder and generator built from polynomial
//! Laplacian filters. Training masks cochain slots and minimizes the L1
//! error on those slots only.

pub mod batch;
pub mod layer;
pub mod model;
pub mod predict;
pub mod train;

pub use batch::{downsample_subcomplexes, make_masked_batch, placeholder, transfer_mask, TrainBatch, TrainSample};
pub use layer::{conv_backward, conv_forward, Activation, ConvLayer, Features, ForwardCache, LayerGrads};
pub use model::{embedding_at, set_embedding, OrderStack, ScaeConfig, ScaeModel};
pub use predict::{recursive_predict, IterationLog, RecursiveOutcome};
pub use train::{loss_and_grads, masked_loss, train, TrainConfig, TrainReport};
