//! Layers with explicit forward/backward passes, and the network that
//! chains them.

mod checkpoint;
mod conv;
mod highway;
mod network;
mod plain;
mod softmax;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use conv::{conv2d_same, conv2d_same_backward, ConvHighwayCache, ConvHighwayGrads, ConvHighwayLayer, PlainConvCache, PlainConvLayer};
pub use highway::{block_combine, HighwayCache, HighwayGrads, HighwayLayer};
pub use network::{
    count_parameters, Architecture, BodyKind, Gradients, Layer, LayerCache, LossOutput, Network, NetworkTrace,
};
pub use plain::{PlainCache, PlainGrads, PlainLayer};
pub use softmax::{SoftmaxHead, SoftmaxOutput};

use crate::tensor::Tensor;

/// Uniform access to a layer's trainable tensors, in a fixed order that
/// matches the order of the gradients its backward pass returns.
pub trait Params {
    fn params(&self) -> Vec<&Tensor>;
    fn params_mut(&mut self) -> Vec<&mut Tensor>;

    fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }
}
