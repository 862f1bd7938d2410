//! The network engine: feature volumes, the four layer kinds
//! (convolution, max pooling, fully-connected, softmax), forward and
//! backward passes, and model serialization.

mod activation;
mod conv;
mod dense;
mod network;
mod pool;
mod serialize;
mod softmax;
mod volume;

pub use activation::{relu, relu_volume};
pub use conv::{conv_forward, ConvGrads, ConvParams};
pub use dense::{dense_forward, DenseGrads, DenseParams};
pub use network::{
    grad_check, relative_error, ActivationCache, Gradients, LayerGrads, LayerSpec, Network, Signal,
};
pub use pool::{pool_forward, PoolKind, PoolSpec};
pub use serialize::{model_from_json, model_to_json, MODEL_FORMAT_VERSION};
pub use softmax::softmax;
pub use volume::Volume;
