//! Encoder-decoder network that fuses stacked, synchronized semantic grids
//! into one predicted grid.
//!
//! The encoder has `depth` blocks of two 3×3 convolutions with batch norm and
//! ReLU; every block but the deepest is followed by 2×2 max pooling, and the
//! deepest by dropout while training. Each decoder block upsamples (nearest
//! neighbour, then a 2×2 convolution), concatenates the matching encoder
//! output and applies two 3×3 convolutions with batch norm and no
//! activation. Two more such convolutions reduce to the class count before a
//! per-cell softmax.
//!
//! Everything is generic over [`NetScalar`] (`f32` or `f64`); training
//! normally runs in `f32` and gradient checks in `f64`.

pub mod checkpoint;
mod error;
pub mod layers;
pub mod network;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use network::{EdConfig, EdNetwork, ForwardCache, Layout};
pub use tensor::{NetScalar, Tensor};
pub use train::{evaluate, predict_samples, prepare_split, train, train_samples, EpochLog, Evaluation, Schedule};

pub type Network = EdNetwork<f32>;
pub type Network64 = EdNetwork<f64>;
