//! Training toolkit built around the rotaflip layer: a training-time
//! regularizer that applies a random dihedral-group transform to a small
//! fraction of feature maps after convolutional layers.
//!
//! The crate bundles everything needed to study the layer at desk scale:
//! a dense NCHW tensor core, the exact eight-element dihedral group,
//! differentiable layers with gradient-checked backward passes, miniature
//! DenseNet and U-net builders with a pluggable regularizer slot, synthetic
//! rotation-symmetric datasets, and an experiment harness with eight-version
//! evaluation and the agreement metric.
//!
//! Start with the runnable programs under `examples/`; the `rotaflip` binary
//! exposes the same flows as `gen`, `train`, `sweep`, `eval`, and `gradcheck`
//! subcommands.

pub mod d4;
pub mod error;
pub mod rng;
pub mod tensor;
pub mod tensor_io;

pub use d4::D4Code;
pub use error::{Error, Result};
pub use rng::RngStream;
pub use tensor::{Precision, ReduceOp, Scalar, Tensor};
