//! Deep feedforward highway networks with hand-written backpropagation.
//!
//! A highway layer computes `y = H(x)·T(x) + x·(1 − T(x))`: a learned
//! transform `H` blended per unit with the unchanged input, weighted by a
//! sigmoid transform gate `T`. With the gate bias initialized negative the
//! layers start out close to the identity, which keeps very deep stacks
//! trainable with plain SGD.
//!
//! The crate provides the layers and their gradients ([`layers`]),
//! initialization ([`init`]), SGD with momentum ([`optim`]), random
//! hyperparameter search ([`search`]), MNIST/CIFAR loaders ([`data`]), gate
//! introspection ([`analysis`]) and the experiment commands behind the
//! `highway` binary ([`cli`]).

pub mod analysis;
pub mod cli;
pub mod data;
pub mod error;
pub mod init;
pub mod layers;
pub mod optim;
pub mod rng;
pub mod search;
pub mod tensor;

pub use error::{Error, Result};
pub use layers::{Architecture, BodyKind, Network};
pub use rng::Rng;
pub use tensor::{Activation, Tensor};
