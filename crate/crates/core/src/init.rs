//! Parameter initialization.
//!
//! Weights get a zero-mean Gaussian with a variance-preserving scale:
//! He uses `std = sqrt(2 / fan_in)`, Glorot `std = sqrt(2 / (fan_in + fan_out))`.
//! For a `[out × in × k × k]` kernel, `fan_in = in·k²` and `fan_out = out·k²`.
//! Transform-gate weights use the same scheme as block-state weights; every
//! transform-gate bias starts at one shared negative value so that fresh
//! layers lean towards carrying their input. All other biases start at 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{Layer, Network};
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightInit {
    He,
    Glorot,
}

impl WeightInit {
    pub fn std(self, fan_in: usize, fan_out: usize) -> f64 {
        match self {
            WeightInit::He => (2.0 / fan_in as f64).sqrt(),
            WeightInit::Glorot => (2.0 / (fan_in + fan_out) as f64).sqrt(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitScheme {
    pub kind: WeightInit,
    pub gate_bias: f64,
    pub seed: u64,
}

impl InitScheme {
    pub fn new(kind: WeightInit, gate_bias: f64, seed: u64) -> Result<Self> {
        if !(gate_bias < 0.0) {
            return Err(Error::Config(format!("gate bias must be negative, got {gate_bias}")));
        }
        Ok(InitScheme { kind, gate_bias, seed })
    }
}

/// `(fan_in, fan_out)` of a dense `[out × in]` or conv `[out × in × k × k]` weight.
pub fn fans(shape: &[usize]) -> (usize, usize) {
    let receptive: usize = shape[2..].iter().product();
    (shape[1] * receptive, shape[0] * receptive)
}

pub fn init_weights(shape: &[usize], kind: WeightInit, rng: &mut Rng) -> Tensor {
    let (fan_in, fan_out) = fans(shape);
    rng.normal_tensor(shape, kind.std(fan_in, fan_out))
}

/// Re-initializes every parameter of `net`, drawing from a generator seeded
/// with `scheme.seed`.
pub fn init_network(net: Network, scheme: &InitScheme) -> Network {
    let mut rng = Rng::new(scheme.seed);
    init_network_with(net, scheme.kind, scheme.gate_bias, &mut rng)
}

pub fn init_network_with(mut net: Network, kind: WeightInit, gate_bias: f64, rng: &mut Rng) -> Network {
    let gated: Vec<bool> = std::iter::once(false)
        .chain(net.body().iter().map(|l| matches!(l, Layer::Highway(_) | Layer::ConvHighway(_))))
        .chain(std::iter::once(false))
        .collect();
    for (params, gated) in net.layer_params_mut().into_iter().zip(gated) {
        // Params order is (weight, bias) or (W_H, b_H, W_T, b_T).
        for (j, t) in params.into_iter().enumerate() {
            let shape = t.shape().to_vec();
            *t = if j % 2 == 0 {
                init_weights(&shape, kind, rng)
            } else if gated && j == 3 {
                Tensor::filled(&shape, gate_bias)
            } else {
                Tensor::zeros(&shape)
            };
        }
    }
    net
}
