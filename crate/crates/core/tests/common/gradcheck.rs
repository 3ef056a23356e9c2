//! Analytic-vs-numeric gradient comparisons shared by the gradient tests
//! and the acceptance suite. Each function returns the worst relative error
//! for one random draw.

use super::*;
use highway::init::{init_network, InitScheme, WeightInit};
use highway::layers::*;
use highway::{Activation, Architecture, BodyKind, Rng, Tensor};

pub fn activation_for(seed: u64) -> Activation {
    [Activation::Tanh, Activation::Relu, Activation::Identity][seed as usize % 3]
}

pub fn plain_error(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let layer = PlainLayer::new(random(&mut rng, &[3, 4], 0.7), random(&mut rng, &[3], 0.5), activation_for(seed)).unwrap();
    let x = random(&mut rng, &[2, 4], 1.0);
    let r = random(&mut rng, &[2, 3], 1.0);
    let (_, cache) = layer.forward(&x).unwrap();
    let (dx, grads) = layer.backward(&cache, &r).unwrap();
    let loss = |l: &PlainLayer, x: &Tensor| projection(&r, &l.forward(x).unwrap().0);
    let num_dx = numeric_grad(&x, |x| loss(&layer, x));
    let num_p = numeric_param_grads(&layer, |l| loss(l, &x));
    max_rel_error(&dx, &num_dx).max(max_rel_error_all(&grads.into_vec(), &num_p))
}

pub fn highway_error(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let layer = HighwayLayer::new(
        random(&mut rng, &[4, 4], 0.7),
        random(&mut rng, &[4], 0.5),
        random(&mut rng, &[4, 4], 0.7),
        random(&mut rng, &[4], 1.0),
        activation_for(seed),
    )
    .unwrap();
    let x = random(&mut rng, &[3, 4], 1.0);
    let r = random(&mut rng, &[3, 4], 1.0);
    let (_, cache) = layer.forward(&x).unwrap();
    let (dx, grads) = layer.backward(&cache, &r).unwrap();
    let loss = |l: &HighwayLayer, x: &Tensor| projection(&r, &l.forward(x).unwrap().0);
    let num_dx = numeric_grad(&x, |x| loss(&layer, x));
    let num_p = numeric_param_grads(&layer, |l| loss(l, &x));
    max_rel_error(&dx, &num_dx).max(max_rel_error_all(&grads.into_vec(), &num_p))
}

pub fn conv_highway_error(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let layer = ConvHighwayLayer::new(
        random(&mut rng, &[2, 2, 3, 3], 0.4),
        random(&mut rng, &[2], 0.5),
        random(&mut rng, &[2, 2, 3, 3], 0.4),
        random(&mut rng, &[2], 1.0),
        activation_for(seed),
    )
    .unwrap();
    let x = random(&mut rng, &[2, 2, 5, 5], 1.0);
    let r = random(&mut rng, &[2, 2, 5, 5], 1.0);
    let (_, cache) = layer.forward(&x).unwrap();
    let (dx, grads) = layer.backward(&cache, &r).unwrap();
    let loss = |l: &ConvHighwayLayer, x: &Tensor| projection(&r, &l.forward(x).unwrap().0);
    let num_dx = numeric_grad(&x, |x| loss(&layer, x));
    let num_p = numeric_param_grads(&layer, |l| loss(l, &x));
    max_rel_error(&dx, &num_dx).max(max_rel_error_all(&grads.into_vec(), &num_p))
}

pub fn softmax_error(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let head = SoftmaxHead::new(random(&mut rng, &[5, 4], 1.0), random(&mut rng, &[5], 1.0)).unwrap();
    let x = random(&mut rng, &[3, 4], 1.0);
    let labels: Vec<usize> = (0..3).map(|_| rng.below(5)).collect();
    let out = head.loss_and_grad(&x, &labels).unwrap();
    let loss = |h: &SoftmaxHead, x: &Tensor| h.loss_and_grad(x, &labels).unwrap().loss;
    let num_dx = numeric_grad(&x, |x| loss(&head, x));
    let num_p = numeric_param_grads(&head, |h| loss(h, &x));
    max_rel_error(&out.d_input, &num_dx).max(max_rel_error_all(&[out.d_weight, out.d_bias], &num_p))
}

/// Finite differences over every parameter of a whole network.
pub fn network_error(net: &Network, x: &Tensor, labels: &[usize]) -> f64 {
    let (_, grads) = net.loss_and_grad(x, labels).unwrap();
    let analytic: Vec<Tensor> = grads.iter().cloned().collect();
    let count = analytic.len();
    let mut worst: f64 = 0.0;
    for k in 0..count {
        let base = net.parameters()[k].clone();
        let numeric = numeric_grad(&base, |t| {
            let mut n = net.clone();
            let mut all: Vec<&mut Tensor> = n.layer_params_mut().into_iter().flatten().collect();
            *all[k] = t.clone();
            n.evaluate(x, labels).unwrap().loss
        });
        worst = worst.max(max_rel_error(&analytic[k], &numeric));
    }
    worst
}

/// Input plain layer, 3 highway layers of 5 units, softmax head.
pub fn full_network_error(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let arch = Architecture::dense(BodyKind::Highway, 4, 5, activation_for(seed), 6, 3);
    let scheme = InitScheme::new(WeightInit::He, -rng.uniform(0.5, 3.0), seed).unwrap();
    let net = init_network(arch.build().unwrap(), &scheme);
    // Randomize gate biases per unit so gradients are not symmetric.
    let mut net = net;
    for layer in net.body_mut() {
        if let Layer::Highway(h) = layer {
            h.b_t = random(&mut rng, &[5], 1.0);
            h.b_h = random(&mut rng, &[5], 0.3);
        }
    }
    let x = random(&mut rng, &[4, 6], 1.0);
    let labels: Vec<usize> = (0..4).map(|_| rng.below(3)).collect();
    network_error(&net, &x, &labels)
}
