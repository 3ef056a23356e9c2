//! Compares every backprop gradient of a small highway network with central
//! finite differences.
//!
//!     cargo run --release --example gradient_check

use highway::init::{init_network, InitScheme, WeightInit};
use highway::{Activation, Architecture, BodyKind, Rng};

fn main() -> highway::Result<()> {
    let arch = Architecture::dense(BodyKind::Highway, 4, 6, Activation::Tanh, 5, 3);
    let mut net = init_network(arch.build()?, &InitScheme::new(WeightInit::He, -1.0, 7)?);
    let mut rng = Rng::new(11);
    let x = rng.normal_tensor(&[8, 5], 1.0);
    let labels: Vec<usize> = (0..8).map(|i| i % 3).collect();

    let (_, grads) = net.loss_and_grad(&x, &labels)?;
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for (layer, analytic) in grads.layers.iter().enumerate() {
        for (p, g) in analytic.iter().enumerate() {
            for i in 0..g.len() {
                let mut loss_at = |delta: f64| -> highway::Result<f64> {
                    let mut params = net.layer_params_mut();
                    params[layer][p].data_mut()[i] += delta;
                    drop(params);
                    let loss = net.evaluate(&x, &labels)?.loss;
                    net.layer_params_mut()[layer][p].data_mut()[i] -= delta;
                    Ok(loss)
                };
                let numeric = (loss_at(eps)? - loss_at(-eps)?) / (2.0 * eps);
                let a = g.data()[i];
                worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-4));
            }
        }
        println!("layer {layer}: {} parameter tensors checked", analytic.len());
    }
    println!("max relative error {worst:.2e}");
    Ok(())
}
