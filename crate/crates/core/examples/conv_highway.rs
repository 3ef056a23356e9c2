//! Trains a small convolutional highway network to tell horizontal stripes
//! from vertical ones in noisy 8×8 images.
//!
//!     cargo run --release --example conv_highway

use highway::data::Dataset;
use highway::init::{init_network_with, WeightInit};
use highway::optim::{train, SgdConfig};
use highway::{Activation, Architecture, BodyKind, Rng, Tensor};

fn stripes(n: usize, rng: &mut Rng) -> highway::Result<Dataset> {
    let (h, w) = (8, 8);
    let mut data = Vec::with_capacity(n * h * w);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let label = rng.below(2);
        let phase = rng.below(2);
        for r in 0..h {
            for c in 0..w {
                let k = if label == 0 { r } else { c };
                let on = (k + phase) % 2 == 0;
                data.push(if on { 1.0 } else { 0.0 } + 0.3 * rng.normal());
            }
        }
        labels.push(label);
    }
    Dataset::new(Tensor::new(vec![n, h * w], data)?, labels, 2, "stripes")?.with_image([1, h, w])
}

fn main() -> highway::Result<()> {
    let mut rng = Rng::new(5);
    let ds = stripes(512, &mut rng)?;
    let mut arch = Architecture::dense(BodyKind::ConvHighway, 4, 4, Activation::Relu, ds.features(), 2);
    arch.image = ds.image();
    let net = init_network_with(arch.build()?, WeightInit::He, -1.0, &mut rng);
    println!("{} parameters", net.parameter_count());

    let cfg = SgdConfig {
        lr0: 0.02,
        epochs: 8,
        batch_size: 32,
        ..SgdConfig::default()
    };
    let (net, log) = train(net, &ds, &cfg, &mut rng)?;
    for e in &log.epochs {
        println!("epoch {}  loss {:.4}  accuracy {:.3}", e.epoch, e.loss, e.accuracy);
    }
    let test = stripes(256, &mut rng)?;
    let out = net.evaluate(test.inputs(), test.labels())?;
    println!("held-out accuracy {:.3}", out.correct as f64 / test.len() as f64);
    Ok(())
}
