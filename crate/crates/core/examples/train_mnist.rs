//! Trains a 20-layer highway network on a subset of MNIST and saves a
//! checkpoint.
//!
//!     scripts/fetch_mnist.sh
//!     cargo run --release --example train_mnist -- [data/mnist] [subset]

use highway::data::load_mnist;
use highway::init::{init_network_with, WeightInit};
use highway::layers::save_checkpoint;
use highway::optim::{train, SgdConfig};
use highway::rng::splitmix64;
use highway::{Activation, Architecture, BodyKind, Rng};

fn main() -> highway::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = args.next().unwrap_or_else(|| "data/mnist".into());
    let subset: usize = args.next().map_or(5000, |s| s.parse().expect("subset must be a number"));

    let ds = load_mnist(&dir, true)?.subset(subset, &mut Rng::new(0))?;
    let arch = Architecture::dense(BodyKind::Highway, 20, 50, Activation::Relu, ds.features(), ds.num_classes());
    let mut rng = Rng::new(splitmix64(1));
    let net = init_network_with(arch.build()?, WeightInit::He, -3.0, &mut rng);
    println!("{} parameters, {} examples", net.parameter_count(), ds.len());

    let cfg = SgdConfig {
        lr0: 0.03,
        epochs: 10,
        ..SgdConfig::default()
    };
    let (net, log) = train(net, &ds, &cfg, &mut rng)?;
    println!("initial loss {:.4}", log.initial_loss);
    for e in &log.epochs {
        println!("epoch {:>2}  lr {:.4}  loss {:.4}  accuracy {:.3}", e.epoch, e.lr, e.loss, e.accuracy);
    }

    let test = load_mnist(&dir, false)?;
    let out = net.evaluate(test.inputs(), test.labels())?;
    println!("test loss {:.4}, accuracy {:.3}", out.loss, out.correct as f64 / test.len() as f64);
    save_checkpoint(&net, "highway-20.ckpt")?;
    println!("saved highway-20.ckpt");
    Ok(())
}
