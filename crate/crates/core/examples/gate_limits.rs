//! A highway layer with a strongly negative gate bias carries its input
//! through unchanged; a strongly positive one behaves like a plain layer.
//!
//!     cargo run --release --example gate_limits

use highway::layers::HighwayLayer;
use highway::{Activation, Rng, Tensor};

fn main() -> highway::Result<()> {
    let n = 8;
    let mut rng = Rng::new(3);
    let x = rng.normal_tensor(&[4, n], 1.0);
    for bias in [-20.0, -2.0, 0.0, 2.0, 20.0] {
        let layer = HighwayLayer::new(
            rng.normal_tensor(&[n, n], 0.5),
            rng.normal_tensor(&[n], 0.1),
            Tensor::zeros(&[n, n]),
            Tensor::filled(&[n], bias),
            Activation::Relu,
        )?;
        let (y, cache) = layer.forward(&x)?;
        let g = rng.normal_tensor(&[4, n], 1.0);
        let (dx, _) = layer.backward(&cache, &g)?;
        println!(
            "b_T {bias:>5}: gate {:.4}  |y-x| {:.2e}  |y-H(x)| {:.2e}  |dx-dy| {:.2e}",
            cache.gate.data()[0],
            y.max_abs_diff(&x)?,
            y.max_abs_diff(&cache.state)?,
            dx.max_abs_diff(&g)?,
        );
    }
    Ok(())
}
