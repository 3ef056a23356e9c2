//! Shared test oracles. Nothing here calls a backward pass.

#![allow(dead_code)]

use std::path::PathBuf;

pub mod gradcheck;

use highway::layers::Params;
use highway::{Rng, Tensor};

/// Finite-difference step.
pub const EPS: f64 = 1e-5;

/// Magnitude below which a gradient entry is compared absolutely rather than
/// relatively. The five-point stencil has `O(ε⁴)` truncation error and
/// roughly `1e-16·|L| / ε ≈ 1e-11` of rounding noise, so relative error is
/// only meaningful above this floor.
pub const REL_FLOOR: f64 = 1e-4;

/// `∂f/∂x` by the five-point central stencil, one coordinate at a time.
pub fn numeric_grad(x: &Tensor, f: impl Fn(&Tensor) -> f64) -> Tensor {
    let mut probe = x.clone();
    let mut out = Tensor::zeros(x.shape());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        let mut at = |step: f64| {
            probe.data_mut()[i] = orig + step;
            f(&probe)
        };
        let (p1, m1, p2, m2) = (at(EPS), at(-EPS), at(2.0 * EPS), at(-2.0 * EPS));
        probe.data_mut()[i] = orig;
        out.data_mut()[i] = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * EPS);
    }
    out
}

/// Numeric gradient of `f` with respect to every parameter tensor of `layer`,
/// in [`Params`] order.
pub fn numeric_param_grads<L: Params + Clone>(layer: &L, f: impl Fn(&L) -> f64) -> Vec<Tensor> {
    let count = layer.params().len();
    (0..count)
        .map(|k| {
            let base = layer.params()[k].clone();
            numeric_grad(&base, |t| {
                let mut l = layer.clone();
                *l.params_mut()[k] = t.clone();
                f(&l)
            })
        })
        .collect()
}

/// `max_i |a_i − n_i| / max(|a_i|, |n_i|, REL_FLOOR)`.
pub fn max_rel_error(analytic: &Tensor, numeric: &Tensor) -> f64 {
    assert_eq!(analytic.shape(), numeric.shape());
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR))
        .fold(0.0, f64::max)
}

pub fn max_rel_error_all(analytic: &[Tensor], numeric: &[Tensor]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| max_rel_error(a, n))
        .fold(0.0, f64::max)
}

/// `Σ r∘y`, a scalar loss whose upstream gradient is the fixed tensor `r`.
pub fn projection(r: &Tensor, y: &Tensor) -> f64 {
    r.data().iter().zip(y.data()).map(|(a, b)| a * b).sum()
}

pub fn random(rng: &mut Rng, shape: &[usize], std: f64) -> Tensor {
    rng.normal_tensor(shape, std)
}

/// MNIST directory: `$HIGHWAY_MNIST_DIR`, else `data/mnist` at the workspace root.
pub fn mnist_dir() -> PathBuf {
    std::env::var_os("HIGHWAY_MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}
