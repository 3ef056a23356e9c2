//! Fully-connected highway layer.
//!
//! Forward, per block `i`:
//!
//! ```text
//! a = x·W_Hᵀ + b_H        h = φ(a)          (block state)
//! s = x·W_Tᵀ + b_T        t = σ(s)          (transform gate)
//! y = h∘t + x∘(1 − t)                       (carry gate coupled as 1 − t)
//! ```
//!
//! Backward. `y` depends on `x` through three routes: the block state, the
//! gate, and the carry term. With `g = ∂L/∂y`:
//!
//! ```text
//! ∂L/∂h = g∘t
//! ∂L/∂t = g∘(h − x)               (the −x comes from the coupled carry gate)
//! ∂L/∂a = ∂L/∂h ∘ φ'(a)
//! ∂L/∂s = ∂L/∂t ∘ t∘(1 − t)       (σ' = σ(1 − σ))
//! ∂L/∂x = ∂L/∂a·W_H + ∂L/∂s·W_T + g∘(1 − t)
//! ∂L/∂W_H = (∂L/∂a)ᵀ·x    ∂L/∂b_H = Σ_batch ∂L/∂a
//! ∂L/∂W_T = (∂L/∂s)ᵀ·x    ∂L/∂b_T = Σ_batch ∂L/∂s
//! ```
//!
//! At `t = 0` the Jacobian `∂y/∂x` is the identity; at `t = 1` it is `H'`.

use crate::error::{Error, Result};
use crate::tensor::{sigmoid, Activation, Tensor};

use super::Params;

/// `y = h∘t + x∘(1 − t)`, elementwise.
pub fn block_combine(h: &Tensor, t: &Tensor, x: &Tensor) -> Result<Tensor> {
    h.expect_same_shape(t, "block_combine")?;
    h.expect_same_shape(x, "block_combine")?;
    let data = h
        .data()
        .iter()
        .zip(t.data())
        .zip(x.data())
        .map(|((&h, &t), &x)| h * t + x * (1.0 - t))
        .collect();
    Tensor::new(h.shape().to_vec(), data)
}

#[derive(Clone, Debug, PartialEq)]
pub struct HighwayLayer {
    /// `[n × n]`
    pub w_h: Tensor,
    pub b_h: Tensor,
    /// `[n × n]`
    pub w_t: Tensor,
    pub b_t: Tensor,
    pub activation: Activation,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Clone, Debug)]
pub struct HighwayCache {
    pub input: Tensor,
    pub pre_state: Tensor,
    pub pre_gate: Tensor,
    pub state: Tensor,
    pub gate: Tensor,
    pub output: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HighwayGrads {
    pub w_h: Tensor,
    pub b_h: Tensor,
    pub w_t: Tensor,
    pub b_t: Tensor,
}

impl HighwayLayer {
    pub fn new(w_h: Tensor, b_h: Tensor, w_t: Tensor, b_t: Tensor, activation: Activation) -> Result<Self> {
        let n = w_h.shape().first().copied().unwrap_or(0);
        let square = [n, n];
        let vector = [n];
        if w_h.shape() != square || w_t.shape() != square || b_h.shape() != vector || b_t.shape() != vector {
            return Err(Error::InvalidLayer(format!(
                "highway parameters disagree on width: W_H {:?}, b_H {:?}, W_T {:?}, b_T {:?}",
                w_h.shape(),
                b_h.shape(),
                w_t.shape(),
                b_t.shape()
            )));
        }
        Ok(HighwayLayer {
            w_h,
            b_h,
            w_t,
            b_t,
            activation,
        })
    }

    pub fn zeros(width: usize, activation: Activation) -> Self {
        HighwayLayer {
            w_h: Tensor::zeros(&[width, width]),
            b_h: Tensor::zeros(&[width]),
            w_t: Tensor::zeros(&[width, width]),
            b_t: Tensor::zeros(&[width]),
            activation,
        }
    }

    pub fn width(&self) -> usize {
        self.b_h.len()
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, HighwayCache)> {
        if x.shape().len() != 2 || x.cols() != self.width() {
            return Err(Error::shape("highway_forward", x.shape(), self.w_h.shape()));
        }
        let pre_state = x.matmul_nt(&self.w_h)?.add_row_vector(&self.b_h)?;
        let pre_gate = x.matmul_nt(&self.w_t)?.add_row_vector(&self.b_t)?;
        let state = pre_state.map(|v| self.activation.apply(v));
        let gate = sigmoid(&pre_gate);
        let output = block_combine(&state, &gate, x)?;
        Ok((
            output.clone(),
            HighwayCache {
                input: x.clone(),
                pre_state,
                pre_gate,
                state,
                gate,
                output,
            },
        ))
    }

    pub fn backward(&self, cache: &HighwayCache, d_out: &Tensor) -> Result<(Tensor, HighwayGrads)> {
        cache.output.expect_same_shape(d_out, "highway_backward")?;
        let n = cache.input.len();
        let (x, a, h, t, g) = (
            cache.input.data(),
            cache.pre_state.data(),
            cache.state.data(),
            cache.gate.data(),
            d_out.data(),
        );
        let mut d_pre_state = Vec::with_capacity(n);
        let mut d_pre_gate = Vec::with_capacity(n);
        let mut d_carry = Vec::with_capacity(n);
        for i in 0..n {
            d_pre_state.push(g[i] * t[i] * self.activation.derivative(a[i]));
            d_pre_gate.push(g[i] * (h[i] - x[i]) * t[i] * (1.0 - t[i]));
            d_carry.push(g[i] * (1.0 - t[i]));
        }
        let shape = cache.input.shape().to_vec();
        let d_pre_state = Tensor::new(shape.clone(), d_pre_state)?;
        let d_pre_gate = Tensor::new(shape.clone(), d_pre_gate)?;
        let d_carry = Tensor::new(shape, d_carry)?;

        let d_in = d_pre_state
            .matmul(&self.w_h)?
            .add(&d_pre_gate.matmul(&self.w_t)?)?
            .add(&d_carry)?;
        let grads = HighwayGrads {
            w_h: d_pre_state.matmul_tn(&cache.input)?,
            b_h: d_pre_state.sum_rows(),
            w_t: d_pre_gate.matmul_tn(&cache.input)?,
            b_t: d_pre_gate.sum_rows(),
        };
        Ok((d_in, grads))
    }
}

impl Params for HighwayLayer {
    fn params(&self) -> Vec<&Tensor> {
        vec![&self.w_h, &self.b_h, &self.w_t, &self.b_t]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w_h, &mut self.b_h, &mut self.w_t, &mut self.b_t]
    }
}

impl HighwayGrads {
    pub fn into_vec(self) -> Vec<Tensor> {
        vec![self.w_h, self.b_h, self.w_t, self.b_t]
    }
}
