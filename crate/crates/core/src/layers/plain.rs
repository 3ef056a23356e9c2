use crate::error::{Error, Result};
use crate::tensor::{Activation, Tensor};

use super::Params;

/// Conventional fully-connected layer `y = φ(x·Wᵀ + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlainLayer {
    /// `[out × in]`
    pub weight: Tensor,
    /// `[out]`
    pub bias: Tensor,
    pub activation: Activation,
}

#[derive(Clone, Debug)]
pub struct PlainCache {
    pub input: Tensor,
    pub pre: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlainGrads {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl PlainLayer {
    pub fn new(weight: Tensor, bias: Tensor, activation: Activation) -> Result<Self> {
        let &[out, _] = weight.shape() else {
            return Err(Error::InvalidLayer(format!(
                "plain weight must be a matrix, got {:?}",
                weight.shape()
            )));
        };
        if bias.shape() != [out] {
            return Err(Error::shape("plain bias", weight.shape(), bias.shape()));
        }
        Ok(PlainLayer {
            weight,
            bias,
            activation,
        })
    }

    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        PlainLayer {
            weight: Tensor::zeros(&[outputs, inputs]),
            bias: Tensor::zeros(&[outputs]),
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, PlainCache)> {
        if x.shape().len() != 2 || x.cols() != self.inputs() {
            return Err(Error::shape("plain_forward", x.shape(), self.weight.shape()));
        }
        let pre = x.matmul_nt(&self.weight)?.add_row_vector(&self.bias)?;
        let y = pre.map(|v| self.activation.apply(v));
        Ok((
            y,
            PlainCache {
                input: x.clone(),
                pre,
            },
        ))
    }

    pub fn backward(&self, cache: &PlainCache, d_out: &Tensor) -> Result<(Tensor, PlainGrads)> {
        cache.pre.expect_same_shape(d_out, "plain_backward")?;
        let d_pre = cache
            .pre
            .zip_map(d_out, "plain_backward", |a, g| g * self.activation.derivative(a))?;
        let grads = PlainGrads {
            weight: d_pre.matmul_tn(&cache.input)?,
            bias: d_pre.sum_rows(),
        };
        let d_in = d_pre.matmul(&self.weight)?;
        Ok((d_in, grads))
    }
}

impl Params for PlainLayer {
    fn params(&self) -> Vec<&Tensor> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weight, &mut self.bias]
    }
}

impl PlainGrads {
    pub fn into_vec(self) -> Vec<Tensor> {
        vec![self.weight, self.bias]
    }
}
