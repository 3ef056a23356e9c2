//! Stride-1 "same" convolutions and the convolutional highway layer.
//!
//! Feature maps are `[batch × channels × height × width]`; kernels are
//! `[out_channels × in_channels × k × k]` with odd `k` and zero padding of
//! `(k − 1)/2` on every side, so spatial size is preserved. The highway
//! variant gates every channel at every pixel.

use crate::error::{Error, Result};
use crate::tensor::{sigmoid, Activation, Tensor};

use super::highway::block_combine;
use super::Params;

fn dims4(t: &Tensor, op: &'static str) -> Result<[usize; 4]> {
    match *t.shape() {
        [a, b, c, d] => Ok([a, b, c, d]),
        _ => Err(Error::InvalidTensor(format!(
            "{op} expects a 4-d tensor, got {:?}",
            t.shape()
        ))),
    }
}

fn check_kernel(kernel: &Tensor) -> Result<[usize; 4]> {
    let [co, ci, kh, kw] = dims4(kernel, "kernel")?;
    if kh != kw || kh % 2 == 0 {
        return Err(Error::InvalidLayer(format!(
            "kernel must be square with odd size, got {kh}×{kw}"
        )));
    }
    Ok([co, ci, kh, kw])
}

/// Output positions `i` whose source `i + off − pad` lies inside `0..len`.
fn valid_range(len: usize, off: usize, pad: usize) -> std::ops::Range<usize> {
    let lo = pad.saturating_sub(off);
    let hi = (len + pad).saturating_sub(off).min(len);
    lo..hi.max(lo)
}

/// Same-size zero-padded convolution (cross-correlation) plus per-channel bias.
pub fn conv2d_same(x: &Tensor, kernel: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let [n, ci, h, w] = dims4(x, "conv2d")?;
    let [co, kci, k, _] = check_kernel(kernel)?;
    if kci != ci {
        return Err(Error::shape("conv2d", x.shape(), kernel.shape()));
    }
    if bias.shape() != [co] {
        return Err(Error::shape("conv2d bias", kernel.shape(), bias.shape()));
    }
    let pad = (k - 1) / 2;
    let (xd, kd) = (x.data(), kernel.data());
    let mut out = vec![0.0; n * co * h * w];
    for b in 0..n {
        for o in 0..co {
            let plane = &mut out[(b * co + o) * h * w..(b * co + o + 1) * h * w];
            plane.fill(bias.data()[o]);
            for c in 0..ci {
                let src = &xd[(b * ci + c) * h * w..(b * ci + c + 1) * h * w];
                for p in 0..k {
                    for q in 0..k {
                        let kv = kd[((o * ci + c) * k + p) * k + q];
                        if kv == 0.0 {
                            continue;
                        }
                        let cols = valid_range(w, q, pad);
                        for i in valid_range(h, p, pad) {
                            let si = i + p - pad;
                            let dst = &mut plane[i * w + cols.start..i * w + cols.end];
                            let s = &src[si * w + cols.start + q - pad..si * w + cols.end + q - pad];
                            for (d, &v) in dst.iter_mut().zip(s) {
                                *d += kv * v;
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![n, co, h, w], out)
}

/// Gradients of [`conv2d_same`] given the upstream gradient `d_out`.
///
/// Returns `(∂L/∂x, ∂L/∂kernel, ∂L/∂bias)`.
pub fn conv2d_same_backward(x: &Tensor, kernel: &Tensor, d_out: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
    let [n, ci, h, w] = dims4(x, "conv2d_backward")?;
    let [co, _, k, _] = check_kernel(kernel)?;
    if d_out.shape() != [n, co, h, w] {
        return Err(Error::shape("conv2d_backward", &[n, co, h, w], d_out.shape()));
    }
    let pad = (k - 1) / 2;
    let (xd, kd, gd) = (x.data(), kernel.data(), d_out.data());
    let mut dx = vec![0.0; xd.len()];
    let mut dk = vec![0.0; kd.len()];
    let mut db = vec![0.0; co];
    for b in 0..n {
        for o in 0..co {
            let g = &gd[(b * co + o) * h * w..(b * co + o + 1) * h * w];
            db[o] += g.iter().sum::<f64>();
            for c in 0..ci {
                let base = (b * ci + c) * h * w;
                for p in 0..k {
                    for q in 0..k {
                        let ki = ((o * ci + c) * k + p) * k + q;
                        let kv = kd[ki];
                        let cols = valid_range(w, q, pad);
                        let mut acc = 0.0;
                        for i in valid_range(h, p, pad) {
                            let si = i + p - pad;
                            let grow = &g[i * w + cols.start..i * w + cols.end];
                            let lo = base + si * w + cols.start + q - pad;
                            let hi = base + si * w + cols.end + q - pad;
                            for (&gv, &xv) in grow.iter().zip(&xd[lo..hi]) {
                                acc += gv * xv;
                            }
                            for (d, &gv) in dx[lo..hi].iter_mut().zip(grow) {
                                *d += gv * kv;
                            }
                        }
                        dk[ki] += acc;
                    }
                }
            }
        }
    }
    Ok((
        Tensor::new(x.shape().to_vec(), dx)?,
        Tensor::new(kernel.shape().to_vec(), dk)?,
        Tensor::new(vec![co], db)?,
    ))
}

/// Convolution followed by an activation. Used as the channel-changing
/// input layer ahead of a convolutional highway body.
#[derive(Clone, Debug, PartialEq)]
pub struct PlainConvLayer {
    pub kernel: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

#[derive(Clone, Debug)]
pub struct PlainConvCache {
    pub input: Tensor,
    pub pre: Tensor,
}

impl PlainConvLayer {
    pub fn new(kernel: Tensor, bias: Tensor, activation: Activation) -> Result<Self> {
        let [co, ..] = check_kernel(&kernel)?;
        if bias.shape() != [co] {
            return Err(Error::shape("conv bias", kernel.shape(), bias.shape()));
        }
        Ok(PlainConvLayer {
            kernel,
            bias,
            activation,
        })
    }

    pub fn zeros(in_channels: usize, out_channels: usize, kernel: usize, activation: Activation) -> Result<Self> {
        Self::new(
            Tensor::zeros(&[out_channels, in_channels, kernel, kernel]),
            Tensor::zeros(&[out_channels]),
            activation,
        )
    }

    pub fn in_channels(&self) -> usize {
        self.kernel.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.kernel.shape()[0]
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel.shape()[2]
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, PlainConvCache)> {
        let pre = conv2d_same(x, &self.kernel, &self.bias)?;
        let y = pre.map(|v| self.activation.apply(v));
        Ok((
            y,
            PlainConvCache {
                input: x.clone(),
                pre,
            },
        ))
    }

    /// Returns `∂L/∂x` and `[∂L/∂kernel, ∂L/∂bias]`.
    pub fn backward(&self, cache: &PlainConvCache, d_out: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        let d_pre = cache
            .pre
            .zip_map(d_out, "conv_backward", |a, g| g * self.activation.derivative(a))?;
        let (dx, dk, db) = conv2d_same_backward(&cache.input, &self.kernel, &d_pre)?;
        Ok((dx, vec![dk, db]))
    }
}

impl Params for PlainConvLayer {
    fn params(&self) -> Vec<&Tensor> {
        vec![&self.kernel, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.kernel, &mut self.bias]
    }
}

/// Convolutional highway layer: block state and transform gate are both
/// same-size convolutions of the input.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvHighwayLayer {
    /// `[c × c × k × k]`
    pub k_h: Tensor,
    pub b_h: Tensor,
    /// `[c × c × k × k]`
    pub k_t: Tensor,
    pub b_t: Tensor,
    pub activation: Activation,
}

#[derive(Clone, Debug)]
pub struct ConvHighwayCache {
    pub input: Tensor,
    pub pre_state: Tensor,
    pub pre_gate: Tensor,
    pub state: Tensor,
    pub gate: Tensor,
    pub output: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvHighwayGrads {
    pub k_h: Tensor,
    pub b_h: Tensor,
    pub k_t: Tensor,
    pub b_t: Tensor,
}

impl ConvHighwayLayer {
    pub fn new(k_h: Tensor, b_h: Tensor, k_t: Tensor, b_t: Tensor, activation: Activation) -> Result<Self> {
        let [co, ci, ..] = check_kernel(&k_h)?;
        check_kernel(&k_t)?;
        if co != ci || k_t.shape() != k_h.shape() || b_h.shape() != [co] || b_t.shape() != [co] {
            return Err(Error::InvalidLayer(format!(
                "conv highway parameters disagree: K_H {:?}, b_H {:?}, K_T {:?}, b_T {:?}",
                k_h.shape(),
                b_h.shape(),
                k_t.shape(),
                b_t.shape()
            )));
        }
        Ok(ConvHighwayLayer {
            k_h,
            b_h,
            k_t,
            b_t,
            activation,
        })
    }

    pub fn zeros(channels: usize, kernel: usize, activation: Activation) -> Result<Self> {
        let shape = [channels, channels, kernel, kernel];
        Self::new(
            Tensor::zeros(&shape),
            Tensor::zeros(&[channels]),
            Tensor::zeros(&shape),
            Tensor::zeros(&[channels]),
            activation,
        )
    }

    pub fn channels(&self) -> usize {
        self.b_h.len()
    }

    pub fn kernel_size(&self) -> usize {
        self.k_h.shape()[2]
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, ConvHighwayCache)> {
        let [_, c, _, _] = dims4(x, "conv_highway_forward")?;
        if c != self.channels() {
            return Err(Error::shape("conv_highway_forward", x.shape(), self.k_h.shape()));
        }
        let pre_state = conv2d_same(x, &self.k_h, &self.b_h)?;
        let pre_gate = conv2d_same(x, &self.k_t, &self.b_t)?;
        let state = pre_state.map(|v| self.activation.apply(v));
        let gate = sigmoid(&pre_gate);
        let output = block_combine(&state, &gate, x)?;
        Ok((
            output.clone(),
            ConvHighwayCache {
                input: x.clone(),
                pre_state,
                pre_gate,
                state,
                gate,
                output,
            },
        ))
    }

    pub fn backward(&self, cache: &ConvHighwayCache, d_out: &Tensor) -> Result<(Tensor, ConvHighwayGrads)> {
        cache.output.expect_same_shape(d_out, "conv_highway_backward")?;
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

        let (dx_h, dk_h, db_h) = conv2d_same_backward(&cache.input, &self.k_h, &d_pre_state)?;
        let (dx_t, dk_t, db_t) = conv2d_same_backward(&cache.input, &self.k_t, &d_pre_gate)?;
        let d_in = dx_h.add(&dx_t)?.add(&d_carry)?;
        Ok((
            d_in,
            ConvHighwayGrads {
                k_h: dk_h,
                b_h: db_h,
                k_t: dk_t,
                b_t: db_t,
            },
        ))
    }
}

impl Params for ConvHighwayLayer {
    fn params(&self) -> Vec<&Tensor> {
        vec![&self.k_h, &self.b_h, &self.k_t, &self.b_t]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.k_h, &mut self.b_h, &mut self.k_t, &mut self.b_t]
    }
}

impl ConvHighwayGrads {
    pub fn into_vec(self) -> Vec<Tensor> {
        vec![self.k_h, self.b_h, self.k_t, self.b_t]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    /// Direct definition with explicit bounds checks, independent of the
    /// range arithmetic in `conv2d_same`.
    fn naive_conv(x: &Tensor, k: &Tensor, b: &Tensor) -> Tensor {
        let [n, ci, h, w] = dims4(x, "").unwrap();
        let [co, _, ks, _] = dims4(k, "").unwrap();
        let pad = (ks as isize - 1) / 2;
        let mut out = Tensor::zeros(&[n, co, h, w]);
        for bi in 0..n {
            for o in 0..co {
                for i in 0..h {
                    for j in 0..w {
                        let mut acc = b.data()[o];
                        for c in 0..ci {
                            for p in 0..ks {
                                for q in 0..ks {
                                    let si = i as isize + p as isize - pad;
                                    let sj = j as isize + q as isize - pad;
                                    if si < 0 || sj < 0 || si >= h as isize || sj >= w as isize {
                                        continue;
                                    }
                                    acc += k.data()[((o * ci + c) * ks + p) * ks + q]
                                        * x.data()[((bi * ci + c) * h + si as usize) * w + sj as usize];
                                }
                            }
                        }
                        out.data_mut()[((bi * co + o) * h + i) * w + j] = acc;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn matches_naive_convolution() {
        let mut rng = Rng::new(21);
        for k in [1, 3, 5] {
            let x = rng.normal_tensor(&[2, 3, 5, 4], 1.0);
            let kernel = rng.normal_tensor(&[2, 3, k, k], 1.0);
            let bias = rng.normal_tensor(&[2], 1.0);
            let fast = conv2d_same(&x, &kernel, &bias).unwrap();
            let slow = naive_conv(&x, &kernel, &bias);
            assert!(fast.max_abs_diff(&slow).unwrap() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn output_keeps_spatial_size() {
        let mut rng = Rng::new(1);
        for k in [1, 3, 5] {
            let layer = ConvHighwayLayer::new(
                rng.normal_tensor(&[2, 2, k, k], 0.3),
                Tensor::zeros(&[2]),
                rng.normal_tensor(&[2, 2, k, k], 0.3),
                Tensor::zeros(&[2]),
                Activation::Relu,
            )
            .unwrap();
            let x = rng.normal_tensor(&[1, 2, 6, 7], 1.0);
            let (y, _) = layer.forward(&x).unwrap();
            assert_eq!(y.shape(), x.shape());
        }
    }

    #[test]
    fn saturated_gates_carry_input() {
        let mut rng = Rng::new(2);
        let layer = ConvHighwayLayer::new(
            rng.normal_tensor(&[2, 2, 3, 3], 1.0),
            Tensor::zeros(&[2]),
            Tensor::zeros(&[2, 2, 3, 3]),
            Tensor::filled(&[2], -20.0),
            Activation::Relu,
        )
        .unwrap();
        let x = rng.normal_tensor(&[2, 2, 5, 5], 1.0);
        let (y, _) = layer.forward(&x).unwrap();
        assert!(y.max_abs_diff(&x).unwrap() < 1e-3);
    }

    #[test]
    fn identity_kernel_with_half_gates_is_identity() {
        let mut k_h = Tensor::zeros(&[2, 2, 1, 1]);
        k_h.data_mut()[0] = 1.0;
        k_h.data_mut()[3] = 1.0;
        let layer = ConvHighwayLayer::new(
            k_h,
            Tensor::zeros(&[2]),
            Tensor::zeros(&[2, 2, 1, 1]),
            Tensor::zeros(&[2]),
            Activation::Identity,
        )
        .unwrap();
        let x = Rng::new(3).normal_tensor(&[1, 2, 3, 3], 1.0);
        let (y, cache) = layer.forward(&x).unwrap();
        assert!(cache.gate.data().iter().all(|&t| t == 0.5));
        assert_eq!(y, x);
    }

    #[test]
    fn even_kernel_rejected() {
        assert!(ConvHighwayLayer::zeros(2, 2, Activation::Relu).is_err());
        assert!(PlainConvLayer::zeros(1, 2, 4, Activation::Relu).is_err());
    }

    #[test]
    fn channel_mismatch_rejected() {
        let layer = ConvHighwayLayer::zeros(2, 3, Activation::Relu).unwrap();
        assert!(layer.forward(&Tensor::zeros(&[1, 3, 4, 4])).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let mut rng = Rng::new(4);
        let layer = ConvHighwayLayer::new(
            rng.normal_tensor(&[2, 2, 3, 3], 0.5),
            rng.normal_tensor(&[2], 0.5),
            rng.normal_tensor(&[2, 2, 3, 3], 0.5),
            rng.normal_tensor(&[2], 0.5),
            Activation::Tanh,
        )
        .unwrap();
        let x = rng.normal_tensor(&[2, 2, 4, 4], 1.0);
        let (y, cache) = layer.forward(&x).unwrap();
        let (dx, grads) = layer.backward(&cache, &Tensor::zeros(y.shape())).unwrap();
        assert_eq!(dx.max_abs(), 0.0);
        assert!(grads.into_vec().iter().all(|g| g.max_abs() == 0.0));
    }
}
