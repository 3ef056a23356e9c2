use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Activation, Tensor};

use super::conv::{ConvHighwayCache, ConvHighwayLayer, PlainConvCache, PlainConvLayer};
use super::highway::{HighwayCache, HighwayLayer};
use super::plain::{PlainCache, PlainLayer};
use super::softmax::SoftmaxHead;
use super::Params;

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Plain(PlainLayer),
    Highway(HighwayLayer),
    PlainConv(PlainConvLayer),
    ConvHighway(ConvHighwayLayer),
}

#[derive(Clone, Debug)]
pub enum LayerCache {
    Plain(PlainCache),
    Highway(HighwayCache),
    PlainConv(PlainConvCache),
    ConvHighway(ConvHighwayCache),
}

impl Layer {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::Plain(_) => "plain",
            Layer::Highway(_) => "highway",
            Layer::PlainConv(_) => "plain-conv",
            Layer::ConvHighway(_) => "conv-highway",
        }
    }

    pub fn activation(&self) -> Activation {
        match self {
            Layer::Plain(l) => l.activation,
            Layer::Highway(l) => l.activation,
            Layer::PlainConv(l) => l.activation,
            Layer::ConvHighway(l) => l.activation,
        }
    }

    fn is_conv(&self) -> bool {
        matches!(self, Layer::PlainConv(_) | Layer::ConvHighway(_))
    }

    /// Units (dense) or channels (conv) produced by this layer.
    fn out_width(&self) -> usize {
        match self {
            Layer::Plain(l) => l.outputs(),
            Layer::Highway(l) => l.width(),
            Layer::PlainConv(l) => l.out_channels(),
            Layer::ConvHighway(l) => l.channels(),
        }
    }

    fn in_width(&self) -> usize {
        match self {
            Layer::Plain(l) => l.inputs(),
            Layer::Highway(l) => l.width(),
            Layer::PlainConv(l) => l.in_channels(),
            Layer::ConvHighway(l) => l.channels(),
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, LayerCache)> {
        Ok(match self {
            Layer::Plain(l) => {
                let (y, c) = l.forward(x)?;
                (y, LayerCache::Plain(c))
            }
            Layer::Highway(l) => {
                let (y, c) = l.forward(x)?;
                (y, LayerCache::Highway(c))
            }
            Layer::PlainConv(l) => {
                let (y, c) = l.forward(x)?;
                (y, LayerCache::PlainConv(c))
            }
            Layer::ConvHighway(l) => {
                let (y, c) = l.forward(x)?;
                (y, LayerCache::ConvHighway(c))
            }
        })
    }

    /// Returns `∂L/∂x` and parameter gradients in [`Params`] order.
    pub fn backward(&self, cache: &LayerCache, d_out: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        match (self, cache) {
            (Layer::Plain(l), LayerCache::Plain(c)) => {
                let (dx, g) = l.backward(c, d_out)?;
                Ok((dx, g.into_vec()))
            }
            (Layer::Highway(l), LayerCache::Highway(c)) => {
                let (dx, g) = l.backward(c, d_out)?;
                Ok((dx, g.into_vec()))
            }
            (Layer::PlainConv(l), LayerCache::PlainConv(c)) => l.backward(c, d_out),
            (Layer::ConvHighway(l), LayerCache::ConvHighway(c)) => {
                let (dx, g) = l.backward(c, d_out)?;
                Ok((dx, g.into_vec()))
            }
            _ => Err(Error::InvalidLayer(format!("cache does not belong to a {} layer", self.name()))),
        }
    }
}

impl Params for Layer {
    fn params(&self) -> Vec<&Tensor> {
        match self {
            Layer::Plain(l) => l.params(),
            Layer::Highway(l) => l.params(),
            Layer::PlainConv(l) => l.params(),
            Layer::ConvHighway(l) => l.params(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::Plain(l) => l.params_mut(),
            Layer::Highway(l) => l.params_mut(),
            Layer::PlainConv(l) => l.params_mut(),
            Layer::ConvHighway(l) => l.params_mut(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BodyKind {
    Plain,
    Highway,
    ConvHighway,
}

impl BodyKind {
    pub fn name(self) -> &'static str {
        match self {
            BodyKind::Plain => "plain",
            BodyKind::Highway => "highway",
            BodyKind::ConvHighway => "conv-highway",
        }
    }

    pub fn is_highway(self) -> bool {
        !matches!(self, BodyKind::Plain)
    }
}

impl std::fmt::Display for BodyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for BodyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [BodyKind::Plain, BodyKind::Highway, BodyKind::ConvHighway]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown body kind {s:?} (plain, highway, conv-highway)")))
    }
}

/// Shape of a network before its parameters are initialized.
///
/// `depth` counts hidden layers including the leading dimension-changing
/// plain layer, so `depth = 10` means one plain layer followed by nine body
/// layers. For convolutional highway networks `width` is the channel count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub kind: BodyKind,
    pub depth: usize,
    pub width: usize,
    pub activation: Activation,
    pub inputs: usize,
    pub classes: usize,
    /// `[channels, height, width]` of each input, required for conv bodies.
    #[serde(default)]
    pub image: Option<[usize; 3]>,
    #[serde(default = "default_kernel")]
    pub kernel: usize,
}

fn default_kernel() -> usize {
    3
}

impl Architecture {
    pub fn dense(kind: BodyKind, depth: usize, width: usize, activation: Activation, inputs: usize, classes: usize) -> Self {
        Architecture {
            kind,
            depth,
            width,
            activation,
            inputs,
            classes,
            image: None,
            kernel: default_kernel(),
        }
    }

    /// Zero-parameter network with this shape; pair with `init::init_network`.
    pub fn build(&self) -> Result<Network> {
        if self.depth == 0 || self.width == 0 || self.classes == 0 || self.inputs == 0 {
            return Err(Error::InvalidNetwork(format!(
                "depth, width, inputs and classes must be positive: {self:?}"
            )));
        }
        let act = self.activation;
        let body_len = self.depth - 1;
        match self.kind {
            BodyKind::Plain | BodyKind::Highway => {
                let input = Layer::Plain(PlainLayer::zeros(self.inputs, self.width, act));
                let body = (0..body_len)
                    .map(|_| match self.kind {
                        BodyKind::Plain => Layer::Plain(PlainLayer::zeros(self.width, self.width, act)),
                        _ => Layer::Highway(HighwayLayer::zeros(self.width, act)),
                    })
                    .collect();
                Network::new(input, body, SoftmaxHead::zeros(self.width, self.classes), None)
            }
            BodyKind::ConvHighway => {
                let Some([c, h, w]) = self.image else {
                    return Err(Error::InvalidNetwork("conv-highway networks need an image shape".into()));
                };
                if c * h * w != self.inputs {
                    return Err(Error::InvalidNetwork(format!(
                        "image {c}×{h}×{w} does not match {} inputs",
                        self.inputs
                    )));
                }
                let input = Layer::PlainConv(PlainConvLayer::zeros(c, self.width, self.kernel, act)?);
                let body = (0..body_len)
                    .map(|_| ConvHighwayLayer::zeros(self.width, self.kernel, act).map(Layer::ConvHighway))
                    .collect::<Result<_>>()?;
                let head = SoftmaxHead::zeros(self.width * h * w, self.classes);
                Network::new(input, body, head, self.image)
            }
        }
    }
}

/// Leading dimension-change layer, a homogeneous body, and a softmax head.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    input: Layer,
    body: Vec<Layer>,
    head: SoftmaxHead,
    image: Option<[usize; 3]>,
}

/// Per-layer caches from one forward pass. Index 0 is the input layer,
/// `1..=body.len()` the body.
#[derive(Clone, Debug)]
pub struct NetworkTrace {
    pub caches: Vec<LayerCache>,
    /// Flattened input to the softmax head.
    pub features: Tensor,
}

/// Gradients keyed by layer index: 0 is the input layer, `1..=L` the body,
/// and `L + 1` the head. Each entry follows that layer's [`Params`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Vec<Tensor>>,
}

impl Gradients {
    pub fn iter(&self) -> impl Iterator<Item = &Tensor> {
        self.layers.iter().flatten()
    }

    pub fn all_finite(&self) -> bool {
        self.iter().all(Tensor::all_finite)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    pub correct: usize,
}

impl Network {
    pub fn new(input: Layer, body: Vec<Layer>, head: SoftmaxHead, image: Option<[usize; 3]>) -> Result<Self> {
        match (&input, image) {
            (Layer::Plain(_), None) => {}
            (Layer::PlainConv(l), Some([c, _, _])) if l.in_channels() == c => {}
            _ => {
                return Err(Error::InvalidNetwork(format!(
                    "input layer must be a plain (or plain-conv with matching image) layer, got {}",
                    input.name()
                )))
            }
        }
        let conv = input.is_conv();
        if let Some(first) = body.first() {
            if body.iter().any(|l| std::mem::discriminant(l) != std::mem::discriminant(first)) {
                return Err(Error::InvalidNetwork("body layers must all be the same kind".into()));
            }
            let allowed = if conv {
                matches!(first, Layer::ConvHighway(_))
            } else {
                matches!(first, Layer::Plain(_) | Layer::Highway(_))
            };
            if !allowed {
                return Err(Error::InvalidNetwork(format!(
                    "{} body cannot follow a {} input layer",
                    first.name(),
                    input.name()
                )));
            }
        }
        let mut width = input.out_width();
        for (i, layer) in body.iter().enumerate() {
            if layer.in_width() != width {
                return Err(Error::InvalidNetwork(format!(
                    "body layer {i} expects width {}, previous layer produces {width}",
                    layer.in_width()
                )));
            }
            width = layer.out_width();
        }
        let features = match image {
            Some([_, h, w]) => width * h * w,
            None => width,
        };
        if head.inputs() != features {
            return Err(Error::InvalidNetwork(format!(
                "head expects {} features, body produces {features}",
                head.inputs()
            )));
        }
        Ok(Network {
            input,
            body,
            head,
            image,
        })
    }

    pub fn input_layer(&self) -> &Layer {
        &self.input
    }

    pub fn body(&self) -> &[Layer] {
        &self.body
    }

    pub fn body_mut(&mut self) -> &mut [Layer] {
        &mut self.body
    }

    pub fn head(&self) -> &SoftmaxHead {
        &self.head
    }

    pub fn image(&self) -> Option<[usize; 3]> {
        self.image
    }

    pub fn body_kind(&self) -> BodyKind {
        match (&self.input, self.body.first()) {
            (_, Some(Layer::Highway(_))) => BodyKind::Highway,
            (_, Some(Layer::ConvHighway(_))) | (Layer::PlainConv(_), None) => BodyKind::ConvHighway,
            _ => BodyKind::Plain,
        }
    }

    /// Hidden layers including the input layer.
    pub fn depth(&self) -> usize {
        self.body.len() + 1
    }

    pub fn width(&self) -> usize {
        self.input.out_width()
    }

    pub fn inputs(&self) -> usize {
        match (&self.input, self.image) {
            (_, Some([c, h, w])) => c * h * w,
            (Layer::Plain(l), None) => l.inputs(),
            _ => unreachable!("validated in Network::new"),
        }
    }

    pub fn classes(&self) -> usize {
        self.head.classes()
    }

    /// Every layer in order: input, body, head.
    fn layer_params(&self) -> impl Iterator<Item = Vec<&Tensor>> {
        std::iter::once(self.input.params())
            .chain(self.body.iter().map(Params::params))
            .chain(std::iter::once(self.head.params()))
    }

    pub fn layer_params_mut(&mut self) -> Vec<Vec<&mut Tensor>> {
        let mut out = vec![self.input.params_mut()];
        out.extend(self.body.iter_mut().map(Params::params_mut));
        out.push(self.head.params_mut());
        out
    }

    fn to_layer_input(&self, x: &Tensor) -> Result<Tensor> {
        if x.shape().len() != 2 || x.cols() != self.inputs() {
            return Err(Error::shape("network_forward", x.shape(), &[x.rows(), self.inputs()]));
        }
        match self.image {
            Some([c, h, w]) => x.clone().reshape(&[x.rows(), c, h, w]),
            None => Ok(x.clone()),
        }
    }

    /// Runs the hidden layers, keeping every cache.
    pub fn trace(&self, x: &Tensor) -> Result<NetworkTrace> {
        let mut caches = Vec::with_capacity(self.depth());
        let (mut h, cache) = self.input.forward(&self.to_layer_input(x)?)?;
        caches.push(cache);
        for layer in &self.body {
            let (next, cache) = layer.forward(&h)?;
            caches.push(cache);
            h = next;
        }
        let rows = h.rows();
        let features = h.reshape(&[rows, self.head.inputs()])?;
        Ok(NetworkTrace { caches, features })
    }

    /// Forward pass without caches; returns the head's input features.
    pub fn features(&self, x: &Tensor) -> Result<Tensor> {
        let (mut h, _) = self.input.forward(&self.to_layer_input(x)?)?;
        for layer in &self.body {
            h = layer.forward(&h)?.0;
        }
        let rows = h.rows();
        h.reshape(&[rows, self.head.inputs()])
    }

    pub fn probabilities(&self, x: &Tensor) -> Result<Tensor> {
        self.head.probabilities(&self.features(x)?)
    }

    /// Mean cross-entropy and correct count, forward only.
    pub fn evaluate(&self, x: &Tensor, labels: &[usize]) -> Result<LossOutput> {
        let out = self.head.loss_and_grad(&self.features(x)?, labels)?;
        Ok(LossOutput {
            loss: out.loss,
            correct: out.correct,
        })
    }

    /// One forward pass caching every layer, then one backward pass in
    /// reverse order.
    pub fn loss_and_grad(&self, x: &Tensor, labels: &[usize]) -> Result<(LossOutput, Gradients)> {
        let trace = self.trace(x)?;
        let head = self.head.loss_and_grad(&trace.features, labels)?;
        let mut grads = vec![Vec::new(); self.body.len() + 2];
        grads[self.body.len() + 1] = vec![head.d_weight, head.d_bias];

        let last_shape = match trace.caches.last() {
            Some(LayerCache::PlainConv(c)) => c.pre.shape().to_vec(),
            Some(LayerCache::ConvHighway(c)) => c.output.shape().to_vec(),
            _ => head.d_input.shape().to_vec(),
        };
        let mut d = head.d_input.reshape(&last_shape)?;
        for (i, layer) in self.body.iter().enumerate().rev() {
            let (dx, g) = layer.backward(&trace.caches[i + 1], &d)?;
            grads[i + 1] = g;
            d = dx;
        }
        let (_, g) = self.input.backward(&trace.caches[0], &d)?;
        grads[0] = g;
        Ok((
            LossOutput {
                loss: head.loss,
                correct: head.correct,
            },
            Gradients { layers: grads },
        ))
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_params().flatten().map(Tensor::len).sum()
    }

    /// Parameters of the body alone.
    pub fn body_parameter_count(&self) -> usize {
        self.body.iter().map(Params::param_count).sum()
    }

    pub fn parameters(&self) -> Vec<&Tensor> {
        self.layer_params().flatten().collect()
    }

    pub fn all_finite(&self) -> bool {
        self.layer_params().flatten().all(Tensor::all_finite)
    }

    /// Learned transform-gate biases, one row per highway layer.
    pub fn gate_biases(&self) -> Vec<&Tensor> {
        self.body
            .iter()
            .filter_map(|l| match l {
                Layer::Highway(h) => Some(&h.b_t),
                Layer::ConvHighway(h) => Some(&h.b_t),
                _ => None,
            })
            .collect()
    }
}

/// Total number of trainable scalars.
pub fn count_parameters(net: &Network) -> usize {
    net.parameter_count()
}
