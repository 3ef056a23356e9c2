//! Network checkpoint container.
//!
//! ```text
//! offset  size  field
//! 0       8     magic  b"HWYCKPT\0"
//! 8       4     format version, u32 little-endian (currently 1)
//! 12      4     header length N, u32 little-endian
//! 16      N     UTF-8 JSON header (see below)
//! 16+N    ...   parameter blob: every tensor listed in the header, in
//!               order, as little-endian IEEE-754 f64, row-major
//! ```
//!
//! The header is
//! `{"image": null | [c, h, w], "layers": [{"kind", "activation", "shapes"}]}`
//! where `kind` is one of `plain`, `highway`, `plain-conv`, `conv-highway`,
//! `softmax`; the first entry is the input layer and the last the softmax
//! head. `shapes` lists each parameter tensor in the layer's parameter
//! order (plain: W, b; highway: W_H, b_H, W_T, b_T). The file must end
//! exactly after the blob.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Activation, Tensor};

use super::conv::{ConvHighwayLayer, PlainConvLayer};
use super::highway::HighwayLayer;
use super::network::{Layer, Network};
use super::plain::PlainLayer;
use super::softmax::SoftmaxHead;
use super::Params;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"HWYCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

const MAX_HEADER: u32 = 16 << 20;

#[derive(Serialize, Deserialize)]
struct Header {
    image: Option<[usize; 3]>,
    layers: Vec<LayerEntry>,
}

#[derive(Serialize, Deserialize)]
struct LayerEntry {
    kind: String,
    activation: Option<Activation>,
    shapes: Vec<Vec<usize>>,
}

fn entry(kind: &str, activation: Option<Activation>, params: Vec<&Tensor>) -> LayerEntry {
    LayerEntry {
        kind: kind.to_string(),
        activation,
        shapes: params.iter().map(|t| t.shape().to_vec()).collect(),
    }
}

pub fn write_checkpoint<W: Write>(net: &Network, mut w: W) -> std::io::Result<()> {
    let mut layers = vec![entry(
        net.input_layer().name(),
        Some(net.input_layer().activation()),
        net.input_layer().params(),
    )];
    for layer in net.body() {
        layers.push(entry(layer.name(), Some(layer.activation()), layer.params()));
    }
    layers.push(entry("softmax", None, net.head().params()));
    let header = serde_json::to_vec(&Header {
        image: net.image(),
        layers,
    })?;

    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_u32::<LittleEndian>(CHECKPOINT_VERSION)?;
    w.write_u32::<LittleEndian>(header.len() as u32)?;
    w.write_all(&header)?;
    for t in net.parameters() {
        for &v in t.data() {
            w.write_f64::<LittleEndian>(v)?;
        }
    }
    w.flush()
}

pub fn read_checkpoint<R: Read>(mut r: R, origin: &Path) -> Result<Network> {
    let bad = |msg: String| Error::format(origin, msg);
    let truncated = |e: std::io::Error| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::format(origin, "truncated checkpoint")
        } else {
            Error::io(origin, e)
        }
    };

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(truncated)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(bad(format!("bad magic {magic:02x?}")));
    }
    let version = r.read_u32::<LittleEndian>().map_err(truncated)?;
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let len = r.read_u32::<LittleEndian>().map_err(truncated)?;
    if len > MAX_HEADER {
        return Err(bad(format!("header length {len} is implausible")));
    }
    let mut header = vec![0u8; len as usize];
    r.read_exact(&mut header).map_err(truncated)?;
    let header: Header = serde_json::from_slice(&header).map_err(|e| bad(format!("header: {e}")))?;
    if header.layers.len() < 2 {
        return Err(bad("checkpoint needs an input layer and a head".into()));
    }

    let mut read_tensor = |shape: &[usize]| -> Result<Tensor> {
        let n: usize = shape.iter().product();
        let mut data = vec![0.0; n];
        r.read_f64_into::<LittleEndian>(&mut data).map_err(truncated)?;
        Tensor::new(shape.to_vec(), data).map_err(|e| bad(e.to_string()))
    };

    let mut layers = Vec::with_capacity(header.layers.len());
    let mut head = None;
    let last = header.layers.len() - 1;
    for (i, e) in header.layers.iter().enumerate() {
        let mut ts = e
            .shapes
            .iter()
            .map(|s| read_tensor(s))
            .collect::<Result<Vec<_>>>()?
            .into_iter();
        let expected = match e.kind.as_str() {
            "highway" | "conv-highway" => 4,
            _ => 2,
        };
        if ts.len() != expected {
            return Err(bad(format!("{} layer lists {} tensors, expected {expected}", e.kind, ts.len())));
        }
        let mut next = || ts.next().expect("count checked above");
        let act = || e.activation.ok_or_else(|| bad(format!("{} layer without activation", e.kind)));
        let layer = match e.kind.as_str() {
            "softmax" if i == last => {
                head = Some(SoftmaxHead::new(next(), next())?);
                continue;
            }
            "plain" => Layer::Plain(PlainLayer::new(next(), next(), act()?)?),
            "highway" => Layer::Highway(HighwayLayer::new(next(), next(), next(), next(), act()?)?),
            "plain-conv" => Layer::PlainConv(PlainConvLayer::new(next(), next(), act()?)?),
            "conv-highway" => Layer::ConvHighway(ConvHighwayLayer::new(next(), next(), next(), next(), act()?)?),
            other => return Err(bad(format!("unexpected layer kind `{other}` at position {i}"))),
        };
        layers.push(layer);
    }
    let head = head.ok_or_else(|| bad("last layer must be the softmax head".into()))?;

    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(|e| Error::io(origin, e))? != 0 {
        return Err(bad("trailing bytes after parameter blob".into()));
    }

    let mut layers = layers.into_iter();
    let input = layers.next().ok_or_else(|| bad("missing input layer".into()))?;
    Network::new(input, layers.collect(), head, header.image).map_err(|e| bad(e.to_string()))
}

pub fn save_checkpoint(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(net, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(BufReader::new(file), path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::network::{Architecture, BodyKind};
    use crate::rng::Rng;

    fn random_net(kind: BodyKind) -> Network {
        let mut arch = Architecture::dense(kind, 3, 4, Activation::Tanh, 12, 3);
        if kind == BodyKind::ConvHighway {
            arch.width = 2;
            arch.image = Some([3, 2, 2]);
        }
        let mut net = arch.build().unwrap();
        let mut rng = Rng::new(17);
        for layer in net.layer_params_mut() {
            for t in layer {
                let shape = t.shape().to_vec();
                *t = rng.normal_tensor(&shape, 1.0);
            }
        }
        net
    }

    fn round_trip(net: &Network) -> Network {
        let mut buf = Vec::new();
        write_checkpoint(net, &mut buf).unwrap();
        read_checkpoint(buf.as_slice(), Path::new("mem")).unwrap()
    }

    #[test]
    fn round_trip_is_bit_identical() {
        for kind in [BodyKind::Plain, BodyKind::Highway, BodyKind::ConvHighway] {
            let net = random_net(kind);
            let back = round_trip(&net);
            let bits = |n: &Network| {
                n.parameters()
                    .iter()
                    .flat_map(|t| t.data().iter().map(|v| v.to_bits()))
                    .collect::<Vec<_>>()
            };
            assert_eq!(bits(&net), bits(&back));
            assert_eq!(net, back);
        }
    }

    #[test]
    fn corrupted_inputs_are_format_errors() {
        let net = random_net(BodyKind::Highway);
        let mut buf = Vec::new();
        write_checkpoint(&net, &mut buf).unwrap();

        let mut bad_magic = buf.clone();
        bad_magic[0] = b'X';
        let mut bad_version = buf.clone();
        bad_version[8] = 9;
        let truncated = &buf[..buf.len() - 3];
        let mut trailing = buf.clone();
        trailing.push(0);
        let mut bad_json = buf.clone();
        bad_json[16] = b'#';

        for bytes in [&bad_magic[..], &bad_version[..], truncated, &trailing[..], &bad_json[..], &buf[..5]] {
            let err = read_checkpoint(bytes, Path::new("bad.ckpt")).unwrap_err();
            assert!(matches!(err, Error::Format { .. }), "{err}");
        }
    }
}
