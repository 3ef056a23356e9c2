//! Dataset loading (MNIST IDX, CIFAR binary), subsetting and batching.
//!
//! Pixels are scaled to `[0, 1]` by dividing by 255; no other
//! preprocessing is applied.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use byteorder::{BigEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

const CIFAR_PIXELS: usize = 3 * 32 * 32;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    inputs: Tensor,
    labels: Vec<usize>,
    num_classes: usize,
    name: String,
    image: Option<[usize; 3]>,
}

impl Dataset {
    pub fn new(inputs: Tensor, labels: Vec<usize>, num_classes: usize, name: impl Into<String>) -> Result<Self> {
        if inputs.shape().len() != 2 {
            return Err(Error::InvalidTensor(format!(
                "dataset inputs must be [count × features], got {:?}",
                inputs.shape()
            )));
        }
        if inputs.rows() != labels.len() {
            return Err(Error::shape("dataset", inputs.shape(), &[labels.len()]));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::LabelOutOfRange {
                label,
                classes: num_classes,
            });
        }
        Ok(Dataset {
            inputs,
            labels,
            num_classes,
            name: name.into(),
            image: None,
        })
    }

    /// Attaches a `[channels, height, width]` interpretation of each row.
    pub fn with_image(mut self, image: [usize; 3]) -> Result<Self> {
        if image.iter().product::<usize>() != self.features() {
            return Err(Error::shape("dataset image", &image, &[self.features()]));
        }
        self.image = Some(image);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self) -> usize {
        self.inputs.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn image(&self) -> Option<[usize; 3]> {
        self.image
    }

    pub fn inputs(&self) -> &Tensor {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Rows and labels at `indices`, kept paired.
    pub fn gather(&self, indices: &[usize]) -> (Tensor, Vec<usize>) {
        (
            self.inputs.select_rows(indices),
            indices.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    /// Uniform sample of `n` examples without replacement.
    pub fn subset(&self, n: usize, rng: &mut Rng) -> Result<Dataset> {
        if n > self.len() {
            return Err(Error::Config(format!(
                "subset of {n} requested from {} examples",
                self.len()
            )));
        }
        let mut idx = rng.permutation(self.len());
        idx.truncate(n);
        let (inputs, labels) = self.gather(&idx);
        Ok(Dataset {
            inputs,
            labels,
            num_classes: self.num_classes,
            name: format!("{}[{n}]", self.name),
            image: self.image,
        })
    }

    /// First `n` examples in file order.
    pub fn take(&self, n: usize) -> Dataset {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        let (inputs, labels) = self.gather(&idx);
        Dataset {
            inputs,
            labels,
            num_classes: self.num_classes,
            name: self.name.clone(),
            image: self.image,
        }
    }

    /// One epoch of shuffled minibatches; the last batch may be short.
    pub fn batches<'a>(&'a self, batch_size: usize, rng: &mut Rng) -> Batches<'a> {
        Batches {
            ds: self,
            order: rng.permutation(self.len()),
            batch_size: batch_size.max(1),
            pos: 0,
        }
    }
}

pub struct Batches<'a> {
    ds: &'a Dataset,
    order: Vec<usize>,
    batch_size: usize,
    pos: usize,
}

impl Iterator for Batches<'_> {
    type Item = (Tensor, Vec<usize>);

    fn next(&mut self) -> Option<Self::Item> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let batch = self.ds.gather(&self.order[self.pos..end]);
        self.pos = end;
        Some(batch)
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn header_u32(cur: &mut Cursor<&[u8]>, path: &Path) -> Result<u32> {
    cur.read_u32::<BigEndian>()
        .map_err(|_| Error::format(path, "truncated IDX header"))
}

/// Parses an IDX image file and its label file.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let images = read_file(ip)?;
    let labels = read_file(lp)?;

    let mut cur = Cursor::new(images.as_slice());
    let magic = header_u32(&mut cur, ip)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::format(
            ip,
            format!("bad image magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}"),
        ));
    }
    let count = header_u32(&mut cur, ip)? as usize;
    let rows = header_u32(&mut cur, ip)? as usize;
    let cols = header_u32(&mut cur, ip)? as usize;
    let pixels = &images[16..];
    let features = rows * cols;
    if count.checked_mul(features) != Some(pixels.len()) {
        return Err(Error::format(
            ip,
            format!(
                "header promises {count}×{rows}×{cols} pixels, file holds {}",
                pixels.len()
            ),
        ));
    }

    let mut cur = Cursor::new(labels.as_slice());
    let magic = header_u32(&mut cur, lp)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::format(
            lp,
            format!("bad label magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}"),
        ));
    }
    let label_count = header_u32(&mut cur, lp)? as usize;
    let label_bytes = &labels[8..];
    if label_bytes.len() != label_count {
        return Err(Error::format(
            lp,
            format!("header promises {label_count} labels, file holds {}", label_bytes.len()),
        ));
    }
    if label_count != count {
        return Err(Error::format(
            lp,
            format!("{count} images but {label_count} labels"),
        ));
    }

    let labels: Vec<usize> = label_bytes.iter().map(|&b| b as usize).collect();
    let classes = labels.iter().max().map_or(10, |&m| (m + 1).max(10));
    let inputs = Tensor::new(
        vec![count, features],
        pixels.iter().map(|&p| p as f64 / 255.0).collect(),
    )?;
    let name = ip
        .file_name()
        .map_or_else(|| "idx".into(), |n| n.to_string_lossy().into_owned());
    Dataset::new(inputs, labels, classes, name)?.with_image([1, rows, cols])
}

/// Loads `train-*` (or `t10k-*`) MNIST files from a directory.
pub fn load_mnist(dir: impl AsRef<Path>, train: bool) -> Result<Dataset> {
    let dir = dir.as_ref();
    let prefix = if train { "train" } else { "t10k" };
    let mut ds = load_idx(
        dir.join(format!("{prefix}-images-idx3-ubyte")),
        dir.join(format!("{prefix}-labels-idx1-ubyte")),
    )?;
    ds.name = format!("mnist-{prefix}");
    Ok(ds)
}

fn to_byte(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Writes a dataset back out as an IDX image/label pair.
pub fn write_idx(ds: &Dataset, images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<()> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let [_, rows, cols] = ds
        .image
        .unwrap_or([1, 1, ds.features()]);
    let mut images = Vec::with_capacity(16 + ds.inputs.len());
    images.write_u32::<BigEndian>(IDX_IMAGES_MAGIC).unwrap();
    images.write_u32::<BigEndian>(ds.len() as u32).unwrap();
    images.write_u32::<BigEndian>(rows as u32).unwrap();
    images.write_u32::<BigEndian>(cols as u32).unwrap();
    images.extend(ds.inputs.data().iter().map(|&v| to_byte(v)));

    let mut labels = Vec::with_capacity(8 + ds.len());
    labels.write_u32::<BigEndian>(IDX_LABELS_MAGIC).unwrap();
    labels.write_u32::<BigEndian>(ds.len() as u32).unwrap();
    for &l in &ds.labels {
        if l > 255 {
            return Err(Error::format(lp, format!("label {l} does not fit in a byte")));
        }
        labels.push(l as u8);
    }
    fs::write(ip, images).map_err(|e| Error::io(ip, e))?;
    fs::write(lp, labels).map_err(|e| Error::io(lp, e))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CifarVariant {
    Cifar10,
    Cifar100,
}

impl CifarVariant {
    pub fn label_bytes(self) -> usize {
        match self {
            CifarVariant::Cifar10 => 1,
            CifarVariant::Cifar100 => 2,
        }
    }

    pub fn record_size(self) -> usize {
        self.label_bytes() + CIFAR_PIXELS
    }

    pub fn classes(self) -> usize {
        match self {
            CifarVariant::Cifar10 => 10,
            CifarVariant::Cifar100 => 100,
        }
    }
}

/// Parses CIFAR binary batch files. CIFAR-100 records carry a coarse and a
/// fine label byte; the fine label is kept.
pub fn load_cifar_binary<P: AsRef<Path>>(paths: &[P], variant: CifarVariant) -> Result<Dataset> {
    let record = variant.record_size();
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for path in paths {
        let path = path.as_ref();
        let bytes = read_file(path)?;
        if bytes.is_empty() || bytes.len() % record != 0 {
            return Err(Error::format(
                path,
                format!("size {} is not a multiple of the {record}-byte record", bytes.len()),
            ));
        }
        for rec in bytes.chunks_exact(record) {
            let label = rec[variant.label_bytes() - 1] as usize;
            if label >= variant.classes() {
                return Err(Error::format(path, format!("label {label} out of range")));
            }
            labels.push(label);
            pixels.extend(rec[variant.label_bytes()..].iter().map(|&p| p as f64 / 255.0));
        }
    }
    let inputs = Tensor::new(vec![labels.len(), CIFAR_PIXELS], pixels)?;
    let name = match variant {
        CifarVariant::Cifar10 => "cifar10",
        CifarVariant::Cifar100 => "cifar100",
    };
    Dataset::new(inputs, labels, variant.classes(), name)?.with_image([3, 32, 32])
}

/// Standard CIFAR training batch file names under `dir`.
pub fn cifar_train_files(dir: impl AsRef<Path>, variant: CifarVariant) -> Vec<PathBuf> {
    let dir = dir.as_ref();
    match variant {
        CifarVariant::Cifar10 => (1..=5).map(|i| dir.join(format!("data_batch_{i}.bin"))).collect(),
        CifarVariant::Cifar100 => vec![dir.join("train.bin")],
    }
}
