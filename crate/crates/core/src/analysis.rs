//! Transform-gate introspection for trained highway networks: learned gate
//! biases, gate activity averaged over many inputs, and gate activity and
//! block outputs for a single probe input.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::layers::{Layer, LayerCache, Network};
use crate::tensor::Tensor;

/// Activity below which a gate counts as closed for [`gate_sparsity`].
pub const SPARSITY_THRESHOLD: f64 = 0.1;

/// Default number of samples averaged for mean gate activity.
pub const DEFAULT_SAMPLE_COUNT: usize = 10_000;

pub const REPORT_FILES: [&str; 4] = ["bias_map.csv", "mean_activity.csv", "sample_trace.csv", "block_outputs.csv"];

/// All maps are `[highway layers × blocks]`, shallowest layer first.
#[derive(Clone, Debug, PartialEq)]
pub struct GateReport {
    pub bias_map: Tensor,
    pub mean_activity: Tensor,
    pub sample_trace: Tensor,
    pub block_outputs: Tensor,
    pub sample_count: usize,
}

impl GateReport {
    pub fn layers(&self) -> usize {
        self.bias_map.rows()
    }

    pub fn blocks(&self) -> usize {
        self.bias_map.cols()
    }
}

fn highway_width(net: &Network) -> Result<usize> {
    match net.body().first() {
        Some(Layer::Highway(h)) => Ok(h.width()),
        Some(Layer::ConvHighway(_)) => Err(Error::UnsupportedAnalysis("conv-highway")),
        Some(_) => Err(Error::UnsupportedAnalysis("plain")),
        None => Err(Error::UnsupportedAnalysis("empty")),
    }
}

fn gate_and_output(cache: &LayerCache) -> (&Tensor, &Tensor) {
    match cache {
        LayerCache::Highway(c) => (&c.gate, &c.output),
        _ => unreachable!("body checked to be highway"),
    }
}

/// Runs every sample through `net` once and summarizes the gates.
pub fn gate_report(net: &Network, samples: &Dataset, probe_index: usize) -> Result<GateReport> {
    const CHUNK: usize = 500;
    let width = highway_width(net)?;
    let layers = net.body().len();
    if samples.is_empty() {
        return Err(Error::Config("gate report needs at least one sample".into()));
    }
    if probe_index >= samples.len() {
        return Err(Error::Config(format!(
            "probe index {probe_index} outside {} samples",
            samples.len()
        )));
    }

    let mut bias = Vec::with_capacity(layers * width);
    for b in net.gate_biases() {
        bias.extend_from_slice(b.data());
    }

    let mut sums = vec![0.0; layers * width];
    let mut start = 0;
    while start < samples.len() {
        let end = (start + CHUNK).min(samples.len());
        let idx: Vec<usize> = (start..end).collect();
        let (x, _) = samples.gather(&idx);
        let trace = net.trace(&x)?;
        for (l, cache) in trace.caches[1..].iter().enumerate() {
            let (gate, _) = gate_and_output(cache);
            let col = gate.sum_rows();
            for (s, v) in sums[l * width..(l + 1) * width].iter_mut().zip(col.data()) {
                *s += v;
            }
        }
        start = end;
    }
    let n = samples.len() as f64;
    sums.iter_mut().for_each(|s| *s /= n);

    let (probe, _) = samples.gather(&[probe_index]);
    let trace = net.trace(&probe)?;
    let mut sample_trace = Vec::with_capacity(layers * width);
    let mut block_outputs = Vec::with_capacity(layers * width);
    for cache in &trace.caches[1..] {
        let (gate, output) = gate_and_output(cache);
        sample_trace.extend_from_slice(gate.data());
        block_outputs.extend_from_slice(output.data());
    }

    let shape = vec![layers, width];
    Ok(GateReport {
        bias_map: Tensor::new(shape.clone(), bias)?,
        mean_activity: Tensor::new(shape.clone(), sums)?,
        sample_trace: Tensor::new(shape.clone(), sample_trace)?,
        block_outputs: Tensor::new(shape, block_outputs)?,
        sample_count: samples.len(),
    })
}

/// Per-layer fraction of gates below [`SPARSITY_THRESHOLD`].
#[derive(Clone, Debug, PartialEq)]
pub struct Sparsity {
    pub mean_activity: Vec<f64>,
    pub single_sample: Vec<f64>,
}

pub fn gate_sparsity(report: &GateReport) -> Sparsity {
    let per_layer = |t: &Tensor| {
        (0..t.rows())
            .map(|l| {
                let row = t.row(l);
                row.iter().filter(|&&a| a < SPARSITY_THRESHOLD).count() as f64 / row.len().max(1) as f64
            })
            .collect()
    };
    Sparsity {
        mean_activity: per_layer(&report.mean_activity),
        single_sample: per_layer(&report.sample_trace),
    }
}

/// Pearson correlation between learned gate biases and mean gate activity
/// over all blocks. `None` when either map is constant.
pub fn bias_activity_correlation(report: &GateReport) -> Option<f64> {
    let (a, b) = (report.bias_map.data(), report.mean_activity.data());
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    (va > 0.0 && vb > 0.0).then(|| cov / (va * vb).sqrt())
}

/// CSV with a `block_<i>` header and one row per layer, values printed with
/// 17 significant digits.
pub fn map_to_csv(t: &Tensor) -> String {
    let cols = t.cols();
    let mut s = (0..cols).map(|i| format!("block_{i}")).collect::<Vec<_>>().join(",");
    s.push('\n');
    for r in 0..t.rows() {
        let line = t.row(r).iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(",");
        let _ = writeln!(s, "{line}");
    }
    s
}

pub fn read_map_csv(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let cols = lines
        .next()
        .ok_or_else(|| Error::format(path, "empty file"))?
        .split(',')
        .count();
    let mut data = Vec::new();
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        let values = line
            .split(',')
            .map(|v| v.parse::<f64>().map_err(|e| Error::format(path, format!("row {i}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != cols {
            return Err(Error::format(path, format!("row {i} has {} columns, expected {cols}", values.len())));
        }
        data.extend(values);
        rows += 1;
    }
    Tensor::new(vec![rows, cols], data)
}

/// Writes the four maps as CSV files into `out_dir`, returning their paths.
pub fn export_report(report: &GateReport, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let maps = [
        &report.bias_map,
        &report.mean_activity,
        &report.sample_trace,
        &report.block_outputs,
    ];
    let mut paths = Vec::with_capacity(4);
    for (name, map) in REPORT_FILES.iter().zip(maps) {
        let path = dir.join(name);
        fs::write(&path, map_to_csv(map)).map_err(|e| Error::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::{init_network, InitScheme, WeightInit};
    use crate::layers::{Architecture, BodyKind};
    use crate::rng::Rng;
    use crate::tensor::Activation;

    fn report_for(t: Tensor) -> GateReport {
        GateReport {
            bias_map: t.clone(),
            mean_activity: t.clone(),
            sample_trace: t.clone(),
            block_outputs: t,
            sample_count: 1,
        }
    }

    #[test]
    fn sparsity_extremes() {
        let closed = gate_sparsity(&report_for(Tensor::filled(&[3, 4], 1e-6)));
        assert_eq!(closed.single_sample, vec![1.0; 3]);
        let half = gate_sparsity(&report_for(Tensor::filled(&[3, 4], 0.5)));
        assert_eq!(half.mean_activity, vec![0.0; 3]);
    }

    #[test]
    fn plain_body_is_unsupported() {
        let net = Architecture::dense(BodyKind::Plain, 3, 4, Activation::Relu, 2, 2).build().unwrap();
        let ds = Dataset::new(Tensor::zeros(&[1, 2]), vec![0], 2, "x").unwrap();
        assert!(matches!(gate_report(&net, &ds, 0), Err(Error::UnsupportedAnalysis("plain"))));
    }

    #[test]
    fn single_sample_mean_equals_trace() {
        let arch = Architecture::dense(BodyKind::Highway, 5, 6, Activation::Tanh, 3, 2);
        let net = init_network(arch.build().unwrap(), &InitScheme::new(WeightInit::He, -2.0, 1).unwrap());
        let ds = Dataset::new(Rng::new(2).uniform_tensor(&[1, 3], -1.0, 1.0), vec![1], 2, "one").unwrap();
        let r = gate_report(&net, &ds, 0).unwrap();
        assert_eq!(r.mean_activity, r.sample_trace);
        assert_eq!(r.layers(), 4);
        assert!(r.bias_map.data().iter().all(|&b| b == -2.0));
    }

    #[test]
    fn probe_out_of_range() {
        let arch = Architecture::dense(BodyKind::Highway, 3, 2, Activation::Relu, 2, 2);
        let net = arch.build().unwrap();
        let ds = Dataset::new(Tensor::zeros(&[2, 2]), vec![0, 1], 2, "x").unwrap();
        assert!(gate_report(&net, &ds, 2).is_err());
    }

    #[test]
    fn csv_header_and_rows() {
        let t = Tensor::from_rows(&[&[0.1, 0.2], &[0.3, 1.0 / 3.0]]).unwrap();
        let csv = map_to_csv(&t);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("block_0,block_1"));
        assert_eq!(lines.count(), 2);
    }

    #[test]
    fn correlation_of_constant_map_is_undefined() {
        assert_eq!(bias_activity_correlation(&report_for(Tensor::filled(&[2, 2], 1.0))), None);
        let t = Tensor::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        assert!((bias_activity_correlation(&report_for(t)).unwrap() - 1.0).abs() < 1e-12);
    }
}
