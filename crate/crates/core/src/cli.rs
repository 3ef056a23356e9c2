//! Experiment commands behind the `highway` binary.
//!
//! Every command reads an [`ExperimentConfig`] from a TOML file, applies
//! command-line overrides, runs, and writes its artifacts plus a
//! `manifest.json` and the resolved `config.toml` into the output directory.
//! Rerunning from that `config.toml` reproduces the same logs byte for byte
//! when `timing = false`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::analysis::{export_report, gate_report, gate_sparsity, GateReport, DEFAULT_SAMPLE_COUNT, REPORT_FILES};
use crate::data::{cifar_train_files, load_cifar_binary, load_mnist, CifarVariant, Dataset};
use crate::error::{Error, Result};
use crate::init::WeightInit;
use crate::layers::{load_checkpoint, save_checkpoint, Architecture, BodyKind, Network, CHECKPOINT_VERSION};
use crate::optim::{SgdConfig, TrainLog, TrainStatus};
use crate::rng::Rng;
use crate::search::{run_search, run_trial, write_summary_csv, SearchSpace, TrainConfig, TrialResult, TrialSetup};
use crate::tensor::Activation;

pub const TRAIN_LOG: &str = "train_log.csv";
pub const CHECKPOINT: &str = "model.ckpt";
pub const MANIFEST: &str = "manifest.json";
pub const RESOLVED_CONFIG: &str = "config.toml";
pub const SEARCH_SUMMARY: &str = "search_summary.csv";
pub const SWEEP_TABLE: &str = "sweep.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetName {
    Mnist,
    Cifar10,
    Cifar100,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub name: DatasetName,
    /// Directory holding the IDX or CIFAR binary files.
    pub path: PathBuf,
    /// Train on a random subset of this many examples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subset: Option<usize>,
    /// Seed for choosing the subset, kept apart from the experiment seed so
    /// reruns with another seed see the same examples.
    #[serde(default)]
    pub subset_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureSpec {
    pub kind: BodyKind,
    /// Hidden layers including the leading plain layer.
    pub depth: usize,
    pub width: usize,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    #[serde(default = "default_kernel")]
    pub kernel: usize,
}

fn default_activation() -> Activation {
    Activation::Relu
}

fn default_kernel() -> usize {
    3
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitSpec {
    pub scheme: WeightInit,
    pub gate_bias: f64,
}

impl Default for InitSpec {
    fn default() -> Self {
        InitSpec {
            scheme: WeightInit::He,
            gate_bias: -2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub depths: Vec<usize>,
    pub kinds: Vec<BodyKind>,
    pub plain_width: usize,
    pub highway_width: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            depths: vec![10, 20, 50, 100],
            kinds: vec![BodyKind::Plain, BodyKind::Highway],
            plain_width: 71,
            highway_width: 50,
        }
    }
}

impl SweepSpec {
    pub fn width_for(&self, kind: BodyKind) -> usize {
        if kind.is_highway() {
            self.highway_width
        } else {
            self.plain_width
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSpec {
    /// Examples averaged for mean gate activity.
    pub samples: usize,
    /// Index (within those examples) of the single traced input.
    pub probe: usize,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        AnalysisSpec {
            samples: DEFAULT_SAMPLE_COUNT,
            probe: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    /// Record wall time per epoch. Off makes logs byte-reproducible.
    #[serde(default = "default_timing")]
    pub timing: bool,
    pub dataset: DatasetSpec,
    pub architecture: ArchitectureSpec,
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default)]
    pub sgd: SgdConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchSpace>,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub analysis: AnalysisSpec,
}

fn default_jobs() -> usize {
    1
}

fn default_timing() -> bool {
    true
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Static checks. Paths are checked when the dataset is loaded.
    pub fn validate(&self) -> Result<()> {
        let a = &self.architecture;
        if a.depth == 0 || a.width == 0 {
            return Err(Error::Config("architecture depth and width must be at least 1".into()));
        }
        if a.kernel % 2 == 0 {
            return Err(Error::Config(format!("kernel size must be odd, got {}", a.kernel)));
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        if self.init.gate_bias >= 0.0 {
            return Err(Error::Config(format!("gate bias must be negative, got {}", self.init.gate_bias)));
        }
        if self.analysis.samples == 0 {
            return Err(Error::Config("analysis needs at least one sample".into()));
        }
        self.sgd.validate()?;
        if let Some(space) = &self.search {
            space.validate()?;
        }
        Ok(())
    }

    pub fn search_space(&self) -> SearchSpace {
        self.search.clone().unwrap_or_default()
    }
}

/// Loads the configured dataset, subsetting if requested. A missing
/// directory is a config error naming the path.
pub fn load_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    if !spec.path.exists() {
        return Err(Error::Config(format!("dataset path {} does not exist", spec.path.display())));
    }
    let ds = match spec.name {
        DatasetName::Mnist => load_mnist(&spec.path, true)?,
        DatasetName::Cifar10 => load_cifar_binary(&cifar_train_files(&spec.path, CifarVariant::Cifar10), CifarVariant::Cifar10)?,
        DatasetName::Cifar100 => {
            load_cifar_binary(&cifar_train_files(&spec.path, CifarVariant::Cifar100), CifarVariant::Cifar100)?
        }
    };
    match spec.subset {
        Some(n) if n < ds.len() => ds.subset(n, &mut Rng::new(spec.subset_seed)),
        Some(n) if n > ds.len() => Err(Error::Config(format!(
            "subset of {n} requested from {} examples",
            ds.len()
        ))),
        _ => Ok(ds),
    }
}

/// The network shape a config describes for a given dataset.
pub fn architecture_for(spec: &ArchitectureSpec, ds: &Dataset) -> Result<Architecture> {
    let image = if spec.kind == BodyKind::ConvHighway {
        Some(ds.image().ok_or_else(|| {
            Error::Config(format!("conv-highway needs image-shaped inputs; {} has none", ds.name()))
        })?)
    } else {
        None
    };
    Ok(Architecture {
        kind: spec.kind,
        depth: spec.depth,
        width: spec.width,
        activation: spec.activation,
        inputs: ds.features(),
        classes: ds.num_classes(),
        image,
        kernel: spec.kernel,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct Manifest<'a> {
    program: &'static str,
    version: &'static str,
    checkpoint_version: u32,
    command: &'a str,
    seed: u64,
    normalization: &'static str,
    config: &'a ExperimentConfig,
    artifacts: Vec<String>,
}

/// Writes `manifest.json` and `config.toml` next to `artifacts`.
fn write_manifest(dir: &Path, command: &str, cfg: &ExperimentConfig, artifacts: &[&str]) -> Result<()> {
    let manifest = Manifest {
        program: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        checkpoint_version: CHECKPOINT_VERSION,
        command,
        seed: cfg.seed,
        normalization: "pixel/255",
        config: cfg,
        artifacts: artifacts.iter().map(|s| s.to_string()).collect(),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&dir.join(MANIFEST), json + "\n")?;
    write_file(&dir.join(RESOLVED_CONFIG), cfg.to_toml())
}

fn trial_setup(cfg: &ExperimentConfig, arch: Architecture) -> TrialSetup {
    TrialSetup {
        arch,
        init: cfg.init.scheme,
        base: cfg.sgd,
        timing: cfg.timing,
    }
}

/// Best trial's log, checkpoint and the ranked summary.
fn write_search_artifacts(dir: &Path, results: &[TrialResult]) -> Result<()> {
    create_dir(dir)?;
    write_summary_csv(results, dir.join(SEARCH_SUMMARY))?;
    if let Some(best) = results.first() {
        best.log.write_csv(dir.join(TRAIN_LOG))?;
        save_checkpoint(&best.network, dir.join(CHECKPOINT))?;
    }
    Ok(())
}

pub struct TrainRun {
    pub network: Network,
    pub log: TrainLog,
    pub config: TrainConfig,
}

/// Trains one network with the configured hyperparameters.
///
/// Initialization and minibatch order come from the same streams a search
/// trial with this seed would use, so a trial's `(config, seed)` pair from a
/// search summary can be rerun here to reproduce its log exactly.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<TrainRun> {
    cfg.validate()?;
    let ds = load_dataset(&cfg.dataset)?;
    let arch = architecture_for(&cfg.architecture, &ds)?;
    let config = TrainConfig {
        sgd: cfg.sgd,
        activation: arch.activation,
        gate_bias: arch.kind.is_highway().then_some(cfg.init.gate_bias),
    };
    let result = run_trial(&trial_setup(cfg, arch), &ds, &config, 0, cfg.seed)?;
    let dir = &cfg.output_dir;
    create_dir(dir)?;
    result.log.write_csv(dir.join(TRAIN_LOG))?;
    save_checkpoint(&result.network, dir.join(CHECKPOINT))?;
    write_manifest(dir, "train", cfg, &[TRAIN_LOG, CHECKPOINT])?;
    Ok(TrainRun {
        network: result.network,
        log: result.log,
        config,
    })
}

/// Random search over the configured space (defaults if the config has no
/// `[search]` table). Results come back ranked.
pub fn cmd_search(cfg: &ExperimentConfig) -> Result<Vec<TrialResult>> {
    cfg.validate()?;
    let ds = load_dataset(&cfg.dataset)?;
    let arch = architecture_for(&cfg.architecture, &ds)?;
    let results = run_search(&cfg.search_space(), &trial_setup(cfg, arch), &ds, cfg.seed, cfg.jobs)?;
    write_search_artifacts(&cfg.output_dir, &results)?;
    write_manifest(&cfg.output_dir, "search", cfg, &[SEARCH_SUMMARY, TRAIN_LOG, CHECKPOINT])?;
    Ok(results)
}

/// One `(kind, depth)` cell of a sweep.
pub struct SweepRow {
    pub kind: BodyKind,
    pub depth: usize,
    pub width: usize,
    pub parameters: usize,
    /// Ranked, best first.
    pub results: Vec<TrialResult>,
}

impl SweepRow {
    pub fn best(&self) -> &TrialResult {
        &self.results[0]
    }

    /// Subdirectory of the sweep output holding this cell's artifacts.
    pub fn dir_name(&self) -> String {
        format!("{}-{}", self.kind, self.depth)
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(
        "kind,depth,width,parameters,best_trial,status,best_loss,final_loss,lr0,momentum,decay,activation,gate_bias,seed\n",
    );
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for row in rows {
        let b = row.best();
        let status = match b.status {
            TrainStatus::Ok => "ok",
            TrainStatus::Diverged => "diverged",
        };
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            row.kind,
            row.depth,
            row.width,
            row.parameters,
            b.trial,
            status,
            opt(b.best_loss),
            opt(b.final_loss),
            b.config.sgd.lr0,
            b.config.sgd.momentum,
            b.config.sgd.decay,
            b.config.activation,
            opt(b.config.gate_bias),
            b.seed
        ));
    }
    s
}

/// A full random search for every `(kind, depth)` in `cfg.sweep`, all with
/// the same master seed. Writes one merged `sweep.csv` plus each cell's
/// search artifacts under `<kind>-<depth>/`.
pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let sweep = &cfg.sweep;
    if sweep.depths.is_empty() {
        return Err(Error::Config("sweep needs at least one depth".into()));
    }
    if sweep.kinds.is_empty() {
        return Err(Error::Config("sweep needs at least one network kind".into()));
    }
    let ds = load_dataset(&cfg.dataset)?;
    let space = cfg.search_space();
    let mut rows = Vec::new();
    for &kind in &sweep.kinds {
        for &depth in &sweep.depths {
            let spec = ArchitectureSpec {
                kind,
                depth,
                width: sweep.width_for(kind),
                ..cfg.architecture.clone()
            };
            let arch = architecture_for(&spec, &ds)?;
            let parameters = arch.build()?.parameter_count();
            let results = run_search(&space, &trial_setup(cfg, arch), &ds, cfg.seed, cfg.jobs)?;
            let row = SweepRow {
                kind,
                depth,
                width: spec.width,
                parameters,
                results,
            };
            write_search_artifacts(&cfg.output_dir.join(row.dir_name()), &row.results)?;
            eprintln!(
                "{:>12} depth {:>3}: best loss {}",
                kind.name(),
                depth,
                row.best().best_loss.map_or("-".into(), |l| format!("{l:.5}"))
            );
            rows.push(row);
        }
    }
    write_file(&cfg.output_dir.join(SWEEP_TABLE), sweep_csv(&rows))?;
    write_manifest(&cfg.output_dir, "sweep", cfg, &[SWEEP_TABLE])?;
    Ok(rows)
}

/// Gate report for a trained checkpoint over `cfg.analysis.samples` random
/// training examples, exported as CSV into the output directory.
pub fn cmd_analyze(cfg: &ExperimentConfig, checkpoint: impl AsRef<Path>) -> Result<GateReport> {
    cfg.validate()?;
    let net = load_checkpoint(checkpoint)?;
    let ds = load_dataset(&cfg.dataset)?;
    let n = cfg.analysis.samples.min(ds.len());
    let samples = ds.subset(n, &mut Rng::new(cfg.seed))?;
    let report = gate_report(&net, &samples, cfg.analysis.probe)?;
    export_report(&report, &cfg.output_dir)?;
    write_manifest(&cfg.output_dir, "analyze", cfg, &REPORT_FILES)?;
    Ok(report)
}

#[derive(Debug, Parser)]
#[command(name = "highway", version, about = "Train and inspect deep highway networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one network and write its log and checkpoint.
    Train(Overrides),
    /// Random hyperparameter search; keeps the best trial.
    Search(Overrides),
    /// Random search for each network kind and depth.
    Sweep(Overrides),
    /// Export transform-gate maps of a trained highway checkpoint.
    Analyze {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

/// Config file plus flags that replace individual keys.
#[derive(Debug, Clone, Args)]
pub struct Overrides {
    /// TOML experiment config.
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "out")]
    pub output_dir: Option<PathBuf>,
    /// Dataset directory.
    #[arg(long = "data")]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub subset: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub kind: Option<BodyKind>,
    #[arg(long)]
    pub activation: Option<Activation>,
    #[arg(long)]
    pub gate_bias: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Search trials per configuration.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Comma-separated sweep depths.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub depths: Option<Vec<usize>>,
    /// Write 0 in the seconds column.
    #[arg(long)]
    pub no_timing: bool,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.output_dir {
            cfg.output_dir = v.clone();
        }
        if let Some(v) = &self.data {
            cfg.dataset.path = v.clone();
        }
        if let Some(v) = self.subset {
            cfg.dataset.subset = Some(v);
        }
        if let Some(v) = self.epochs {
            cfg.sgd.epochs = v;
        }
        if let Some(v) = self.depth {
            cfg.architecture.depth = v;
        }
        if let Some(v) = self.width {
            cfg.architecture.width = v;
        }
        if let Some(v) = self.kind {
            cfg.architecture.kind = v;
        }
        if let Some(v) = self.activation {
            cfg.architecture.activation = v;
        }
        if let Some(v) = self.gate_bias {
            cfg.init.gate_bias = v;
        }
        if let Some(v) = self.lr {
            cfg.sgd.lr0 = v;
        }
        if let Some(v) = self.jobs {
            cfg.jobs = v;
        }
        if let Some(v) = self.trials {
            let mut space = cfg.search_space();
            space.trials = v;
            cfg.search = Some(space);
        }
        if let Some(v) = &self.depths {
            cfg.sweep.depths = v.clone();
        }
        if self.no_timing {
            cfg.timing = false;
        }
    }

    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        self.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn fmt_loss(v: Option<f64>) -> String {
    v.map_or("-".into(), |l| format!("{l:.5}"))
}

fn execute(command: &Command) -> Result<()> {
    match command {
        Command::Train(o) => {
            let cfg = o.resolve()?;
            let run = cmd_train(&cfg)?;
            println!(
                "initial loss {:.5}, best {}, final {} -> {}",
                run.log.initial_loss,
                fmt_loss(run.log.best_loss()),
                fmt_loss(run.log.final_loss()),
                cfg.output_dir.display()
            );
            match run.log.diverged_at {
                Some(epoch) => Err(Error::Diverged { epoch }),
                None => Ok(()),
            }
        }
        Command::Search(o) => {
            let cfg = o.resolve()?;
            let results = cmd_search(&cfg)?;
            for r in &results {
                println!(
                    "trial {:>3}  {:<8}  best {}  lr0 {:.4e}  {}",
                    r.trial,
                    format!("{:?}", r.status).to_lowercase(),
                    fmt_loss(r.best_loss),
                    r.config.sgd.lr0,
                    r.config.activation
                );
            }
            match results.first() {
                Some(best) if best.status == TrainStatus::Diverged => Err(Error::Diverged {
                    epoch: best.log.diverged_at.unwrap_or(0),
                }),
                _ => Ok(()),
            }
        }
        Command::Sweep(o) => {
            let cfg = o.resolve()?;
            let rows = cmd_sweep(&cfg)?;
            print!("{}", sweep_csv(&rows));
            Ok(())
        }
        Command::Analyze { overrides, checkpoint } => {
            let cfg = overrides.resolve()?;
            let report = cmd_analyze(&cfg, checkpoint)?;
            let sparsity = gate_sparsity(&report);
            println!(
                "{} layers x {} blocks over {} samples -> {}",
                report.layers(),
                report.blocks(),
                report.sample_count,
                cfg.output_dir.display()
            );
            for (l, (m, s)) in sparsity.mean_activity.iter().zip(&sparsity.single_sample).enumerate() {
                println!("layer {:>3}: closed gates {:.2} on average, {:.2} for the probe", l + 1, m, s);
            }
            Ok(())
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code: 0 on success, [`Error::exit_code`] otherwise, 2 for
/// unparseable arguments.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 7
output_dir = "runs/x"

[dataset]
name = "mnist"
path = "data/mnist"

[architecture]
kind = "highway"
depth = 10
width = 50
"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.jobs, 1);
        assert!(cfg.timing);
        assert_eq!(cfg.init, InitSpec::default());
        assert_eq!(cfg.sgd, SgdConfig::default());
        assert_eq!(cfg.architecture.activation, Activation::Relu);
        assert_eq!(cfg.search, None);
        assert_eq!(cfg.sweep.plain_width, 71);
    }

    #[test]
    fn resolved_config_round_trips() {
        let mut cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        cfg.search = Some(SearchSpace::default());
        cfg.dataset.subset = Some(100);
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        let typo = MINIMAL.replace("depth = 10", "depht = 10");
        assert!(matches!(ExperimentConfig::from_toml(&typo), Err(Error::Config(_))));
        let zero = MINIMAL.replace("depth = 10", "depth = 0");
        assert!(matches!(ExperimentConfig::from_toml(&zero), Err(Error::Config(_))));
        let bias = format!("{MINIMAL}\n[init]\ngate_bias = 1.0\n");
        assert!(matches!(ExperimentConfig::from_toml(&bias), Err(Error::Config(_))));
    }

    #[test]
    fn flags_override_config() {
        let cli = Cli::try_parse_from([
            "highway", "sweep", "x.toml", "--seed", "3", "--epochs", "2", "--depths", "10,20", "--trials", "4",
            "--no-timing", "--kind", "plain",
        ])
        .unwrap();
        let Command::Sweep(o) = cli.command else { panic!() };
        let mut cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        o.apply(&mut cfg);
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.sgd.epochs, 2);
        assert_eq!(cfg.sweep.depths, vec![10, 20]);
        assert_eq!(cfg.search.unwrap().trials, 4);
        assert!(!cfg.timing);
        assert_eq!(cfg.architecture.kind, BodyKind::Plain);
    }

    #[test]
    fn missing_dataset_names_path() {
        let mut cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        cfg.dataset.path = "/nonexistent/mnist-dir".into();
        let err = load_dataset(&cfg.dataset).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/mnist-dir"));
        assert_eq!(err.exit_code(), 2);
    }
}
