//! Random hyperparameter search.
//!
//! Trial `i` of a search with master seed `m` uses the trial seed
//! `m ^ splitmix64(i)`. Its hyperparameters are drawn from `Rng::new(seed)`
//! and its initialization and minibatch order from
//! `Rng::new(splitmix64(seed))`, so any trial can be rerun alone from
//! `(config, seed)` and results do not depend on execution order.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::init::{init_network_with, WeightInit};
use crate::layers::{Architecture, Network};
use crate::optim::{train_with, SgdConfig, TrainLog, TrainOptions, TrainStatus};
use crate::rng::{splitmix64, Rng};
use crate::tensor::Activation;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpace {
    /// Sampled log-uniformly.
    pub lr0: [f64; 2],
    pub momentum: [f64; 2],
    pub decay: [f64; 2],
    pub activations: Vec<Activation>,
    /// Transform-gate bias range; ignored for plain networks.
    pub gate_bias: [f64; 2],
    pub trials: usize,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            lr0: [1e-3, 1e-1],
            momentum: [0.5, 0.99],
            decay: [0.9, 1.0],
            activations: vec![Activation::Relu, Activation::Tanh],
            gate_bias: [-10.0, -1.0],
            trials: 5,
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        let ordered = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] <= r[1];
        let problem = if !ordered(self.lr0) || self.lr0[0] <= 0.0 {
            Some("lr0 range must be positive and ordered")
        } else if !ordered(self.momentum) || self.momentum[0] < 0.0 || self.momentum[1] >= 1.0 {
            Some("momentum range must lie in [0, 1)")
        } else if !ordered(self.decay) || self.decay[0] <= 0.0 || self.decay[1] > 1.0 {
            Some("decay range must lie in (0, 1]")
        } else if !ordered(self.gate_bias) || self.gate_bias[1] >= 0.0 {
            Some("gate bias range must be negative and ordered")
        } else if self.activations.is_empty() {
            Some("at least one activation is required")
        } else if self.trials == 0 {
            Some("trials must be at least 1")
        } else {
            None
        };
        match problem {
            Some(p) => Err(Error::Config(format!("search space: {p}"))),
            None => Ok(()),
        }
    }
}

/// One sampled point of the search space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub sgd: SgdConfig,
    pub activation: Activation,
    /// `None` for plain networks.
    pub gate_bias: Option<f64>,
}

/// Draws every field independently. `base` supplies epochs and batch size.
pub fn sample_config(space: &SearchSpace, base: &SgdConfig, gated: bool, rng: &mut Rng) -> TrainConfig {
    let lr0 = rng.log_uniform(space.lr0[0], space.lr0[1]);
    let momentum = rng.uniform(space.momentum[0], space.momentum[1]);
    let decay = rng.uniform(space.decay[0], space.decay[1]);
    let activation = space.activations[rng.below(space.activations.len())];
    let gate_bias = rng.uniform(space.gate_bias[0], space.gate_bias[1]);
    TrainConfig {
        sgd: SgdConfig {
            lr0,
            momentum,
            decay,
            ..*base
        },
        activation,
        gate_bias: gated.then_some(gate_bias),
    }
}

/// Everything a trial needs besides its sampled config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSetup {
    /// The activation field is replaced by each trial's sampled activation.
    pub arch: Architecture,
    pub init: WeightInit,
    pub base: SgdConfig,
    #[serde(default)]
    pub timing: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub config: TrainConfig,
    pub status: TrainStatus,
    pub best_loss: Option<f64>,
    pub final_loss: Option<f64>,
    pub log: TrainLog,
    pub network: Network,
}

pub fn trial_seed(master: u64, trial: usize) -> u64 {
    master ^ splitmix64(trial as u64)
}

/// Builds, initializes and trains one network from `(config, seed)`.
pub fn run_trial(setup: &TrialSetup, ds: &Dataset, config: &TrainConfig, trial: usize, seed: u64) -> Result<TrialResult> {
    let arch = Architecture {
        activation: config.activation,
        ..setup.arch.clone()
    };
    let mut rng = Rng::new(splitmix64(seed));
    let net = init_network_with(arch.build()?, setup.init, config.gate_bias.unwrap_or(-1.0), &mut rng);
    let (network, log) = train_with(net, ds, &config.sgd, &mut rng, TrainOptions { timing: setup.timing })?;
    Ok(TrialResult {
        trial,
        seed,
        config: *config,
        status: log.status,
        best_loss: log.best_loss(),
        final_loss: log.final_loss(),
        log,
        network,
    })
}

/// Samples and runs `space.trials` trials on up to `jobs` threads, returning
/// them ranked by best training cross-entropy with diverged trials last.
pub fn run_search(space: &SearchSpace, setup: &TrialSetup, ds: &Dataset, master_seed: u64, jobs: usize) -> Result<Vec<TrialResult>> {
    space.validate()?;
    let gated = setup.arch.kind.is_highway();
    let run = |trial: usize| {
        let seed = trial_seed(master_seed, trial);
        let config = sample_config(space, &setup.base, gated, &mut Rng::new(seed));
        run_trial(setup, ds, &config, trial, seed)
    };
    let mut results = if jobs <= 1 {
        (0..space.trials).map(run).collect::<Result<Vec<_>>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| (0..space.trials).into_par_iter().map(run).collect::<Result<Vec<_>>>())?
    };
    rank(&mut results);
    Ok(results)
}

/// Ascending best loss, diverged (or loss-less) trials last, ties by index.
pub fn rank(results: &mut [TrialResult]) {
    let key = |r: &TrialResult| {
        let ok = r.status == TrainStatus::Ok && r.best_loss.is_some();
        (!ok, r.best_loss.unwrap_or(f64::INFINITY))
    };
    results.sort_by(|a, b| {
        let (ka, kb) = (key(a), key(b));
        ka.0.cmp(&kb.0)
            .then(ka.1.total_cmp(&kb.1))
            .then(a.trial.cmp(&b.trial))
    });
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn summary_csv(results: &[TrialResult]) -> String {
    let mut s = String::from("trial,status,lr0,momentum,decay,activation,gate_bias,best_loss,final_loss,seed\n");
    for r in results {
        let status = match r.status {
            TrainStatus::Ok => "ok",
            TrainStatus::Diverged => "diverged",
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.trial,
            status,
            r.config.sgd.lr0,
            r.config.sgd.momentum,
            r.config.sgd.decay,
            r.config.activation,
            opt(r.config.gate_bias),
            opt(r.best_loss),
            opt(r.final_loss),
            r.seed
        );
    }
    s
}

pub fn write_summary_csv(results: &[TrialResult], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, summary_csv(results)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_space_returns_that_config() {
        let space = SearchSpace {
            lr0: [0.02, 0.02],
            momentum: [0.8, 0.8],
            decay: [0.97, 0.97],
            activations: vec![Activation::Tanh],
            gate_bias: [-3.0, -3.0],
            trials: 1,
        };
        let base = SgdConfig::default();
        let c = sample_config(&space, &base, true, &mut Rng::new(1));
        assert_eq!(c.sgd.lr0, 0.02);
        assert_eq!(c.sgd.momentum, 0.8);
        assert_eq!(c.sgd.decay, 0.97);
        assert_eq!(c.activation, Activation::Tanh);
        assert_eq!(c.gate_bias, Some(-3.0));
        assert_eq!(c.sgd.epochs, base.epochs);
        let plain = sample_config(&space, &base, false, &mut Rng::new(1));
        assert_eq!(plain.gate_bias, None);
    }

    #[test]
    fn gate_bias_stays_in_range() {
        let space = SearchSpace::default();
        let mut rng = Rng::new(3);
        let draws: Vec<f64> = (0..10_000)
            .map(|_| sample_config(&space, &SgdConfig::default(), true, &mut rng).gate_bias.unwrap())
            .collect();
        assert!(draws.iter().all(|&b| (-10.0..=-1.0).contains(&b)));
    }

    #[test]
    fn lr0_is_log_uniform() {
        let space = SearchSpace::default();
        let mut rng = Rng::new(5);
        let mut draws: Vec<f64> = (0..10_000)
            .map(|_| sample_config(&space, &SgdConfig::default(), false, &mut rng).sgd.lr0)
            .collect();
        draws.sort_by(f64::total_cmp);
        let median = draws[5_000];
        // Geometric midpoint of [1e-3, 1e-1].
        assert!((median / 1e-2 - 1.0).abs() < 0.2, "median {median}");
    }

    #[test]
    fn invalid_spaces_rejected() {
        let ok = SearchSpace::default();
        assert!(ok.validate().is_ok());
        for bad in [
            SearchSpace { trials: 0, ..ok.clone() },
            SearchSpace { lr0: [0.1, 0.01], ..ok.clone() },
            SearchSpace { gate_bias: [-2.0, 1.0], ..ok.clone() },
            SearchSpace { momentum: [0.5, 1.0], ..ok.clone() },
            SearchSpace { activations: vec![], ..ok.clone() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn trial_seeds_are_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..100).map(|i| trial_seed(42, i)).collect();
        assert_eq!(seeds.len(), 100);
    }
}
