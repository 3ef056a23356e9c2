//! Random hyperparameter search over learning rate, momentum, decay,
//! activation and gate bias, run on a rayon pool. Any trial can be rerun on
//! its own from its sampled config and seed.
//!
//!     cargo run --release --example random_search -- [data/mnist]

use highway::data::load_mnist;
use highway::init::WeightInit;
use highway::optim::SgdConfig;
use highway::search::{run_search, run_trial, summary_csv, SearchSpace, TrialSetup};
use highway::{Activation, Architecture, BodyKind, Rng};

fn main() -> highway::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "data/mnist".into());
    let ds = load_mnist(&dir, true)?.subset(2000, &mut Rng::new(0))?;
    let setup = TrialSetup {
        arch: Architecture::dense(BodyKind::Highway, 10, 50, Activation::Relu, ds.features(), ds.num_classes()),
        init: WeightInit::He,
        base: SgdConfig {
            epochs: 5,
            ..SgdConfig::default()
        },
        timing: false,
    };
    let space = SearchSpace {
        trials: 8,
        ..SearchSpace::default()
    };
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let results = run_search(&space, &setup, &ds, 42, jobs)?;
    print!("{}", summary_csv(&results));

    let best = &results[0];
    let again = run_trial(&setup, &ds, &best.config, best.trial, best.seed)?;
    println!(
        "trial {} rerun alone: best loss {:?}, identical trajectory: {}",
        best.trial,
        again.best_loss,
        again.log.same_trajectory(&best.log)
    );
    Ok(())
}
