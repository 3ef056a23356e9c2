//! Plain versus highway networks of increasing depth, each cell tuned by its
//! own random search. Writes per-cell artifacts and a merged `sweep.csv`.
//!
//!     cargo run --release --example depth_sweep -- [data/mnist] [out]

use highway::cli::{cmd_sweep, ExperimentConfig};

fn main() -> highway::Result<()> {
    let mut args = std::env::args().skip(1);
    let data = args.next().unwrap_or_else(|| "data/mnist".into());
    let out = args.next().unwrap_or_else(|| "runs/depth-sweep".into());
    let cfg = ExperimentConfig::from_toml(&format!(
        r#"
seed = 1
output_dir = "{out}"

[dataset]
name = "mnist"
path = "{data}"
subset = 2000

[architecture]
kind = "highway"
depth = 10
width = 50

[sgd]
epochs = 5

[search]
trials = 4

[sweep]
depths = [10, 20]
kinds = ["plain", "highway"]
"#
    ))?;
    let rows = cmd_sweep(&cfg)?;
    for row in &rows {
        let best = row.best();
        println!(
            "{:<8} depth {:>3}  width {:>3}  {:>6} params  best loss {:?}",
            row.kind.name(),
            row.depth,
            row.width,
            row.parameters,
            best.best_loss
        );
    }
    println!("table written to {out}/sweep.csv");
    Ok(())
}
