//! Summarizes the transform gates of a dense highway network: gate biases,
//! mean activity per unit, one probe example's gates, and the block outputs.
//! Uses a checkpoint if one is given, otherwise a freshly initialized net.
//!
//!     cargo run --release --example gate_analysis -- [data/mnist] [model.ckpt]

use highway::analysis::{bias_activity_correlation, export_report, gate_report, gate_sparsity};
use highway::data::load_mnist;
use highway::init::{init_network, InitScheme, WeightInit};
use highway::layers::load_checkpoint;
use highway::{Activation, Architecture, BodyKind};

fn main() -> highway::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = args.next().unwrap_or_else(|| "data/mnist".into());
    let ds = load_mnist(&dir, false)?.take(2000);
    let net = match args.next() {
        Some(path) => load_checkpoint(path)?,
        None => {
            let arch = Architecture::dense(BodyKind::Highway, 20, 50, Activation::Tanh, ds.features(), ds.num_classes());
            init_network(arch.build()?, &InitScheme::new(WeightInit::He, -2.0, 0)?)
        }
    };

    let report = gate_report(&net, &ds, 0)?;
    println!("{} highway layers × {} blocks over {} samples", report.layers(), report.blocks(), report.sample_count);
    let s = gate_sparsity(&report);
    for l in 0..report.layers() {
        let row = report.mean_activity.row(l);
        let mean = row.iter().sum::<f64>() / row.len() as f64;
        println!(
            "layer {:>2}: mean activity {mean:.3}, closed on average {:.2}, closed for the probe {:.2}",
            l + 1,
            s.mean_activity[l],
            s.single_sample[l]
        );
    }
    if let Some(r) = bias_activity_correlation(&report) {
        println!("bias/activity correlation {r:.3}");
    }
    for path in export_report(&report, "gate-report")? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
