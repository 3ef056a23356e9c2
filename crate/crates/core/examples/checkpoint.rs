//! Saves a network, reloads it, and shows that parameters and outputs come
//! back bit for bit. Also prints the checkpoint header.
//!
//!     cargo run --release --example checkpoint

use highway::init::{init_network, InitScheme, WeightInit};
use highway::layers::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC};
use highway::{Activation, Architecture, BodyKind, Rng};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let arch = Architecture::dense(BodyKind::Highway, 5, 16, Activation::Tanh, 12, 4);
    let net = init_network(arch.build()?, &InitScheme::new(WeightInit::Glorot, -2.0, 9)?);
    let path = std::env::temp_dir().join("highway-example.ckpt");
    save_checkpoint(&net, &path)?;

    let bytes = std::fs::read(&path)?;
    let header_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    println!("magic {:?}", String::from_utf8_lossy(&bytes[..CHECKPOINT_MAGIC.len()]));
    println!("version {}", u32::from_le_bytes(bytes[8..12].try_into().unwrap()));
    println!("header {}", String::from_utf8_lossy(&bytes[16..16 + header_len]));
    println!("{} bytes of parameters", bytes.len() - 16 - header_len);

    let back = load_checkpoint(&path)?;
    let same = net
        .parameters()
        .iter()
        .zip(back.parameters())
        .all(|(a, b)| a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    let x = Rng::new(1).normal_tensor(&[3, 12], 1.0);
    let p = net.probabilities(&x)?;
    println!("parameters identical: {same}, outputs identical: {}", p == back.probabilities(&x)?);
    Ok(())
}
