//! Train a neural (bilinear tanh) relation by mini-batch SGD with negatives.
//!
//! ```bash
//! cargo run --release --example neural_sgd
//! ```

use kgretro::eval::SynthConfig;
use kgretro::{retrofit_sgd, RelationKind, RetrofitConfig};

fn main() -> kgretro::Result<()> {
    let synth = SynthConfig { n_vertices: 100, n_relations: 2, dim: 5, seed: 11, ..Default::default() }.generate()?;
    let mut cfg = RetrofitConfig { seed: 11, ..RetrofitConfig::for_kind(RelationKind::Neural) };
    cfg.sgd.learning_rate = 0.02;
    cfg.sgd.epochs = 40;
    cfg.sgd.batch_size = 32;

    let res = retrofit_sgd(&synth.graph, &synth.q_hat, &cfg)?;
    println!("epoch  anchor    positive  negative  total");
    for (k, b) in res.trace.iter().enumerate().filter(|(k, _)| k % 5 == 0 || *k + 1 == res.trace.len()) {
        println!(
            "{:>5}  {:>8.4}  {:>8.4}  {:>8.4}  {:>8.4}",
            k + 1,
            b.anchor_term,
            b.positive_term,
            b.negative_term,
            b.total
        );
    }
    for (rel, p) in &res.params {
        println!("{rel}: ‖A‖_F = {:.3}", p.a.norm());
    }
    Ok(())
}
