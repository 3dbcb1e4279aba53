//! How the anchor weight α trades distributional data against graph structure.
//!
//! ```bash
//! cargo run --release --example alpha_tradeoff
//! ```

use kgretro::eval::SynthConfig;
use kgretro::{retrofit, RelationKind, RetrofitConfig};

fn main() -> kgretro::Result<()> {
    let synth = SynthConfig { n_vertices: 200, dim: 5, seed: 4, ..Default::default() }.generate()?;
    println!("{:>8}  {:>14}  {:>14}", "alpha", "moved from q̂", "error vs truth");
    for alpha in [0.01, 0.1, 1.0, 10.0, 100.0] {
        let cfg = RetrofitConfig { alpha, lambda: 1e-3, ..RetrofitConfig::for_kind(RelationKind::Linear) };
        let res = retrofit(&synth.graph, &synth.q_hat, &cfg)?;
        let mean = |f: &dyn Fn(&str) -> f64| synth.truth.ids().map(f).sum::<f64>() / synth.truth.len() as f64;
        let moved = mean(&|id| (res.embeddings.get(id).unwrap() - synth.q_hat.get(id).unwrap()).norm());
        let error = mean(&|id| (res.embeddings.get(id).unwrap() - synth.truth.get(id).unwrap()).norm());
        println!("{alpha:>8}  {moved:>14.4}  {error:>14.4}");
    }
    Ok(())
}
