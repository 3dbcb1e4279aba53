//! Leave-one-relation-out link prediction on a synthetic graph.
//!
//! The held-out relation is removed before retrofitting; a logistic classifier
//! over pair features then separates its edges from sampled non-edges.
//!
//! ```bash
//! cargo run --release --example link_prediction
//! ```

use kgretro::eval::{eval_linkpred, format_linkpred_table, FeatureMap, LinkPredConfig, SynthConfig};

fn main() -> kgretro::Result<()> {
    let synth = SynthConfig { n_vertices: 300, seed: 1, ..Default::default() }.generate()?;
    let mut cfg = LinkPredConfig::new("r0");
    cfg.n_repeats = 2;
    cfg.classifier.features = FeatureMap::Quadratic;
    let rows = eval_linkpred(&synth.graph, &synth.q_hat, &cfg)?;
    print!("{}", format_linkpred_table("r0", &rows));
    for row in &rows {
        println!("{}: {}", row.model, row.report);
    }
    Ok(())
}
