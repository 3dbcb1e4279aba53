//! Classic neighbour-averaging retrofitting: every relation is "similar to".
//!
//! ```bash
//! cargo run --example identity_baseline
//! ```

use kgretro::graph::GraphBuilder;
use kgretro::{retrofit, EmbeddingSet, RelationKind, RetrofitConfig};
use nalgebra::dvector;

fn cos(a: &nalgebra::DVector<f64>, b: &nalgebra::DVector<f64>) -> f64 {
    a.dot(b) / (a.norm() * b.norm())
}

fn main() -> kgretro::Result<()> {
    let mut b = GraphBuilder::new();
    b.edge("happy", "synonym", "glad")
        .edge("glad", "synonym", "joyful")
        .edge("sad", "synonym", "unhappy");
    let (g, _) = b.build();

    let mut q_hat = EmbeddingSet::new();
    q_hat.insert("happy", None, dvector![0.9, 0.1, 0.3])?;
    q_hat.insert("glad", None, dvector![0.2, 0.8, 0.1])?;
    q_hat.insert("sad", None, dvector![-0.7, 0.2, 0.4])?;
    q_hat.insert("unhappy", None, dvector![0.1, -0.6, 0.5])?;
    // no distributional vector: placed purely by its neighbours
    q_hat.insert("joyful", None, dvector![0.0, 0.0, 0.0])?;

    let cfg = RetrofitConfig::for_kind(RelationKind::Identity);
    let res = retrofit(&g, &q_hat, &cfg)?;
    println!("converged after {} sweeps, objective {:.4}\n", res.sweeps_run, res.final_objective().total);
    for (a, b) in [("happy", "glad"), ("sad", "unhappy"), ("happy", "sad")] {
        println!(
            "cos({a}, {b}): {:.3} -> {:.3}",
            cos(q_hat.get(a).unwrap(), q_hat.get(b).unwrap()),
            cos(res.embeddings.get(a).unwrap(), res.embeddings.get(b).unwrap())
        );
    }
    println!("joyful: {:?}", res.embeddings.get("joyful").unwrap().as_slice());
    Ok(())
}
