//! Drive the block updates by hand instead of calling `retrofit`.
//!
//! Useful for experimenting with schedules: here the matrix is fitted once on
//! the distributional vectors and then frozen while the vertices move.
//!
//! ```bash
//! cargo run --example custom_sweeps
//! ```

use kgretro::engine::RetrofitProblem;
use kgretro::eval::SynthConfig;
use kgretro::{NegativeEdgeSet, RelationKind, RetrofitConfig};

fn main() -> kgretro::Result<()> {
    let synth = SynthConfig { n_vertices: 60, n_relations: 1, dim: 3, seed: 8, ..Default::default() }.generate()?;
    let cfg = RetrofitConfig { lambda: 1e-3, ..RetrofitConfig::for_kind(RelationKind::Linear) };
    let neg = NegativeEdgeSet::empty(0, cfg.neg_strategy);
    let problem = RetrofitProblem::new(&synth.graph, &neg, &synth.q_hat, &cfg)?;

    let mut params = problem.initial_params(|_| 0)?;
    let mut q = problem.q_hat().to_vec();
    params[0].b = problem.update_b(0, &q, &params)?;
    params[0].a = problem.update_a(0, &q, &params, cfg.lambda, true)?;
    println!("start: {:.5}", problem.objective(&q, &params)?.total);

    for sweep in 1..=5 {
        for i in 0..q.len() {
            if let Some(x) = problem.update_q(i, &q, &params)? {
                q[i] = x;
            }
        }
        println!("sweep {sweep}: {:.5}", problem.objective(&q, &params)?.total);
    }
    Ok(())
}
