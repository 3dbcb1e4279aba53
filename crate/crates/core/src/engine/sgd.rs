use log::debug;
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    converged, derive_seed, RetrofitConfig, RetrofitProblem, RetrofitResult, STREAM_INIT,
    STREAM_NEGATIVES, STREAM_SHUFFLE,
};
use crate::embed::EmbeddingSet;
use crate::error::{Error, Result};
use crate::graph::KnowledgeGraph;
use crate::negatives::{sample_negative_edges, NegativeEdgeSet};
use crate::penalty::{RelationKind, RelationParams};

fn negatives_for(g: &KnowledgeGraph, cfg: &RetrofitConfig, epoch: usize) -> Result<NegativeEdgeSet> {
    if cfg.beta_neg > 0.0 && !g.is_empty() {
        sample_negative_edges(
            g,
            None,
            derive_seed(cfg.seed, &[STREAM_NEGATIVES, epoch as u64]),
            cfg.neg_strategy,
        )
    } else {
        Ok(NegativeEdgeSet::empty(cfg.seed, cfg.neg_strategy))
    }
}

fn all_finite<'a>(mut xs: impl Iterator<Item = &'a f64>) -> bool {
    xs.all(|x| x.is_finite())
}

/// Mini-batch SGD for neural relations.
///
/// Every epoch draws fresh negatives, shuffles positives and negatives
/// together and takes one constant-step gradient step per batch. The anchor
/// and regularizer gradients are spread over the batches in proportion to
/// batch size, so one epoch applies each exactly once. The recorded objective
/// uses a fixed negative sample (epoch 0) so that traces are comparable
/// across epochs.
pub fn retrofit_sgd(g: &KnowledgeGraph, q_hat: &EmbeddingSet, cfg: &RetrofitConfig) -> Result<RetrofitResult> {
    cfg.validate()?;
    if let Some(r) = g
        .relations()
        .iter()
        .find(|r| cfg.kind_for(r) != RelationKind::Neural)
    {
        return Err(Error::Config(format!(
            "relation `{r}` is {}; SGD training expects neural relations only",
            cfg.kind_for(r)
        )));
    }

    let eval_neg = negatives_for(g, cfg, 0)?;
    let eval = RetrofitProblem::new(g, &eval_neg, q_hat, cfg)?;
    let mut params = eval.initial_params(|r| derive_seed(cfg.seed, &[STREAM_INIT, r as u64]))?;
    let mut q: Vec<DVector<f64>> = eval.q_hat().to_vec();
    let alpha = eval.weights().alpha.clone();
    let lr = cfg.sgd.learning_rate;

    let initial = eval.objective(&q, &params)?;
    let mut totals = vec![initial.total];
    let mut trace = Vec::new();
    let mut done = cfg.sgd.epochs == 0;

    for epoch in 1..=cfg.sgd.epochs {
        let neg = negatives_for(g, cfg, epoch)?;
        let problem = RetrofitProblem::new(g, &neg, q_hat, cfg)?;
        let mut items = problem.signed_edges().to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[STREAM_SHUFFLE, epoch as u64]));
        items.shuffle(&mut rng);

        let n_items = items.len();
        let batches: Vec<&[_]> = if n_items == 0 {
            vec![&items[..]]
        } else {
            items.chunks(cfg.sgd.batch_size).collect()
        };
        for (bi, batch) in batches.iter().enumerate() {
            let frac = if n_items == 0 {
                1.0
            } else {
                batch.len() as f64 / n_items as f64
            };
            let mut grad_q: Vec<Option<DVector<f64>>> = vec![None; q.len()];
            let mut grad_a: Vec<DMatrix<f64>> = params
                .iter()
                .map(|p| DMatrix::zeros(p.d_src(), p.d_dst()))
                .collect();
            for e in batch.iter() {
                let gr = params[e.rel].gradients(&q[e.src], &q[e.dst])?;
                accumulate(&mut grad_q[e.src], &gr.d_qi, e.w);
                accumulate(&mut grad_q[e.dst], &gr.d_qj, e.w);
                grad_a[e.rel] += gr.d_a * e.w;
            }
            for (i, a) in alpha.iter().enumerate() {
                if *a != 0.0 {
                    let anchor = (&q[i] - &eval.q_hat()[i]) * (2.0 * a * frac);
                    accumulate(&mut grad_q[i], &anchor, 1.0);
                }
            }
            for (ga, p) in grad_a.iter_mut().zip(&params) {
                *ga += &p.a * (2.0 * cfg.lambda * frac);
            }

            let finite = grad_q
                .iter()
                .flatten()
                .all(|g| all_finite(g.iter()))
                && grad_a.iter().all(|g| all_finite(g.iter()));
            if !finite {
                return Err(Error::Numerical(format!(
                    "non-finite gradient in epoch {epoch}, batch {bi}"
                )));
            }
            for (x, gx) in q.iter_mut().zip(grad_q) {
                if let Some(gx) = gx {
                    *x -= gx * lr;
                }
            }
            for (p, ga) in params.iter_mut().zip(grad_a) {
                p.a -= ga * lr;
            }
        }

        let b = eval.objective(&q, &params)?;
        if !b.is_finite() {
            return Err(Error::Numerical(format!("non-finite objective after epoch {epoch}")));
        }
        debug!("epoch {epoch}: objective {:.10e}", b.total);
        trace.push(b);
        totals.push(b.total);
        if converged(&totals, cfg.tol) {
            done = true;
            break;
        }
    }

    Ok(RetrofitResult {
        embeddings: eval.to_embedding_set(&q),
        params: params
            .into_iter()
            .map(|p: RelationParams| (p.rel.clone(), p))
            .collect(),
        initial,
        sweeps_run: trace.len(),
        trace,
        converged: done,
        skipped_updates: 0,
    })
}

fn accumulate(slot: &mut Option<DVector<f64>>, g: &DVector<f64>, w: f64) {
    match slot {
        Some(acc) => acc.axpy(w, g, 1.0),
        None => *slot = Some(g * w),
    }
}
