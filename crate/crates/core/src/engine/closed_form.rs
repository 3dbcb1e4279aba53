use log::{debug, warn};
use nalgebra::DVector;
use rayon::prelude::*;

use super::{
    converged, derive_seed, ObjectiveBreakdown, RetrofitConfig, RetrofitProblem, RetrofitResult,
    UpdateMode, STREAM_INIT, STREAM_NEGATIVES, UNBOUNDED_OBJECTIVE,
};
use crate::embed::EmbeddingSet;
use crate::error::{Error, Result};
use crate::graph::KnowledgeGraph;
use crate::negatives::{sample_negative_edges, NegativeEdgeSet};
use crate::penalty::{RelationKind, RelationParams};

pub(crate) fn check_objective(b: &ObjectiveBreakdown, sweep: usize) -> Result<()> {
    if !b.is_finite() {
        return Err(Error::Numerical(format!(
            "objective became non-finite after sweep {sweep}"
        )));
    }
    if b.total < UNBOUNDED_OBJECTIVE {
        return Err(Error::Numerical(format!(
            "objective fell to {:.3e} after sweep {sweep}: negative-edge mass outweighs the anchor \
             and positive terms; lower beta_neg or raise alpha",
            b.total
        )));
    }
    Ok(())
}

/// Relation step of one sweep: `b` for translation/linear, then `A` for linear.
fn update_relations(
    problem: &RetrofitProblem<'_>,
    q: &[DVector<f64>],
    params: &[RelationParams],
    cfg: &RetrofitConfig,
) -> Result<Vec<RelationParams>> {
    (0..params.len())
        .into_par_iter()
        .map(|r| {
            let mut p = params[r].clone();
            if p.kind.learns_offset() {
                p.b = problem.update_b_for(r, &p, q)?;
            }
            if p.kind == RelationKind::Linear && cfg.update_matrices {
                p.a = problem.update_a_for(r, &p, q, cfg.lambda, cfg.orthogonalize)?;
            }
            Ok(p)
        })
        .collect()
}

/// Vertex step of one sweep. Returns how many updates were skipped.
fn update_vertices(
    problem: &RetrofitProblem<'_>,
    q: &mut [DVector<f64>],
    params: &[RelationParams],
    mode: UpdateMode,
) -> usize {
    let caches = problem.relation_caches(params);
    match mode {
        UpdateMode::GaussSeidel => {
            let mut skipped = 0;
            for i in 0..q.len() {
                match problem.update_q_cached(i, q, params, &caches) {
                    Some(x) => q[i] = x,
                    None => skipped += 1,
                }
            }
            skipped
        }
        UpdateMode::Jacobi => {
            let updates: Vec<Option<DVector<f64>>> = (0..q.len())
                .into_par_iter()
                .map(|i| problem.update_q_cached(i, q, params, &caches))
                .collect();
            let mut skipped = 0;
            for (slot, u) in q.iter_mut().zip(updates) {
                match u {
                    Some(x) => *slot = x,
                    None => skipped += 1,
                }
            }
            skipped
        }
    }
}

/// Block coordinate descent for identity, translation and linear relations.
///
/// Each sweep updates every relation (`b`, then `A`), then every vertex in
/// sorted id order, and records the objective. Negatives are sampled once from
/// `cfg.seed` when `beta_neg > 0`.
pub fn retrofit_closed_form(
    g: &KnowledgeGraph,
    q_hat: &EmbeddingSet,
    cfg: &RetrofitConfig,
) -> Result<RetrofitResult> {
    cfg.validate()?;
    if let Some(r) = g
        .relations()
        .iter()
        .find(|r| cfg.kind_for(r) == RelationKind::Neural)
    {
        return Err(Error::Config(format!(
            "relation `{r}` is neural; neural relations are trained by SGD"
        )));
    }
    let neg = if cfg.beta_neg > 0.0 && !g.is_empty() {
        sample_negative_edges(
            g,
            None,
            derive_seed(cfg.seed, &[STREAM_NEGATIVES]),
            cfg.neg_strategy,
        )?
    } else {
        NegativeEdgeSet::empty(cfg.seed, cfg.neg_strategy)
    };
    let problem = RetrofitProblem::new(g, &neg, q_hat, cfg)?;
    let params = problem.initial_params(|r| derive_seed(cfg.seed, &[STREAM_INIT, r as u64]))?;
    let pool = cfg.thread_pool()?;
    pool.install(|| run_sweeps(&problem, params, cfg))
}

pub(crate) fn run_sweeps(
    problem: &RetrofitProblem<'_>,
    mut params: Vec<RelationParams>,
    cfg: &RetrofitConfig,
) -> Result<RetrofitResult> {
    let mut q: Vec<DVector<f64>> = problem.q_hat().to_vec();
    let initial = problem.objective(&q, &params)?;
    check_objective(&initial, 0)?;
    let mut totals = vec![initial.total];
    let mut trace = Vec::new();
    let mut skipped_updates = 0;
    let mut done = false;

    for sweep in 1..=cfg.max_sweeps {
        params = update_relations(problem, &q, &params, cfg)?;
        let skipped = update_vertices(problem, &mut q, &params, cfg.update_mode);
        if skipped > 0 {
            warn!("sweep {sweep}: left {skipped} vertices unchanged (zero denominator)");
        }
        skipped_updates += skipped;
        let b = problem.objective(&q, &params)?;
        check_objective(&b, sweep)?;
        debug!("sweep {sweep}: objective {:.10e}", b.total);
        trace.push(b);
        totals.push(b.total);
        if converged(&totals, cfg.tol) {
            done = true;
            break;
        }
    }

    Ok(RetrofitResult {
        embeddings: problem.to_embedding_set(&q),
        params: params.into_iter().map(|p| (p.rel.clone(), p)).collect(),
        initial,
        sweeps_run: trace.len(),
        trace,
        converged: done,
        skipped_updates,
    })
}
