//! Indexed view of one retrofitting problem: weights, incidence lists and the
//! exact block updates for the squared-residual kinds.

use nalgebra::{DMatrix, DVector};

use super::{RetrofitConfig, MIN_LAMBDA, SOLVE_RESIDUAL_TOL, ZERO_DENOMINATOR};
use crate::embed::EmbeddingSet;
use crate::error::{Error, Result};
use crate::graph::{Edge, KnowledgeGraph};
use crate::linalg;
use crate::negatives::NegativeEdgeSet;
use crate::penalty::{init_params, RelationKind, RelationParams};

/// Tolerance on `‖AᵀA − I‖_max` for taking the scalar-denominator vertex update.
const ORTHONORMAL_TOL: f64 = 1e-10;

/// Per-vertex anchor weights and per-edge structural weights.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeWeights {
    /// `α` for anchored vertices, 0 otherwise; indexed by vertex.
    pub alpha: Vec<f64>,
    /// `β⁺ / d_r(i)`, aligned with [`KnowledgeGraph::edges`].
    pub positive: Vec<f64>,
    /// `β⁻ / d_r(i)`, aligned with [`NegativeEdgeSet::edges`].
    pub negative: Vec<f64>,
}

/// An edge with its signed weight: `+β` for positives, `−β` for negatives.
#[derive(Clone, Copy, Debug)]
pub(crate) struct WeightedEdge {
    pub src: usize,
    pub dst: usize,
    pub rel: usize,
    pub w: f64,
}

#[derive(Clone, Copy, Debug)]
struct Incidence {
    other: usize,
    rel: usize,
    w: f64,
}

/// What the vertex update needs to know about each relation's current `A`.
pub(crate) struct RelationCache {
    /// `AᵀA`, present only when it differs from the identity.
    gram: Option<DMatrix<f64>>,
}

pub struct RetrofitProblem<'g> {
    graph: &'g KnowledgeGraph,
    kinds: Vec<RelationKind>,
    rel_dims: Vec<(usize, usize)>,
    dims: Vec<usize>,
    q_hat: Vec<DVector<f64>>,
    weights: EdgeWeights,
    signed: Vec<WeightedEdge>,
    by_rel: Vec<Vec<usize>>,
    outgoing: Vec<Vec<Incidence>>,
    incoming: Vec<Vec<Incidence>>,
    lambda: f64,
}

impl<'g> RetrofitProblem<'g> {
    /// `q_hat` must hold an entry for every vertex of `g`; `neg` must have been
    /// sampled against `g`.
    pub fn new(
        g: &'g KnowledgeGraph,
        neg: &NegativeEdgeSet,
        q_hat: &EmbeddingSet,
        cfg: &RetrofitConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let mut q = Vec::with_capacity(g.n_vertices());
        let mut alpha = Vec::with_capacity(g.n_vertices());
        for v in g.vertices() {
            let e = q_hat.entry(&v.id).ok_or_else(|| {
                Error::Embedding(format!("vertex `{}` has no embedding (align first)", v.id))
            })?;
            alpha.push(if e.anchored() { cfg.alpha } else { 0.0 });
            q.push(e.vector.clone());
        }
        let dims: Vec<usize> = q.iter().map(|v| v.len()).collect();
        let kinds: Vec<RelationKind> = g.relations().iter().map(|r| cfg.kind_for(r)).collect();

        let n_rel = g.relations().len();
        let mut rel_dims: Vec<Option<(usize, usize)>> = vec![None; n_rel];
        let mut check = |e: &Edge| -> Result<()> {
            let d = (dims[e.src], dims[e.dst]);
            match rel_dims[e.rel] {
                None => rel_dims[e.rel] = Some(d),
                Some(prev) if prev != d => {
                    return Err(Error::DimensionMismatch {
                        rel: g.relations()[e.rel].clone(),
                        expected: format!("{} × {}", prev.0, prev.1),
                        got: format!(
                            "{} × {} on edge {} (negatives may need the class-restricted strategy)",
                            d.0,
                            d.1,
                            g.triple(e)
                        ),
                    })
                }
                Some(_) => {}
            }
            Ok(())
        };
        for e in g.edges() {
            check(e)?;
        }
        for e in &neg.edges {
            check(e)?;
        }
        let rel_dims: Vec<(usize, usize)> = rel_dims.into_iter().map(|d| d.unwrap_or((0, 0))).collect();

        let mut degree = vec![0usize; g.edges().len()];
        for (k, e) in g.edges().iter().enumerate() {
            degree[k] = g.out_degree_idx(e.src, e.rel);
        }
        let positive: Vec<f64> = degree.iter().map(|&d| cfg.beta_pos / d as f64).collect();
        let negative: Vec<f64> = neg
            .edges
            .iter()
            .map(|e| {
                let d = g.out_degree_idx(e.src, e.rel);
                if d == 0 {
                    0.0
                } else {
                    cfg.beta_neg / d as f64
                }
            })
            .collect();

        let mut signed = Vec::with_capacity(g.n_edges() + neg.len());
        for (e, &w) in g.edges().iter().zip(&positive) {
            signed.push(WeightedEdge { src: e.src, dst: e.dst, rel: e.rel, w });
        }
        for (e, &w) in neg.edges.iter().zip(&negative) {
            if w != 0.0 {
                signed.push(WeightedEdge { src: e.src, dst: e.dst, rel: e.rel, w: -w });
            }
        }
        let mut by_rel = vec![Vec::new(); n_rel];
        let mut outgoing = vec![Vec::new(); g.n_vertices()];
        let mut incoming = vec![Vec::new(); g.n_vertices()];
        for (k, e) in signed.iter().enumerate() {
            by_rel[e.rel].push(k);
            outgoing[e.src].push(Incidence { other: e.dst, rel: e.rel, w: e.w });
            incoming[e.dst].push(Incidence { other: e.src, rel: e.rel, w: e.w });
        }

        Ok(RetrofitProblem {
            graph: g,
            kinds,
            rel_dims,
            dims,
            q_hat: q,
            weights: EdgeWeights {
                alpha,
                positive,
                negative,
            },
            signed,
            by_rel,
            outgoing,
            incoming,
            lambda: cfg.lambda,
        })
    }

    pub fn graph(&self) -> &KnowledgeGraph {
        self.graph
    }

    pub fn weights(&self) -> &EdgeWeights {
        &self.weights
    }

    pub fn q_hat(&self) -> &[DVector<f64>] {
        &self.q_hat
    }

    pub fn kinds(&self) -> &[RelationKind] {
        &self.kinds
    }

    /// `(d_src, d_dst)` per relation.
    pub fn relation_dims(&self) -> &[(usize, usize)] {
        &self.rel_dims
    }

    pub(crate) fn signed_edges(&self) -> &[WeightedEdge] {
        &self.signed
    }

    /// Starting parameters: `A = I` (padded when rectangular), `b = 0`.
    pub fn initial_params(&self, seed_for: impl Fn(usize) -> u64) -> Result<Vec<RelationParams>> {
        self.graph
            .relations()
            .iter()
            .enumerate()
            .map(|(r, name)| {
                let (ds, dd) = self.rel_dims[r];
                init_params(name, self.kinds[r], ds, dd, seed_for(r))
            })
            .collect()
    }

    /// Vectors of `q` in vertex order.
    pub fn vectors_of(&self, q: &EmbeddingSet) -> Result<Vec<DVector<f64>>> {
        self.graph
            .vertices()
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let x = q
                    .get(&v.id)
                    .ok_or_else(|| Error::Embedding(format!("vertex `{}` has no embedding", v.id)))?;
                if x.len() != self.dims[i] {
                    return Err(Error::Embedding(format!(
                        "vertex `{}` has dimension {}, expected {}",
                        v.id,
                        x.len(),
                        self.dims[i]
                    )));
                }
                Ok(x.clone())
            })
            .collect()
    }

    pub fn to_embedding_set(&self, q: &[DVector<f64>]) -> EmbeddingSet {
        let mut out = EmbeddingSet::new();
        for (v, x) in self.graph.vertices().iter().zip(q) {
            out.insert(v.id.clone(), v.class.clone(), x.clone())
                .expect("graph vertices are unique and share per-class dimensions");
        }
        out
    }

    fn check_params(&self, params: &[RelationParams]) -> Result<()> {
        let names = self.graph.relations();
        if params.len() != names.len() {
            let missing: Vec<&str> = names
                .iter()
                .filter(|n| !params.iter().any(|p| &p.rel == *n))
                .map(String::as_str)
                .collect();
            return Err(Error::Config(format!(
                "relation parameters missing for: {}",
                missing.join(", ")
            )));
        }
        for (p, name) in params.iter().zip(names) {
            if &p.rel != name {
                return Err(Error::Config(format!(
                    "relation parameters out of order: expected `{name}`, found `{}`",
                    p.rel
                )));
            }
        }
        Ok(())
    }

    fn check_q(&self, q: &[DVector<f64>]) -> Result<()> {
        if q.len() != self.dims.len() {
            return Err(Error::Embedding(format!(
                "expected {} vectors, got {}",
                self.dims.len(),
                q.len()
            )));
        }
        Ok(())
    }

    /// Every term of the objective at `(q, params)`. `params` is indexed like
    /// [`KnowledgeGraph::relations`].
    pub fn objective(&self, q: &[DVector<f64>], params: &[RelationParams]) -> Result<super::ObjectiveBreakdown> {
        self.check_params(params)?;
        self.check_q(q)?;
        let mut anchor = 0.0;
        for ((x, x_hat), &a) in q.iter().zip(&self.q_hat).zip(&self.weights.alpha) {
            if a != 0.0 {
                anchor += a * (x - x_hat).norm_squared();
            }
        }
        let mut positive = 0.0;
        let mut negative = 0.0;
        for e in &self.signed {
            let f = params[e.rel].value_unchecked(&q[e.src], &q[e.dst]);
            if e.w >= 0.0 {
                positive += e.w * f;
            } else {
                negative += -e.w * f;
            }
        }
        let mut reg = 0.0;
        for p in params {
            if p.kind.learns_matrix() {
                reg += self.lambda * p.a.norm_squared();
            }
        }
        Ok(super::ObjectiveBreakdown::new(anchor, positive, negative, reg))
    }

    /// Exact minimizer of the objective in `b_r` with everything else fixed:
    /// the signed-weight mean of `q_i − A_r q_j`.
    pub fn update_b(&self, r: usize, q: &[DVector<f64>], params: &[RelationParams]) -> Result<DVector<f64>> {
        self.check_params(params)?;
        self.check_q(q)?;
        self.update_b_for(r, &params[r], q)
    }

    pub(crate) fn update_b_for(&self, r: usize, p: &RelationParams, q: &[DVector<f64>]) -> Result<DVector<f64>> {
        let mut num = DVector::zeros(p.d_src());
        let mut den = 0.0;
        for &k in &self.by_rel[r] {
            let e = self.signed[k];
            let pred = p.pull_forward(&q[e.dst]);
            num += (&q[e.src] - pred) * e.w;
            den += e.w;
        }
        if den.abs() < ZERO_DENOMINATOR {
            return Err(Error::Numerical(format!(
                "relation `{}`: positive and negative edge weights cancel ({den:.3e}); adjust beta_neg",
                p.rel
            )));
        }
        Ok(num / den)
    }

    /// Exact minimizer in `A_r`: solves `Ã V = U` with
    /// `U = Σ ±β (q_i − b) q_jᵀ` and `V = Σ ±β q_j q_jᵀ + λI`, then optionally
    /// replaces `Ã` by its polar factor.
    pub fn update_a(
        &self,
        r: usize,
        q: &[DVector<f64>],
        params: &[RelationParams],
        lambda: f64,
        orthogonalize: bool,
    ) -> Result<DMatrix<f64>> {
        self.check_params(params)?;
        self.check_q(q)?;
        self.update_a_for(r, &params[r], q, lambda, orthogonalize)
    }

    pub(crate) fn update_a_for(
        &self,
        r: usize,
        p: &RelationParams,
        q: &[DVector<f64>],
        lambda: f64,
        orthogonalize: bool,
    ) -> Result<DMatrix<f64>> {
        let (ds, dd) = (p.d_src(), p.d_dst());
        let mut u = DMatrix::zeros(ds, dd);
        let mut v = DMatrix::zeros(dd, dd);
        for &k in &self.by_rel[r] {
            let e = self.signed[k];
            let qj = &q[e.dst];
            let lhs = (&q[e.src] - &p.b) * e.w;
            u.ger(1.0, &lhs, qj, 1.0);
            v.ger(e.w, qj, qj, 1.0);
        }
        for d in 0..dd {
            v[(d, d)] += lambda.max(MIN_LAMBDA);
        }
        let at = linalg::solve_symmetric(&v, &u.transpose(), SOLVE_RESIDUAL_TOL).map_err(|e| {
            Error::Numerical(format!("relation `{}`: {e}", p.rel))
        })?;
        let a = at.transpose();
        if orthogonalize {
            linalg::polar_factor(&a).map_err(|e| {
                Error::Numerical(format!(
                    "relation `{}` ({} edges, {ds}×{dd} map): {e}; disable orthogonalization or use a \
                     non-linear kind for relations with fewer edges than dimensions",
                    p.rel,
                    self.by_rel[r].len()
                ))
            })
        } else {
            Ok(a)
        }
    }

    pub(crate) fn relation_caches(&self, params: &[RelationParams]) -> Vec<RelationCache> {
        params
            .iter()
            .map(|p| {
                let gram = match p.kind {
                    RelationKind::Identity | RelationKind::Translation => None,
                    _ => {
                        let g = p.a.tr_mul(&p.a);
                        let n = g.nrows();
                        let defect = (&g - DMatrix::<f64>::identity(n, n)).abs().max();
                        (defect > ORTHONORMAL_TOL).then_some(g)
                    }
                };
                RelationCache { gram }
            })
            .collect()
    }

    /// Exact minimizer in `q_i` with every other block fixed. Returns `None`
    /// when the system is singular (an isolated unanchored vertex, or negative
    /// weight cancelling the rest), in which case `q_i` should be left as is.
    pub fn update_q(
        &self,
        i: usize,
        q: &[DVector<f64>],
        params: &[RelationParams],
    ) -> Result<Option<DVector<f64>>> {
        self.check_params(params)?;
        self.check_q(q)?;
        let caches = self.relation_caches(params);
        Ok(self.update_q_cached(i, q, params, &caches))
    }

    pub(crate) fn update_q_cached(
        &self,
        i: usize,
        q: &[DVector<f64>],
        params: &[RelationParams],
        caches: &[RelationCache],
    ) -> Option<DVector<f64>> {
        let alpha = self.weights.alpha[i];
        let mut rhs = &self.q_hat[i] * alpha;
        let mut diag = alpha;
        let mut extra: Option<DMatrix<f64>> = None;
        for t in &self.outgoing[i] {
            let p = &params[t.rel];
            rhs += p.pull_forward(&q[t.other]) * t.w + &p.b * t.w;
            diag += t.w;
        }
        for t in &self.incoming[i] {
            let p = &params[t.rel];
            rhs += p.pull_back(&(&q[t.other] - &p.b)) * t.w;
            match &caches[t.rel].gram {
                None => diag += t.w,
                Some(gram) => {
                    let m = extra.get_or_insert_with(|| DMatrix::zeros(self.dims[i], self.dims[i]));
                    *m += gram * t.w;
                }
            }
        }
        match extra {
            None => {
                if diag.abs() < ZERO_DENOMINATOR {
                    None
                } else {
                    Some(rhs / diag)
                }
            }
            Some(mut m) => {
                for d in 0..m.nrows() {
                    m[(d, d)] += diag;
                }
                linalg::solve_symmetric_vec(&m, &rhs, SOLVE_RESIDUAL_TOL).ok()
            }
        }
    }
}

impl RelationParams {
    /// `A q_j` (without the offset), skipping the product for frozen identities.
    pub(crate) fn pull_forward(&self, qj: &DVector<f64>) -> DVector<f64> {
        match self.kind {
            RelationKind::Identity | RelationKind::Translation => qj.clone(),
            _ => &self.a * qj,
        }
    }
}
