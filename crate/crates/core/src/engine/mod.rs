//! Minimization of the retrofitting objective
//!
//! ```text
//! Ψ(Q) = Σ_i α_i ‖q_i − q̂_i‖²
//!      + Σ_{(i,j,r) ∈ E}  β_ijr f_r(q_i, q_j)
//!      − Σ_{(i,j,r) ∈ E⁻} β_ijr f_r(q_i, q_j)
//!      + λ Σ_r ‖A_r‖²_F
//! ```
//!
//! Identity, translation and linear relations are solved by exact block
//! coordinate descent ([`retrofit_closed_form`]); neural relations by
//! mini-batch SGD ([`retrofit_sgd`]).

mod closed_form;
mod problem;
mod sgd;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

pub use closed_form::retrofit_closed_form;
pub use problem::{EdgeWeights, RetrofitProblem};
pub use sgd::retrofit_sgd;

use crate::embed::EmbeddingSet;
use crate::error::{Error, Result};
use crate::graph::KnowledgeGraph;
use crate::negatives::NegativeStrategy;
use crate::penalty::{RelationKind, RelationParams};

/// Floor added to `λ` in the `A`-update normal equations.
pub const MIN_LAMBDA: f64 = 1e-9;
/// Objectives below this are treated as diverging to −∞.
pub const UNBOUNDED_OBJECTIVE: f64 = -1e12;
/// Denominators smaller than this in magnitude are treated as zero.
pub const ZERO_DENOMINATOR: f64 = 1e-12;
/// Allowed relative residual of the `A`-update linear solve.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            learning_rate: 0.01,
            epochs: 50,
            batch_size: 128,
        }
    }
}

/// How the vertex block is swept.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum UpdateMode {
    /// In place, in sorted vertex order.
    #[default]
    GaussSeidel,
    /// Every vertex from the previous sweep's values; runs in parallel.
    Jacobi,
}

impl fmt::Display for UpdateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UpdateMode::GaussSeidel => "gauss-seidel",
            UpdateMode::Jacobi => "jacobi",
        })
    }
}

impl FromStr for UpdateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gauss-seidel" => Ok(UpdateMode::GaussSeidel),
            "jacobi" => Ok(UpdateMode::Jacobi),
            other => Err(Error::Config(format!("unknown update mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RetrofitConfig {
    /// Anchor strength for vertices with distributional data.
    pub alpha: f64,
    pub beta_pos: f64,
    pub beta_neg: f64,
    pub lambda: f64,
    /// Kind for relations not listed in `kind_by_relation`.
    pub default_kind: RelationKind,
    pub kind_by_relation: BTreeMap<String, RelationKind>,
    pub max_sweeps: usize,
    /// Relative objective change below which a run counts as converged.
    pub tol: f64,
    pub seed: u64,
    pub sgd: SgdConfig,
    /// Project linear `A` onto the nearest (semi-)orthogonal matrix after each update.
    pub orthogonalize: bool,
    /// When false, linear `A` stays at its initial value.
    pub update_matrices: bool,
    pub update_mode: UpdateMode,
    pub neg_strategy: NegativeStrategy,
    pub threads: usize,
}

impl Default for RetrofitConfig {
    fn default() -> Self {
        RetrofitConfig {
            alpha: 1.0,
            beta_pos: 1.0,
            beta_neg: 0.0,
            lambda: 0.0,
            default_kind: RelationKind::Linear,
            kind_by_relation: BTreeMap::new(),
            max_sweeps: 100,
            tol: 1e-6,
            seed: 0,
            sgd: SgdConfig::default(),
            orthogonalize: true,
            update_matrices: true,
            update_mode: UpdateMode::GaussSeidel,
            neg_strategy: NegativeStrategy::SameSource,
            threads: 1,
        }
    }
}

impl RetrofitConfig {
    /// Defaults for a run where every relation is `kind`. Neural runs sample as
    /// many negatives as positives with equal weight.
    pub fn for_kind(kind: RelationKind) -> Self {
        RetrofitConfig {
            default_kind: kind,
            beta_neg: if kind == RelationKind::Neural { 1.0 } else { 0.0 },
            ..Self::default()
        }
    }

    pub fn kind_for(&self, rel: &str) -> RelationKind {
        self.kind_by_relation
            .get(rel)
            .copied()
            .unwrap_or(self.default_kind)
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("alpha", self.alpha),
            ("beta_pos", self.beta_pos),
            ("beta_neg", self.beta_neg),
            ("lambda", self.lambda),
            ("tol", self.tol),
            ("sgd.learning_rate", self.sgd.learning_rate),
        ];
        for (name, v) in nonneg {
            if v.is_nan() || v < 0.0 || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.max_sweeps == 0 {
            return Err(Error::Config("max_sweeps must be >= 1".into()));
        }
        if self.threads == 0 {
            return Err(Error::Config("threads must be >= 1".into()));
        }
        if self.sgd.batch_size == 0 {
            return Err(Error::Config("sgd.batch_size must be >= 1".into()));
        }
        Ok(())
    }

    fn thread_pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker threads: {e}")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ObjectiveBreakdown {
    pub anchor_term: f64,
    pub positive_term: f64,
    /// Weighted penalty over negative edges, reported as a magnitude: it enters
    /// `total` with a minus sign.
    pub negative_term: f64,
    pub regularizer_term: f64,
    pub total: f64,
}

impl ObjectiveBreakdown {
    pub fn new(anchor: f64, positive: f64, negative: f64, regularizer: f64) -> Self {
        ObjectiveBreakdown {
            anchor_term: anchor,
            positive_term: positive,
            negative_term: negative,
            regularizer_term: regularizer,
            total: anchor + positive - negative + regularizer,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.total.is_finite()
    }
}

#[derive(Clone, Debug)]
pub struct RetrofitResult {
    pub embeddings: EmbeddingSet,
    /// Keyed by relation name.
    pub params: BTreeMap<String, RelationParams>,
    /// Objective before the first sweep (or epoch).
    pub initial: ObjectiveBreakdown,
    /// Objective after every sweep (or epoch).
    pub trace: Vec<ObjectiveBreakdown>,
    pub converged: bool,
    pub sweeps_run: usize,
    /// Vertex updates skipped because their denominator vanished.
    pub skipped_updates: usize,
}

impl RetrofitResult {
    pub fn final_objective(&self) -> ObjectiveBreakdown {
        self.trace.last().copied().unwrap_or(self.initial)
    }

    /// `sweep  anchor  positive  negative  regularizer  total`, sweep 0 being
    /// the starting point.
    pub fn save_trace(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "sweep\tanchor\tpositive\tnegative\tregularizer\ttotal").map_err(io)?;
        for (k, b) in std::iter::once(&self.initial).chain(&self.trace).enumerate() {
            writeln!(
                w,
                "{k}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}",
                b.anchor_term, b.positive_term, b.negative_term, b.regularizer_term, b.total
            )
            .map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// `|t_k − t_{k−1}| ≤ tol · max(1, |t_{k−1}|)` on the last two totals. Traces
/// shorter than two entries have not converged.
pub fn converged(totals: &[f64], tol: f64) -> bool {
    match totals {
        [.., prev, last] => (last - prev).abs() <= tol * prev.abs().max(1.0),
        _ => false,
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent child seed for a numbered stream of a run.
pub fn derive_seed(seed: u64, stream: &[u64]) -> u64 {
    stream
        .iter()
        .fold(splitmix64(seed), |acc, &s| splitmix64(acc ^ splitmix64(s)))
}

pub(crate) const STREAM_NEGATIVES: u64 = 1;
pub(crate) const STREAM_INIT: u64 = 2;
pub(crate) const STREAM_SHUFFLE: u64 = 3;
pub(crate) const STREAM_SPLIT: u64 = 4;
pub(crate) const STREAM_SPLIT_NEGATIVES: u64 = 5;

/// Dispatches on relation kinds: all-neural runs use SGD, anything else the
/// closed-form solver. Mixing neural with other kinds is not supported.
pub fn retrofit(g: &KnowledgeGraph, q_hat: &EmbeddingSet, cfg: &RetrofitConfig) -> Result<RetrofitResult> {
    let kinds: Vec<RelationKind> = g.relations().iter().map(|r| cfg.kind_for(r)).collect();
    let neural = kinds.iter().filter(|k| **k == RelationKind::Neural).count();
    if neural == 0 {
        retrofit_closed_form(g, q_hat, cfg)
    } else if neural == kinds.len() {
        retrofit_sgd(g, q_hat, cfg)
    } else {
        Err(Error::Config(
            "neural relations cannot be mixed with closed-form kinds in one run".into(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convergence_rule() {
        assert!(converged(&[10.0, 10.0], 1e-6));
        assert!(!converged(&[10.0, 9.0], 1e-6));
        assert!(converged(&[0.0, 0.0], 1e-6));
        assert!(!converged(&[5.0], 1e-6));
        // absolute floor of 1 below unit magnitude
        assert!(converged(&[1e-3, 1e-3 + 5e-7], 1e-6));
    }

    #[test]
    fn derived_seeds_differ_by_stream() {
        let a = derive_seed(7, &[STREAM_NEGATIVES, 1]);
        let b = derive_seed(7, &[STREAM_NEGATIVES, 2]);
        let c = derive_seed(8, &[STREAM_NEGATIVES, 1]);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_seed(7, &[STREAM_NEGATIVES, 1]));
    }

    #[test]
    fn validation() {
        let mut c = RetrofitConfig::default();
        assert!(c.validate().is_ok());
        c.alpha = -1.0;
        assert!(c.validate().is_err());
        let c = RetrofitConfig {
            max_sweeps: 0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn breakdown_total() {
        let b = ObjectiveBreakdown::new(1.0, 2.0, 0.5, 3.0);
        assert_eq!(b.total, 5.5);
    }
}
