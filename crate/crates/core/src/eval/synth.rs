use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::embed::EmbeddingSet;
use crate::engine::derive_seed;
use crate::error::{Error, Result};
use crate::graph::{GraphBuilder, KnowledgeGraph};
use crate::penalty::{RelationKind, RelationParams};

const STREAM_TRUTH: u64 = 1;
const STREAM_PLANT: u64 = 2;
const STREAM_NOISE: u64 = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_vertices: usize,
    pub n_relations: usize,
    pub dim: usize,
    /// Standard deviation of the noise added to the truth to form `q_hat`.
    pub noise_sigma: f64,
    pub seed: u64,
    /// Edges per relation are `round(mean_out_degree · n_vertices)`.
    pub mean_out_degree: f64,
    /// Standard deviation of each translation component.
    pub translation_scale: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_vertices: 500,
            n_relations: 3,
            dim: 10,
            noise_sigma: 0.3,
            seed: 0,
            mean_out_degree: 3.0,
            translation_scale: 1.0,
        }
    }
}

/// A graph whose relations are planted rotations plus translations of a
/// Gaussian ground truth.
#[derive(Clone, Debug)]
pub struct SynthGraph {
    pub graph: KnowledgeGraph,
    pub truth: EmbeddingSet,
    pub q_hat: EmbeddingSet,
    /// Linear parameters `(A = R_r, b = t_r)` that generated each relation.
    pub planted: BTreeMap<String, RelationParams>,
    /// Per relation, the largest squared residual `‖R q_j + t − q_i‖²` kept as an edge.
    pub thresholds: BTreeMap<String, f64>,
}

fn gaussian_vec(rng: &mut impl Rng, d: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(d, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Haar-distributed rotation (determinant +1).
pub(crate) fn random_rotation(rng: &mut impl Rng, d: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for k in 0..d {
        if r[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    if q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    q
}

impl SynthConfig {
    pub fn generate(&self) -> Result<SynthGraph> {
        let n = self.n_vertices;
        let d = self.dim;
        if n < 20 || d < 2 || self.n_relations == 0 {
            return Err(Error::Config(format!(
                "synthetic graph needs n_vertices >= 20, dim >= 2 and at least one relation \
                 (got {n}, {d}, {})",
                self.n_relations
            )));
        }
        let positive = |v: f64| v.is_finite() && v >= 0.0;
        if !positive(self.noise_sigma) || !positive(self.translation_scale) || self.mean_out_degree.is_nan() || self.mean_out_degree <= 0.0 {
            return Err(Error::Config("noise, translation scale and degree must be finite and non-negative".into()));
        }
        let n_edges = (self.mean_out_degree * n as f64).round() as usize;
        if n_edges == 0 || n_edges > n * (n - 1) {
            return Err(Error::Config(format!("cannot place {n_edges} edges among {n} vertices")));
        }

        let width = (n - 1).to_string().len();
        let ids: Vec<String> = (0..n).map(|k| format!("v{k:0width$}")).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, &[STREAM_TRUTH]));
        let truth: Vec<DVector<f64>> = (0..n).map(|_| gaussian_vec(&mut rng, d, 1.0)).collect();

        let mut b = GraphBuilder::new();
        for id in &ids {
            b.vertex(id.clone(), None);
        }
        let mut planted = BTreeMap::new();
        let mut thresholds = BTreeMap::new();
        for r in 0..self.n_relations {
            let name = format!("r{r}");
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, &[STREAM_PLANT, r as u64]));
            let rot = random_rotation(&mut rng, d);
            let t = gaussian_vec(&mut rng, d, self.translation_scale);
            let image: Vec<DVector<f64>> = truth.iter().map(|q| &rot * q + &t).collect();
            let mut cand: Vec<(f64, usize, usize)> = Vec::with_capacity(n * (n - 1));
            for (i, qi) in truth.iter().enumerate() {
                for (j, pj) in image.iter().enumerate() {
                    if i != j {
                        cand.push(((pj - qi).norm_squared(), i, j));
                    }
                }
            }
            let cmp = |a: &(f64, usize, usize), b: &(f64, usize, usize)| {
                a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
            };
            cand.select_nth_unstable_by(n_edges - 1, cmp);
            cand.truncate(n_edges);
            let mut worst = 0.0f64;
            for &(dist, i, j) in &cand {
                b.edge(ids[i].clone(), name.clone(), ids[j].clone());
                worst = worst.max(dist);
            }
            thresholds.insert(name.clone(), worst);
            planted.insert(
                name.clone(),
                RelationParams {
                    rel: name,
                    kind: RelationKind::Linear,
                    a: rot,
                    b: t,
                },
            );
        }
        let (graph, _) = b.build();

        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, &[STREAM_NOISE]));
        let mut truth_set = EmbeddingSet::new();
        let mut q_hat = EmbeddingSet::new();
        for (id, q) in ids.iter().zip(&truth) {
            let noisy = q + gaussian_vec(&mut rng, d, self.noise_sigma);
            truth_set.insert(id.clone(), None, q.clone())?;
            q_hat.insert(id.clone(), None, noisy)?;
        }
        Ok(SynthGraph {
            graph,
            truth: truth_set,
            q_hat,
            planted,
            thresholds,
        })
    }
}

/// [`SynthConfig::generate`] with mean out-degree 3 and unit-scale translations.
pub fn synth_graph(n_vertices: usize, n_relations: usize, dim: usize, noise_sigma: f64, seed: u64) -> Result<SynthGraph> {
    SynthConfig {
        n_vertices,
        n_relations,
        dim,
        noise_sigma,
        seed,
        ..Default::default()
    }
    .generate()
}
