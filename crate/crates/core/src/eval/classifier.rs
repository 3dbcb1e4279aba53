use std::fmt;
use std::str::FromStr;

use log::warn;
use nalgebra::{DMatrix, DVector};

use super::split::LinkPredSplit;
use crate::embed::EmbeddingSet;
use crate::error::{Error, Result};
use crate::graph::Triple;

/// `[q_src ; q_dst]`. Direction matters: swapping the endpoints swaps the halves.
pub fn pair_features(q: &EmbeddingSet, src: &str, dst: &str) -> Result<DVector<f64>> {
    let get = |id: &str| {
        q.get(id)
            .ok_or_else(|| Error::Eval(format!("no embedding for `{id}`")))
    };
    let (a, b) = (get(src)?, get(dst)?);
    let mut x = DVector::zeros(a.len() + b.len());
    x.rows_mut(0, a.len()).copy_from(a);
    x.rows_mut(a.len(), b.len()).copy_from(b);
    Ok(x)
}

/// What the classifier sees of a pair's features.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FeatureMap {
    /// The concatenation itself.
    #[default]
    Linear,
    /// The concatenation plus all degree-2 monomials of it.
    Quadratic,
}

impl fmt::Display for FeatureMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureMap::Linear => "linear",
            FeatureMap::Quadratic => "quadratic",
        })
    }
}

impl FromStr for FeatureMap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(FeatureMap::Linear),
            "quadratic" => Ok(FeatureMap::Quadratic),
            other => Err(Error::Config(format!(
                "unknown feature map `{other}` (expected linear or quadratic)"
            ))),
        }
    }
}

impl FeatureMap {
    fn expand(self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            FeatureMap::Linear => x.clone(),
            FeatureMap::Quadratic => {
                let n = x.len();
                let mut out = Vec::with_capacity(n + n * (n + 1) / 2);
                out.extend(x.iter());
                for a in 0..n {
                    for b in a..n {
                        out.push(x[a] * x[b]);
                    }
                }
                DVector::from_vec(out)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierConfig {
    /// Ridge penalty on the (standardized) weights; the intercept is free.
    pub l2: f64,
    /// Stop when the largest gradient component falls below this.
    pub tol: f64,
    pub max_iter: usize,
    pub features: FeatureMap,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            l2: 1e-3,
            tol: 1e-8,
            max_iter: 100,
            features: FeatureMap::Linear,
        }
    }
}

/// ℓ2-regularized logistic regression on standardized pair features.
#[derive(Clone, Debug)]
pub struct LinkClassifier {
    features: FeatureMap,
    mean: DVector<f64>,
    scale: DVector<f64>,
    weights: DVector<f64>,
    bias: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn design(q: &EmbeddingSet, pos: &[Triple], neg: &[Triple], map: FeatureMap) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let mut rows = Vec::with_capacity(pos.len() + neg.len());
    let mut labels = Vec::with_capacity(pos.len() + neg.len());
    for (ts, y) in [(pos, 1.0), (neg, 0.0)] {
        for t in ts {
            rows.push(map.expand(&pair_features(q, &t.src, &t.dst)?));
            labels.push(y);
        }
    }
    let width = rows.first().map_or(0, |r| r.len());
    if let Some(bad) = rows.iter().find(|r| r.len() != width) {
        return Err(Error::Eval(format!(
            "pair features have inconsistent lengths ({width} and {})",
            bad.len()
        )));
    }
    let x = DMatrix::from_fn(rows.len(), width, |i, j| rows[i][j]);
    Ok((x, labels))
}

impl LinkClassifier {
    /// Fits by damped Newton iterations; the loss is strictly convex, so this
    /// reaches the same minimizer as plain gradient descent, in a few steps.
    pub fn fit(x: &DMatrix<f64>, y: &[f64], cfg: &ClassifierConfig, features: FeatureMap) -> Result<Self> {
        let (n, p) = x.shape();
        let n_pos = y.iter().filter(|&&v| v > 0.5).count();
        if n == 0 || n_pos == 0 || n_pos == n {
            return Err(Error::Eval(format!(
                "training data must contain both classes ({n_pos} positive of {n})"
            )));
        }
        let mean = DVector::from_fn(p, |j, _| x.column(j).mean());
        let scale = DVector::from_fn(p, |j, _| {
            let s = x.column(j).variance().sqrt();
            if s > 1e-12 {
                s
            } else {
                1.0
            }
        });
        // standardized design with a trailing column of ones
        let z = DMatrix::from_fn(n, p + 1, |i, j| {
            if j == p {
                1.0
            } else {
                (x[(i, j)] - mean[j]) / scale[j]
            }
        });
        let yv = DVector::from_column_slice(y);
        let reg = DVector::from_fn(p + 1, |j, _| if j == p { 0.0 } else { cfg.l2 });
        let nf = n as f64;

        let loss = |w: &DVector<f64>| -> f64 {
            let s = &z * w;
            let data: f64 = s.iter().zip(y).map(|(&si, &yi)| softplus(si) - yi * si).sum();
            data / nf + 0.5 * w.iter().zip(reg.iter()).map(|(wi, ri)| ri * wi * wi).sum::<f64>()
        };

        let mut w = DVector::zeros(p + 1);
        let mut f = loss(&w);
        let mut converged = false;
        let mut iterations = 0;
        for it in 0..cfg.max_iter {
            let s = &z * &w;
            let prob = s.map(sigmoid);
            let grad = z.tr_mul(&(&prob - &yv)) / nf + reg.component_mul(&w);
            if grad.amax() <= cfg.tol {
                converged = true;
                iterations = it;
                break;
            }
            let curv = prob.map(|pi| (pi * (1.0 - pi)).max(1e-12) / nf);
            let mut h = z.tr_mul(&DMatrix::from_fn(n, p + 1, |i, j| z[(i, j)] * curv[i]));
            for j in 0..=p {
                h[(j, j)] += reg[j];
            }
            let step = match h.clone().cholesky() {
                Some(c) => c.solve(&grad),
                None => h
                    .lu()
                    .solve(&grad)
                    .ok_or_else(|| Error::Numerical("singular Hessian in classifier fit".into()))?,
            };
            let mut t = 1.0;
            loop {
                let cand = &w - &step * t;
                let fc = loss(&cand);
                if fc <= f - 1e-4 * t * grad.dot(&step) || t < 1e-10 {
                    w = cand;
                    f = fc;
                    break;
                }
                t *= 0.5;
            }
            iterations = it + 1;
        }
        if !converged {
            warn!("classifier stopped after {iterations} iterations above tolerance {:e}", cfg.tol);
        }
        Ok(LinkClassifier {
            features,
            mean,
            scale,
            weights: w.rows(0, p).into_owned(),
            bias: w[p],
            iterations,
            converged,
        })
    }

    pub fn probability(&self, q: &EmbeddingSet, t: &Triple) -> Result<f64> {
        let x = self.features.expand(&pair_features(q, &t.src, &t.dst)?);
        if x.len() != self.weights.len() {
            return Err(Error::Eval(format!(
                "pair `{}`→`{}` has {} features, the classifier expects {}",
                t.src,
                t.dst,
                x.len(),
                self.weights.len()
            )));
        }
        let zx = (x - &self.mean).component_div(&self.scale);
        Ok(sigmoid(self.weights.dot(&zx) + self.bias))
    }

    pub fn predict(&self, q: &EmbeddingSet, pairs: &[Triple]) -> Result<Vec<bool>> {
        pairs
            .iter()
            .map(|t| Ok(self.probability(q, t)? >= 0.5))
            .collect()
    }
}

/// Fits on the split's training edges and non-edges.
pub fn train_link_classifier(split: &LinkPredSplit, q: &EmbeddingSet, cfg: &ClassifierConfig) -> Result<LinkClassifier> {
    let (x, y) = design(q, &split.train_pos, &split.train_neg, cfg.features)?;
    LinkClassifier::fit(&x, &y, cfg, cfg.features)
}

/// Fraction of test edges predicted present plus test non-edges predicted absent.
pub fn accuracy(clf: &LinkClassifier, q: &EmbeddingSet, pos: &[Triple], neg: &[Triple]) -> Result<f64> {
    let n = pos.len() + neg.len();
    if n == 0 {
        return Err(Error::Eval("no test pairs".into()));
    }
    let hits = clf.predict(q, pos)?.iter().filter(|&&p| p).count()
        + clf.predict(q, neg)?.iter().filter(|&&p| !p).count();
    Ok(hits as f64 / n as f64)
}
