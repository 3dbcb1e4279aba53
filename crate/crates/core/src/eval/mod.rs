//! Evaluation protocols: leave-one-relation-out link prediction, word
//! similarity, vector-offset analogies, and a synthetic planted-relation graph
//! with known ground truth.

mod classifier;
mod lexical;
mod linkpred;
mod split;
mod synth;

use std::fmt;

use rayon::prelude::*;

pub use classifier::{
    accuracy, pair_features, train_link_classifier, ClassifierConfig, FeatureMap, LinkClassifier,
};
pub use lexical::{analogy_eval, load_analogies, load_similarity, spearman, word_similarity};
pub use linkpred::{eval_linkpred, format_linkpred_table, LinkPredConfig, LinkPredModel, LinkPredRow};
pub use split::{make_linkpred_split, LinkPredSplit, MIN_SPLIT_EDGES, TRAIN_FRACTION};
pub use synth::{synth_graph, SynthConfig, SynthGraph};

use crate::error::{Error, Result};

/// A metric with its spread over repeats.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub metric: String,
    pub value: f64,
    /// Sample standard deviation over repeats; 0 for a single run.
    pub dispersion: f64,
    pub n_train: usize,
    pub n_test: usize,
    /// Inputs left out because a word was missing or had a zero vector.
    pub dropped: usize,
    pub seeds: Vec<u64>,
}

impl EvalReport {
    pub fn single(metric: impl Into<String>, value: f64, n_train: usize, n_test: usize, seed: u64) -> Self {
        EvalReport {
            metric: metric.into(),
            value,
            dispersion: 0.0,
            n_train,
            n_test,
            dropped: 0,
            seeds: vec![seed],
        }
    }

    /// `key=value` lines, one field per line.
    pub fn to_kv(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        format!(
            "metric={}\nvalue={:.16e}\ndispersion={:.16e}\nn_train={}\nn_test={}\ndropped={}\nseeds={}\n",
            self.metric,
            self.value,
            self.dispersion,
            self.n_train,
            self.n_test,
            self.dropped,
            seeds.join(",")
        )
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {:.4} ± {:.4}", self.metric, self.value, self.dispersion)?;
        write!(f, " (train {}, test {}", self.n_train, self.n_test)?;
        if self.dropped > 0 {
            write!(f, ", dropped {}", self.dropped)?;
        }
        write!(f, ", {} run{})", self.seeds.len(), if self.seeds.len() == 1 { "" } else { "s" })
    }
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Runs `task` for seeds `base_seed..base_seed + n_repeats` (in parallel, merged
/// in seed order) and reports mean ± sample standard deviation. Train/test
/// sizes and drop counts are taken from the first run.
pub fn repeat_eval<F>(task: F, n_repeats: usize, base_seed: u64) -> Result<EvalReport>
where
    F: Fn(u64) -> Result<EvalReport> + Sync,
{
    if n_repeats == 0 {
        return Err(Error::Config("n_repeats must be >= 1".into()));
    }
    let seeds: Vec<u64> = (0..n_repeats as u64).map(|k| base_seed.wrapping_add(k)).collect();
    let runs: Vec<EvalReport> = seeds.par_iter().map(|&s| task(s)).collect::<Result<_>>()?;
    let values: Vec<f64> = runs.iter().map(|r| r.value).collect();
    let (value, dispersion) = mean_std(&values);
    let first = &runs[0];
    Ok(EvalReport {
        metric: first.metric.clone(),
        value,
        dispersion,
        n_train: first.n_train,
        n_test: first.n_test,
        dropped: first.dropped,
        seeds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[0.8, 0.9, 1.0]);
        assert!((m - 0.9).abs() < 1e-15);
        assert!((s - 0.1).abs() < 1e-15);
    }

    #[test]
    fn single_repeat_has_no_dispersion() {
        let r = repeat_eval(|s| Ok(EvalReport::single("acc", 0.5 + s as f64, 1, 1, s)), 1, 7).unwrap();
        assert_eq!(r.dispersion, 0.0);
        assert_eq!(r.seeds, vec![7]);
        assert_eq!(r.value, 7.5);
    }

    #[test]
    fn constant_metric_has_no_dispersion() {
        let r = repeat_eval(|s| Ok(EvalReport::single("acc", 0.75, 1, 1, s)), 5, 0).unwrap();
        assert_eq!(r.dispersion, 0.0);
        assert_eq!(r.seeds, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn repeats_in_seed_order() {
        let r = repeat_eval(|s| Ok(EvalReport::single("x", s as f64, 0, 0, s)), 3, 10).unwrap();
        assert_eq!(r.value, 11.0);
        assert_eq!(r.dispersion, 1.0);
        assert!(repeat_eval(|s| Ok(EvalReport::single("x", 0.0, 0, 0, s)), 0, 0).is_err());
    }

    #[test]
    fn kv_block() {
        let mut r = EvalReport::single("spearman", 0.5, 0, 10, 3);
        r.dropped = 2;
        let kv = r.to_kv();
        assert!(kv.contains("metric=spearman\n"));
        assert!(kv.contains("dropped=2\n"));
        assert!(kv.contains("seeds=3\n"));
        assert_eq!(r.to_string(), "spearman: 0.5000 ± 0.0000 (train 0, test 10, dropped 2, 1 run)");
    }
}
