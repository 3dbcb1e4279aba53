use std::fmt;
use std::str::FromStr;

use log::info;

use super::classifier::{accuracy, train_link_classifier, ClassifierConfig};
use super::split::make_linkpred_split;
use super::{repeat_eval, EvalReport};
use crate::embed::EmbeddingSet;
use crate::engine::{retrofit, RetrofitConfig};
use crate::error::{Error, Result};
use crate::graph::KnowledgeGraph;
use crate::negatives::NegativeStrategy;
use crate::penalty::RelationKind;

/// Which embeddings the classifier is trained on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinkPredModel {
    /// The distributional embeddings as given.
    None,
    /// Retrofitted with every relation of this kind.
    Retrofit(RelationKind),
}

impl fmt::Display for LinkPredModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinkPredModel::None => f.write_str("none"),
            LinkPredModel::Retrofit(k) => write!(f, "{k}"),
        }
    }
}

impl FromStr for LinkPredModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "none" {
            Ok(LinkPredModel::None)
        } else {
            Ok(LinkPredModel::Retrofit(s.parse()?))
        }
    }
}

#[derive(Clone, Debug)]
pub struct LinkPredConfig {
    /// The held-out relation.
    pub relation: String,
    pub models: Vec<LinkPredModel>,
    pub n_repeats: usize,
    pub base_seed: u64,
    /// Base settings for retrofitting; the model's kind replaces the relation
    /// kinds, and each repeat uses its own seed.
    pub retrofit: RetrofitConfig,
    pub classifier: ClassifierConfig,
    pub neg_strategy: NegativeStrategy,
}

impl LinkPredConfig {
    pub fn new(relation: impl Into<String>) -> Self {
        LinkPredConfig {
            relation: relation.into(),
            models: vec![
                LinkPredModel::None,
                LinkPredModel::Retrofit(RelationKind::Identity),
                LinkPredModel::Retrofit(RelationKind::Linear),
            ],
            n_repeats: 3,
            base_seed: 0,
            retrofit: RetrofitConfig::default(),
            classifier: ClassifierConfig::default(),
            neg_strategy: NegativeStrategy::SameSource,
        }
    }

    /// Retrofit settings for one model and seed. Neural runs need negatives; if
    /// the base config has none they get the neural default `beta_neg = 1`.
    pub fn retrofit_config(&self, kind: RelationKind, seed: u64) -> RetrofitConfig {
        let mut cfg = self.retrofit.clone();
        cfg.default_kind = kind;
        cfg.kind_by_relation.clear();
        cfg.seed = seed;
        if kind == RelationKind::Neural && cfg.beta_neg == 0.0 {
            cfg.beta_neg = RetrofitConfig::for_kind(kind).beta_neg;
        }
        cfg
    }
}

#[derive(Clone, Debug)]
pub struct LinkPredRow {
    pub model: LinkPredModel,
    pub report: EvalReport,
}

/// Leave-one-relation-out link prediction: for each model and repeat, retrofit
/// on the graph without the held-out relation, split that relation's edges by
/// source, and score a classifier trained on the resulting embeddings.
pub fn eval_linkpred(g: &KnowledgeGraph, q_hat: &EmbeddingSet, cfg: &LinkPredConfig) -> Result<Vec<LinkPredRow>> {
    let held_out = g.remove_relation(&cfg.relation)?;
    let metric = format!("accuracy[logistic-{}]", cfg.classifier.features);
    let mut rows = Vec::with_capacity(cfg.models.len());
    for &model in &cfg.models {
        let task = |seed: u64| -> Result<EvalReport> {
            let split = make_linkpred_split(g, &cfg.relation, cfg.neg_strategy, seed)?;
            let retrofitted;
            let q = match model {
                LinkPredModel::None => q_hat,
                LinkPredModel::Retrofit(kind) => {
                    let res = retrofit(&held_out, q_hat, &cfg.retrofit_config(kind, seed))?;
                    info!(
                        "{model} seed {seed}: {} sweeps, converged {}",
                        res.sweeps_run, res.converged
                    );
                    retrofitted = res.embeddings;
                    &retrofitted
                }
            };
            let clf = train_link_classifier(&split, q, &cfg.classifier)?;
            let acc = accuracy(&clf, q, &split.test_pos, &split.test_neg)?;
            Ok(EvalReport::single(metric.clone(), acc, split.n_train(), split.n_test(), seed))
        };
        let report = repeat_eval(task, cfg.n_repeats, cfg.base_seed)?;
        rows.push(LinkPredRow { model, report });
    }
    Ok(rows)
}

/// `model  mean  std  n_train/n_test` table.
pub fn format_linkpred_table(relation: &str, rows: &[LinkPredRow]) -> String {
    let mut out = format!("relation\t{relation}\nmodel\taccuracy\tstd\ttrain/test\n");
    for r in rows {
        out.push_str(&format!(
            "{}\t{:.2}\t{:.2}\t{}/{}\n",
            r.model,
            100.0 * r.report.value,
            100.0 * r.report.dispersion,
            r.report.n_train,
            r.report.n_test
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::synth_graph;

    #[test]
    fn model_names() {
        assert_eq!("none".parse::<LinkPredModel>().unwrap(), LinkPredModel::None);
        assert_eq!(
            "linear".parse::<LinkPredModel>().unwrap(),
            LinkPredModel::Retrofit(RelationKind::Linear)
        );
        assert!("forest".parse::<LinkPredModel>().is_err());
        assert_eq!(LinkPredModel::Retrofit(RelationKind::Identity).to_string(), "identity");
    }

    #[test]
    fn rows_per_model() {
        let s = synth_graph(60, 2, 3, 0.2, 1).unwrap();
        let mut cfg = LinkPredConfig::new("r1");
        cfg.n_repeats = 2;
        cfg.retrofit.max_sweeps = 5;
        let rows = eval_linkpred(&s.graph, &s.q_hat, &cfg).unwrap();
        assert_eq!(rows.len(), 3);
        for r in &rows {
            assert!((0.0..=1.0).contains(&r.report.value));
            assert_eq!(r.report.seeds, vec![0, 1]);
            assert_eq!(r.report.n_test % 2, 0);
        }
        let table = format_linkpred_table("r1", &rows);
        assert!(table.contains("\nnone\t"));
        assert!(table.contains("\nlinear\t"));
    }

    #[test]
    fn unknown_relation() {
        let s = synth_graph(30, 1, 2, 0.2, 1).unwrap();
        let err = eval_linkpred(&s.graph, &s.q_hat, &LinkPredConfig::new("zz")).unwrap_err();
        assert!(err.to_string().contains("available: r0"), "{err}");
    }
}
