use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::engine::{derive_seed, STREAM_SPLIT, STREAM_SPLIT_NEGATIVES};
use crate::error::{Error, Result};
use crate::graph::{KnowledgeGraph, Triple};
use crate::negatives::{sample_negative_edges, NegativeStrategy};

pub const TRAIN_FRACTION: f64 = 0.7;
/// Smallest relation a split is made for.
pub const MIN_SPLIT_EDGES: usize = 10;

/// Train/test partition of one relation's edges by source vertex, with one
/// non-edge per edge from the same source.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinkPredSplit {
    pub relation: String,
    pub train_pos: Vec<Triple>,
    pub test_pos: Vec<Triple>,
    pub train_neg: Vec<Triple>,
    pub test_neg: Vec<Triple>,
    pub train_vertices: BTreeSet<String>,
    pub test_vertices: BTreeSet<String>,
    pub seed: u64,
}

impl LinkPredSplit {
    pub fn n_train(&self) -> usize {
        self.train_pos.len() + self.train_neg.len()
    }

    pub fn n_test(&self) -> usize {
        self.test_pos.len() + self.test_neg.len()
    }
}

/// Splits relation `r`'s source vertices 70/30 and assigns each edge to the side
/// of its source. Negatives come from the same sources, never coincide with an
/// edge of `r`, and match the positives source by source.
pub fn make_linkpred_split(
    g: &KnowledgeGraph,
    r: &str,
    strategy: NegativeStrategy,
    seed: u64,
) -> Result<LinkPredSplit> {
    let ri = g.require_relation(r)?;
    let n_edges = g.relation_edge_count(ri);
    let mut sources: Vec<usize> = g
        .edges_of_relation(ri)
        .map(|e| e.src)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if n_edges < MIN_SPLIT_EDGES || sources.len() < 2 {
        return Err(Error::Eval(format!(
            "relation `{r}` has {n_edges} edges from {} sources; a split needs at least \
             {MIN_SPLIT_EDGES} edges and 2 sources",
            sources.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[STREAM_SPLIT]));
    sources.shuffle(&mut rng);
    let n_train = ((sources.len() as f64 * TRAIN_FRACTION).round() as usize).clamp(1, sources.len() - 1);
    let is_train: BTreeMap<usize, bool> = sources
        .iter()
        .enumerate()
        .map(|(k, &s)| (s, k < n_train))
        .collect();

    let rels = [r.to_string()];
    let neg = sample_negative_edges(
        g,
        Some(&rels),
        derive_seed(seed, &[STREAM_SPLIT_NEGATIVES]),
        strategy,
    )?;
    if neg.skipped > 0 {
        return Err(Error::Saturated {
            sources: neg.saturated,
        });
    }

    let vid = |i: usize| g.vertices()[i].id.clone();
    let mut split = LinkPredSplit {
        relation: r.to_string(),
        train_pos: Vec::new(),
        test_pos: Vec::new(),
        train_neg: Vec::new(),
        test_neg: Vec::new(),
        train_vertices: BTreeSet::new(),
        test_vertices: BTreeSet::new(),
        seed,
    };
    for (&s, &train) in &is_train {
        if train {
            split.train_vertices.insert(vid(s));
        } else {
            split.test_vertices.insert(vid(s));
        }
    }
    for e in g.edges_of_relation(ri) {
        let side = if is_train[&e.src] { &mut split.train_pos } else { &mut split.test_pos };
        side.push(g.triple(e));
    }
    for e in &neg.edges {
        let side = if is_train[&e.src] { &mut split.train_neg } else { &mut split.test_neg };
        side.push(g.triple(e));
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphBuilder;

    fn fan_graph(n_src: usize, per_src: usize, n_dst: usize) -> KnowledgeGraph {
        let mut b = GraphBuilder::new();
        for s in 0..n_src {
            for k in 0..per_src {
                b.edge(format!("s{s:02}"), "R", format!("d{:02}", (s + k) % n_dst));
            }
        }
        b.edge("s00", "Other", "d00");
        b.build().0
    }

    fn per_source(ts: &[Triple]) -> BTreeMap<String, usize> {
        let mut m = BTreeMap::new();
        for t in ts {
            *m.entry(t.src.clone()).or_default() += 1;
        }
        m
    }

    #[test]
    fn ten_edges_balanced() {
        let g = fan_graph(10, 1, 20);
        let s = make_linkpred_split(&g, "R", NegativeStrategy::SameSource, 1).unwrap();
        assert_eq!(s.train_pos.len() + s.test_pos.len(), 10);
        assert_eq!(s.train_neg.len(), s.train_pos.len());
        assert_eq!(s.test_neg.len(), s.test_pos.len());
        assert_eq!(s.train_vertices.len(), 7);
        assert_eq!(s.test_vertices.len(), 3);
    }

    #[test]
    fn split_invariants() {
        let g = fan_graph(13, 3, 11);
        let s = make_linkpred_split(&g, "R", NegativeStrategy::SameSource, 5).unwrap();
        assert!(s.train_vertices.is_disjoint(&s.test_vertices));
        for t in &s.train_pos {
            assert!(s.train_vertices.contains(&t.src));
        }
        for t in &s.test_pos {
            assert!(s.test_vertices.contains(&t.src));
        }
        for t in s.train_neg.iter().chain(&s.test_neg) {
            assert!(!g.contains_triple(t));
            assert_eq!(t.rel, "R");
        }
        assert_eq!(per_source(&s.train_pos), per_source(&s.train_neg));
        assert_eq!(per_source(&s.test_pos), per_source(&s.test_neg));
    }

    #[test]
    fn deterministic() {
        let g = fan_graph(12, 2, 15);
        let a = make_linkpred_split(&g, "R", NegativeStrategy::SameSource, 9).unwrap();
        let b = make_linkpred_split(&g, "R", NegativeStrategy::SameSource, 9).unwrap();
        assert_eq!(a, b);
        let c = make_linkpred_split(&g, "R", NegativeStrategy::SameSource, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn too_small() {
        let g = fan_graph(9, 1, 20);
        let err = make_linkpred_split(&g, "R", NegativeStrategy::SameSource, 0).unwrap_err();
        assert!(matches!(err, Error::Eval(_)));
        assert!(matches!(
            make_linkpred_split(&g, "Nope", NegativeStrategy::SameSource, 0),
            Err(Error::UnknownRelation { .. })
        ));
    }

    #[test]
    fn saturated_sources_are_listed() {
        // s00 links to every other vertex, so it has no negative space
        let mut b = GraphBuilder::new();
        for s in 0..12 {
            b.edge(format!("s{s:02}"), "R", format!("d{s:02}"));
        }
        let (g0, _) = b.build();
        let mut b = GraphBuilder::new();
        for t in g0.triples() {
            b.edge(t.src, t.rel, t.dst);
        }
        for v in g0.vertices() {
            if v.id != "s00" {
                b.edge("s00", "R", v.id.clone());
            }
        }
        let (g, _) = b.build();
        match make_linkpred_split(&g, "R", NegativeStrategy::SameSource, 0) {
            Err(Error::Saturated { sources }) => assert_eq!(sources, vec!["s00".to_string()]),
            other => panic!("expected saturation, got {other:?}"),
        }
    }
}
