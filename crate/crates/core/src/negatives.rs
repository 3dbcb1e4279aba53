//! Sampling from the negative space: edges `(i, j', r)` absent from the graph,
//! one per positive `(i, j, r)` with the same source and relation.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Edge, KnowledgeGraph, Triple};

/// Rejection draws attempted before enumerating the legal candidates.
const MAX_REJECTION_DRAWS: usize = 32;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum NegativeStrategy {
    /// Any vertex other than the source.
    #[default]
    SameSource,
    /// Only vertices sharing the entity class of the positive's target, when
    /// that target has a class.
    ClassRestricted,
}

impl fmt::Display for NegativeStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NegativeStrategy::SameSource => "same-source",
            NegativeStrategy::ClassRestricted => "class-restricted",
        })
    }
}

impl FromStr for NegativeStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "same-source" => Ok(NegativeStrategy::SameSource),
            "class-restricted" => Ok(NegativeStrategy::ClassRestricted),
            other => Err(Error::Config(format!(
                "unknown negative strategy `{other}` (expected same-source or class-restricted)"
            ))),
        }
    }
}

/// Negative edges, indexed against the graph they were sampled from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NegativeEdgeSet {
    pub edges: Vec<Edge>,
    pub seed: u64,
    pub strategy: NegativeStrategy,
    /// Positives for which no legal negative existed.
    pub skipped: usize,
    /// Source vertices that ran out of negative space, sorted.
    pub saturated: Vec<String>,
}

impl NegativeEdgeSet {
    pub fn empty(seed: u64, strategy: NegativeStrategy) -> Self {
        NegativeEdgeSet {
            edges: Vec::new(),
            seed,
            strategy,
            skipped: 0,
            saturated: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn triples<'a>(&'a self, g: &'a KnowledgeGraph) -> impl Iterator<Item = Triple> + 'a {
        self.edges.iter().map(move |e| g.triple(e))
    }

    /// Writes a `#` header with the sampling metadata followed by one
    /// `src<TAB>rel<TAB>dst` line per negative.
    pub fn save(&self, g: &KnowledgeGraph, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "# seed={}", self.seed).map_err(io)?;
        writeln!(w, "# strategy={}", self.strategy).map_err(io)?;
        writeln!(w, "# skipped={}", self.skipped).map_err(io)?;
        for t in self.triples(g) {
            writeln!(w, "{t}").map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

fn uniform_legal(
    rng: &mut ChaCha8Rng,
    pool: &[usize],
    legal: impl Fn(usize) -> bool,
) -> Option<usize> {
    if pool.is_empty() {
        return None;
    }
    for _ in 0..MAX_REJECTION_DRAWS {
        let cand = pool[rng.random_range(0..pool.len())];
        if legal(cand) {
            return Some(cand);
        }
    }
    let candidates: Vec<usize> = pool.iter().copied().filter(|&c| legal(c)).collect();
    if candidates.is_empty() {
        None
    } else {
        Some(candidates[rng.random_range(0..candidates.len())])
    }
}

/// Draws one negative per in-scope positive edge. `rels = None` means every
/// relation. Within a `(source, relation)` group negatives are drawn without
/// replacement, so the result never contains duplicates and
/// `len() + skipped` equals the number of in-scope positives.
pub fn sample_negative_edges(
    g: &KnowledgeGraph,
    rels: Option<&[String]>,
    seed: u64,
    strategy: NegativeStrategy,
) -> Result<NegativeEdgeSet> {
    let scope: BTreeSet<usize> = match rels {
        None => (0..g.relations().len()).collect(),
        Some(names) => names
            .iter()
            .map(|n| g.require_relation(n))
            .collect::<Result<_>>()?,
    };

    let all: Vec<usize> = (0..g.n_vertices()).collect();
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    if strategy == NegativeStrategy::ClassRestricted {
        for (i, v) in g.vertices().iter().enumerate() {
            if let Some(c) = &v.class {
                by_class.entry(c.as_str()).or_default().push(i);
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = NegativeEdgeSet::empty(seed, strategy);
    let mut saturated = BTreeSet::new();
    let mut in_scope = 0usize;

    for i in 0..g.n_vertices() {
        let out_edges = g.out_edges(i);
        // out_edges are sorted by (rel, dst), so relation groups are contiguous
        let mut start = 0;
        while start < out_edges.len() {
            let rel = g.edges()[out_edges[start]].rel;
            let mut end = start;
            while end < out_edges.len() && g.edges()[out_edges[end]].rel == rel {
                end += 1;
            }
            if scope.contains(&rel) {
                let mut used: HashSet<usize> = HashSet::new();
                for &k in &out_edges[start..end] {
                    in_scope += 1;
                    let pos = g.edges()[k];
                    let pool: &[usize] = match (strategy, &g.vertices()[pos.dst].class) {
                        (NegativeStrategy::ClassRestricted, Some(c)) => &by_class[c.as_str()],
                        _ => &all,
                    };
                    let legal = |j: usize| {
                        j != i && !used.contains(&j) && !g.contains(&Edge { src: i, rel, dst: j })
                    };
                    match uniform_legal(&mut rng, pool, legal) {
                        Some(j) => {
                            used.insert(j);
                            out.edges.push(Edge { src: i, rel, dst: j });
                        }
                        None => {
                            out.skipped += 1;
                            saturated.insert(g.vertices()[i].id.clone());
                        }
                    }
                }
            }
            start = end;
        }
    }

    out.saturated = saturated.into_iter().collect();
    if out.skipped > 0 {
        warn!(
            "negative sampling skipped {} of {} positives ({} saturated sources)",
            out.skipped,
            in_scope,
            out.saturated.len()
        );
    }
    if in_scope > 0 && out.edges.is_empty() {
        return Err(Error::Saturated {
            sources: out.saturated,
        });
    }
    out.edges.sort_unstable();
    Ok(out)
}

/// Reads a negatives file and returns the triples that are positives of `g`.
pub fn check_negatives_file(g: &KnowledgeGraph, path: impl AsRef<Path>) -> Result<Vec<Triple>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut clashes = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            return Err(Error::parse(path, n + 1, "expected 3 tab-separated fields"));
        }
        let t = Triple::new(f[0], f[1], f[2]);
        if g.contains_triple(&t) {
            clashes.push(t);
        }
    }
    Ok(clashes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphBuilder;

    #[test]
    fn forced_choice() {
        let mut b = GraphBuilder::new();
        b.vertex("c", None).edge("a", "R", "b");
        let (g, _) = b.build();
        let neg = sample_negative_edges(&g, None, 1, NegativeStrategy::SameSource).unwrap();
        let triples: Vec<_> = neg.triples(&g).collect();
        assert_eq!(triples, vec![Triple::new("a", "R", "c")]);
    }

    #[test]
    fn complete_bipartite_is_saturated() {
        let mut b = GraphBuilder::new();
        for s in ["a", "b"] {
            for t in ["x", "y"] {
                b.edge(s, "R", t);
            }
        }
        // the other source and the self-loop are the only non-edges
        b.edge("a", "R", "b").edge("b", "R", "a");
        let (g, _) = b.build();
        let err = sample_negative_edges(&g, None, 3, NegativeStrategy::SameSource).unwrap_err();
        match err {
            Error::Saturated { sources } => assert_eq!(sources, vec!["a", "b"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn partial_saturation_skips_and_counts() {
        let mut b = GraphBuilder::new();
        b.edge("a", "R", "b").edge("a", "R", "c").edge("b", "R", "c");
        let (g, _) = b.build();
        // a: targets {b, c}, no candidates left; b: `a` is legal
        let neg = sample_negative_edges(&g, None, 0, NegativeStrategy::SameSource).unwrap();
        assert_eq!(neg.skipped, 2);
        assert_eq!(neg.len(), 1);
        assert_eq!(neg.saturated, vec!["a"]);
    }

    #[test]
    fn class_restricted_stays_in_class() {
        let mut b = GraphBuilder::new();
        for d in ["d1", "d2", "d3", "d4"] {
            b.vertex(d, Some("disease".into()));
        }
        for m in ["m1", "m2", "m3"] {
            b.vertex(m, Some("drug".into()));
        }
        b.edge("m1", "Treats", "d1").edge("m2", "Treats", "d2").edge("m3", "Treats", "d3");
        let (g, _) = b.build();
        for seed in 0..20 {
            let neg =
                sample_negative_edges(&g, None, seed, NegativeStrategy::ClassRestricted).unwrap();
            for e in &neg.edges {
                assert_eq!(g.vertices()[e.dst].class.as_deref(), Some("disease"));
            }
        }
    }

    #[test]
    fn relation_scope() {
        let mut b = GraphBuilder::new();
        b.edge("a", "R", "b").edge("a", "S", "c").vertex("d", None);
        let (g, _) = b.build();
        let neg = sample_negative_edges(&g, Some(&["S".into()]), 5, NegativeStrategy::SameSource)
            .unwrap();
        assert_eq!(neg.len(), 1);
        assert_eq!(g.relations()[neg.edges[0].rel], "S");
        assert!(sample_negative_edges(&g, Some(&["T".into()]), 5, NegativeStrategy::SameSource)
            .is_err());
    }
}
