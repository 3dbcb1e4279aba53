//! Typed, directed knowledge graph and its tab-separated edge-list format.
//!
//! Vertices and relations are kept in sorted order so that indices double as
//! a reproducible iteration order for the optimizers downstream.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vertex {
    pub id: String,
    pub class: Option<String>,
}

/// An edge by index: `src` and `dst` index [`KnowledgeGraph::vertices`], `rel`
/// indexes [`KnowledgeGraph::relations`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub src: usize,
    pub rel: usize,
    pub dst: usize,
}

/// An edge by name, independent of any particular graph's indexing.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub src: String,
    pub rel: String,
    pub dst: String,
}

impl Triple {
    pub fn new(src: impl Into<String>, rel: impl Into<String>, dst: impl Into<String>) -> Self {
        Triple {
            src: src.into(),
            rel: rel.into(),
            dst: dst.into(),
        }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{}", self.src, self.rel, self.dst)
    }
}

/// What was dropped while building a graph.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub duplicates: usize,
    pub self_loops: usize,
}

#[derive(Clone, Debug)]
pub struct KnowledgeGraph {
    vertices: Vec<Vertex>,
    index: HashMap<String, usize>,
    relations: Vec<String>,
    edges: Vec<Edge>,
    edge_set: HashSet<Edge>,
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
    by_rel: Vec<Vec<usize>>,
}

/// Accumulates vertices and triples; duplicates and self-loops are dropped at
/// [`GraphBuilder::build`] time.
#[derive(Default)]
pub struct GraphBuilder {
    classes: BTreeMap<String, Option<String>>,
    triples: Vec<Triple>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vertex(&mut self, id: impl Into<String>, class: Option<String>) -> &mut Self {
        let id = id.into();
        match self.classes.get_mut(&id) {
            Some(slot) => {
                if class.is_some() {
                    *slot = class;
                }
            }
            None => {
                self.classes.insert(id, class);
            }
        }
        self
    }

    pub fn edge(
        &mut self,
        src: impl Into<String>,
        rel: impl Into<String>,
        dst: impl Into<String>,
    ) -> &mut Self {
        self.triples.push(Triple::new(src, rel, dst));
        self
    }

    pub fn build(self) -> (KnowledgeGraph, LoadReport) {
        let GraphBuilder {
            mut classes,
            triples,
        } = self;
        let mut report = LoadReport::default();
        let mut seen = HashSet::new();
        let mut kept = Vec::with_capacity(triples.len());
        for t in triples {
            if t.src == t.dst {
                warn!("dropping self-loop {}", t);
                report.self_loops += 1;
                continue;
            }
            if !seen.insert(t.clone()) {
                report.duplicates += 1;
                continue;
            }
            classes.entry(t.src.clone()).or_insert(None);
            classes.entry(t.dst.clone()).or_insert(None);
            kept.push(t);
        }
        let vertices: Vec<Vertex> = classes
            .into_iter()
            .map(|(id, class)| Vertex { id, class })
            .collect();
        let relations: Vec<String> = kept
            .iter()
            .map(|t| t.rel.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: HashMap<String, usize> = vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (v.id.clone(), i))
            .collect();
        let rel_index: HashMap<&str, usize> = relations
            .iter()
            .enumerate()
            .map(|(i, r)| (r.as_str(), i))
            .collect();
        let edges: Vec<Edge> = kept
            .iter()
            .map(|t| Edge {
                src: index[&t.src],
                rel: rel_index[t.rel.as_str()],
                dst: index[&t.dst],
            })
            .collect();
        (
            KnowledgeGraph::from_indexed(vertices, index, relations, edges),
            report,
        )
    }
}

impl KnowledgeGraph {
    fn from_indexed(
        vertices: Vec<Vertex>,
        index: HashMap<String, usize>,
        relations: Vec<String>,
        mut edges: Vec<Edge>,
    ) -> Self {
        edges.sort_unstable();
        let mut out_edges = vec![Vec::new(); vertices.len()];
        let mut in_edges = vec![Vec::new(); vertices.len()];
        let mut by_rel = vec![Vec::new(); relations.len()];
        for (k, e) in edges.iter().enumerate() {
            out_edges[e.src].push(k);
            in_edges[e.dst].push(k);
            by_rel[e.rel].push(k);
        }
        let edge_set = edges.iter().copied().collect();
        KnowledgeGraph {
            vertices,
            index,
            relations,
            edges,
            edge_set,
            out_edges,
            in_edges,
            by_rel,
        }
    }

    pub fn from_triples<I>(vertices: Vec<Vertex>, triples: I) -> (Self, LoadReport)
    where
        I: IntoIterator<Item = Triple>,
    {
        let mut b = GraphBuilder::new();
        for v in vertices {
            b.vertex(v.id, v.class);
        }
        for t in triples {
            b.triples.push(t);
        }
        b.build()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn relations(&self) -> &[String] {
        &self.relations
    }

    pub fn relation_index(&self, name: &str) -> Option<usize> {
        self.relations.binary_search_by(|r| r.as_str().cmp(name)).ok()
    }

    pub(crate) fn require_relation(&self, name: &str) -> Result<usize> {
        self.relation_index(name)
            .ok_or_else(|| Error::UnknownRelation {
                name: name.to_string(),
                available: self.relations.clone(),
            })
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Indices into [`Self::edges`] of edges leaving vertex `i`.
    pub fn out_edges(&self, i: usize) -> &[usize] {
        &self.out_edges[i]
    }

    /// Indices into [`Self::edges`] of edges entering vertex `i`.
    pub fn in_edges(&self, i: usize) -> &[usize] {
        &self.in_edges[i]
    }

    pub fn edges_of_relation(&self, r: usize) -> impl Iterator<Item = &Edge> + '_ {
        self.by_rel[r].iter().map(move |&k| &self.edges[k])
    }

    pub fn relation_edge_count(&self, r: usize) -> usize {
        self.by_rel[r].len()
    }

    pub fn contains(&self, e: &Edge) -> bool {
        self.edge_set.contains(e)
    }

    pub fn contains_triple(&self, t: &Triple) -> bool {
        match (
            self.vertex_index(&t.src),
            self.relation_index(&t.rel),
            self.vertex_index(&t.dst),
        ) {
            (Some(src), Some(rel), Some(dst)) => self.contains(&Edge { src, rel, dst }),
            _ => false,
        }
    }

    pub fn triple(&self, e: &Edge) -> Triple {
        Triple::new(
            &self.vertices[e.src].id,
            &self.relations[e.rel],
            &self.vertices[e.dst].id,
        )
    }

    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        self.edges.iter().map(|e| self.triple(e))
    }

    /// Number of `rel`-edges leaving vertex `i` (by index).
    pub fn out_degree_idx(&self, i: usize, rel: usize) -> usize {
        self.out_edges[i]
            .iter()
            .filter(|&&k| self.edges[k].rel == rel)
            .count()
    }

    /// Number of `rel`-edges leaving vertex `id`. A relation the graph does not
    /// contain has out-degree zero everywhere.
    pub fn out_degree(&self, id: &str, rel: &str) -> Result<usize> {
        let i = self
            .vertex_index(id)
            .ok_or_else(|| Error::UnknownVertex(id.to_string()))?;
        Ok(match self.relation_index(rel) {
            Some(r) => self.out_degree_idx(i, r),
            None => 0,
        })
    }

    /// A copy of the graph without any `name` edges. The vertex set (and with it
    /// every vertex index) is unchanged.
    pub fn remove_relation(&self, name: &str) -> Result<KnowledgeGraph> {
        let removed = self.require_relation(name)?;
        let relations: Vec<String> = self
            .relations
            .iter()
            .filter(|r| r.as_str() != name)
            .cloned()
            .collect();
        let edges = self
            .edges
            .iter()
            .filter(|e| e.rel != removed)
            .map(|e| Edge {
                rel: if e.rel > removed { e.rel - 1 } else { e.rel },
                ..*e
            })
            .collect();
        Ok(KnowledgeGraph::from_indexed(
            self.vertices.clone(),
            self.index.clone(),
            relations,
            edges,
        ))
    }

    /// Class labels present on any vertex, sorted.
    pub fn classes(&self) -> BTreeSet<&str> {
        self.vertices
            .iter()
            .filter_map(|v| v.class.as_deref())
            .collect()
    }

    pub fn save_edgelist(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for t in self.triples() {
            writeln!(w, "{t}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn save_vertex_classes(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for v in &self.vertices {
            if let Some(c) = &v.class {
                writeln!(w, "{}\t{}", v.id, c).map_err(|e| Error::io(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

/// Reads `src<TAB>rel<TAB>dst` lines, plus an optional `id<TAB>class` file.
pub fn load_edgelist(
    path: impl AsRef<Path>,
    vertex_class_path: Option<&Path>,
) -> Result<(KnowledgeGraph, LoadReport)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut b = GraphBuilder::new();
    for (n, line) in data_lines(&text) {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                path,
                n,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        if fields.iter().any(|f| f.is_empty()) {
            return Err(Error::parse(path, n, "empty field"));
        }
        b.edge(fields[0], fields[1], fields[2]);
    }
    if b.triples.is_empty() {
        return Err(Error::EmptyGraph(path.to_path_buf()));
    }
    if let Some(cpath) = vertex_class_path {
        let text = fs::read_to_string(cpath).map_err(|e| Error::io(cpath, e))?;
        let mut seen: HashMap<String, String> = HashMap::new();
        for (n, line) in data_lines(&text) {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 || fields.iter().any(|f| f.is_empty()) {
                return Err(Error::parse(cpath, n, "expected `id<TAB>class`"));
            }
            if let Some(prev) = seen.insert(fields[0].to_string(), fields[1].to_string()) {
                if prev != fields[1] {
                    return Err(Error::parse(
                        cpath,
                        n,
                        format!("vertex `{}` already has class `{prev}`", fields[0]),
                    ));
                }
            }
            b.vertex(fields[0], Some(fields[1].to_string()));
        }
    }
    let (g, report) = b.build();
    if report.duplicates > 0 {
        warn!("{}: dropped {} duplicate edges", path.display(), report.duplicates);
    }
    Ok((g, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn duplicate_edges_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "g.tsv", "a\tR\tb\na\tR\tb\n");
        let (g, report) = load_edgelist(&p, None).unwrap();
        assert_eq!(g.n_vertices(), 2);
        assert_eq!(g.n_edges(), 1);
        assert_eq!(report.duplicates, 1);
    }

    #[test]
    fn two_relations() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "g.tsv", "# comment\na\tR\tb\nb\tS\ta\n");
        let (g, _) = load_edgelist(&p, None).unwrap();
        assert_eq!(g.n_vertices(), 2);
        assert_eq!(g.n_edges(), 2);
        assert_eq!(g.relations(), ["R", "S"]);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "g.tsv", "a\tR\tb\na\tR\n");
        match load_edgelist(&p, None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "g.tsv", "# only a comment\n");
        assert!(matches!(load_edgelist(&p, None), Err(Error::EmptyGraph(_))));
    }

    #[test]
    fn self_loops_are_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "g.tsv", "a\tR\ta\na\tR\tb\n");
        let (g, report) = load_edgelist(&p, None).unwrap();
        assert_eq!(report.self_loops, 1);
        assert_eq!(g.n_edges(), 1);
    }

    #[test]
    fn class_file_adds_classes_and_isolated_vertices() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "g.tsv", "a\tTreats\tb\n");
        let c = write(&dir, "c.tsv", "a\tdrug\nb\tdisease\nz\tdrug\n");
        let (g, _) = load_edgelist(&p, Some(&c)).unwrap();
        assert_eq!(g.n_vertices(), 3);
        let z = g.vertex_index("z").unwrap();
        assert_eq!(g.vertices()[z].class.as_deref(), Some("drug"));
    }

    #[test]
    fn remove_relation_keeps_vertices() {
        let mut b = GraphBuilder::new();
        b.edge("a", "R", "b").edge("a", "S", "c");
        let (g, _) = b.build();
        let h = g.remove_relation("S").unwrap();
        assert_eq!(h.n_edges(), 1);
        assert_eq!(h.n_vertices(), 3);
        assert_eq!(h.relations(), ["R"]);
        assert_eq!(h.triple(&h.edges()[0]), Triple::new("a", "R", "b"));

        let empty = h.remove_relation("R").unwrap();
        assert_eq!(empty.n_edges(), 0);
        assert_eq!(empty.n_vertices(), 3);
    }

    #[test]
    fn remove_unknown_relation_lists_available() {
        let mut b = GraphBuilder::new();
        b.edge("a", "R", "b");
        let (g, _) = b.build();
        let err = g.remove_relation("Q").unwrap_err();
        assert!(err.to_string().contains("available: R"), "{err}");
    }

    #[test]
    fn out_degree_counts() {
        let mut b = GraphBuilder::new();
        b.edge("a", "R", "b").edge("a", "R", "c").edge("b", "S", "c");
        let (g, _) = b.build();
        assert_eq!(g.out_degree("a", "R").unwrap(), 2);
        assert_eq!(g.out_degree("a", "S").unwrap(), 0);
        assert!(matches!(g.out_degree("nope", "R"), Err(Error::UnknownVertex(_))));
    }

    #[test]
    fn directed_edges_are_distinct() {
        let mut b = GraphBuilder::new();
        b.edge("a", "Is", "b").edge("b", "Is", "a");
        let (g, report) = b.build();
        assert_eq!(g.n_edges(), 2);
        assert_eq!(report.duplicates, 0);
    }
}
