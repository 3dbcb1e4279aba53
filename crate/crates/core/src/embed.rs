//! Dense entity embeddings: text I/O, alignment to a graph's vertex set and the
//! positive-PMI transform for co-occurrence counts.
//!
//! An all-zero vector means "no distributional data" for that entity. Such
//! entities are *unanchored*: the retrofitting objective gives them no anchor
//! weight.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use log::info;
use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::graph::KnowledgeGraph;

#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    pub class: Option<String>,
    pub vector: DVector<f64>,
}

impl Embedding {
    pub fn anchored(&self) -> bool {
        self.vector.iter().any(|&x| x != 0.0)
    }
}

/// Entity id → vector. All vectors of one entity class share a dimensionality;
/// different classes may differ.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EmbeddingSet {
    dims: BTreeMap<Option<String>, usize>,
    entries: BTreeMap<String, Embedding>,
}

impl EmbeddingSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// An empty set whose vectors of `class` must have length `dim`.
    pub fn with_dim(class: Option<String>, dim: usize) -> Self {
        let mut s = Self::new();
        s.dims.insert(class, dim);
        s
    }

    pub fn insert(
        &mut self,
        id: impl Into<String>,
        class: Option<String>,
        vector: DVector<f64>,
    ) -> Result<()> {
        let id = id.into();
        if self.entries.contains_key(&id) {
            return Err(Error::Embedding(format!("duplicate entity `{id}`")));
        }
        let dim = *self.dims.entry(class.clone()).or_insert(vector.len());
        if dim != vector.len() {
            return Err(Error::Embedding(format!(
                "entity `{id}` has dimension {}, class {} expects {dim}",
                vector.len(),
                class.as_deref().unwrap_or("-"),
            )));
        }
        self.entries.insert(id, Embedding { class, vector });
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&DVector<f64>> {
        self.entries.get(id).map(|e| &e.vector)
    }

    pub fn entry(&self, id: &str) -> Option<&Embedding> {
        self.entries.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.contains_key(id)
    }

    /// False for unknown ids and for all-zero vectors.
    pub fn anchored(&self, id: &str) -> bool {
        self.entries.get(id).is_some_and(Embedding::anchored)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in id order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Embedding)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn dims(&self) -> &BTreeMap<Option<String>, usize> {
        &self.dims
    }

    pub fn dim(&self, class: Option<&str>) -> Option<usize> {
        self.dims.get(&class.map(str::to_string)).copied()
    }

    /// The dimensionality shared by every entry, if there is exactly one.
    pub fn uniform_dim(&self) -> Option<usize> {
        let mut it = self.dims.values();
        let first = *it.next()?;
        it.all(|&d| d == first).then_some(first)
    }

    /// The subset of entries carrying `class`, keeping its dimensionality.
    pub fn class_subset(&self, class: Option<&str>) -> EmbeddingSet {
        let key = class.map(str::to_string);
        let mut out = EmbeddingSet::new();
        if let Some(&d) = self.dims.get(&key) {
            out.dims.insert(key.clone(), d);
        }
        for (id, e) in &self.entries {
            if e.class == key {
                out.entries.insert(id.clone(), e.clone());
            }
        }
        out
    }

    /// Adds every entry of `other` whose id is not already present.
    pub fn extend_missing(&mut self, other: &EmbeddingSet) -> Result<()> {
        for (id, e) in &other.entries {
            if !self.contains(id) {
                self.insert(id.clone(), e.class.clone(), e.vector.clone())?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EmbeddingFormat {
    /// `N D` header, then `id v1 ... vD` space-separated.
    #[default]
    Word2VecText,
    /// `id<TAB>v1<TAB>...<TAB>vD`, no header.
    Tsv,
}

impl fmt::Display for EmbeddingFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbeddingFormat::Word2VecText => "word2vec-text",
            EmbeddingFormat::Tsv => "tsv",
        })
    }
}

impl FromStr for EmbeddingFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "word2vec-text" | "word2vec" => Ok(EmbeddingFormat::Word2VecText),
            "tsv" => Ok(EmbeddingFormat::Tsv),
            other => Err(Error::Config(format!("unknown embedding format `{other}`"))),
        }
    }
}

fn parse_values(path: &Path, line: usize, fields: &[&str]) -> Result<DVector<f64>> {
    let vals = fields
        .iter()
        .map(|f| {
            f.parse::<f64>()
                .map_err(|_| Error::parse(path, line, format!("not a number: `{f}`")))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(DVector::from_vec(vals))
}

pub fn load_embeddings(path: impl AsRef<Path>, format: EmbeddingFormat) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut set = EmbeddingSet::new();
    let mut dim: Option<usize> = None;
    let mut expected_rows = None;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty());

    if format == EmbeddingFormat::Word2VecText {
        let (n, header) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "missing `N D` header"))?;
        let f: Vec<&str> = header.split_whitespace().collect();
        let parsed = (f.len() == 2)
            .then(|| Some((f[0].parse::<usize>().ok()?, f[1].parse::<usize>().ok()?)))
            .flatten();
        let (rows, d) = parsed.ok_or_else(|| Error::parse(path, n, "malformed `N D` header"))?;
        expected_rows = Some(rows);
        dim = Some(d);
        set.dims.insert(None, d);
    }

    for (n, line) in lines {
        let fields: Vec<&str> = match format {
            EmbeddingFormat::Word2VecText => line.split_whitespace().collect(),
            EmbeddingFormat::Tsv => line.split('\t').collect(),
        };
        let (id, values) = fields
            .split_first()
            .ok_or_else(|| Error::parse(path, n, "empty line"))?;
        let d = *dim.get_or_insert(values.len());
        if values.len() != d {
            return Err(Error::parse(
                path,
                n,
                format!("vector has {} components, expected {d}", values.len()),
            ));
        }
        let v = parse_values(path, n, values)?;
        if set.contains(id) {
            return Err(Error::parse(path, n, format!("duplicate entity `{id}`")));
        }
        set.insert(*id, None, v)?;
    }
    if let Some(rows) = expected_rows {
        if rows != set.len() {
            return Err(Error::parse(
                path,
                1,
                format!("header declares {rows} rows, file has {}", set.len()),
            ));
        }
    }
    Ok(set)
}

fn fmt_value(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes entries sorted by id with 17 significant digits per component.
pub fn save_embeddings(e: &EmbeddingSet, path: impl AsRef<Path>, format: EmbeddingFormat) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|err| Error::io(path, err))?;
    let mut w = BufWriter::new(file);
    let io = |err| Error::io(path, err);
    let sep = match format {
        EmbeddingFormat::Word2VecText => " ",
        EmbeddingFormat::Tsv => "\t",
    };
    if format == EmbeddingFormat::Word2VecText {
        let dim = match (e.uniform_dim(), e.dims.is_empty()) {
            (Some(d), _) => d,
            (None, true) => 0,
            (None, false) => {
                return Err(Error::Embedding(
                    "word2vec-text output needs a single dimensionality; save each class separately"
                        .into(),
                ))
            }
        };
        writeln!(w, "{} {}", e.len(), dim).map_err(io)?;
    }
    for (id, emb) in &e.entries {
        w.write_all(id.as_bytes()).map_err(io)?;
        for &x in emb.vector.iter() {
            w.write_all(sep.as_bytes()).map_err(io)?;
            w.write_all(fmt_value(x).as_bytes()).map_err(io)?;
        }
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Per-class count of graph vertices that had distributional data.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CoverageReport {
    /// class label (`-` for unclassed) → (covered, total)
    pub per_class: BTreeMap<String, (usize, usize)>,
}

impl CoverageReport {
    pub fn fraction(&self, class: &str) -> Option<f64> {
        self.per_class
            .get(class)
            .map(|&(c, t)| if t == 0 { 0.0 } else { c as f64 / t as f64 })
    }
}

impl fmt::Display for CoverageReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (class, (c, t)) in &self.per_class {
            writeln!(f, "{class}\t{c}/{t}")?;
        }
        Ok(())
    }
}

/// Builds one entry per graph vertex, drawing each vertex's vector from the set
/// registered for its class (falling back to a classless set, or to the only
/// set given). Vertices without data get a zero vector and are unanchored.
/// Entities outside the graph are not carried over.
pub fn align(
    g: &KnowledgeGraph,
    sets: &[(Option<String>, &EmbeddingSet)],
) -> Result<(EmbeddingSet, CoverageReport)> {
    let pick = |class: &Option<String>| -> Result<&EmbeddingSet> {
        if let Some((_, s)) = sets.iter().find(|(c, _)| c == class) {
            return Ok(s);
        }
        if let Some((_, s)) = sets.iter().find(|(c, _)| c.is_none()) {
            return Ok(s);
        }
        if sets.len() == 1 {
            return Ok(sets[0].1);
        }
        Err(Error::Embedding(format!(
            "no embedding set for class `{}`",
            class.as_deref().unwrap_or("-")
        )))
    };

    let mut out = EmbeddingSet::new();
    let mut report = CoverageReport::default();
    for v in g.vertices() {
        let src = pick(&v.class)?;
        let dim = src.uniform_dim().ok_or_else(|| {
            Error::Embedding(format!(
                "embedding set for class `{}` has no single dimensionality",
                v.class.as_deref().unwrap_or("-")
            ))
        })?;
        let slot = report
            .per_class
            .entry(v.class.clone().unwrap_or_else(|| "-".into()))
            .or_insert((0, 0));
        slot.1 += 1;
        let vector = match src.get(&v.id) {
            Some(x) => {
                slot.0 += 1;
                x.clone()
            }
            None => DVector::zeros(dim),
        };
        out.insert(v.id.clone(), v.class.clone(), vector)?;
    }
    for (class, (c, t)) in &report.per_class {
        info!("coverage {class}: {c}/{t}");
    }
    Ok((out, report))
}

/// Sparse nonnegative counts of (entity, context) co-occurrences.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CooccurrenceMatrix {
    rows: Vec<String>,
    cols: Vec<String>,
    counts: BTreeMap<(usize, usize), u64>,
}

impl CooccurrenceMatrix {
    /// Sums repeated `(row, col)` pairs. Row and column ids are sorted.
    pub fn from_counts<I, S, T>(counts: I) -> Self
    where
        I: IntoIterator<Item = (S, T, u64)>,
        S: Into<String>,
        T: Into<String>,
    {
        let raw: Vec<(String, String, u64)> = counts
            .into_iter()
            .map(|(r, c, n)| (r.into(), c.into(), n))
            .collect();
        let mut rows: Vec<String> = raw.iter().map(|t| t.0.clone()).collect();
        let mut cols: Vec<String> = raw.iter().map(|t| t.1.clone()).collect();
        rows.sort();
        rows.dedup();
        cols.sort();
        cols.dedup();
        let mut m = CooccurrenceMatrix {
            rows,
            cols,
            counts: BTreeMap::new(),
        };
        for (r, c, n) in raw {
            let ri = m.rows.binary_search(&r).unwrap();
            let ci = m.cols.binary_search(&c).unwrap();
            *m.counts.entry((ri, ci)).or_insert(0) += n;
        }
        m
    }

    /// Dense constructor, mostly for tests.
    pub fn from_dense(rows: &[&str], cols: &[&str], counts: &[Vec<u64>]) -> Self {
        let triples = rows.iter().enumerate().flat_map(|(i, r)| {
            cols.iter()
                .enumerate()
                .map(move |(j, c)| (r.to_string(), c.to_string(), counts[i][j]))
        });
        let mut m = Self::from_counts(triples);
        m.counts.retain(|_, n| *n > 0);
        m
    }

    /// Reads `row<TAB>context<TAB>count` lines.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut triples = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 {
                return Err(Error::parse(path, n + 1, "expected `row<TAB>context<TAB>count`"));
            }
            let count = f[2]
                .trim()
                .parse::<u64>()
                .map_err(|_| Error::parse(path, n + 1, "count must be a nonnegative integer"))?;
            triples.push((f[0].to_string(), f[1].to_string(), count));
        }
        Ok(Self::from_counts(triples))
    }

    pub fn rows(&self) -> &[String] {
        &self.rows
    }

    pub fn cols(&self) -> &[String] {
        &self.cols
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn scaled(&self, factor: u64) -> Self {
        let mut m = self.clone();
        for n in m.counts.values_mut() {
            *n *= factor;
        }
        m
    }
}

/// Positive PMI followed by unit-length rows. Rows that end up all-zero stay
/// zero (and therefore unanchored).
pub fn pmi_l2_normalize(m: &CooccurrenceMatrix) -> Result<EmbeddingSet> {
    let total = m.total();
    if total == 0 {
        return Err(Error::Embedding("co-occurrence matrix is empty".into()));
    }
    let mut row_sums = vec![0u64; m.rows.len()];
    let mut col_sums = vec![0u64; m.cols.len()];
    for (&(r, c), &n) in &m.counts {
        row_sums[r] += n;
        col_sums[c] += n;
    }
    let total = total as f64;
    let mut dense = vec![DVector::<f64>::zeros(m.cols.len()); m.rows.len()];
    for (&(r, c), &n) in &m.counts {
        if n == 0 {
            continue;
        }
        let ratio = (n as f64 * total) / (row_sums[r] as f64 * col_sums[c] as f64);
        dense[r][c] = ratio.ln().max(0.0);
    }
    let mut out = EmbeddingSet::with_dim(None, m.cols.len());
    for (id, mut v) in m.rows.iter().zip(dense) {
        let norm = v.norm();
        if norm > 0.0 {
            v /= norm;
        }
        out.insert(id.clone(), None, v)?;
    }
    Ok(out)
}
