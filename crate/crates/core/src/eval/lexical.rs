use std::fs;
use std::path::Path;

use log::warn;
use nalgebra::DVector;

use super::EvalReport;
use crate::embed::EmbeddingSet;
use crate::error::{Error, Result};

/// 1-based ranks; tied values share the mean of the positions they occupy.
fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        let r = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = r;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        None
    } else {
        Some(sxy / (sxx * syy).sqrt())
    }
}

/// Spearman's ρ: Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Eval(format!(
            "rank correlation needs two equally long samples of at least 2 (got {} and {})",
            x.len(),
            y.len()
        )));
    }
    pearson(&average_ranks(x), &average_ranks(y))
        .ok_or_else(|| Error::Eval("rank correlation is undefined for a constant sample".into()))
}

fn cosine(a: &DVector<f64>, b: &DVector<f64>) -> Option<f64> {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 || a.len() != b.len() {
        None
    } else {
        Some(a.dot(b) / (na * nb))
    }
}

/// Spearman correlation between cosine similarities and human scores. Pairs
/// with a missing or zero vector are dropped and counted.
pub fn word_similarity(q: &EmbeddingSet, pairs: &[(String, String, f64)]) -> Result<EvalReport> {
    let mut predicted = Vec::new();
    let mut gold = Vec::new();
    for (w1, w2, score) in pairs {
        match (q.get(w1), q.get(w2)) {
            (Some(a), Some(b)) => match cosine(a, b) {
                Some(c) => {
                    predicted.push(c);
                    gold.push(*score);
                }
                None => continue,
            },
            _ => continue,
        }
    }
    let dropped = pairs.len() - predicted.len();
    if predicted.len() < 2 {
        return Err(Error::Eval(format!(
            "only {} of {} similarity pairs have both words embedded",
            predicted.len(),
            pairs.len()
        )));
    }
    let rho = spearman(&predicted, &gold)?;
    let mut r = EvalReport::single("spearman", rho, 0, predicted.len(), 0);
    r.dropped = dropped;
    Ok(r)
}

/// Mean cosine between `q_d` and the offset prediction `q_b − q_a + q_c`.
pub fn analogy_eval(q: &EmbeddingSet, quads: &[[String; 4]]) -> Result<EvalReport> {
    let mut sum = 0.0;
    let mut used = 0usize;
    let mut zero = 0usize;
    for [a, b, c, d] in quads {
        let (Some(va), Some(vb), Some(vc), Some(vd)) = (q.get(a), q.get(b), q.get(c), q.get(d)) else {
            continue;
        };
        if [va, vb, vc].iter().any(|v| v.len() != vd.len()) {
            continue;
        }
        match cosine(vd, &(vb - va + vc)) {
            Some(s) => {
                sum += s;
                used += 1;
            }
            None => zero += 1,
        }
    }
    if zero > 0 {
        warn!("dropped {zero} analogies with a zero-norm operand");
    }
    if used == 0 {
        return Err(Error::Eval(format!("none of {} analogies is usable", quads.len())));
    }
    let mut r = EvalReport::single("analogy_cosine", sum / used as f64, 0, used, 0);
    r.dropped = quads.len() - used;
    Ok(r)
}

/// `w1<TAB>w2<TAB>score` per line; `#` comments and blank lines skipped.
pub fn load_similarity(path: impl AsRef<Path>) -> Result<Vec<(String, String, f64)>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            return Err(Error::parse(path, k + 1, format!("expected 3 tab-separated fields, found {}", f.len())));
        }
        let score: f64 = f[2]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, k + 1, format!("bad score `{}`", f[2])))?;
        out.push((f[0].to_string(), f[1].to_string(), score));
    }
    Ok(out)
}

/// `a b c d` per line; `:` section headers and blank lines skipped.
pub fn load_analogies(path: impl AsRef<Path>) -> Result<Vec<[String; 4]>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with(':') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        match f.as_slice() {
            [a, b, c, d] => out.push([a, b, c, d].map(|s| s.to_string())),
            _ => return Err(Error::parse(path, k + 1, format!("expected 4 words, found {}", f.len()))),
        }
    }
    Ok(out)
}
