//! Relation penalty functions `f_r(q_i, q_j)` and their analytic gradients.
//!
//! For an edge `(i, j, r)` the source embedding is `q_i` (length `d_src`) and
//! the target embedding is `q_j` (length `d_dst`). The relation matrix `A` is
//! always `d_src × d_dst`.
//!
//! | kind        | value                    | learned   |
//! |-------------|--------------------------|-----------|
//! | identity    | `‖q_j − q_i‖²`           | nothing   |
//! | translation | `‖q_j + b − q_i‖²`       | `b`       |
//! | linear      | `‖A q_j + b − q_i‖²`     | `A`, `b`  |
//! | neural      | `tanh(q_iᵀ A q_j)`       | `A`       |
//!
//! Further penalty families plug in by adding a [`RelationKind`] variant with a
//! value and gradient here; the optimizers only consume these two functions.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Half-width of the uniform noise added to the neural identity initialization.
pub const NEURAL_INIT_NOISE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelationKind {
    Identity,
    Translation,
    Linear,
    Neural,
}

impl RelationKind {
    /// Whether the squared-residual family (solvable in closed form) applies.
    pub fn is_residual(self) -> bool {
        !matches!(self, RelationKind::Neural)
    }

    pub fn learns_offset(self) -> bool {
        matches!(self, RelationKind::Translation | RelationKind::Linear)
    }

    pub fn learns_matrix(self) -> bool {
        matches!(self, RelationKind::Linear | RelationKind::Neural)
    }

    pub fn needs_square(self) -> bool {
        matches!(self, RelationKind::Identity | RelationKind::Translation)
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RelationKind::Identity => "identity",
            RelationKind::Translation => "translation",
            RelationKind::Linear => "linear",
            RelationKind::Neural => "neural",
        })
    }
}

impl FromStr for RelationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(RelationKind::Identity),
            "translation" => Ok(RelationKind::Translation),
            "linear" => Ok(RelationKind::Linear),
            "neural" => Ok(RelationKind::Neural),
            other => Err(Error::Config(format!(
                "unknown relation kind `{other}` (expected identity, translation, linear or neural)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelationParams {
    pub rel: String,
    pub kind: RelationKind,
    /// `d_src × d_dst`
    pub a: DMatrix<f64>,
    /// length `d_src`; always zero for identity and neural
    pub b: DVector<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PenaltyGradients {
    pub d_qi: DVector<f64>,
    pub d_qj: DVector<f64>,
    pub d_a: DMatrix<f64>,
    pub d_b: DVector<f64>,
}

/// `I` padded with zeros when non-square.
pub fn rect_identity(rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |i, j| if i == j { 1.0 } else { 0.0 })
}

pub fn init_params(
    rel: &str,
    kind: RelationKind,
    d_src: usize,
    d_dst: usize,
    seed: u64,
) -> Result<RelationParams> {
    if kind.needs_square() && d_src != d_dst {
        return Err(Error::DimensionMismatch {
            rel: rel.to_string(),
            expected: format!("{kind} relations need d_src = d_dst"),
            got: format!("{d_src} × {d_dst}"),
        });
    }
    let mut a = rect_identity(d_src, d_dst);
    if kind == RelationKind::Neural {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for x in a.iter_mut() {
            *x += rng.random_range(-NEURAL_INIT_NOISE..=NEURAL_INIT_NOISE);
        }
    }
    Ok(RelationParams {
        rel: rel.to_string(),
        kind,
        a,
        b: DVector::zeros(d_src),
    })
}

impl RelationParams {
    pub fn d_src(&self) -> usize {
        self.a.nrows()
    }

    pub fn d_dst(&self) -> usize {
        self.a.ncols()
    }

    fn check_dims(&self, qi: &DVector<f64>, qj: &DVector<f64>) -> Result<()> {
        if qi.len() != self.d_src() || qj.len() != self.d_dst() {
            return Err(Error::DimensionMismatch {
                rel: self.rel.clone(),
                expected: format!("q_i: {}, q_j: {}", self.d_src(), self.d_dst()),
                got: format!("q_i: {}, q_j: {}", qi.len(), qj.len()),
            });
        }
        Ok(())
    }

    /// `A q_j + b`, skipping the product when `A` is the frozen identity.
    pub fn predict_source(&self, qj: &DVector<f64>) -> DVector<f64> {
        match self.kind {
            RelationKind::Identity | RelationKind::Translation => qj + &self.b,
            _ => &self.a * qj + &self.b,
        }
    }

    /// `Aᵀ v`, skipping the product when `A` is the frozen identity.
    pub fn pull_back(&self, v: &DVector<f64>) -> DVector<f64> {
        match self.kind {
            RelationKind::Identity | RelationKind::Translation => v.clone(),
            _ => self.a.tr_mul(v),
        }
    }

    /// `A q_j + b − q_i` for the residual kinds.
    pub fn residual(&self, qi: &DVector<f64>, qj: &DVector<f64>) -> DVector<f64> {
        self.predict_source(qj) - qi
    }

    pub fn value(&self, qi: &DVector<f64>, qj: &DVector<f64>) -> Result<f64> {
        self.check_dims(qi, qj)?;
        Ok(self.value_unchecked(qi, qj))
    }

    pub(crate) fn value_unchecked(&self, qi: &DVector<f64>, qj: &DVector<f64>) -> f64 {
        match self.kind {
            RelationKind::Neural => bilinear(qi, &self.a, qj).tanh(),
            _ => self.residual(qi, qj).norm_squared(),
        }
    }

    pub fn gradients(&self, qi: &DVector<f64>, qj: &DVector<f64>) -> Result<PenaltyGradients> {
        self.check_dims(qi, qj)?;
        Ok(match self.kind {
            RelationKind::Neural => {
                let a_qj = &self.a * qj;
                let s = qi.dot(&a_qj);
                let u = tanh_derivative(s);
                PenaltyGradients {
                    d_qi: a_qj * u,
                    d_qj: self.a.tr_mul(qi) * u,
                    d_a: qi * qj.transpose() * u,
                    d_b: DVector::zeros(self.d_src()),
                }
            }
            _ => {
                let res = self.residual(qi, qj);
                PenaltyGradients {
                    d_qi: &res * -2.0,
                    d_qj: self.a.tr_mul(&res) * 2.0,
                    d_a: &res * qj.transpose() * 2.0,
                    d_b: res * 2.0,
                }
            }
        })
    }
}

pub fn penalty_value(p: &RelationParams, qi: &DVector<f64>, qj: &DVector<f64>) -> Result<f64> {
    p.value(qi, qj)
}

pub fn penalty_gradients(
    p: &RelationParams,
    qi: &DVector<f64>,
    qj: &DVector<f64>,
) -> Result<PenaltyGradients> {
    p.gradients(qi, qj)
}

fn bilinear(qi: &DVector<f64>, a: &DMatrix<f64>, qj: &DVector<f64>) -> f64 {
    qi.dot(&(a * qj))
}

/// `1 − tanh²(s)` as `cosh⁻²(s)`, which underflows cleanly to zero for large `|s|`.
fn tanh_derivative(s: f64) -> f64 {
    let c = s.cosh();
    1.0 / (c * c)
}

fn fmt_value(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `[rel kind d_src d_dst]` sections: `b` on one line, then `A` row by row.
pub fn save_params<'a, I>(params: I, path: impl AsRef<Path>) -> Result<()>
where
    I: IntoIterator<Item = &'a RelationParams>,
{
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    for p in params {
        writeln!(w, "[{} {} {} {}]", p.rel, p.kind, p.d_src(), p.d_dst()).map_err(io)?;
        let b: Vec<String> = p.b.iter().map(|&x| fmt_value(x)).collect();
        writeln!(w, "{}", b.join(" ")).map_err(io)?;
        for row in p.a.row_iter() {
            let vals: Vec<String> = row.iter().map(|&x| fmt_value(x)).collect();
            writeln!(w, "{}", vals.join(" ")).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn load_params(path: impl AsRef<Path>) -> Result<Vec<RelationParams>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate().map(|(n, l)| (n + 1, l));
    let mut out = Vec::new();
    let parse_row = |n: usize, line: &str, len: usize| -> Result<Vec<f64>> {
        let vals = line
            .split_whitespace()
            .map(|f| f.parse::<f64>().map_err(|_| Error::parse(path, n, "not a number")))
            .collect::<Result<Vec<f64>>>()?;
        if vals.len() != len {
            return Err(Error::parse(path, n, format!("expected {len} values")));
        }
        Ok(vals)
    };
    while let Some((n, header)) = lines.next() {
        if header.trim().is_empty() {
            continue;
        }
        let inner = header
            .strip_prefix('[')
            .and_then(|h| h.strip_suffix(']'))
            .ok_or_else(|| Error::parse(path, n, "expected `[rel kind d_src d_dst]`"))?;
        let mut parts = inner.rsplitn(4, ' ');
        let (d_dst, d_src, kind, rel) = (parts.next(), parts.next(), parts.next(), parts.next());
        let (Some(d_dst), Some(d_src), Some(kind), Some(rel)) = (d_dst, d_src, kind, rel) else {
            return Err(Error::parse(path, n, "expected `[rel kind d_src d_dst]`"));
        };
        let bad = || Error::parse(path, n, "bad section header");
        let d_src: usize = d_src.parse().map_err(|_| bad())?;
        let d_dst: usize = d_dst.parse().map_err(|_| bad())?;
        let kind: RelationKind = kind.parse()?;
        let (bn, bline) = lines.next().ok_or_else(|| Error::parse(path, n, "missing b"))?;
        let b = DVector::from_vec(parse_row(bn, bline, d_src)?);
        let mut a = DMatrix::zeros(d_src, d_dst);
        for r in 0..d_src {
            let (rn, rline) = lines
                .next()
                .ok_or_else(|| Error::parse(path, n, "missing rows of A"))?;
            for (c, v) in parse_row(rn, rline, d_dst)?.into_iter().enumerate() {
                a[(r, c)] = v;
            }
        }
        out.push(RelationParams {
            rel: rel.to_string(),
            kind,
            a,
            b,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn identity_zero_at_equal_points() {
        let p = init_params("R", RelationKind::Identity, 2, 2, 0).unwrap();
        assert_eq!(p.value(&v(&[0.3, -1.0]), &v(&[0.3, -1.0])).unwrap(), 0.0);
    }

    #[test]
    fn exact_translation() {
        let mut p = init_params("R", RelationKind::Linear, 2, 2, 0).unwrap();
        p.b = v(&[1.0, 0.0]);
        assert_eq!(p.value(&v(&[1.0, 0.0]), &v(&[0.0, 0.0])).unwrap(), 0.0);
    }

    #[test]
    fn neural_value() {
        let mut p = init_params("R", RelationKind::Neural, 2, 2, 0).unwrap();
        p.a = DMatrix::identity(2, 2);
        let val = p.value(&v(&[1.0, 0.0]), &v(&[1.0, 0.0])).unwrap();
        assert!((val - 1f64.tanh()).abs() < 1e-15);
        assert!((val - 0.76159).abs() < 1e-5);
    }

    #[test]
    fn neural_saturation_has_no_nan() {
        let mut p = init_params("R", RelationKind::Neural, 2, 2, 0).unwrap();
        p.a = DMatrix::identity(2, 2) * 50.0;
        let g = p.gradients(&v(&[1.0, 0.0]), &v(&[1.0, 0.0])).unwrap();
        for x in g.d_qi.iter().chain(g.d_qj.iter()).chain(g.d_a.iter()) {
            assert!(x.is_finite());
            assert!(x.abs() < 1e-40);
        }
        p.a *= 100.0;
        let g = p.gradients(&v(&[1.0, 0.0]), &v(&[1.0, 0.0])).unwrap();
        assert!(g.d_a.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn stationary_point_has_zero_gradients() {
        let mut p = init_params("R", RelationKind::Linear, 2, 2, 0).unwrap();
        p.a = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        p.b = v(&[0.5, 0.5]);
        let qj = v(&[2.0, 1.0]);
        let qi = p.predict_source(&qj);
        let g = p.gradients(&qi, &qj).unwrap();
        assert_eq!(g.d_qi.norm(), 0.0);
        assert_eq!(g.d_qj.norm(), 0.0);
        assert_eq!(g.d_a.norm(), 0.0);
        assert_eq!(g.d_b.norm(), 0.0);
    }

    #[test]
    fn identity_gradient_sign() {
        let p = init_params("R", RelationKind::Identity, 2, 2, 0).unwrap();
        let qi = v(&[1.0, 0.0]);
        let qj = v(&[0.0, 0.0]);
        let g = p.gradients(&qi, &qj).unwrap();
        // f = (qj_0 − qi_0)² + ..., ∂f/∂qi_0 = −2(qj_0 − qi_0) = 2
        assert_eq!(g.d_qi.as_slice(), &[2.0, 0.0]);
        let h = 1e-5;
        let fd = (p.value(&v(&[1.0 + h, 0.0]), &qj).unwrap()
            - p.value(&v(&[1.0 - h, 0.0]), &qj).unwrap())
            / (2.0 * h);
        assert!((fd - 2.0).abs() / 2.0 < 1e-4);
    }

    #[test]
    fn init_shapes() {
        let p = init_params("R", RelationKind::Linear, 3, 3, 0).unwrap();
        assert_eq!(p.a, DMatrix::identity(3, 3));
        assert_eq!(p.b, DVector::zeros(3));
        let r = init_params("R", RelationKind::Linear, 3, 2, 0).unwrap();
        assert_eq!(r.a, DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]));
        assert!(matches!(
            init_params("R", RelationKind::Identity, 3, 2, 0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn neural_init_is_seeded() {
        let a = init_params("R", RelationKind::Neural, 4, 4, 1).unwrap();
        let b = init_params("R", RelationKind::Neural, 4, 4, 1).unwrap();
        let c = init_params("R", RelationKind::Neural, 4, 4, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.a, c.a);
        let dev = (&a.a - DMatrix::<f64>::identity(4, 4)).abs().max();
        assert!(dev <= NEURAL_INIT_NOISE);
    }

    #[test]
    fn dimension_mismatch_names_relation() {
        let p = init_params("Treats", RelationKind::Linear, 3, 2, 0).unwrap();
        let err = p.value(&v(&[1.0, 2.0]), &v(&[1.0, 2.0])).unwrap_err();
        assert!(err.to_string().contains("Treats"));
    }

    #[test]
    fn antonymy_minimized_at_negation() {
        let mut p = init_params("Antonym", RelationKind::Linear, 2, 2, 0).unwrap();
        p.a = -DMatrix::<f64>::identity(2, 2);
        let qj = v(&[0.3, -0.7]);
        assert_eq!(p.value(&-&qj, &qj).unwrap(), 0.0);
        assert!(p.value(&qj, &qj).unwrap() > 0.0);
    }

    #[test]
    fn params_file_round_trip() {
        let mut p = init_params("has part", RelationKind::Linear, 3, 2, 0).unwrap();
        p.a[(2, 1)] = 0.1 + 0.2;
        p.b[1] = -1.0 / 3.0;
        let q = init_params("S", RelationKind::Neural, 2, 2, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.txt");
        save_params([&p, &q], &path).unwrap();
        let back = load_params(&path).unwrap();
        assert_eq!(back, vec![p, q]);
    }
}
