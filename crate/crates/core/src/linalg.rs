use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Singular values below this fraction of the largest make the polar factor
/// non-unique.
const RANK_TOL: f64 = 1e-12;

/// Nearest matrix with orthonormal columns (or rows, when wide) in Frobenius
/// norm: with `M = W Σ Zᵀ`, returns `W Zᵀ`.
pub fn polar_factor(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.is_empty() {
        return Ok(m.clone());
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smax.is_nan() || smax <= 0.0 || smin <= RANK_TOL * smax {
        return Err(Error::Numerical(format!(
            "cannot orthogonalize a rank-deficient {}×{} matrix (singular values {smin:.3e}..{smax:.3e}); \
             the polar factor is not unique",
            m.nrows(),
            m.ncols()
        )));
    }
    let w = svd.u.expect("requested U");
    let zt = svd.v_t.expect("requested Vᵀ");
    Ok(w * zt)
}

/// `max |MᵀM − I|` for tall `M`, `max |MMᵀ − I|` for wide `M`.
pub fn orthogonality_defect(m: &DMatrix<f64>) -> f64 {
    let gram = if m.nrows() >= m.ncols() {
        m.tr_mul(m)
    } else {
        m * m.transpose()
    };
    let n = gram.nrows();
    (gram - DMatrix::<f64>::identity(n, n)).abs().max()
}

pub fn min_eigenvalue(sym: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(sym.clone()).eigenvalues.min()
}

/// Solves `S X = B` for symmetric, possibly indefinite `S` by LU with partial
/// pivoting, and rejects the answer unless the residual is below
/// `tol · max(1, ‖B‖_max)`.
pub fn solve_symmetric(s: &DMatrix<f64>, rhs: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    let diagnose = |why: &str| {
        Error::Numerical(format!(
            "{why}: smallest eigenvalue of the {n}×{n} system is {:.3e}; increase lambda",
            min_eigenvalue(s),
            n = s.nrows()
        ))
    };
    let x = s
        .clone()
        .lu()
        .solve(rhs)
        .ok_or_else(|| diagnose("singular system"))?;
    let resid = (s * &x - rhs).abs().max();
    let scale = rhs.abs().max().max(1.0);
    if !resid.is_finite() || resid > tol * scale {
        return Err(diagnose(&format!("residual {resid:.3e} exceeds tolerance")));
    }
    Ok(x)
}

/// Vector right-hand-side variant of [`solve_symmetric`].
pub fn solve_symmetric_vec(s: &DMatrix<f64>, rhs: &DVector<f64>, tol: f64) -> Result<DVector<f64>> {
    let b = DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice());
    let x = solve_symmetric(s, &b, tol)?;
    Ok(x.column(0).into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polar_of_scaled_rotation() {
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let r = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let p = polar_factor(&(&r * 2.5)).unwrap();
        assert!((p - &r).abs().max() < 1e-14);
    }

    #[test]
    fn polar_is_orthogonal() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.5, -0.3, 0.8, 1.1, 0.2, -0.4, 2.0]);
        let p = polar_factor(&m).unwrap();
        assert!(orthogonality_defect(&p) < 1e-12);
        let tall = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.5, -0.3, 0.8, 1.1]);
        let p = polar_factor(&tall).unwrap();
        assert!((p.tr_mul(&p) - DMatrix::<f64>::identity(2, 2)).abs().max() < 1e-12);
    }

    #[test]
    fn polar_rejects_rank_deficient() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(polar_factor(&m).is_err());
    }

    #[test]
    fn indefinite_solve() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, -1.0]);
        let b = DVector::from_vec(vec![3.0, 1.0]);
        let x = solve_symmetric_vec(&s, &b, 1e-8).unwrap();
        assert!((&s * x - b).abs().max() < 1e-12);
    }

    #[test]
    fn singular_solve_reports_eigenvalue() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 0.0]);
        let err = solve_symmetric_vec(&s, &b, 1e-8).unwrap_err();
        assert!(err.to_string().contains("smallest eigenvalue"), "{err}");
    }
}
