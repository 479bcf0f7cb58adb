//! Small dense linear-algebra helpers shared by the solver and the audit.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value cutoff below which a pseudoinverse treats a
/// direction as null.
pub(crate) const PINV_CUTOFF: f64 = 1e-10;

/// Largest absolute asymmetry `|m_ij - m_ji|` of a square matrix.
pub(crate) fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// `(m + m^T) / 2`.
pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of a symmetric matrix, ascending.
pub(crate) fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut vals: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    symmetric_eigenvalues(m)[0]
}

/// Principal submatrix `m[rows, rows]`.
pub(crate) fn gather(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), rows.len(), |i, j| m[(rows[i], rows[j])])
}

/// Solve `m z = rhs` for symmetric positive (semi)definite `m`.
///
/// Tries Cholesky first; on failure falls back to an eigendecomposition
/// pseudoinverse with relative cutoff [`PINV_CUTOFF`], which is also the
/// least-squares solution when `rhs` has a component outside the range.
pub(crate) fn solve_psd(m: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    if let Some(chol) = m.clone().cholesky() {
        return chol.solve(rhs);
    }
    let eig = symmetrize(m).symmetric_eigen();
    let max_ev = eig.eigenvalues.iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
    let cutoff = PINV_CUTOFF * max_ev.max(f64::MIN_POSITIVE);
    let coeffs = eig.eigenvectors.transpose() * rhs;
    let mut z = DVector::zeros(m.nrows());
    for (k, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev > cutoff {
            z += eig.eigenvectors.column(k) * (coeffs[k] / ev);
        }
    }
    z
}

/// Least-squares solve through the SVD pseudoinverse. Returns the solution
/// together with the smallest and largest singular values of `m`.
pub(crate) fn svd_solve(m: &DMatrix<f64>, rhs: &DVector<f64>) -> (DVector<f64>, f64, f64) {
    let svd = m.clone().svd(true, true);
    let sigma_max = svd.singular_values.iter().fold(0.0_f64, |a, &s| a.max(s));
    let sigma_min = svd.singular_values.iter().fold(f64::INFINITY, |a, &s| a.min(s));
    let cutoff = PINV_CUTOFF * sigma_max.max(f64::MIN_POSITIVE);
    let solution = svd.solve(rhs, cutoff).expect("svd computed with u and v_t");
    (solution, sigma_min, sigma_max)
}

/// Gram factor of a symmetric PSD matrix: columns `w_j` with
/// `w_j^T w_k = v_jk`. Eigenvalues below `-tol` are an error; small
/// negative eigenvalues from rounding are clamped to zero.
pub(crate) fn gram_columns(v: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>, f64> {
    let eig = symmetrize(v).symmetric_eigen();
    let min_ev = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &x| a.min(x));
    if min_ev < -tol {
        return Err(min_ev);
    }
    let n = v.nrows();
    let mut w = eig.eigenvectors.transpose();
    for k in 0..n {
        let s = eig.eigenvalues[k].max(0.0).sqrt();
        w.row_mut(k).scale_mut(s);
    }
    Ok(w)
}
