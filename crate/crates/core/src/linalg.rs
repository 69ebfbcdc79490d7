//! Symmetric eigendecomposition helpers shared by the leverage-score and
//! Nyström code.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Validate that `m` is square, finite and symmetric up to a relative
/// tolerance.
pub(crate) fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if m.is_empty() {
        return Err(Error::Empty("matrix has no entries"));
    }
    let n = m.nrows();
    let mut scale = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            let v = m[(i, j)];
            if !v.is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
            scale = scale.max(v.abs());
        }
    }
    let mut asym = 0.0f64;
    for j in 0..n {
        for i in 0..j {
            asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if asym > 1e-12 * scale.max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// Eigenpairs of a symmetric matrix; eigenvalues are not sorted.
pub(crate) fn sym_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    (eig.eigenvalues, eig.eigenvectors)
}

/// `(M^†)^{1/2}` for a symmetric PSD matrix. Eigenvalues at or below
/// `rank_tolerance · λ_max` are treated as zero. Returns the matrix and the
/// retained rank.
pub(crate) fn pinv_sqrt(m: &DMatrix<f64>, rank_tolerance: f64) -> (DMatrix<f64>, usize) {
    let n = m.nrows();
    let (vals, vecs) = sym_eigen(m);
    let lmax = vals.iter().copied().fold(0.0f64, f64::max);
    let cutoff = rank_tolerance * lmax;
    let inv_sqrt: Vec<f64> = vals
        .iter()
        .map(|&l| if l > cutoff && l > 0.0 { 1.0 / l.sqrt() } else { 0.0 })
        .collect();
    let rank = inv_sqrt.iter().filter(|&&v| v > 0.0).count();
    let mut scaled = vecs.clone();
    for (c, s) in inv_sqrt.iter().enumerate() {
        scaled.column_mut(c).scale_mut(*s);
    }
    let mut out = &scaled * vecs.transpose();
    // symmetrize away round-off
    for j in 0..n {
        for i in 0..j {
            let v = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    (out, rank)
}
