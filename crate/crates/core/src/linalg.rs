//! Dense linear-algebra helpers shared by the metric constructions.

use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Smallest diagonal jitter tried, relative to the trace of the matrix.
pub const JITTER_START: f64 = 1e-12;
/// Largest diagonal jitter tried before giving up, relative to the trace.
pub const JITTER_MAX: f64 = 1e-6;

/// Returns `(m + mᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    m.is_square()
        && (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol))
}

/// Cholesky factorization of a symmetric positive-definite matrix.
///
/// On failure the diagonal is shifted by `1e-12·tr`, escalating tenfold up to
/// `1e-6·tr`. Returns the factorization and the jitter that was applied.
pub fn cholesky_with_jitter(m: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let sym = symmetrize(m);
    if let Some(ch) = Cholesky::new(sym.clone()) {
        return Ok((ch, 0.0));
    }
    let scale = sym.trace().abs().max(f64::MIN_POSITIVE);
    let n = sym.nrows();
    let mut rel = JITTER_START;
    while rel <= JITTER_MAX * (1.0 + 1e-9) {
        let jitter = rel * scale;
        let shifted = &sym + DMatrix::<f64>::identity(n, n) * jitter;
        if let Some(ch) = Cholesky::new(shifted) {
            log::debug!("cholesky succeeded with jitter {jitter:e}");
            return Ok((ch, jitter));
        }
        rel *= 10.0;
    }
    Err(Error::Numerical(format!(
        "{n}x{n} matrix is not positive definite even after jitter {:e}·trace",
        JITTER_MAX
    )))
}

/// Inverse of a symmetric positive-definite matrix, symmetrized.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (ch, _) = cholesky_with_jitter(m)?;
    Ok(symmetrize(&ch.inverse()))
}

/// Principal square root of a symmetric positive semi-definite matrix via
/// eigendecomposition. Eigenvalues within roundoff of zero (or negative) are set to zero.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let floor = eig.eigenvalues.amax() * m.nrows() as f64 * f64::EPSILON;
    let roots = eig.eigenvalues.map(|l| if l <= floor { 0.0 } else { l.sqrt() });
    let v = &eig.eigenvectors;
    symmetrize(&(v * DMatrix::from_diagonal(&roots) * v.transpose()))
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetrize(m)).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}
