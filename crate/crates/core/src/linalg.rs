//! Small dense helpers: continuous Lyapunov solves and stability tests.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::gaussian::{symmetrize, Mat};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not Hurwitz (max real eigenvalue {0:e})")]
    NotHurwitz(f64),
    #[error("Lyapunov operator is singular")]
    Singular,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Largest real part among the eigenvalues of `a`.
pub fn spectral_abscissa(a: &Mat) -> f64 {
    a.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn is_hurwitz(a: &Mat) -> bool {
    let s = spectral_abscissa(a);
    s.is_finite() && s < 0.0
}

/// Solves `A X + X Aᵀ + W = 0` through the vectorised form
/// `(I ⊗ A + A ⊗ I) vec(X) = −vec(W)`. Sizes here stay below ~12, so the
/// Kronecker system is tiny.
pub fn lyapunov_unchecked(a: &Mat, w: &Mat) -> Result<Mat, LinalgError> {
    let n = a.nrows();
    if !a.is_square() || w.shape() != (n, n) {
        return Err(LinalgError::Dimension(format!(
            "A {:?}, W {:?}",
            a.shape(),
            w.shape()
        )));
    }
    let nn = n * n;
    let mut op = DMatrix::<f64>::zeros(nn, nn);
    // column-major vec: index(i, j) = i + n j
    for j in 0..n {
        for i in 0..n {
            let row = i + n * j;
            for k in 0..n {
                op[(row, k + n * j)] += a[(i, k)];
                op[(row, i + n * k)] += a[(j, k)];
            }
        }
    }
    let rhs = nalgebra::DVector::from_iterator(nn, w.iter().map(|v| -v));
    let sol = op.lu().solve(&rhs).ok_or(LinalgError::Singular)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::Singular);
    }
    Ok(symmetrize(&Mat::from_column_slice(n, n, sol.as_slice())))
}

/// Stationary covariance of `dx = A x dt + noise` with diffusion `W`; `A`
/// must be Hurwitz.
pub fn lyapunov(a: &Mat, w: &Mat) -> Result<Mat, LinalgError> {
    let s = spectral_abscissa(a);
    if !(s < 0.0) {
        return Err(LinalgError::NotHurwitz(s));
    }
    lyapunov_unchecked(a, w)
}

/// Symmetric PSD square root via eigendecomposition; negative eigenvalues
/// from roundoff are clipped to zero.
pub fn psd_sqrt(m: &Mat) -> Mat {
    let eig = symmetrize(m).symmetric_eigen();
    let d = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * Mat::from_diagonal(&d) * eig.eigenvectors.transpose()
}
