//! Dense linear-algebra helpers: matrix exponential, first-order-hold
//! convolution weights, the continuous Lyapunov equation and a few norms.
//!
//! Everything here works on small `DMatrix<f64>` (state dimensions of a
//! handful), so clarity wins over blocking or workspace reuse.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Truncation target for the Taylor core of [`expm`].
const EXPM_TOL: f64 = 1e-18;
const EXPM_MAX_TERMS: usize = 40;

/// Matrix exponential by scaling and squaring around a Taylor core.
///
/// The argument is scaled by `2^-s` until its 1-norm is at most 1/2, the
/// series is summed until the next term drops below `1e-18` relative to
/// the partial sum, and the result is squared `s` times.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(a.is_square(), "expm needs a square matrix");
    let n = a.nrows();
    let norm = norm_1(a);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a * 2f64.powi(-squarings);

    let mut sum = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..=EXPM_MAX_TERMS {
        term = &term * &scaled / k as f64;
        sum += &term;
        if norm_1(&term) <= EXPM_TOL * norm_1(&sum) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Maximum absolute column sum.
pub fn norm_1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Spectral norm (largest singular value); Euclidean norm for vectors.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 1 || a.ncols() == 1 {
        return a.norm();
    }
    a.clone().svd(false, false).singular_values.max()
}

/// Largest real part over the eigenvalues of a square matrix.
pub fn max_real_eigenvalue(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 1 {
        return a[(0, 0)];
    }
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_symmetric_eigenvalue(a: &DMatrix<f64>) -> f64 {
    a.clone().symmetric_eigenvalues().min()
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_symmetric_eigenvalue(a: &DMatrix<f64>) -> f64 {
    a.clone().symmetric_eigenvalues().max()
}

/// Weights for integrating `e^{F s} g(s)` over one cell `s in [0, width]`
/// when `g` is the linear interpolant between a "far" value at `s = width`
/// and a "near" value at `s = 0`.
#[derive(Debug, Clone)]
pub struct HoldWeights {
    /// `e^{F width}`
    pub transition: DMatrix<f64>,
    /// multiplies the value at `s = width`
    pub far: DMatrix<f64>,
    /// multiplies the value at `s = 0`
    pub near: DMatrix<f64>,
}

/// First-order-hold weights from a single block exponential (Van Loan).
pub fn hold_weights(f: &DMatrix<f64>, width: f64) -> HoldWeights {
    let n = f.nrows();
    if width == 0.0 {
        return HoldWeights {
            transition: DMatrix::identity(n, n),
            far: DMatrix::zeros(n, n),
            near: DMatrix::zeros(n, n),
        };
    }
    let mut block = DMatrix::<f64>::zeros(3 * n, 3 * n);
    block.view_mut((0, 0), (n, n)).copy_from(f);
    for i in 0..n {
        block[(i, n + i)] = 1.0;
        block[(n + i, 2 * n + i)] = 1.0;
    }
    let e = expm(&(block * width));
    let transition = e.view((0, 0), (n, n)).into_owned();
    // ∫ e^{Fs} ds and ∫ e^{Fs} (width - s) ds
    let g1 = e.view((0, n), (n, n)).into_owned();
    let g_rev = e.view((0, 2 * n), (n, n)).into_owned();
    let g2 = &g1 * width - g_rev;
    let far = &g2 / width;
    let near = g1 - &far;
    HoldWeights { transition, far, near }
}

/// Solve `Aᵀ P + P A = -Q` for symmetric `P`.
///
/// The equation is vectorized with Kronecker products and solved by LU;
/// state dimensions here are tiny, so the `n² × n²` system is cheap.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if !a.is_square() || q.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "Lyapunov equation needs square A and Q of equal size, got {:?} and {:?}",
            a.shape(),
            q.shape()
        )));
    }
    let eye = DMatrix::<f64>::identity(n, n);
    let at = a.transpose();
    let op = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = DVector::from_iterator(n * n, q.iter().map(|v| -v));
    let sol = op
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Linalg("singular Lyapunov operator".into()))?;
    let p = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok((&p + p.transpose()) * 0.5)
}

/// Spectral-norm residual of `Aᵀ P + P A + Q`, relative to `|Q|`.
pub fn lyapunov_residual(a: &DMatrix<f64>, p: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    let r = a.transpose() * p + p * a + q;
    spectral_norm(&r) / spectral_norm(q).max(f64::MIN_POSITIVE)
}
