//! Group factorizations `g = g_A * g_B`.
//!
//! Two factorization flavours back the solve-by-factorization route:
//!
//! * [`gauss_factorize`]: `g_A` unit upper triangular, `g_B` lower
//!   triangular. This is the "UL" orientation (the A-factor on the left),
//!   realized by unpivoted elimination on the trailing minors; it exists
//!   only on an open subset of the group and failure is meaningful data.
//! * [`iwasawa_factorize`]: `g_A` orthogonal, `g_B` lower triangular with
//!   strictly positive diagonal. Global: succeeds for every invertible `g`.
//!
//! The factor order is fixed; swapping it would silently change every
//! downstream formula that conjugates by `g_A`.

use crate::error::{Error, Result};
use crate::mat::Mat;

/// Default relative pivot tolerance deciding factorizability.
pub const PIVOT_TOL: f64 = 1e-10;

/// Reverse both row and column order: `J g J` with `J` the exchange matrix.
fn exchange(g: &Mat) -> Mat {
    let n = g.n();
    let mut out = Mat::zeros(n);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = g[(n - 1 - i, n - 1 - j)];
        }
    }
    out
}

/// Gauss ("UL") factorization `g = g_A g_B` with `g_A` unit upper
/// triangular and `g_B` lower triangular, using the default pivot
/// tolerance. See [`gauss_factorize_tol`].
pub fn gauss_factorize(g: &Mat) -> Result<(Mat, Mat)> {
    gauss_factorize_tol(g, PIVOT_TOL)
}

/// Gauss factorization with an explicit relative pivot tolerance.
///
/// Elimination runs on the exchanged matrix `J g J` without pivoting, so
/// the pivots are exactly the trailing-minor ratios of `g`; a pivot whose
/// magnitude falls below `tol` times its row maximum signals that `g` lies
/// outside the open factorizable set and yields
/// [`Error::NotInCheckedDomain`].
pub fn gauss_factorize_tol(g: &Mat, tol: f64) -> Result<(Mat, Mat)> {
    let n = g.n();
    let rev = exchange(g);
    let mut u = rev.clone();
    let mut l = Mat::identity(n);
    for k in 0..n {
        let row_max = (0..n).fold(0.0f64, |acc, j| acc.max(rev[(k, j)].abs()));
        let piv = u[(k, k)];
        if !piv.is_finite() || piv.abs() < tol * row_max.max(f64::MIN_POSITIVE) {
            return Err(Error::NotInCheckedDomain { pivot_index: k });
        }
        for i in k + 1..n {
            let f = u[(i, k)] / piv;
            l[(i, k)] = f;
            for j in k..n {
                u[(i, j)] -= f * u[(k, j)];
            }
        }
    }
    Ok((exchange(&l), exchange(&u)))
}

/// Iwasawa ("QL") factorization `g = g_A g_B` with `g_A` orthogonal and
/// `g_B` lower triangular with strictly positive diagonal.
///
/// Implemented as Householder QR of the exchanged matrix, with the sign
/// convention absorbed into `g_A` so the decomposition is unique. Succeeds
/// for every invertible `g`; singular input is an error.
pub fn iwasawa_factorize(g: &Mat) -> Result<(Mat, Mat)> {
    let n = g.n();
    if !g.is_finite() {
        return Err(Error::NonFinite);
    }
    let mut r = exchange(g);
    let mut q = Mat::identity(n);
    for k in 0..n {
        let mut col_norm2 = 0.0;
        for i in k..n {
            col_norm2 += r[(i, k)] * r[(i, k)];
        }
        let col_norm = libm::sqrt(col_norm2);
        // Only an identically collapsed column is rejected: the
        // factorization itself is backward stable however ill-conditioned
        // `g` is, and long-time flows legitimately produce factors whose
        // diagonal spans hundreds of orders of magnitude.
        if col_norm <= f64::MIN_POSITIVE * n as f64 {
            return Err(Error::Singular);
        }
        let alpha = -libm::copysign(col_norm, r[(k, k)]);
        let mut v = alloc::vec![0.0; n];
        v[k] = r[(k, k)] - alpha;
        for i in k + 1..n {
            v[i] = r[(i, k)];
        }
        let vnorm2: f64 = v[k..].iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        // r <- H r, q <- q H with H = I - 2 v v^T / vnorm2
        for j in 0..n {
            let mut dot = 0.0;
            for i in k..n {
                dot += v[i] * r[(i, j)];
            }
            let f = 2.0 * dot / vnorm2;
            for i in k..n {
                r[(i, j)] -= f * v[i];
            }
        }
        for i in 0..n {
            let mut dot = 0.0;
            for j in k..n {
                dot += q[(i, j)] * v[j];
            }
            let f = 2.0 * dot / vnorm2;
            for j in k..n {
                q[(i, j)] -= f * v[j];
            }
        }
    }
    // Positive diagonal on the triangular factor.
    for i in 0..n {
        if r[(i, i)] < 0.0 {
            for j in 0..n {
                r[(i, j)] = -r[(i, j)];
                q[(j, i)] = -q[(j, i)];
            }
        }
        if r[(i, i)] == 0.0 {
            return Err(Error::Singular);
        }
    }
    Ok((exchange(&q), exchange(&r)))
}

/// `m` is unit upper triangular to tolerance `tol`.
pub fn is_unit_upper(m: &Mat, tol: f64) -> bool {
    let n = m.n();
    for i in 0..n {
        if (m[(i, i)] - 1.0).abs() > tol {
            return false;
        }
        for j in 0..i {
            if m[(i, j)].abs() > tol {
                return false;
            }
        }
    }
    true
}

/// `m` is lower triangular to tolerance `tol`; with `positive_diag`, the
/// diagonal must additionally be strictly positive (the connected group).
pub fn is_lower_triangular(m: &Mat, tol: f64, positive_diag: bool) -> bool {
    let n = m.n();
    for i in 0..n {
        if positive_diag && m[(i, i)] <= 0.0 {
            return false;
        }
        for j in i + 1..n {
            if m[(i, j)].abs() > tol {
                return false;
            }
        }
    }
    true
}

/// `m^T m = I` to tolerance `tol`.
pub fn is_orthogonal(m: &Mat, tol: f64) -> bool {
    (&m.transpose().matmul(m) - &Mat::identity(m.n())).norm_max() <= tol
}
