//! Dense numerical utilities on rectangular matrices.
//!
//! The engine needs reliable rank / nullspace decisions at small sizes
//! (subalgebra closure, little algebras, constraint classification). These
//! are built on a one-sided Jacobi SVD, which computes small singular
//! values accurately enough for tight nullspace thresholds to be meaningful.

use alloc::vec;
use alloc::vec::Vec;

use crate::mat::Mat;

/// Rectangular dense matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Rect {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Rect {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Rect { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    /// Build from column vectors (all of equal length).
    pub fn from_columns(cols: &[Vec<f64>]) -> Self {
        let ncols = cols.len();
        let nrows = if ncols == 0 { 0 } else { cols[0].len() };
        let mut r = Rect::zeros(nrows, ncols);
        for (j, col) in cols.iter().enumerate() {
            assert_eq!(col.len(), nrows, "column length mismatch");
            for (i, &v) in col.iter().enumerate() {
                r.set(i, j, v);
            }
        }
        r
    }

    /// Columns are the flattened entries of the given square matrices.
    pub fn from_mat_columns(mats: &[Mat]) -> Self {
        let cols: Vec<Vec<f64>> = mats.iter().map(|m| m.entries().to_vec()).collect();
        Rect::from_columns(&cols)
    }

    /// Stack `self` on top of `other` (same column count).
    pub fn vstack(&self, other: &Rect) -> Rect {
        assert_eq!(self.cols, other.cols, "vstack column mismatch");
        let mut out = Rect::zeros(self.rows + other.rows, self.cols);
        out.data[..self.data.len()].copy_from_slice(&self.data);
        out.data[self.data.len()..].copy_from_slice(&other.data);
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec size mismatch");
        let mut y = vec![0.0; self.rows];
        for i in 0..self.rows {
            let mut s = 0.0;
            for j in 0..self.cols {
                s += self.get(i, j) * x[j];
            }
            y[i] = s;
        }
        y
    }

    pub fn matmul(&self, other: &Rect) -> Rect {
        assert_eq!(self.cols, other.rows, "matmul size mismatch");
        let mut out = Rect::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j) + a * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Rect {
        let mut out = Rect::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }
}

/// Singular value decomposition data: `a = u * diag(sigma) * v^T` with the
/// singular values sorted in descending order. Only the "thin" columns of
/// `u` corresponding to nonzero singular values are meaningful.
pub struct Svd {
    pub sigma: Vec<f64>,
    pub u: Rect,
    pub v: Rect,
}

/// One-sided Jacobi SVD. Columns of `a * v` come out orthogonal with norms
/// `sigma`; small singular values are computed with high relative accuracy,
/// which is what makes tiny nullspace thresholds trustworthy.
pub fn jacobi_svd(a: &Rect) -> Svd {
    let m = a.rows;
    let k = a.cols;
    let mut w = a.clone();
    let mut v = Rect::zeros(k, k);
    for j in 0..k {
        v.set(j, j, 1.0);
    }

    let col_dot = |w: &Rect, p: usize, q: usize| -> f64 {
        let mut s = 0.0;
        for i in 0..m {
            s += w.get(i, p) * w.get(i, q);
        }
        s
    };

    let max_sweeps = 60;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..k {
            for q in p + 1..k {
                let app = col_dot(&w, p, p);
                let aqq = col_dot(&w, q, q);
                let apq = col_dot(&w, p, q);
                if apq.abs() <= 1e-15 * libm::sqrt(app * aqq) || apq == 0.0 {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + libm::sqrt(1.0 + tau * tau))
                } else {
                    -1.0 / (-tau + libm::sqrt(1.0 + tau * tau))
                };
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                for i in 0..m {
                    let wp = w.get(i, p);
                    let wq = w.get(i, q);
                    w.set(i, p, c * wp - s * wq);
                    w.set(i, q, s * wp + c * wq);
                }
                for i in 0..k {
                    let vp = v.get(i, p);
                    let vq = v.get(i, q);
                    v.set(i, p, c * vp - s * vq);
                    v.set(i, q, s * vp + c * vq);
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..k).collect();
    let mut sigma: Vec<f64> = (0..k).map(|j| libm::sqrt(col_dot(&w, j, j))).collect();
    order.sort_by(|&a, &b| sigma[b].partial_cmp(&sigma[a]).unwrap());

    let mut u = Rect::zeros(m, k);
    let mut v_sorted = Rect::zeros(k, k);
    let mut sigma_sorted = vec![0.0; k];
    for (newj, &oldj) in order.iter().enumerate() {
        sigma_sorted[newj] = sigma[oldj];
        for i in 0..k {
            v_sorted.set(i, newj, v.get(i, oldj));
        }
        if sigma[oldj] > 0.0 {
            for i in 0..m {
                u.set(i, newj, w.get(i, oldj) / sigma[oldj]);
            }
        }
    }
    sigma.clear();
    Svd { sigma: sigma_sorted, u, v: v_sorted }
}

/// Number of singular values above `tol`.
pub fn rank(a: &Rect, tol: f64) -> usize {
    jacobi_svd(a).sigma.iter().filter(|&&s| s > tol).count()
}

/// Orthonormal basis (as coefficient vectors) of `{x : a x = 0}`, taking
/// singular values at or below `tol` as zero.
pub fn nullspace(a: &Rect, tol: f64) -> Vec<Vec<f64>> {
    let svd = jacobi_svd(a);
    let k = a.cols;
    let mut basis = Vec::new();
    for j in 0..k {
        if svd.sigma[j] <= tol {
            basis.push((0..k).map(|i| svd.v.get(i, j)).collect());
        }
    }
    basis
}

/// Moore-Penrose pseudo-inverse with singular values below `tol` dropped.
pub fn pseudo_inverse(a: &Rect, tol: f64) -> Rect {
    let svd = jacobi_svd(a);
    let k = a.cols;
    let m = a.rows;
    let mut out = Rect::zeros(k, m);
    for j in 0..k {
        if svd.sigma[j] <= tol {
            continue;
        }
        let inv = 1.0 / svd.sigma[j];
        for i in 0..k {
            for r in 0..m {
                let v = out.get(i, r) + svd.v.get(i, j) * inv * svd.u.get(r, j);
                out.set(i, r, v);
            }
        }
    }
    out
}

/// Least-squares solution of `a x = b` through the SVD, dropping singular
/// values at or below `tol`.
pub fn lstsq(a: &Rect, b: &[f64], tol: f64) -> Vec<f64> {
    assert_eq!(b.len(), a.rows, "rhs length mismatch");
    let svd = jacobi_svd(a);
    let k = a.cols;
    let mut x = vec![0.0; k];
    for j in 0..k {
        if svd.sigma[j] <= tol {
            continue;
        }
        let mut ub = 0.0;
        for i in 0..a.rows {
            ub += svd.u.get(i, j) * b[i];
        }
        let f = ub / svd.sigma[j];
        for i in 0..k {
            x[i] += f * svd.v.get(i, j);
        }
    }
    x
}

/// Composite Simpson quadrature on a uniform grid with spacing `dt`.
/// Falls back to a 3/8 block at the end when the interval count is odd,
/// keeping the overall error at fourth order.
pub fn simpson(dt: f64, values: &[f64]) -> f64 {
    let n = values.len();
    assert!(n >= 2, "need at least two samples");
    if n == 2 {
        return dt * 0.5 * (values[0] + values[1]);
    }
    let intervals = n - 1;
    let (simpson_end, mut total) = if intervals % 2 == 0 {
        (n - 1, 0.0)
    } else {
        // Simpson 3/8 on the last three intervals.
        let m = n - 4;
        let tail = dt * 3.0 / 8.0
            * (values[m] + 3.0 * values[m + 1] + 3.0 * values[m + 2] + values[m + 3]);
        (m, tail)
    };
    let mut i = 0;
    while i + 2 <= simpson_end {
        total += dt / 3.0 * (values[i] + 4.0 * values[i + 1] + values[i + 2]);
        i += 2;
    }
    total
}
