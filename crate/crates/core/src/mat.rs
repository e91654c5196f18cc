//! Minimal dense real-matrix kernel.
//!
//! Square matrices over `f64` with the handful of operations the engine
//! needs: arithmetic, the commutator bracket, the trace form, LU-based
//! inversion, the matrix exponential and characteristic-polynomial
//! coefficients. Group elements `g` and algebra elements `X` are both
//! plain [`Mat`] values; all operations are pure and never mutate their
//! inputs.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Dense square matrix, row-major storage.
#[derive(Clone, PartialEq)]
pub struct Mat {
    n: usize,
    data: Vec<f64>,
}

impl Mat {
    /// Zero matrix of size `n`.
    pub fn zeros(n: usize) -> Self {
        Mat { n, data: vec![0.0; n * n] }
    }

    /// Identity matrix of size `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Elementary matrix `E_ij` (1 in row `i`, column `j`, zero elsewhere).
    pub fn elementary(n: usize, i: usize, j: usize) -> Self {
        let mut m = Mat::zeros(n);
        m[(i, j)] = 1.0;
        m
    }

    /// Build from a flat row-major vector of length `n * n`.
    pub fn from_vec(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n, "flat data length must be n*n");
        Mat { n, data }
    }

    /// Build from explicit rows.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            assert_eq!(row.len(), n, "matrix must be square");
            data.extend_from_slice(row);
        }
        Mat { n, data }
    }

    /// Matrix size (rows = columns).
    pub fn n(&self) -> usize {
        self.n
    }

    /// Flat row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    /// Largest absolute entry.
    pub fn norm_max(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, &x| acc.max(x.abs()))
    }

    /// Maximum absolute column sum (operator 1-norm).
    pub fn norm_one(&self) -> f64 {
        let mut best = 0.0f64;
        for j in 0..self.n {
            let s: f64 = (0..self.n).map(|i| self[(i, j)].abs()).sum();
            best = best.max(s);
        }
        best
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn scale(&self, c: f64) -> Mat {
        Mat {
            n: self.n,
            data: self.data.iter().map(|x| c * x).collect(),
        }
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.n, other.n, "matmul size mismatch");
        let n = self.n;
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// Commutator `[X, Y] = XY - YX`.
    pub fn bracket(&self, other: &Mat) -> Mat {
        &self.matmul(other) - &other.matmul(self)
    }

    /// Trace form `<X, Y> = tr(XY)`; symmetric and Ad-invariant.
    pub fn trace_form(&self, other: &Mat) -> f64 {
        assert_eq!(self.n, other.n, "trace_form size mismatch");
        let n = self.n;
        let mut s = 0.0;
        for i in 0..n {
            for k in 0..n {
                s += self[(i, k)] * other[(k, i)];
            }
        }
        s
    }

    /// LU decomposition with partial pivoting, returning `(lu, perm, sign)`.
    /// The factors are packed: unit lower in the strict lower triangle,
    /// upper in the rest. Fails on singular input.
    fn lu(&self) -> Result<(Mat, Vec<usize>, f64)> {
        let n = self.n;
        let mut lu = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let scale = self.norm_max().max(1.0);
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].abs();
            for i in k + 1..n {
                let v = lu[(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= 1e-14 * scale {
                return Err(Error::Singular);
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let piv = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / piv;
                lu[(i, k)] = f;
                for j in k + 1..n {
                    lu[(i, j)] -= f * lu[(k, j)];
                }
            }
        }
        Ok((lu, perm, sign))
    }

    /// Solve `self * X = rhs` for a matrix right-hand side.
    pub fn solve(&self, rhs: &Mat) -> Result<Mat> {
        assert_eq!(self.n, rhs.n, "solve size mismatch");
        let n = self.n;
        let (lu, perm, _) = self.lu()?;
        let mut x = Mat::zeros(n);
        for col in 0..n {
            // forward substitution on permuted rhs
            let mut y = vec![0.0; n];
            for i in 0..n {
                let mut s = rhs[(perm[i], col)];
                for j in 0..i {
                    s -= lu[(i, j)] * y[j];
                }
                y[i] = s;
            }
            for i in (0..n).rev() {
                let mut s = y[i];
                for j in i + 1..n {
                    s -= lu[(i, j)] * x[(j, col)];
                }
                x[(i, col)] = s / lu[(i, i)];
            }
        }
        Ok(x)
    }

    /// Matrix inverse; errors on singular input.
    pub fn inverse(&self) -> Result<Mat> {
        self.solve(&Mat::identity(self.n))
    }

    pub fn det(&self) -> f64 {
        match self.lu() {
            Ok((lu, _, sign)) => {
                let mut d = sign;
                for i in 0..self.n {
                    d *= lu[(i, i)];
                }
                d
            }
            Err(_) => 0.0,
        }
    }

    /// Matrix exponential by scaling-and-squaring with the order-13 Pade
    /// approximant (Higham 2005). Relative accuracy is at roundoff level
    /// for moderate norms; overflow is reported as an error.
    pub fn exp(&self) -> Result<Mat> {
        if !self.is_finite() {
            return Err(Error::NonFinite);
        }
        let n = self.n;
        let theta13 = 5.371920351148152;
        let norm = self.norm_one();
        let s = if norm > theta13 {
            libm::ceil(libm::log2(norm / theta13)) as i32
        } else {
            0
        };
        let a = self.scale(libm::scalbn(1.0, -s));

        // Pade(13) numerator/denominator coefficients.
        const B: [f64; 14] = [
            64764752532480000.0,
            32382376266240000.0,
            7771770303897600.0,
            1187353796428800.0,
            129060195264000.0,
            10559470521600.0,
            670442572800.0,
            33522128640.0,
            1323241920.0,
            40840800.0,
            960960.0,
            16380.0,
            182.0,
            1.0,
        ];
        let eye = Mat::identity(n);
        let a2 = a.matmul(&a);
        let a4 = a2.matmul(&a2);
        let a6 = a2.matmul(&a4);
        let w1 = &(&a6.scale(B[13]) + &a4.scale(B[11])) + &a2.scale(B[9]);
        let w2 = &(&(&a6.scale(B[7]) + &a4.scale(B[5])) + &a2.scale(B[3])) + &eye.scale(B[1]);
        let u = a.matmul(&(&a6.matmul(&w1) + &w2));
        let z1 = &(&a6.scale(B[12]) + &a4.scale(B[10])) + &a2.scale(B[8]);
        let v = &(&(&a6.matmul(&z1) + &a6.scale(B[6])) + &a4.scale(B[4]))
            + &(&a2.scale(B[2]) + &eye.scale(B[0]));

        // exp(A) ~ (V - U)^{-1} (V + U), then undo the scaling by squaring.
        let mut r = (&v - &u).solve(&(&v + &u))?;
        for _ in 0..s {
            r = r.matmul(&r);
        }
        if !r.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(r)
    }

    /// Coefficients `c` of the characteristic polynomial
    /// `det(lambda I - A) = lambda^n + c[n-1] lambda^(n-1) + ... + c[0]`,
    /// computed by the Faddeev-LeVerrier recursion (exact in the traces,
    /// no eigen-solver involved).
    pub fn char_poly(&self) -> Vec<f64> {
        let n = self.n;
        let mut coeffs = vec![0.0; n];
        let mut m = Mat::identity(n);
        for k in 1..=n {
            let am = self.matmul(&m);
            let c = -am.trace() / k as f64;
            coeffs[n - k] = c;
            if k < n {
                m = &am + &Mat::identity(n).scale(c);
            }
        }
        coeffs
    }

    /// Traces of powers `tr(A^k)` for `k = 2..=n`.
    pub fn power_traces(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n.saturating_sub(1));
        let mut p = self.clone();
        for _ in 2..=self.n {
            p = p.matmul(self);
            out.push(p.trace());
        }
        out
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

impl Add for &Mat {
    type Output = Mat;
    fn add(self, rhs: &Mat) -> Mat {
        assert_eq!(self.n, rhs.n, "add size mismatch");
        Mat {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(rhs.data.iter())
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &Mat {
    type Output = Mat;
    fn sub(self, rhs: &Mat) -> Mat {
        assert_eq!(self.n, rhs.n, "sub size mismatch");
        Mat {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(rhs.data.iter())
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Neg for &Mat {
    type Output = Mat;
    fn neg(self) -> Mat {
        self.scale(-1.0)
    }
}

impl Mul for &Mat {
    type Output = Mat;
    fn mul(self, rhs: &Mat) -> Mat {
        self.matmul(rhs)
    }
}

impl Mul<f64> for &Mat {
    type Output = Mat;
    fn mul(self, c: f64) -> Mat {
        self.scale(c)
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.n, self.n)?;
        for i in 0..self.n {
            write!(f, "  ")?;
            for j in 0..self.n {
                write!(f, "{:>12.6} ", self[(i, j)])?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mat(n: usize, rng: &mut ChaCha8Rng) -> Mat {
        let mut m = Mat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = rng.gen_range(-1.0..1.0);
            }
        }
        m
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let e = Mat::zeros(3).exp().unwrap();
        assert!((&e - &Mat::identity(3)).norm_max() < 1e-15);
    }

    #[test]
    fn exp_of_nilpotent_terminates() {
        // E_12 squares to zero, so exp(E_12) = I + E_12 exactly.
        let e12 = Mat::elementary(2, 0, 1);
        let e = e12.exp().unwrap();
        let expected = &Mat::identity(2) + &e12;
        assert!((&e - &expected).norm_max() < 1e-15);
    }

    #[test]
    fn exp_of_diagonal_matches_scalar_exp() {
        let d = Mat::from_rows(&[&[1.0, 0.0], &[0.0, -1.0]]);
        let e = d.exp().unwrap();
        let expected = Mat::from_rows(&[&[libm::exp(1.0), 0.0], &[0.0, libm::exp(-1.0)]]);
        assert!((&e - &expected).norm_max() < 1e-14);
    }

    #[test]
    fn exp_inverse_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 2..=5 {
            for _ in 0..20 {
                let raw = random_mat(n, &mut rng);
                let x = raw.scale(5.0 / raw.norm_one());
                let e = x.exp().unwrap();
                let em = x.scale(-1.0).exp().unwrap();
                assert!((&e.matmul(&em) - &Mat::identity(n)).norm_max() < 1e-12);
            }
        }
    }

    #[test]
    fn exp_accurate_at_norm_ten() {
        // closed form through an orthogonal conjugation: for
        // X = Q diag(10, -10) Q^T, exp(X) = Q diag(e^10, e^-10) Q^T.
        let th = 0.83;
        let (c, s) = (libm::cos(th), libm::sin(th));
        let q = Mat::from_rows(&[&[c, -s], &[s, c]]);
        let d = Mat::from_rows(&[&[10.0, 0.0], &[0.0, -10.0]]);
        let x = &(&q * &d) * &q.transpose();
        let ed = Mat::from_rows(&[&[libm::exp(10.0), 0.0], &[0.0, libm::exp(-10.0)]]);
        let expect = &(&q * &ed) * &q.transpose();
        let got = x.exp().unwrap();
        let rel = (&got - &expect).norm_max() / expect.norm_max();
        assert!(rel <= 1e-12, "relative error {rel:e}");
    }

    #[test]
    fn exp_overflow_reports_error() {
        let big = Mat::identity(2).scale(1e4);
        assert_eq!(big.exp(), Err(Error::NonFinite));
    }

    #[test]
    fn bracket_of_elementaries() {
        let e12 = Mat::elementary(2, 0, 1);
        let e21 = Mat::elementary(2, 1, 0);
        let b = e12.bracket(&e21);
        let expected = &Mat::elementary(2, 0, 0) - &Mat::elementary(2, 1, 1);
        assert!((&b - &expected).norm_max() == 0.0);
        assert_eq!(e12.trace_form(&e21), 1.0);
    }

    #[test]
    fn trace_form_is_conjugation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..25 {
            let x = random_mat(3, &mut rng);
            let y = random_mat(3, &mut rng);
            let g = (&Mat::identity(3) + &random_mat(3, &mut rng).scale(0.3))
                .clone();
            let gi = g.inverse().unwrap();
            let xc = &(&g * &x) * &gi;
            let yc = &(&g * &y) * &gi;
            assert!((xc.trace_form(&yc) - x.trace_form(&y)).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_and_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 2..=5 {
            let a = &Mat::identity(n) + &random_mat(n, &mut rng).scale(0.5);
            let ai = a.inverse().unwrap();
            assert!((&a.matmul(&ai) - &Mat::identity(n)).norm_max() < 1e-12);
        }
        assert_eq!(Mat::zeros(3).inverse(), Err(Error::Singular));
    }

    #[test]
    fn char_poly_known_cases() {
        // [[2,1],[1,2]] has eigenvalues 1, 3: p = l^2 - 4 l + 3.
        let a = Mat::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let c = a.char_poly();
        assert!((c[1] + 4.0).abs() < 1e-14);
        assert!((c[0] - 3.0).abs() < 1e-14);
        // traces of powers
        let pt = a.power_traces();
        assert_eq!(pt.len(), 1);
        assert!((pt[0] - 10.0).abs() < 1e-14);
    }

    #[test]
    fn char_poly_is_similarity_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let a = random_mat(4, &mut rng);
        let g = &Mat::identity(4) + &random_mat(4, &mut rng).scale(0.4);
        let gi = g.inverse().unwrap();
        let conj = &(&g * &a) * &gi;
        let ca = a.char_poly();
        let cb = conj.char_poly();
        for (x, y) in ca.iter().zip(cb.iter()) {
            assert!((x - y).abs() < 1e-11);
        }
    }
}
