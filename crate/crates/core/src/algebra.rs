//! Lie algebra with an invariant scalar product and a two-subalgebra
//! splitting.
//!
//! The working algebra `G` is a basis-spanned subspace of the ambient
//! `gl(n, R)`, carrying the trace form `<X, Y> = tr(XY)`. A [`Splitting`]
//! `G = A + B` into two subalgebras induces the dual decomposition
//! `G = A-perp + B-perp`, identifying `A* ~ B-perp` and `B* ~ A-perp`.
//! All four projectors are realized through dual bases solved once at
//! build time from the Gram pairings.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::numeric::{self, Rect};

/// Relative tolerance for "element lies in the span" checks.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Residual threshold for subalgebra closure checks.
pub const CLOSURE_TOL: f64 = 1e-10;

/// Matrix Lie algebra: a subspace of `gl(n, R)` spanned by `basis`, with
/// the trace form as invariant scalar product.
#[derive(Clone, Debug)]
pub struct MatrixAlgebra {
    n: usize,
    basis: Vec<Mat>,
    dual: Vec<Mat>,
    gram: Mat,
    basis_pinv: Rect,
}

impl MatrixAlgebra {
    /// Build the algebra from a spanning basis, checking linear
    /// independence, nondegeneracy of the trace form on the span, and
    /// closure under the bracket.
    pub fn new(n: usize, basis: Vec<Mat>) -> Result<Self> {
        let dim = basis.len();
        assert!(dim > 0, "empty basis");
        for b in &basis {
            assert_eq!(b.n(), n, "basis element size mismatch");
        }
        let cols = Rect::from_mat_columns(&basis);
        if numeric::rank(&cols, 1e-10) != dim {
            return Err(Error::DegenerateForm);
        }
        let basis_pinv = numeric::pseudo_inverse(&cols, 1e-12);

        let mut gram = Mat::zeros(dim);
        for a in 0..dim {
            for b in 0..dim {
                gram[(a, b)] = basis[a].trace_form(&basis[b]);
            }
        }
        let gram_inv = gram.inverse().map_err(|_| Error::DegenerateForm)?;
        let dual: Vec<Mat> = (0..dim)
            .map(|a| {
                let mut t = Mat::zeros(n);
                for b in 0..dim {
                    t = &t + &basis[b].scale(gram_inv[(a, b)]);
                }
                t
            })
            .collect();

        let algebra = MatrixAlgebra { n, basis, dual, gram, basis_pinv };

        for i in 0..dim {
            for j in i + 1..dim {
                let br = algebra.basis[i].bracket(&algebra.basis[j]);
                let res = algebra.membership_residual(&br);
                if res > CLOSURE_TOL * br.norm_max().max(1.0) {
                    return Err(Error::NotSubalgebra { residual: res });
                }
            }
        }
        Ok(algebra)
    }

    /// The special linear algebra `sl(n, R)` with its standard basis:
    /// off-diagonal elementary matrices plus the diagonal differences.
    pub fn sl(n: usize) -> Self {
        assert!(n >= 2);
        let mut basis = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    basis.push(Mat::elementary(n, i, j));
                }
            }
        }
        for i in 0..n - 1 {
            basis.push(&Mat::elementary(n, i, i) - &Mat::elementary(n, i + 1, i + 1));
        }
        MatrixAlgebra::new(n, basis).expect("sl(n) basis is always valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Basis `{T_a}`.
    pub fn basis(&self) -> &[Mat] {
        &self.basis
    }

    /// Dual basis `{T^a}` with `<T^a, T_b> = delta^a_b`.
    pub fn dual_basis(&self) -> &[Mat] {
        &self.dual
    }

    pub fn gram(&self) -> &Mat {
        &self.gram
    }

    /// Least-squares coordinates of `x` over the basis (Euclidean sense;
    /// exact for members of the span).
    pub fn coords(&self, x: &Mat) -> Vec<f64> {
        self.basis_pinv.matvec(x.entries())
    }

    /// Max-norm residual of `x` against its projection into the span.
    pub fn membership_residual(&self, x: &Mat) -> f64 {
        let c = self.coords(x);
        let mut rec = Mat::zeros(self.n);
        for (ci, b) in c.iter().zip(self.basis.iter()) {
            rec = &rec + &b.scale(*ci);
        }
        (&rec - x).norm_max()
    }

    /// `x` lies in the span, to the relative membership tolerance.
    pub fn contains(&self, x: &Mat) -> bool {
        self.membership_residual(x) <= MEMBERSHIP_TOL * x.norm_max().max(1.0)
    }

    /// Pin an ambient element to the algebra: `sum_a <w, T_a> T^a`. Leaves
    /// members of the span fixed and has the same pairings against the
    /// algebra as `w`.
    pub fn canonicalize(&self, w: &Mat) -> Mat {
        let mut out = Mat::zeros(self.n);
        for (t, td) in self.basis.iter().zip(self.dual.iter()) {
            out = &out + &td.scale(w.trace_form(t));
        }
        out
    }
}

/// Which piece of the splitting decompositions to project onto.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subspace {
    A,
    B,
    APerp,
    BPerp,
}

/// Which factorization realizes the group-level decomposition `g = g_A g_B`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplittingKind {
    /// `A` strictly upper triangular, `B` the lower Borel; Gauss
    /// factorization, valid on an open subset only.
    Triangular,
    /// `A = so(n)`, `B` the lower Borel; Iwasawa factorization, global.
    Iwasawa,
}

/// A vector-space splitting `G = A + B` into two subalgebras, with dual
/// bases and the four projectors.
///
/// ```
/// use aks_core::algebra::{lower_borel_basis, strictly_upper_basis, MatrixAlgebra,
///     Splitting, SplittingKind};
/// use aks_core::Mat;
///
/// let s = Splitting::new(
///     MatrixAlgebra::sl(2),
///     SplittingKind::Triangular,
///     strictly_upper_basis(2),
///     lower_borel_basis(2),
/// ).unwrap();
/// let x = Mat::from_rows(&[&[1.0, 2.0], &[3.0, -1.0]]);
/// let back = &s.proj_a(&x) + &s.proj_b(&x);
/// assert!((&back - &x).norm_max() < 1e-12);
/// ```
#[derive(Clone, Debug)]
pub struct Splitting {
    algebra: MatrixAlgebra,
    kind: SplittingKind,
    basis_a: Vec<Mat>,
    basis_b: Vec<Mat>,
    dual_a: Vec<Mat>,
    dual_b: Vec<Mat>,
    a_pinv: Rect,
    b_pinv: Rect,
}

impl Splitting {
    /// Validate the two candidate subalgebras and solve for the dual bases
    /// `{X^m} subset B-perp` and `{Y^r} subset A-perp`.
    pub fn new(
        algebra: MatrixAlgebra,
        kind: SplittingKind,
        basis_a: Vec<Mat>,
        basis_b: Vec<Mat>,
    ) -> Result<Self> {
        let dim = algebra.dim();
        let da = basis_a.len();
        let db = basis_b.len();
        for x in basis_a.iter().chain(basis_b.iter()) {
            if !algebra.contains(x) {
                return Err(Error::NotInSubspace {
                    subspace: "algebra",
                    residual: algebra.membership_residual(x),
                });
            }
        }
        if da + db != dim {
            return Err(Error::DirectSumViolation);
        }
        let mut combined = basis_a.clone();
        combined.extend(basis_b.iter().cloned());
        let combined_cols = Rect::from_mat_columns(&combined);
        if numeric::rank(&combined_cols, 1e-10) != dim {
            return Err(Error::DirectSumViolation);
        }

        let a_pinv = numeric::pseudo_inverse(&Rect::from_mat_columns(&basis_a), 1e-12);
        let b_pinv = numeric::pseudo_inverse(&Rect::from_mat_columns(&basis_b), 1e-12);
        check_closure(&basis_a, &a_pinv)?;
        check_closure(&basis_b, &b_pinv)?;

        // Dual bases from the pairing system: row c of `m` pairs the c-th
        // combined basis element against every T_a.
        let mut m = Mat::zeros(dim);
        for (c, w) in combined.iter().enumerate() {
            for a in 0..dim {
                m[(c, a)] = algebra.basis()[a].trace_form(w);
            }
        }
        let d = m.inverse().map_err(|_| Error::DegenerateForm)?;
        let assemble = |col: usize| -> Mat {
            let mut t = Mat::zeros(algebra.n());
            for a in 0..dim {
                t = &t + &algebra.basis()[a].scale(d[(a, col)]);
            }
            t
        };
        let dual_a: Vec<Mat> = (0..da).map(assemble).collect();
        let dual_b: Vec<Mat> = (da..dim).map(assemble).collect();

        Ok(Splitting {
            algebra,
            kind,
            basis_a,
            basis_b,
            dual_a,
            dual_b,
            a_pinv,
            b_pinv,
        })
    }

    pub fn algebra(&self) -> &MatrixAlgebra {
        &self.algebra
    }

    pub fn kind(&self) -> SplittingKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.algebra.n()
    }

    pub fn dim_a(&self) -> usize {
        self.basis_a.len()
    }

    pub fn dim_b(&self) -> usize {
        self.basis_b.len()
    }

    /// Basis `{X_m}` of `A`.
    pub fn basis_a(&self) -> &[Mat] {
        &self.basis_a
    }

    /// Basis `{Y_r}` of `B`.
    pub fn basis_b(&self) -> &[Mat] {
        &self.basis_b
    }

    /// Dual basis `{X^m}` of `A* ~ B-perp`.
    pub fn dual_a(&self) -> &[Mat] {
        &self.dual_a
    }

    /// Dual basis `{Y^r}` of `B* ~ A-perp`.
    pub fn dual_b(&self) -> &[Mat] {
        &self.dual_b
    }

    /// Project an algebra element onto one of `A`, `B`, `A-perp`, `B-perp`.
    /// Errors when `x` is not in the span of the algebra.
    pub fn project(&self, x: &Mat, which: Subspace) -> Result<Mat> {
        if !self.algebra.contains(x) {
            return Err(Error::NotInSubspace {
                subspace: "algebra",
                residual: self.algebra.membership_residual(x),
            });
        }
        Ok(self.project_unchecked(x, which))
    }

    /// Projection without the membership pre-check; callers must know
    /// `x` lies in the algebra.
    pub fn project_unchecked(&self, x: &Mat, which: Subspace) -> Mat {
        let (coeff_against, build_from): (&[Mat], &[Mat]) = match which {
            Subspace::A => (&self.dual_a, &self.basis_a),
            Subspace::B => (&self.dual_b, &self.basis_b),
            Subspace::BPerp => (&self.basis_a, &self.dual_a),
            Subspace::APerp => (&self.basis_b, &self.dual_b),
        };
        let mut out = Mat::zeros(self.n());
        for (w, b) in coeff_against.iter().zip(build_from.iter()) {
            out = &out + &b.scale(x.trace_form(w));
        }
        out
    }

    pub fn proj_a(&self, x: &Mat) -> Mat {
        self.project_unchecked(x, Subspace::A)
    }

    pub fn proj_b(&self, x: &Mat) -> Mat {
        self.project_unchecked(x, Subspace::B)
    }

    pub fn proj_a_perp(&self, x: &Mat) -> Mat {
        self.project_unchecked(x, Subspace::APerp)
    }

    pub fn proj_b_perp(&self, x: &Mat) -> Mat {
        self.project_unchecked(x, Subspace::BPerp)
    }

    /// Max-norm residual of `x` against the subspace span.
    pub fn subspace_residual(&self, x: &Mat, which: Subspace) -> f64 {
        let (pinv, basis): (&Rect, &[Mat]) = match which {
            Subspace::A => (&self.a_pinv, &self.basis_a),
            Subspace::B => (&self.b_pinv, &self.basis_b),
            _ => {
                let p = self.project_unchecked(x, which);
                return (&p - x).norm_max();
            }
        };
        let c = pinv.matvec(x.entries());
        let mut rec = Mat::zeros(self.n());
        for (ci, b) in c.iter().zip(basis.iter()) {
            rec = &rec + &b.scale(*ci);
        }
        (&rec - x).norm_max()
    }

    /// Pure membership in `A` or `B` (or the perps), relative tolerance.
    pub fn in_subspace(&self, x: &Mat, which: Subspace) -> bool {
        self.subspace_residual(x, which) <= MEMBERSHIP_TOL * x.norm_max().max(1.0)
    }

    /// Shape check for an `A`-group element of this splitting kind.
    pub fn in_group_a(&self, g: &Mat, tol: f64) -> bool {
        match self.kind {
            SplittingKind::Triangular => crate::factor::is_unit_upper(g, tol),
            SplittingKind::Iwasawa => crate::factor::is_orthogonal(g, tol),
        }
    }

    /// Shape check for a `B`-group element (connected group: positive
    /// diagonal for both kinds).
    pub fn in_group_b(&self, g: &Mat, tol: f64) -> bool {
        crate::factor::is_lower_triangular(g, tol, true)
    }

    /// Factor a group element per the splitting kind.
    pub fn factorize(&self, g: &Mat) -> Result<(Mat, Mat)> {
        match self.kind {
            SplittingKind::Triangular => crate::factor::gauss_factorize(g),
            SplittingKind::Iwasawa => crate::factor::iwasawa_factorize(g),
        }
    }
}

fn check_closure(basis: &[Mat], pinv: &Rect) -> Result<()> {
    if basis.is_empty() {
        return Ok(());
    }
    let n = basis[0].n();
    for i in 0..basis.len() {
        for j in i + 1..basis.len() {
            let br = basis[i].bracket(&basis[j]);
            let c = pinv.matvec(br.entries());
            let mut rec = Mat::zeros(n);
            for (ci, b) in c.iter().zip(basis.iter()) {
                rec = &rec + &b.scale(*ci);
            }
            let res = (&rec - &br).norm_max();
            if res > CLOSURE_TOL * br.norm_max().max(1.0) {
                return Err(Error::NotSubalgebra { residual: res });
            }
        }
    }
    Ok(())
}

/// Basis of the strictly upper triangular subalgebra of `sl(n)`.
pub fn strictly_upper_basis(n: usize) -> Vec<Mat> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            out.push(Mat::elementary(n, i, j));
        }
    }
    out
}

/// Basis of the lower Borel subalgebra of `sl(n)` (strictly lower
/// elementary matrices plus traceless diagonal differences).
pub fn lower_borel_basis(n: usize) -> Vec<Mat> {
    let mut out = Vec::new();
    for i in 0..n - 1 {
        out.push(&Mat::elementary(n, i, i) - &Mat::elementary(n, i + 1, i + 1));
    }
    for i in 0..n {
        for j in 0..i {
            out.push(Mat::elementary(n, i, j));
        }
    }
    out
}

/// Basis of `so(n)`: antisymmetric differences `E_ij - E_ji`, `i < j`.
pub fn so_basis(n: usize) -> Vec<Mat> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            out.push(&Mat::elementary(n, i, j) - &Mat::elementary(n, j, i));
        }
    }
    out
}

/// Random element of the span with coefficients uniform in `[-1, 1]`.
pub fn random_span_element<R: Rng + ?Sized>(basis: &[Mat], rng: &mut R) -> Mat {
    assert!(!basis.is_empty(), "cannot sample from an empty basis");
    let n = basis[0].n();
    let mut out = Mat::zeros(n);
    for b in basis {
        out = &out + &b.scale(rng.gen_range(-1.0..1.0));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sl2_triangular() -> Splitting {
        Splitting::new(
            MatrixAlgebra::sl(2),
            SplittingKind::Triangular,
            strictly_upper_basis(2),
            lower_borel_basis(2),
        )
        .unwrap()
    }

    #[test]
    fn sl2_dual_bases_match_hand_solve() {
        let s = sl2_triangular();
        // A = span(E12): its dual inside B-perp is E21.
        assert!((&s.dual_a()[0] - &Mat::elementary(2, 1, 0)).norm_max() < 1e-12);
        // B = span(H, E21): duals are H/2 and E12, spanning the upper Borel.
        let h = &Mat::elementary(2, 0, 0) - &Mat::elementary(2, 1, 1);
        assert!((&s.dual_b()[0] - &h.scale(0.5)).norm_max() < 1e-12);
        assert!((&s.dual_b()[1] - &Mat::elementary(2, 0, 1)).norm_max() < 1e-12);
    }

    #[test]
    fn duality_pairings() {
        let s = sl2_triangular();
        for (m, xm) in s.dual_a().iter().enumerate() {
            for (k, xk) in s.basis_a().iter().enumerate() {
                let expect = if m == k { 1.0 } else { 0.0 };
                assert!((xm.trace_form(xk) - expect).abs() < 1e-12);
            }
            for ys in s.basis_b() {
                assert!(xm.trace_form(ys).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn overlapping_subspaces_rejected() {
        let err = Splitting::new(
            MatrixAlgebra::sl(2),
            SplittingKind::Triangular,
            alloc::vec![Mat::elementary(2, 0, 1)],
            alloc::vec![Mat::elementary(2, 0, 1)],
        )
        .unwrap_err();
        assert_eq!(err, Error::DirectSumViolation);
    }

    #[test]
    fn non_subalgebra_rejected() {
        let h = &Mat::elementary(2, 0, 0) - &Mat::elementary(2, 1, 1);
        let err = Splitting::new(
            MatrixAlgebra::sl(2),
            SplittingKind::Triangular,
            alloc::vec![Mat::elementary(2, 0, 1), Mat::elementary(2, 1, 0)],
            alloc::vec![h],
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotSubalgebra { .. }));
    }

    #[test]
    fn isotropic_span_is_degenerate() {
        let err = MatrixAlgebra::new(2, alloc::vec![Mat::elementary(2, 0, 1)]).unwrap_err();
        assert_eq!(err, Error::DegenerateForm);
    }

    #[test]
    fn sl3_iwasawa_dimensions() {
        let s = Splitting::new(
            MatrixAlgebra::sl(3),
            SplittingKind::Iwasawa,
            so_basis(3),
            lower_borel_basis(3),
        )
        .unwrap();
        assert_eq!(s.dim_a(), 3);
        assert_eq!(s.dim_b(), 5);
        assert_eq!(s.algebra().dim(), 8);
    }

    #[test]
    fn triangular_projections_read_off_entries() {
        let s = sl2_triangular();
        let x = Mat::from_rows(&[&[1.0, 2.0], &[3.0, -1.0]]);
        let pa = s.proj_a(&x);
        let pb = s.proj_b(&x);
        assert!((&pa - &Mat::elementary(2, 0, 1).scale(2.0)).norm_max() < 1e-12);
        assert!((&pb - &Mat::from_rows(&[&[1.0, 0.0], &[3.0, -1.0]])).norm_max() < 1e-12);
        let pbp = s.proj_b_perp(&x);
        let pap = s.proj_a_perp(&x);
        assert!((&pbp - &Mat::elementary(2, 1, 0).scale(3.0)).norm_max() < 1e-12);
        assert!((&pap - &Mat::from_rows(&[&[1.0, 2.0], &[0.0, -1.0]])).norm_max() < 1e-12);
    }

    #[test]
    fn iwasawa_projection_from_independent_solve() {
        let s = Splitting::new(
            MatrixAlgebra::sl(2),
            SplittingKind::Iwasawa,
            so_basis(2),
            lower_borel_basis(2),
        )
        .unwrap();
        let x = Mat::elementary(2, 0, 1);

        // Oracle: coefficients of E12 over the joint basis {so(2), H, E21}
        // by an independent dense least-squares solve.
        let joint: Vec<Mat> = s
            .basis_a()
            .iter()
            .chain(s.basis_b().iter())
            .cloned()
            .collect();
        let cols = Rect::from_mat_columns(&joint);
        let c = numeric::lstsq(&cols, x.entries(), 1e-12);
        let mut pa_oracle = Mat::zeros(2);
        pa_oracle = &pa_oracle + &joint[0].scale(c[0]);
        let mut pb_oracle = Mat::zeros(2);
        for (i, m) in joint.iter().enumerate().skip(1) {
            pb_oracle = &pb_oracle + &m.scale(c[i]);
        }

        assert!((&s.proj_a(&x) - &pa_oracle).norm_max() < 1e-12);
        assert!((&s.proj_b(&x) - &pb_oracle).norm_max() < 1e-12);
        // which concretely is E12 = (E12 - E21) + E21
        let so_gen = &Mat::elementary(2, 0, 1) - &Mat::elementary(2, 1, 0);
        assert!((&s.proj_a(&x) - &so_gen).norm_max() < 1e-12);
        assert!((&s.proj_b(&x) - &Mat::elementary(2, 1, 0)).norm_max() < 1e-12);
    }

    #[test]
    fn complementarity_and_duality_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for s in [
            sl2_triangular(),
            Splitting::new(
                MatrixAlgebra::sl(3),
                SplittingKind::Iwasawa,
                so_basis(3),
                lower_borel_basis(3),
            )
            .unwrap(),
        ] {
            for _ in 0..50 {
                let x = random_span_element(s.algebra().basis(), &mut rng);
                let sum1 = &s.proj_a(&x) + &s.proj_b(&x);
                let sum2 = &s.proj_a_perp(&x) + &s.proj_b_perp(&x);
                assert!((&sum1 - &x).norm_max() < 1e-12);
                assert!((&sum2 - &x).norm_max() < 1e-12);
                // idempotence
                let pa = s.proj_a(&x);
                assert!((&s.proj_a(&pa) - &pa).norm_max() < 1e-12);
                // <proj_bperp x, a> = <x, a> for all a in A
                for a in s.basis_a() {
                    let lhs = s.proj_b_perp(&x).trace_form(a);
                    assert!((lhs - x.trace_form(a)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn form_is_ad_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = MatrixAlgebra::sl(3);
        for _ in 0..50 {
            let x = random_span_element(g.basis(), &mut rng);
            let y = random_span_element(g.basis(), &mut rng);
            let z = random_span_element(g.basis(), &mut rng);
            let lhs = z.bracket(&x).trace_form(&y) + x.trace_form(&z.bracket(&y));
            assert!(lhs.abs() < 1e-12);
        }
    }

    #[test]
    fn project_rejects_foreign_elements() {
        let s = sl2_triangular();
        // identity has nonzero trace: not in sl(2)
        assert!(s.project(&Mat::identity(2), Subspace::A).is_err());
    }
}
