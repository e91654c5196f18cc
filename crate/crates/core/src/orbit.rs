//! Coadjoint-orbit phase space of the AKS system.
//!
//! Fixing moments `mu` in `B-perp ~ A*` and `nu` in `A-perp ~ B*`, the
//! phase space consists of Lax elements `L = L_{A*} + L_{B*}` with the two
//! parts running over the coadjoint orbits of the subgroups through `mu`
//! and `nu`. The little algebras (infinitesimal stabilizers) of the
//! moments drive both the gauge layer and the Dirac constraint analysis.

use alloc::vec::Vec;

use rand::Rng;

use crate::algebra::{random_span_element, Splitting, Subspace};
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::numeric::{self, Rect};

/// Singular-value threshold for little-algebra nullspaces.
pub const NULLSPACE_TOL: f64 = 1e-10;

/// Residual allowed on the moment membership checks.
pub const MOMENT_TOL: f64 = 1e-10;

/// A point of the AKS phase space: a Lax matrix together with its two
/// dual-decomposition parts (`A*`-part in `B-perp`, `B*`-part in `A-perp`).
#[derive(Clone, Debug)]
pub struct LaxElement {
    l: Mat,
    a_star_part: Mat,
    b_star_part: Mat,
}

impl LaxElement {
    /// Assemble from the two parts; the full matrix is their sum.
    pub fn from_parts(a_star_part: Mat, b_star_part: Mat) -> Self {
        let l = &a_star_part + &b_star_part;
        LaxElement { l, a_star_part, b_star_part }
    }

    pub fn matrix(&self) -> &Mat {
        &self.l
    }

    /// The `A*`-part (lives in `B-perp`).
    pub fn a_star_part(&self) -> &Mat {
        &self.a_star_part
    }

    /// The `B*`-part (lives in `A-perp`).
    pub fn b_star_part(&self) -> &Mat {
        &self.b_star_part
    }
}

/// Quadratic Hamiltonian `H(L) = tr(L^2) / 2`.
pub fn hamiltonian(l: &LaxElement) -> f64 {
    0.5 * l.l.trace_form(&l.l)
}

/// Basis of the little algebra `A_mu`: the nullspace of
/// `xi -> proj_Bperp([xi, mu])` on `A`. May be empty.
pub fn little_algebra_a(splitting: &Splitting, mu: &Mat) -> Vec<Mat> {
    little_algebra(splitting, mu, Subspace::BPerp, splitting.basis_a())
}

/// Basis of the little algebra `B_nu`: the nullspace of
/// `eta -> proj_Aperp([eta, nu])` on `B`.
pub fn little_algebra_b(splitting: &Splitting, nu: &Mat) -> Vec<Mat> {
    little_algebra(splitting, nu, Subspace::APerp, splitting.basis_b())
}

fn little_algebra(
    splitting: &Splitting,
    moment: &Mat,
    proj: Subspace,
    basis: &[Mat],
) -> Vec<Mat> {
    if basis.is_empty() {
        return Vec::new();
    }
    let images: Vec<Mat> = basis
        .iter()
        .map(|x| splitting.project_unchecked(&x.bracket(moment), proj))
        .collect();
    let map = Rect::from_mat_columns(&images);
    let null = numeric::nullspace(&map, NULLSPACE_TOL);
    null.iter().map(|c| span_combination(basis, c)).collect()
}

fn span_combination(basis: &[Mat], coeffs: &[f64]) -> Mat {
    let n = basis[0].n();
    let mut out = Mat::zeros(n);
    // Deterministic sign: largest coefficient positive.
    let mut lead = 0.0f64;
    for &c in coeffs {
        if c.abs() > lead.abs() {
            lead = c;
        }
    }
    let sign = if lead < 0.0 { -1.0 } else { 1.0 };
    for (c, b) in coeffs.iter().zip(basis.iter()) {
        out = &out + &b.scale(sign * c);
    }
    out
}

/// The AKS data: a splitting plus the two moments and their little
/// algebras.
#[derive(Clone, Debug)]
pub struct AksData {
    splitting: Splitting,
    mu: Mat,
    nu: Mat,
    little_a: Vec<Mat>,
    little_b: Vec<Mat>,
}

impl AksData {
    /// Validate the moment memberships (`mu` in `B-perp`, `nu` in
    /// `A-perp`) and compute the little algebras.
    pub fn new(splitting: Splitting, mu: Mat, nu: Mat) -> Result<Self> {
        let res_mu = splitting.subspace_residual(&mu, Subspace::BPerp);
        if res_mu > MOMENT_TOL * mu.norm_max().max(1.0) {
            return Err(Error::NotInSubspace { subspace: "B-perp", residual: res_mu });
        }
        let res_nu = splitting.subspace_residual(&nu, Subspace::APerp);
        if res_nu > MOMENT_TOL * nu.norm_max().max(1.0) {
            return Err(Error::NotInSubspace { subspace: "A-perp", residual: res_nu });
        }
        let little_a = little_algebra_a(&splitting, &mu);
        let little_b = little_algebra_b(&splitting, &nu);
        Ok(AksData { splitting, mu, nu, little_a, little_b })
    }

    pub fn splitting(&self) -> &Splitting {
        &self.splitting
    }

    pub fn n(&self) -> usize {
        self.splitting.n()
    }

    pub fn mu(&self) -> &Mat {
        &self.mu
    }

    pub fn nu(&self) -> &Mat {
        &self.nu
    }

    /// Basis of `A_mu`.
    pub fn little_a(&self) -> &[Mat] {
        &self.little_a
    }

    /// Basis of `B_nu`.
    pub fn little_b(&self) -> &[Mat] {
        &self.little_b
    }

    /// Dimension of the phase space `M_{mu,nu}` (sum of the two orbit
    /// dimensions).
    pub fn phase_space_dim(&self) -> usize {
        (self.splitting.dim_a() - self.little_a.len())
            + (self.splitting.dim_b() - self.little_b.len())
    }

    /// The Lax element reached from the moments by the group pair:
    /// `L = proj_Bperp(gA^-1 mu gA) + proj_Aperp(gB nu gB^-1)`.
    ///
    /// `gA^-1` appears on the left so that factorization of `exp(t L0)`
    /// reproduces the flow; as a set the orbit is unchanged.
    pub fn orbit_point(&self, ga: &Mat, gb: &Mat) -> Result<LaxElement> {
        if !self.splitting.in_group_a(ga, 1e-8) {
            return Err(Error::NotInSubspace { subspace: "group A", residual: f64::INFINITY });
        }
        if !self.splitting.in_group_b(gb, 1e-8) {
            return Err(Error::NotInSubspace { subspace: "group B", residual: f64::INFINITY });
        }
        let ga_inv = ga.inverse()?;
        let gb_inv = gb.inverse()?;
        let a_part = self
            .splitting
            .project_unchecked(&(&(&ga_inv * &self.mu) * ga), Subspace::BPerp);
        let b_part = self
            .splitting
            .project_unchecked(&(&(gb * &self.nu) * &gb_inv), Subspace::APerp);
        Ok(LaxElement::from_parts(a_part, b_part))
    }

    /// Split an algebra element into a [`LaxElement`] by the dual
    /// decomposition (no orbit-membership claim is made).
    pub fn lax_from_matrix(&self, l: &Mat) -> LaxElement {
        LaxElement::from_parts(
            self.splitting.proj_b_perp(l),
            self.splitting.proj_a_perp(l),
        )
    }

    /// Lie-Poisson bracket of the linear functions `<L_part, xi>`,
    /// `<L_part, xi2>` evaluated at `l`:
    /// `-<L_{A*}, [xi, xi2]>` when both arguments lie in `A`,
    /// `+<L_{B*}, [xi, xi2]>` when both lie in `B`, zero for mixed pairs.
    pub fn lie_poisson_bracket(&self, l: &LaxElement, xi: &Mat, xi2: &Mat) -> Result<f64> {
        let in_a1 = self.splitting.in_subspace(xi, Subspace::A);
        let in_b1 = self.splitting.in_subspace(xi, Subspace::B);
        let in_a2 = self.splitting.in_subspace(xi2, Subspace::A);
        let in_b2 = self.splitting.in_subspace(xi2, Subspace::B);
        if !(in_a1 || in_b1) {
            return Err(Error::NotInSubspace {
                subspace: "A or B",
                residual: self.splitting.subspace_residual(xi, Subspace::A),
            });
        }
        if !(in_a2 || in_b2) {
            return Err(Error::NotInSubspace {
                subspace: "A or B",
                residual: self.splitting.subspace_residual(xi2, Subspace::A),
            });
        }
        if in_a1 && in_a2 {
            Ok(-l.a_star_part.trace_form(&xi.bracket(xi2)))
        } else if in_b1 && in_b2 {
            Ok(l.b_star_part.trace_form(&xi.bracket(xi2)))
        } else {
            Ok(0.0)
        }
    }

    /// Random `A`-group element: exponential of a random subalgebra
    /// element with coefficients uniform in `[-1, 1]`.
    pub fn random_group_a<R: Rng + ?Sized>(&self, rng: &mut R) -> Mat {
        exp_of_random(self.splitting.basis_a(), self.n(), rng)
    }

    pub fn random_group_b<R: Rng + ?Sized>(&self, rng: &mut R) -> Mat {
        exp_of_random(self.splitting.basis_b(), self.n(), rng)
    }

    /// Random element of the little group `A_mu` (exp of the little
    /// algebra; identity when the little algebra is trivial).
    pub fn random_little_group_a<R: Rng + ?Sized>(&self, rng: &mut R) -> Mat {
        exp_of_random(&self.little_a, self.n(), rng)
    }

    pub fn random_little_group_b<R: Rng + ?Sized>(&self, rng: &mut R) -> Mat {
        exp_of_random(&self.little_b, self.n(), rng)
    }

    /// Random orbit point through random group elements on both sides.
    pub fn random_orbit_point<R: Rng + ?Sized>(&self, rng: &mut R) -> LaxElement {
        let ga = self.random_group_a(rng);
        let gb = self.random_group_b(rng);
        self.orbit_point(&ga, &gb)
            .expect("sampled group elements are in the groups")
    }

    /// Random group pair `(g_A, g_B)` with `g_A` from the little group of
    /// `mu`, so the orbit point through it keeps its `A*`-part pinned at
    /// `mu`. For the triangular (Toda) presets this parametrizes the
    /// Jacobi-form family.
    pub fn random_orbit_factors<R: Rng + ?Sized>(&self, rng: &mut R) -> (Mat, Mat) {
        (self.random_little_group_a(rng), self.random_group_b(rng))
    }

    /// Random initial condition whose `A*`-part is exactly `mu` (the
    /// orbit point through [`AksData::random_orbit_factors`]).
    pub fn random_initial_lax<R: Rng + ?Sized>(&self, rng: &mut R) -> LaxElement {
        let (ga, gb) = self.random_orbit_factors(rng);
        self.orbit_point(&ga, &gb)
            .expect("sampled group elements are in the groups")
    }

    /// Basis of `A_mu-perp intersect B-perp` (the directions pairing the
    /// alpha multiplier in the secondary constraints).
    pub fn alpha_constraint_directions(&self) -> Vec<Mat> {
        self.perp_of_joint_span(&self.little_a, self.splitting.basis_b())
    }

    /// Basis of `B_nu-perp intersect A-perp`.
    pub fn beta_constraint_directions(&self) -> Vec<Mat> {
        self.perp_of_joint_span(&self.little_b, self.splitting.basis_a())
    }

    /// Orthogonal complement (w.r.t. the trace form, inside the algebra)
    /// of the span of the two families: `(span1 + span2)-perp`.
    fn perp_of_joint_span(&self, span1: &[Mat], span2: &[Mat]) -> Vec<Mat> {
        let alg = self.splitting.algebra();
        let dim = alg.dim();
        let rows: Vec<&Mat> = span1.iter().chain(span2.iter()).collect();
        if rows.is_empty() {
            return alg.basis().to_vec();
        }
        let mut pairing = Rect::zeros(rows.len(), dim);
        for (i, w) in rows.iter().enumerate() {
            for (a, t) in alg.basis().iter().enumerate() {
                pairing.set(i, a, t.trace_form(w));
            }
        }
        numeric::nullspace(&pairing, NULLSPACE_TOL)
            .iter()
            .map(|c| span_combination(alg.basis(), c))
            .collect()
    }
}

fn exp_of_random<R: Rng + ?Sized>(basis: &[Mat], n: usize, rng: &mut R) -> Mat {
    if basis.is_empty() {
        return Mat::identity(n);
    }
    random_span_element(basis, rng)
        .exp()
        .expect("bounded random algebra element exponentiates")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{lower_borel_basis, strictly_upper_basis, MatrixAlgebra, SplittingKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toda_sl2() -> AksData {
        let s = Splitting::new(
            MatrixAlgebra::sl(2),
            SplittingKind::Triangular,
            strictly_upper_basis(2),
            lower_borel_basis(2),
        )
        .unwrap();
        AksData::new(s, Mat::elementary(2, 1, 0), Mat::elementary(2, 0, 1)).unwrap()
    }

    fn toda_sl3() -> AksData {
        let s = Splitting::new(
            MatrixAlgebra::sl(3),
            SplittingKind::Triangular,
            strictly_upper_basis(3),
            lower_borel_basis(3),
        )
        .unwrap();
        let mu = &Mat::elementary(3, 1, 0) + &Mat::elementary(3, 2, 1);
        let nu = &Mat::elementary(3, 0, 1) + &Mat::elementary(3, 1, 2);
        AksData::new(s, mu, nu).unwrap()
    }

    #[test]
    fn moment_membership_enforced() {
        let s = toda_sl2().splitting.clone();
        // mu = E12 is not strictly lower: rejected.
        let err = AksData::new(s, Mat::elementary(2, 0, 1), Mat::elementary(2, 0, 1));
        assert!(matches!(err, Err(Error::NotInSubspace { .. })));
    }

    #[test]
    fn little_algebras_toda_sl2() {
        let aks = toda_sl2();
        // A_mu is all of A = span(E12): [E12, E21] = H projects to zero in B-perp.
        assert_eq!(aks.little_a().len(), 1);
        let gen = &aks.little_a()[0];
        let image = aks.splitting().proj_b_perp(&gen.bracket(aks.mu()));
        assert!(image.norm_max() < 1e-12);
        assert!((gen - &Mat::elementary(2, 0, 1)).norm_max() < 1e-12);
        // B_nu is trivial.
        assert!(aks.little_b().is_empty());
    }

    #[test]
    fn zero_moment_is_stabilized_by_everything() {
        let s = toda_sl2().splitting.clone();
        let aks = AksData::new(s, Mat::zeros(2), Mat::zeros(2)).unwrap();
        assert_eq!(aks.little_a().len(), 1);
        assert_eq!(aks.little_b().len(), 2);
    }

    #[test]
    fn orbit_point_at_identity_is_mu_plus_nu() {
        let aks = toda_sl2();
        let l = aks
            .orbit_point(&Mat::identity(2), &Mat::identity(2))
            .unwrap();
        let expect = &Mat::elementary(2, 1, 0) + &Mat::elementary(2, 0, 1);
        assert!((l.matrix() - &expect).norm_max() < 1e-14);
    }

    #[test]
    fn orbit_point_diagonal_scaling() {
        let aks = toda_sl2();
        let d = 2.0;
        let gb = Mat::from_rows(&[&[d, 0.0], &[0.0, 1.0 / d]]);
        let l = aks.orbit_point(&Mat::identity(2), &gb).unwrap();
        let expect = &Mat::elementary(2, 1, 0) + &Mat::elementary(2, 0, 1).scale(d * d);
        assert!((l.matrix() - &expect).norm_max() < 1e-13);
    }

    #[test]
    fn strictly_lower_part_fixed_by_unit_upper_conjugation() {
        let aks = toda_sl2();
        let u = 0.7;
        let ga = &Mat::identity(2) + &Mat::elementary(2, 0, 1).scale(u);
        let l = aks.orbit_point(&ga, &Mat::identity(2)).unwrap();
        assert!((l.a_star_part() - aks.mu()).norm_max() < 1e-13);

        // Oracle: expand gA^-1 E21 gA explicitly and read off the strictly
        // lower part.
        let e12 = Mat::elementary(2, 0, 1);
        let e21 = Mat::elementary(2, 1, 0);
        let conj = &(&(&Mat::identity(2) - &e12.scale(u)) * &e21)
            * &(&Mat::identity(2) + &e12.scale(u));
        assert!((&aks.splitting().proj_b_perp(&conj) - &e21).norm_max() < 1e-13);
    }

    #[test]
    fn orbit_parts_live_in_their_subspaces() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for aks in [toda_sl2(), toda_sl3()] {
            for _ in 0..20 {
                let l = aks.random_orbit_point(&mut rng);
                assert!(aks.splitting().proj_a_perp(l.a_star_part()).norm_max() < 1e-12);
                assert!(aks.splitting().proj_b_perp(l.b_star_part()).norm_max() < 1e-12);
                let sum = l.a_star_part() + l.b_star_part();
                assert!((&sum - l.matrix()).norm_max() < 1e-13);
            }
        }
    }

    #[test]
    fn lie_poisson_values_and_structure() {
        let aks = toda_sl2();
        let h = &Mat::elementary(2, 0, 0) - &Mat::elementary(2, 1, 1);
        let (a, b) = (0.8, -0.3);
        let l_mat = &(&h.scale(b) + &Mat::elementary(2, 0, 1).scale(a))
            + &Mat::elementary(2, 1, 0);
        let l = aks.lax_from_matrix(&l_mat);

        // antisymmetry: equal arguments vanish
        let same = aks.lie_poisson_bracket(&l, &h, &h).unwrap();
        assert_eq!(same, 0.0);
        // mixed pair vanishes
        let mixed = aks
            .lie_poisson_bracket(&l, &Mat::elementary(2, 0, 1), &h)
            .unwrap();
        assert_eq!(mixed, 0.0);
        // B-side pair: <L_{B*}, [H, E21]> = -2a
        let v = aks
            .lie_poisson_bracket(&l, &h, &Mat::elementary(2, 1, 0))
            .unwrap();
        assert!((v - (-2.0 * a)).abs() < 1e-13);
        // argument in neither subalgebra
        assert!(aks.lie_poisson_bracket(&l, &Mat::identity(2), &h).is_err());
    }

    #[test]
    fn lie_poisson_jacobi_antisymmetry_bilinearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let aks = toda_sl3();
        for _ in 0..30 {
            let l = aks.random_orbit_point(&mut rng);
            let x = random_span_element(aks.splitting().basis_b(), &mut rng);
            let y = random_span_element(aks.splitting().basis_b(), &mut rng);
            let z = random_span_element(aks.splitting().basis_b(), &mut rng);
            // Jacobi via the closure of the bracket on linear functions
            let t1 = aks.lie_poisson_bracket(&l, &x.bracket(&y), &z).unwrap();
            let t2 = aks.lie_poisson_bracket(&l, &y.bracket(&z), &x).unwrap();
            let t3 = aks.lie_poisson_bracket(&l, &z.bracket(&x), &y).unwrap();
            assert!((t1 + t2 + t3).abs() < 1e-10);
            // antisymmetry and linearity in the first slot
            let xy = aks.lie_poisson_bracket(&l, &x, &y).unwrap();
            let yx = aks.lie_poisson_bracket(&l, &y, &x).unwrap();
            assert!((xy + yx).abs() < 1e-12);
            let combo = &x.scale(0.3) + &z.scale(-1.7);
            let lhs = aks.lie_poisson_bracket(&l, &combo, &y).unwrap();
            let rhs = 0.3 * xy - 1.7 * aks.lie_poisson_bracket(&l, &z, &y).unwrap();
            assert!((lhs - rhs).abs() < 1e-11);
        }
    }

    #[test]
    fn orbit_point_rejects_wrong_shapes() {
        let aks = toda_sl2();
        // lower-triangular element offered as a group-A factor
        let bad_a = &Mat::identity(2) + &Mat::elementary(2, 1, 0);
        assert!(aks.orbit_point(&bad_a, &Mat::identity(2)).is_err());
        // negative-diagonal element is outside the connected B group
        let bad_b = Mat::from_rows(&[&[-1.0, 0.0], &[0.0, -1.0]]);
        assert!(aks.orbit_point(&Mat::identity(2), &bad_b).is_err());
    }

    #[test]
    fn little_algebra_isotropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let aks = toda_sl3();
        assert_eq!(aks.little_a().len(), 3); // all of A stabilizes mu here
        for _ in 0..20 {
            let x = random_span_element(aks.little_a(), &mut rng);
            let y = random_span_element(aks.little_a(), &mut rng);
            assert!(aks.mu().trace_form(&x.bracket(&y)).abs() < 1e-12);
        }
    }

    #[test]
    fn hamiltonian_values() {
        let aks = toda_sl2();
        assert_eq!(hamiltonian(&aks.lax_from_matrix(&Mat::zeros(2))), 0.0);
        let h = &Mat::elementary(2, 0, 0) - &Mat::elementary(2, 1, 1);
        let (a, b) = (0.4, 1.1);
        let l_mat = &(&h.scale(b) + &Mat::elementary(2, 0, 1).scale(a))
            + &Mat::elementary(2, 1, 0);
        let val = hamiltonian(&aks.lax_from_matrix(&l_mat));
        assert!((val - (b * b + a)).abs() < 1e-13);
    }

    #[test]
    fn constraint_direction_dimensions_toda() {
        let aks2 = toda_sl2();
        // A_mu = A so its perp inside B-perp is trivial; B_nu = 0 so the
        // beta directions fill all of A-perp (dim 2).
        assert!(aks2.alpha_constraint_directions().is_empty());
        assert_eq!(aks2.beta_constraint_directions().len(), 2);

        let aks3 = toda_sl3();
        assert_eq!(aks3.little_b().len(), 1); // span(E31)
        assert!((&aks3.little_b()[0] - &Mat::elementary(3, 2, 0)).norm_max() < 1e-10);
        assert!(aks3.alpha_constraint_directions().is_empty());
        assert_eq!(aks3.beta_constraint_directions().len(), 4);
    }
}
