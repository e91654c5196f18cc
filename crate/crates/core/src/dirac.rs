//! Dirac constraint analysis of the gauge Lagrangian.
//!
//! The big phase space is `M = G x G-alg x A x A* x B x B*`, a point
//! being `(g, J^r, alpha, pi_alpha, beta, pi_beta)` with the cotangent
//! bundle of the group right-trivialized. The Poisson bracket is
//! evaluated numerically from gradient data: exact rules for the
//! generator family (momentum pairings, matrix entries of `g`, linear
//! functions of the multipliers) pin the sign conventions, and central
//! finite differences cover everything else, including the factorization
//! dependent invariant `Ltilde = g_A^-1 J^r g_A`.
//!
//! On top of the bracket sit the primary Hamiltonian, the
//! primary/secondary constraint family, first/second-class
//! classification, the abelian and little-group gauge actions, Dirac
//! brackets through the second-class block, and the constrained
//! Hamiltonian integration that closes the loop against the Lax solvers.

use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::Rng;

use crate::algebra::Subspace;
use crate::error::{Error, Result};
use crate::gauge::{check_little_group_a, check_little_group_b};
use crate::mat::Mat;
use crate::numeric::{self, Rect};
use crate::orbit::{AksData, LaxElement};

/// Singular-value threshold separating first- from second-class
/// directions in the constraint bracket matrix.
pub const CLASSIFY_TOL: f64 = 1e-8;

/// Finite-difference step scale for numeric gradients.
pub const FD_STEP: f64 = 1e-6;

/// How far constraints may deviate from zero on nominally constrained
/// points.
pub const SURFACE_TOL: f64 = 1e-10;

/// A point of the big phase space.
#[derive(Clone, Debug)]
pub struct PhasePoint {
    pub g: Mat,
    /// Right-trivialized momentum, an element of the algebra.
    pub jr: Mat,
    pub alpha: Mat,
    /// Momentum conjugate to `alpha`, realized in `B-perp ~ A*`.
    pub pi_alpha: Mat,
    pub beta: Mat,
    /// Momentum conjugate to `beta`, realized in `A-perp ~ B*`.
    pub pi_beta: Mat,
}

impl PhasePoint {
    /// Membership checks for all six components.
    pub fn validate(&self, aks: &AksData) -> Result<()> {
        let s = aks.splitting();
        self.g.inverse()?;
        let checks: [(&Mat, Subspace, &'static str); 4] = [
            (&self.alpha, Subspace::A, "A"),
            (&self.pi_alpha, Subspace::BPerp, "B-perp"),
            (&self.beta, Subspace::B, "B"),
            (&self.pi_beta, Subspace::APerp, "A-perp"),
        ];
        for (x, which, name) in checks {
            if !s.in_subspace(x, which) {
                return Err(Error::NotInSubspace {
                    subspace: name,
                    residual: s.subspace_residual(x, which),
                });
            }
        }
        if !s.algebra().contains(&self.jr) {
            return Err(Error::NotInSubspace {
                subspace: "algebra",
                residual: s.algebra().membership_residual(&self.jr),
            });
        }
        Ok(())
    }

    /// Left-trivialized momentum `J^l = g^-1 J^r g` (derived, not stored).
    pub fn jl(&self) -> Result<Mat> {
        let g_inv = self.g.inverse()?;
        Ok(&(&g_inv * &self.jr) * &self.g)
    }
}

/// Total dimension of the big phase space.
pub fn phase_space_dim(aks: &AksData) -> usize {
    let s = aks.splitting();
    2 * (s.algebra().dim() + s.dim_a() + s.dim_b())
}

type CustomFn = Box<dyn Fn(&AksData, &PhasePoint) -> f64 + Send + Sync>;

enum Kind {
    JrPairing(Mat),
    JlPairing(Mat),
    GEntry(usize, usize),
    AlphaPairing(Mat),
    PiAlphaPairing(Mat),
    BetaPairing(Mat),
    PiBetaPairing(Mat),
    Custom(CustomFn),
}

/// A real observable on the phase space, with exact gradient rules for
/// the generator family and finite differences otherwise. A constant
/// shift allows affine constraints such as `<J^r - mu, xi>`.
pub struct Observable {
    kind: Kind,
    shift: f64,
}

impl Observable {
    pub fn jr_pairing(t: Mat) -> Self {
        Observable { kind: Kind::JrPairing(t), shift: 0.0 }
    }

    pub fn jl_pairing(t: Mat) -> Self {
        Observable { kind: Kind::JlPairing(t), shift: 0.0 }
    }

    pub fn g_entry(i: usize, j: usize) -> Self {
        Observable { kind: Kind::GEntry(i, j), shift: 0.0 }
    }

    pub fn alpha_pairing(w: Mat) -> Self {
        Observable { kind: Kind::AlphaPairing(w), shift: 0.0 }
    }

    pub fn pi_alpha_pairing(w: Mat) -> Self {
        Observable { kind: Kind::PiAlphaPairing(w), shift: 0.0 }
    }

    pub fn beta_pairing(w: Mat) -> Self {
        Observable { kind: Kind::BetaPairing(w), shift: 0.0 }
    }

    pub fn pi_beta_pairing(w: Mat) -> Self {
        Observable { kind: Kind::PiBetaPairing(w), shift: 0.0 }
    }

    /// Arbitrary evaluable function; gradients fall back to central
    /// finite differences.
    pub fn custom(f: impl Fn(&AksData, &PhasePoint) -> f64 + Send + Sync + 'static) -> Self {
        Observable { kind: Kind::Custom(Box::new(f)), shift: 0.0 }
    }

    /// Component observable `<Ltilde, t>` of the gauge-invariant momentum.
    pub fn ltilde_pairing(t: Mat) -> Self {
        Observable::custom(move |aks, p| {
            ltilde(aks, p)
                .expect("Ltilde observable needs a factorizable point")
                .matrix()
                .trace_form(&t)
        })
    }

    /// The primary Hamiltonian as an observable with fixed multipliers.
    pub fn primary_hamiltonian(v_alpha: Mat, v_beta: Mat) -> Self {
        Observable::custom(move |aks, p| {
            primary_hamiltonian(aks, p, &v_alpha, &v_beta)
                .expect("primary Hamiltonian evaluation")
        })
    }

    pub fn with_shift(mut self, shift: f64) -> Self {
        self.shift = shift;
        self
    }

    pub fn eval(&self, aks: &AksData, p: &PhasePoint) -> f64 {
        let base = match &self.kind {
            Kind::JrPairing(t) => p.jr.trace_form(t),
            Kind::JlPairing(t) => p.jl().expect("g invertible").trace_form(t),
            Kind::GEntry(i, j) => p.g[(*i, *j)],
            Kind::AlphaPairing(w) => p.alpha.trace_form(w),
            Kind::PiAlphaPairing(w) => p.pi_alpha.trace_form(w),
            Kind::BetaPairing(w) => p.beta.trace_form(w),
            Kind::PiBetaPairing(w) => p.pi_beta.trace_form(w),
            Kind::Custom(f) => f(aks, p),
        };
        base + self.shift
    }
}

/// Canonicalized gradient data of one observable at one point. Every
/// block lives in its proper subspace so the bracket formula is a plain
/// sum of pairings.
#[derive(Clone, Debug)]
pub struct BracketData {
    /// `dF/dJ^r`, in the algebra.
    pub d_j: Mat,
    /// Right group gradient: `d/ds F(exp(s T) g) = <d_r, T>`.
    pub d_r: Mat,
    /// `alpha`-gradient in `B-perp`.
    pub d_alpha: Mat,
    /// `pi_alpha`-gradient in `A`.
    pub d_pi_alpha: Mat,
    /// `beta`-gradient in `A-perp`.
    pub d_beta: Mat,
    /// `pi_beta`-gradient in `B`.
    pub d_pi_beta: Mat,
}

impl BracketData {
    fn zero(n: usize) -> Self {
        BracketData {
            d_j: Mat::zeros(n),
            d_r: Mat::zeros(n),
            d_alpha: Mat::zeros(n),
            d_pi_alpha: Mat::zeros(n),
            d_beta: Mat::zeros(n),
            d_pi_beta: Mat::zeros(n),
        }
    }

    /// Linear combination of gradient sets (gradients are linear in the
    /// observable).
    pub fn combination(terms: &[(f64, &BracketData)], n: usize) -> Self {
        let mut out = BracketData::zero(n);
        for (c, d) in terms {
            out.d_j = &out.d_j + &d.d_j.scale(*c);
            out.d_r = &out.d_r + &d.d_r.scale(*c);
            out.d_alpha = &out.d_alpha + &d.d_alpha.scale(*c);
            out.d_pi_alpha = &out.d_pi_alpha + &d.d_pi_alpha.scale(*c);
            out.d_beta = &out.d_beta + &d.d_beta.scale(*c);
            out.d_pi_beta = &out.d_pi_beta + &d.d_pi_beta.scale(*c);
        }
        out
    }
}

/// Gradient data of `f` at `p`: exact rules for generator observables,
/// central finite differences (step `FD_STEP` scaled by argument norm)
/// for custom ones.
pub fn gradients(aks: &AksData, f: &Observable, p: &PhasePoint) -> Result<BracketData> {
    let s = aks.splitting();
    let alg = s.algebra();
    let n = aks.n();
    let mut data = BracketData::zero(n);
    match &f.kind {
        Kind::JrPairing(t) => {
            data.d_j = alg.canonicalize(t);
        }
        Kind::JlPairing(t) => {
            let g_inv = p.g.inverse()?;
            let conj = &(&p.g * t) * &g_inv;
            data.d_j = alg.canonicalize(&conj);
            data.d_r = alg.canonicalize(&conj.bracket(&p.jr));
        }
        Kind::GEntry(i, j) => {
            // <d_r, T> = (T g)_{ij} = tr((g E_ji) T)
            let mut w = Mat::zeros(n);
            for k in 0..n {
                w[(k, *i)] = p.g[(k, *j)];
            }
            data.d_r = alg.canonicalize(&w);
        }
        Kind::AlphaPairing(w) => {
            data.d_alpha = s.project_unchecked(w, Subspace::BPerp);
        }
        Kind::PiAlphaPairing(w) => {
            data.d_pi_alpha = s.project_unchecked(w, Subspace::A);
        }
        Kind::BetaPairing(w) => {
            data.d_beta = s.project_unchecked(w, Subspace::APerp);
        }
        Kind::PiBetaPairing(w) => {
            data.d_pi_beta = s.project_unchecked(w, Subspace::B);
        }
        Kind::Custom(_) => {
            data = fd_gradients(aks, f, p)?;
        }
    }
    Ok(data)
}

fn fd_gradients(aks: &AksData, f: &Observable, p: &PhasePoint) -> Result<BracketData> {
    let s = aks.splitting();
    let alg = s.algebra();
    let n = aks.n();
    let eval = |q: &PhasePoint| -> f64 { f.eval(aks, q) };
    let mut data = BracketData::zero(n);

    // momentum block, directions T_a, coefficients on the dual basis
    let h_j = FD_STEP * p.jr.norm_max().max(1.0);
    for (t, t_dual) in alg.basis().iter().zip(alg.dual_basis().iter()) {
        let mut plus = p.clone();
        plus.jr = &p.jr + &t.scale(h_j);
        let mut minus = p.clone();
        minus.jr = &p.jr - &t.scale(h_j);
        let d = (eval(&plus) - eval(&minus)) / (2.0 * h_j);
        data.d_j = &data.d_j + &t_dual.scale(d);
    }

    // group block: g -> exp(s T_a) g
    let h_g = FD_STEP;
    for (t, t_dual) in alg.basis().iter().zip(alg.dual_basis().iter()) {
        let step = t.scale(h_g).exp()?;
        let step_inv = t.scale(-h_g).exp()?;
        let mut plus = p.clone();
        plus.g = &step * &p.g;
        let mut minus = p.clone();
        minus.g = &step_inv * &p.g;
        let d = (eval(&plus) - eval(&minus)) / (2.0 * h_g);
        data.d_r = &data.d_r + &t_dual.scale(d);
    }

    // multiplier blocks
    let h_a = FD_STEP * p.alpha.norm_max().max(1.0);
    for (x, x_dual) in s.basis_a().iter().zip(s.dual_a().iter()) {
        let mut plus = p.clone();
        plus.alpha = &p.alpha + &x.scale(h_a);
        let mut minus = p.clone();
        minus.alpha = &p.alpha - &x.scale(h_a);
        let d = (eval(&plus) - eval(&minus)) / (2.0 * h_a);
        data.d_alpha = &data.d_alpha + &x_dual.scale(d);
    }
    let h_pa = FD_STEP * p.pi_alpha.norm_max().max(1.0);
    for (x_dual, x) in s.dual_a().iter().zip(s.basis_a().iter()) {
        let mut plus = p.clone();
        plus.pi_alpha = &p.pi_alpha + &x_dual.scale(h_pa);
        let mut minus = p.clone();
        minus.pi_alpha = &p.pi_alpha - &x_dual.scale(h_pa);
        let d = (eval(&plus) - eval(&minus)) / (2.0 * h_pa);
        data.d_pi_alpha = &data.d_pi_alpha + &x.scale(d);
    }
    let h_b = FD_STEP * p.beta.norm_max().max(1.0);
    for (y, y_dual) in s.basis_b().iter().zip(s.dual_b().iter()) {
        let mut plus = p.clone();
        plus.beta = &p.beta + &y.scale(h_b);
        let mut minus = p.clone();
        minus.beta = &p.beta - &y.scale(h_b);
        let d = (eval(&plus) - eval(&minus)) / (2.0 * h_b);
        data.d_beta = &data.d_beta + &y_dual.scale(d);
    }
    let h_pb = FD_STEP * p.pi_beta.norm_max().max(1.0);
    for (y_dual, y) in s.dual_b().iter().zip(s.basis_b().iter()) {
        let mut plus = p.clone();
        plus.pi_beta = &p.pi_beta + &y_dual.scale(h_pb);
        let mut minus = p.clone();
        minus.pi_beta = &p.pi_beta - &y_dual.scale(h_pb);
        let d = (eval(&plus) - eval(&minus)) / (2.0 * h_pb);
        data.d_pi_beta = &data.d_pi_beta + &y.scale(d);
    }

    if !(data.d_j.is_finite()
        && data.d_r.is_finite()
        && data.d_alpha.is_finite()
        && data.d_pi_alpha.is_finite()
        && data.d_beta.is_finite()
        && data.d_pi_beta.is_finite())
    {
        return Err(Error::NonFinite);
    }
    Ok(data)
}

/// Assemble the bracket value from two gradient sets at a point:
/// right-trivialized cotangent bracket on `(g, J^r)` plus the two
/// canonical pairs.
pub fn bracket_from(fd: &BracketData, gd: &BracketData, p: &PhasePoint) -> f64 {
    fd.d_r.trace_form(&gd.d_j) - gd.d_r.trace_form(&fd.d_j)
        + p.jr.trace_form(&fd.d_j.bracket(&gd.d_j))
        + fd.d_alpha.trace_form(&gd.d_pi_alpha)
        - gd.d_alpha.trace_form(&fd.d_pi_alpha)
        + fd.d_beta.trace_form(&gd.d_pi_beta)
        - gd.d_beta.trace_form(&fd.d_pi_beta)
}

/// Poisson bracket `{f, g}` at `p`.
pub fn poisson_bracket(
    aks: &AksData,
    f: &Observable,
    g: &Observable,
    p: &PhasePoint,
) -> Result<f64> {
    let fd = gradients(aks, f, p)?;
    let gd = gradients(aks, g, p)?;
    Ok(bracket_from(&fd, &gd, p))
}

/// The primary Hamiltonian
/// `H_P = <J^r, J^r>/2 + <alpha, mu - J^r_{A*}> + <beta, nu - J^l_{B*}>
///  + <v_alpha, pi_alpha> + <v_beta, pi_beta>`.
///
/// The multipliers only need to lie in `A` and `B` here; their
/// restriction to the little algebras is what the consistency analysis
/// enforces, not this evaluation.
pub fn primary_hamiltonian(
    aks: &AksData,
    p: &PhasePoint,
    v_alpha: &Mat,
    v_beta: &Mat,
) -> Result<f64> {
    let s = aks.splitting();
    if !s.in_subspace(v_alpha, Subspace::A) {
        return Err(Error::NotInSubspace {
            subspace: "A",
            residual: s.subspace_residual(v_alpha, Subspace::A),
        });
    }
    if !s.in_subspace(v_beta, Subspace::B) {
        return Err(Error::NotInSubspace {
            subspace: "B",
            residual: s.subspace_residual(v_beta, Subspace::B),
        });
    }
    let jl = p.jl()?;
    let jr_a_star = s.proj_b_perp(&p.jr);
    let jl_b_star = s.proj_a_perp(&jl);
    Ok(0.5 * p.jr.trace_form(&p.jr)
        + p.alpha.trace_form(&(aks.mu() - &jr_a_star))
        + p.beta.trace_form(&(aks.nu() - &jl_b_star))
        + v_alpha.trace_form(&p.pi_alpha)
        + v_beta.trace_form(&p.pi_beta))
}

/// Which family a constraint belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintLabel {
    PrimaryPiAlpha,
    PrimaryPiBeta,
    SecondaryJr,
    SecondaryJl,
    SecondaryAlpha,
    SecondaryBeta,
}

/// First/second-class split of the constraint directions.
#[derive(Clone, Debug)]
pub struct Classification {
    /// Coefficient vectors (over the constraint list) spanning the
    /// first-class directions.
    pub first_class: Vec<Vec<f64>>,
    /// Complementary second-class directions.
    pub second_class: Vec<Vec<f64>>,
    /// `dim M - 2 (first class) - (second class)`.
    pub reduced_dim: usize,
}

/// The labelled constraint family with optional classification result.
pub struct ConstraintSet {
    labels: Vec<ConstraintLabel>,
    constraints: Vec<Observable>,
    classification: Option<Classification>,
}

impl ConstraintSet {
    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn labels(&self) -> &[ConstraintLabel] {
        &self.labels
    }

    pub fn constraints(&self) -> &[Observable] {
        &self.constraints
    }

    pub fn count(&self, label: ConstraintLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn classification(&self) -> Option<&Classification> {
        self.classification.as_ref()
    }

    pub fn eval_all(&self, aks: &AksData, p: &PhasePoint) -> Vec<f64> {
        self.constraints.iter().map(|c| c.eval(aks, p)).collect()
    }

    /// Largest constraint violation at `p`.
    pub fn max_violation(&self, aks: &AksData, p: &PhasePoint) -> f64 {
        self.eval_all(aks, p)
            .iter()
            .fold(0.0f64, |a, &b| a.max(b.abs()))
    }
}

/// Emit the full constraint family: primary momenta, the two momentum
/// matching families, and the multiplier restrictions onto the little
/// algebras.
pub fn build_constraints(aks: &AksData) -> ConstraintSet {
    let s = aks.splitting();
    let mut labels = Vec::new();
    let mut constraints = Vec::new();
    for x in s.basis_a() {
        labels.push(ConstraintLabel::PrimaryPiAlpha);
        constraints.push(Observable::pi_alpha_pairing(x.clone()));
    }
    for y in s.basis_b() {
        labels.push(ConstraintLabel::PrimaryPiBeta);
        constraints.push(Observable::pi_beta_pairing(y.clone()));
    }
    for x in s.basis_a() {
        labels.push(ConstraintLabel::SecondaryJr);
        constraints
            .push(Observable::jr_pairing(x.clone()).with_shift(-aks.mu().trace_form(x)));
    }
    for y in s.basis_b() {
        labels.push(ConstraintLabel::SecondaryJl);
        constraints
            .push(Observable::jl_pairing(y.clone()).with_shift(-aks.nu().trace_form(y)));
    }
    for rho in aks.alpha_constraint_directions() {
        labels.push(ConstraintLabel::SecondaryAlpha);
        constraints.push(Observable::alpha_pairing(rho));
    }
    for sigma in aks.beta_constraint_directions() {
        labels.push(ConstraintLabel::SecondaryBeta);
        constraints.push(Observable::beta_pairing(sigma));
    }
    ConstraintSet { labels, constraints, classification: None }
}

/// Bracket matrix `C_ab = {phi_a, phi_b}` of the constraint family at `p`.
pub fn constraint_bracket_matrix(
    aks: &AksData,
    cs: &ConstraintSet,
    p: &PhasePoint,
) -> Result<Rect> {
    let m = cs.len();
    let grads: Vec<BracketData> = cs
        .constraints
        .iter()
        .map(|c| gradients(aks, c, p))
        .collect::<Result<_>>()?;
    let mut c = Rect::zeros(m, m);
    for i in 0..m {
        for j in i + 1..m {
            let v = bracket_from(&grads[i], &grads[j], p);
            c.set(i, j, v);
            c.set(j, i, -v);
        }
    }
    Ok(c)
}

/// Classify the constraints at a family of constrained points: the
/// first-class directions are the common nullspace of the bracket
/// matrices, everything transverse is second class.
///
/// The counts are checked against the structural prediction: one
/// first-class direction per little-algebra generator in each of the
/// momentum and matching families, and an even second-class count.
pub fn classify_constraints(
    aks: &AksData,
    cs: &mut ConstraintSet,
    points: &[PhasePoint],
) -> Result<Classification> {
    assert!(!points.is_empty(), "need at least one constrained point");
    for p in points {
        let viol = cs.max_violation(aks, p);
        let scale = p.jr.norm_max().max(1.0);
        if viol > SURFACE_TOL * scale {
            return Err(Error::OffConstraintSurface { residual: viol });
        }
    }
    let mut stacked: Option<Rect> = None;
    for p in points {
        let c = constraint_bracket_matrix(aks, cs, p)?;
        stacked = Some(match stacked {
            None => c,
            Some(prev) => prev.vstack(&c),
        });
    }
    let stacked = stacked.expect("at least one point");
    let svd = numeric::jacobi_svd(&stacked);
    let m = cs.len();
    let mut first_class = Vec::new();
    let mut second_class = Vec::new();
    for j in 0..m {
        let col: Vec<f64> = (0..m).map(|i| svd.v.get(i, j)).collect();
        if svd.sigma[j] <= CLASSIFY_TOL {
            first_class.push(col);
        } else {
            second_class.push(col);
        }
    }

    let expected_fc = 2 * (aks.little_a().len() + aks.little_b().len());
    assert_eq!(
        first_class.len(),
        expected_fc,
        "first-class count disagrees with the little-algebra prediction"
    );
    assert!(second_class.len() % 2 == 0, "second-class count must be even");

    let reduced_dim = phase_space_dim(aks) - 2 * first_class.len() - second_class.len();
    let classification = Classification { first_class, second_class, reduced_dim };
    cs.classification = Some(classification.clone());
    Ok(classification)
}

/// Apply the two gauge actions: the abelian multiplier shifts
/// `(alpha, beta) -> (alpha + x, beta + y)` with `x` in `A_mu`, `y` in
/// `B_nu`, and the little-group conjugations `(g, J^r) -> (a g b^-1,
/// a J^r a^-1)`. Preservation of the constraint surface is asserted when
/// the input point lies on it, and the factor transformation law is
/// asserted whenever `g` factorizes.
pub fn gauge_actions(
    aks: &AksData,
    p: &PhasePoint,
    x: &Mat,
    y: &Mat,
    a: &Mat,
    b: &Mat,
) -> Result<PhasePoint> {
    if !in_span(aks.little_a(), x) {
        return Err(Error::NotInSubspace { subspace: "A_mu", residual: f64::INFINITY });
    }
    if !in_span(aks.little_b(), y) {
        return Err(Error::NotInSubspace { subspace: "B_nu", residual: f64::INFINITY });
    }
    check_little_group_a(aks, a)?;
    check_little_group_b(aks, b)?;
    let a_inv = a.inverse()?;
    let b_inv = b.inverse()?;
    let out = PhasePoint {
        g: &(a * &p.g) * &b_inv,
        jr: &(a * &p.jr) * &a_inv,
        alpha: &p.alpha + x,
        pi_alpha: p.pi_alpha.clone(),
        beta: &p.beta + y,
        pi_beta: p.pi_beta.clone(),
    };
    let cs = build_constraints(aks);
    let scale = p.jr.norm_max().max(1.0);
    let before = cs.max_violation(aks, p);
    if before <= 1e-8 * scale {
        let after = cs.max_violation(aks, &out);
        assert!(
            after <= 100.0 * before + 1e-10 * scale,
            "gauge action left the constraint surface ({before:e} -> {after:e})"
        );
    }
    let s = aks.splitting();
    if let (Ok((ga, gb)), Ok((ga2, gb2))) = (s.factorize(&p.g), s.factorize(&out.g)) {
        let sa = ga2.norm_max().max(1.0);
        assert!(
            (&ga2 - &(a * &ga)).norm_max() <= 1e-9 * sa,
            "A-factor does not transform by left multiplication"
        );
        let sb = gb2.norm_max().max(1.0);
        assert!(
            (&gb2 - &(&gb * &b_inv)).norm_max() <= 1e-9 * sb,
            "B-factor does not transform by right multiplication"
        );
    }
    Ok(out)
}

fn in_span(basis: &[Mat], x: &Mat) -> bool {
    if basis.is_empty() {
        return x.norm_max() <= 1e-8;
    }
    let cols = Rect::from_mat_columns(basis);
    let c = numeric::lstsq(&cols, x.entries(), 1e-12);
    let mut rec = Mat::zeros(basis[0].n());
    for (ci, b) in c.iter().zip(basis.iter()) {
        rec = &rec + &b.scale(*ci);
    }
    (&rec - x).norm_max() <= 1e-8 * x.norm_max().max(1.0)
}

/// The gauge-invariant momentum `Ltilde = g_A^-1 J^r g_A = g_B J^l
/// g_B^-1`; both routes are evaluated and must agree, and the dual
/// decomposition parts of the result are cross-checked against their
/// factor-level expressions.
pub fn ltilde(aks: &AksData, p: &PhasePoint) -> Result<LaxElement> {
    let s = aks.splitting();
    let (ga, gb) = s.factorize(&p.g)?;
    let ga_inv = ga.inverse()?;
    let gb_inv = gb.inverse()?;
    let lt = &(&ga_inv * &p.jr) * &ga;
    let jl = p.jl()?;
    let lt2 = &(&gb * &jl) * &gb_inv;
    let scale = lt.norm_max().max(1.0);
    let cond_b = (gb.norm_max() * gb_inv.norm_max()).max(1.0);
    assert!(
        (&lt - &lt2).norm_max() <= 1e-10 * scale * cond_b,
        "the two expressions for Ltilde disagree"
    );
    // factor-level part expressions
    let a_star = s.proj_b_perp(&(&(&ga_inv * &s.proj_b_perp(&p.jr)) * &ga));
    let b_star = s.proj_a_perp(&(&(&gb * &s.proj_a_perp(&jl)) * &gb_inv));
    let parts = aks.lax_from_matrix(&lt);
    assert!(
        (parts.a_star_part() - &a_star).norm_max() <= 1e-9 * scale * cond_b
            && (parts.b_star_part() - &b_star).norm_max() <= 1e-9 * scale * cond_b,
        "Ltilde parts disagree with their factor-level expressions"
    );
    Ok(parts)
}

/// Dirac bracket `{f, g}* = {f, g} - {f, psi_i} (D^-1)_{ij} {psi_j, g}`
/// over the second-class directions `psi` of the classified constraint
/// set. The block `D` must have full rank (anything else signals a
/// misclassification) and acceptable conditioning.
pub fn dirac_bracket(
    aks: &AksData,
    f: &Observable,
    g: &Observable,
    cs: &ConstraintSet,
    p: &PhasePoint,
) -> Result<f64> {
    let classification = cs.classification().ok_or(Error::Unclassified)?;
    let viol = cs.max_violation(aks, p);
    let scale = p.jr.norm_max().max(1.0);
    if viol > 1e-8 * scale {
        return Err(Error::OffConstraintSurface { residual: viol });
    }
    let n = aks.n();
    let grads: Vec<BracketData> = cs
        .constraints
        .iter()
        .map(|c| gradients(aks, c, p))
        .collect::<Result<_>>()?;
    let psi: Vec<BracketData> = classification
        .second_class
        .iter()
        .map(|coeffs| {
            let terms: Vec<(f64, &BracketData)> =
                coeffs.iter().copied().zip(grads.iter()).collect();
            BracketData::combination(&terms, n)
        })
        .collect();
    let sc = psi.len();
    let mut d = Rect::zeros(sc, sc);
    for i in 0..sc {
        for j in i + 1..sc {
            let v = bracket_from(&psi[i], &psi[j], p);
            d.set(i, j, v);
            d.set(j, i, -v);
        }
    }
    let svd = numeric::jacobi_svd(&d);
    let rank = svd.sigma.iter().filter(|&&s| s > CLASSIFY_TOL).count();
    if rank != sc {
        return Err(Error::SecondClassRank { expected: sc, got: rank });
    }
    if sc > 0 {
        let cond = svd.sigma[0] / svd.sigma[sc - 1];
        if cond > 1e10 {
            return Err(Error::IllConditionedBlock { cond });
        }
    }
    let d_inv = numeric::pseudo_inverse(&d, CLASSIFY_TOL);

    let fd = gradients(aks, f, p)?;
    let gd = gradients(aks, g, p)?;
    let mut value = bracket_from(&fd, &gd, p);
    let f_psi: Vec<f64> = psi.iter().map(|q| bracket_from(&fd, q, p)).collect();
    let psi_g: Vec<f64> = psi.iter().map(|q| bracket_from(q, &gd, p)).collect();
    for i in 0..sc {
        for j in 0..sc {
            value -= f_psi[i] * d_inv.get(i, j) * psi_g[j];
        }
    }
    Ok(value)
}

/// A constrained Hamiltonian trajectory: phase points, the
/// gauge-invariant momentum along it, and the constraint drift.
#[derive(Debug)]
pub struct ConstrainedTrajectory {
    pub times: Vec<f64>,
    pub points: Vec<PhasePoint>,
    pub ltilde: Vec<LaxElement>,
    pub constraint_drift: Vec<f64>,
}

impl ConstrainedTrajectory {
    pub fn max_drift(&self) -> f64 {
        self.constraint_drift.iter().fold(0.0f64, |a, &b| a.max(b))
    }

    pub fn last_ltilde(&self) -> &LaxElement {
        self.ltilde.last().expect("non-empty trajectory")
    }
}

/// Integrate the Hamiltonian flow of the primary Hamiltonian with fixed
/// multipliers `v_alpha` in `A_mu`, `v_beta` in `B_nu`, in the
/// trivialized coordinates:
///
/// ```text
/// dg/dt       = (J^r - alpha - g beta g^-1) g      (= C^r-relation)
/// dJ^r/dt     = [J^r, alpha]
/// d alpha/dt  = v_alpha,   d pi_alpha/dt = proj_Bperp(J^r) - mu
/// d beta/dt   = v_beta,    d pi_beta/dt  = proj_Aperp(J^l) - nu
/// ```
///
/// These right-hand sides are the coordinate Poisson brackets with
/// `H_P`; the test suite verifies them against the numeric bracket. The
/// run aborts if the constraint drift exceeds `1e-4`.
pub fn constrained_integrate(
    aks: &AksData,
    p0: &PhasePoint,
    v_alpha: &Mat,
    v_beta: &Mat,
    t_end: f64,
    dt: f64,
) -> Result<ConstrainedTrajectory> {
    assert!(dt > 0.0 && t_end > 0.0, "need positive dt and t_end");
    p0.validate(aks)?;
    if !in_span(aks.little_a(), v_alpha) {
        return Err(Error::NotInSubspace { subspace: "A_mu", residual: f64::INFINITY });
    }
    if !in_span(aks.little_b(), v_beta) {
        return Err(Error::NotInSubspace { subspace: "B_nu", residual: f64::INFINITY });
    }
    let cs = build_constraints(aks);
    let scale = p0.jr.norm_max().max(1.0);
    let v0 = cs.max_violation(aks, p0);
    if v0 > SURFACE_TOL * scale {
        return Err(Error::OffConstraintSurface { residual: v0 });
    }

    let s = aks.splitting();
    let rhs = |p: &PhasePoint| -> Result<[Mat; 6]> {
        let g_inv = p.g.inverse()?;
        let conj_beta = &(&p.g * &p.beta) * &g_inv;
        let gdot = &(&(&p.jr - &p.alpha) - &conj_beta) * &p.g;
        let jrdot = p.jr.bracket(&p.alpha);
        let jl = &(&g_inv * &p.jr) * &p.g;
        let pi_alpha_dot = &s.proj_b_perp(&p.jr) - aks.mu();
        let pi_beta_dot = &s.proj_a_perp(&jl) - aks.nu();
        Ok([gdot, jrdot, v_alpha.clone(), pi_alpha_dot, v_beta.clone(), pi_beta_dot])
    };
    let advance = |p: &PhasePoint, k: &[Mat; 6], h: f64| -> PhasePoint {
        PhasePoint {
            g: &p.g + &k[0].scale(h),
            jr: &p.jr + &k[1].scale(h),
            alpha: &p.alpha + &k[2].scale(h),
            pi_alpha: &p.pi_alpha + &k[3].scale(h),
            beta: &p.beta + &k[4].scale(h),
            pi_beta: &p.pi_beta + &k[5].scale(h),
        }
    };

    let times = crate::flow::time_grid(t_end, dt);
    let mut out = ConstrainedTrajectory {
        times: times.clone(),
        points: Vec::with_capacity(times.len()),
        ltilde: Vec::with_capacity(times.len()),
        constraint_drift: Vec::with_capacity(times.len()),
    };
    let mut p = p0.clone();
    out.ltilde.push(ltilde(aks, &p)?);
    out.constraint_drift.push(v0);
    out.points.push(p.clone());
    for w in times.windows(2) {
        let h = w[1] - w[0];
        let k1 = rhs(&p)?;
        let k2 = rhs(&advance(&p, &k1, 0.5 * h))?;
        let k3 = rhs(&advance(&p, &k2, 0.5 * h))?;
        let k4 = rhs(&advance(&p, &k3, h))?;
        let mut next = p.clone();
        for idx in 0..6 {
            let incr = &(&k1[idx] + &k4[idx]) + &(&k2[idx] + &k3[idx]).scale(2.0);
            let stepped = incr.scale(h / 6.0);
            let field = match idx {
                0 => &mut next.g,
                1 => &mut next.jr,
                2 => &mut next.alpha,
                3 => &mut next.pi_alpha,
                4 => &mut next.beta,
                _ => &mut next.pi_beta,
            };
            *field = &*field + &stepped;
        }
        p = next;
        if !(p.g.is_finite() && p.jr.is_finite()) {
            return Err(Error::NonFiniteState { t_last: w[0] });
        }
        let drift = cs.max_violation(aks, &p);
        if drift > 1e-4 {
            return Err(Error::ConstraintDrift { t: w[1], drift });
        }
        out.constraint_drift.push(drift);
        out.ltilde.push(ltilde(aks, &p)?);
        out.points.push(p.clone());
    }
    Ok(out)
}

/// Unconstrained random phase point: every component drawn from its own
/// subspace, `g` the exponential of a moderate algebra element. Used for
/// checking bracket identities that hold on all of the phase space.
pub fn random_phase_point<R: Rng + ?Sized>(aks: &AksData, rng: &mut R) -> PhasePoint {
    let s = aks.splitting();
    let g = crate::algebra::random_span_element(s.algebra().basis(), rng)
        .scale(0.5)
        .exp()
        .expect("moderate algebra element exponentiates");
    PhasePoint {
        g,
        jr: crate::algebra::random_span_element(s.algebra().basis(), rng),
        alpha: crate::algebra::random_span_element(s.basis_a(), rng),
        pi_alpha: crate::algebra::random_span_element(s.dual_a(), rng),
        beta: crate::algebra::random_span_element(s.basis_b(), rng),
        pi_beta: crate::algebra::random_span_element(s.dual_b(), rng),
    }
}

/// Constructive sample of a constrained point: random group elements on
/// both sides, `J^r = g_A L g_A^-1` with `L` the matching orbit point,
/// multipliers from the little algebras, conjugate momenta zero. All
/// constraints then hold to roundoff.
pub fn sample_constrained_point<R: Rng + ?Sized>(aks: &AksData, rng: &mut R) -> PhasePoint {
    let ga = aks.random_group_a(rng);
    let gb = aks.random_group_b(rng);
    let l = aks
        .orbit_point(&ga, &gb)
        .expect("sampled group elements are in the groups");
    let ga_inv = ga.inverse().expect("group element invertible");
    let jr = &(&ga * l.matrix()) * &ga_inv;
    let n = aks.n();
    let alpha = if aks.little_a().is_empty() {
        Mat::zeros(n)
    } else {
        crate::algebra::random_span_element(aks.little_a(), rng)
    };
    let beta = if aks.little_b().is_empty() {
        Mat::zeros(n)
    } else {
        crate::algebra::random_span_element(aks.little_b(), rng)
    };
    PhasePoint {
        g: &ga * &gb,
        jr,
        alpha,
        pi_alpha: Mat::zeros(n),
        beta,
        pi_beta: Mat::zeros(n),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::factorization_solve;
    use crate::preset::{preset_iwasawa, preset_toda};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(4242)
    }

    #[test]
    fn generator_bracket_tables() {
        let aks = preset_toda(2);
        let mut rng = rng();
        let basis = aks.splitting().algebra().basis().to_vec();
        for _ in 0..5 {
            let p = sample_constrained_point(&aks, &mut rng);
            for t in &basis {
                for u in &basis {
                    // {<Jr,T>, <Jr,U>} = <Jr, [T,U]>
                    let lhs = poisson_bracket(
                        &aks,
                        &Observable::jr_pairing(t.clone()),
                        &Observable::jr_pairing(u.clone()),
                        &p,
                    )
                    .unwrap();
                    let rhs = p.jr.trace_form(&t.bracket(u));
                    assert!((lhs - rhs).abs() < 1e-10);
                    // {<Jl,T>, <Jl,U>} = -<Jl, [T,U]>
                    let lhs = poisson_bracket(
                        &aks,
                        &Observable::jl_pairing(t.clone()),
                        &Observable::jl_pairing(u.clone()),
                        &p,
                    )
                    .unwrap();
                    let rhs = -p.jl().unwrap().trace_form(&t.bracket(u));
                    assert!((lhs - rhs).abs() < 1e-10);
                    // {<Jr,T>, <Jl,U>} = 0
                    let lhs = poisson_bracket(
                        &aks,
                        &Observable::jr_pairing(t.clone()),
                        &Observable::jl_pairing(u.clone()),
                        &p,
                    )
                    .unwrap();
                    assert!(lhs.abs() < 1e-10);
                }
                // {g_ij, <Jr,T>} = (T g)_ij and {g_ij, <Jl,T>} = (g T)_ij
                for i in 0..2 {
                    for j in 0..2 {
                        let lhs = poisson_bracket(
                            &aks,
                            &Observable::g_entry(i, j),
                            &Observable::jr_pairing(t.clone()),
                            &p,
                        )
                        .unwrap();
                        assert!((lhs - (t * &p.g)[(i, j)]).abs() < 1e-11);
                        let lhs = poisson_bracket(
                            &aks,
                            &Observable::g_entry(i, j),
                            &Observable::jl_pairing(t.clone()),
                            &p,
                        )
                        .unwrap();
                        assert!((lhs - (&p.g * t)[(i, j)]).abs() < 1e-11);
                    }
                }
            }
            // canonical pairs
            let s = aks.splitting();
            for (m, xm) in s.dual_a().iter().enumerate() {
                for (k, xk) in s.basis_a().iter().enumerate() {
                    let lhs = poisson_bracket(
                        &aks,
                        &Observable::alpha_pairing(xm.clone()),
                        &Observable::pi_alpha_pairing(xk.clone()),
                        &p,
                    )
                    .unwrap();
                    let expect = if m == k { 1.0 } else { 0.0 };
                    assert!((lhs - expect).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn numeric_gradients_match_exact_rules() {
        let aks = preset_toda(3);
        let mut rng = rng();
        let p = sample_constrained_point(&aks, &mut rng);
        let t = aks.splitting().algebra().basis()[3].clone();
        let exact = gradients(&aks, &Observable::jl_pairing(t.clone()), &p).unwrap();
        let custom = Observable::custom(move |_, q| q.jl().unwrap().trace_form(&t));
        let fd = gradients(&aks, &custom, &p).unwrap();
        assert!((&exact.d_j - &fd.d_j).norm_max() < 1e-7);
        assert!((&exact.d_r - &fd.d_r).norm_max() < 1e-7);
    }

    #[test]
    fn bracket_is_antisymmetric_and_leibniz() {
        let aks = preset_toda(2);
        let mut rng = rng();
        let p = sample_constrained_point(&aks, &mut rng);
        let f = Observable::custom(|_, q| q.jr.trace_form(&q.jr) + q.g[(0, 1)]);
        let g = Observable::custom(|aks2, q| {
            q.alpha.trace_form(aks2.nu()) + q.g[(1, 0)] * q.jr[(0, 0)]
        });
        let h = Observable::custom(|_, q| q.jr[(0, 1)] + q.beta[(1, 0)]);
        let ff = poisson_bracket(&aks, &f, &f, &p).unwrap();
        assert!(ff.abs() < 1e-9);
        let fg = poisson_bracket(&aks, &f, &g, &p).unwrap();
        let gf = poisson_bracket(&aks, &g, &f, &p).unwrap();
        assert!((fg + gf).abs() < 1e-9);
        // Leibniz: {f, g h} = {f, g} h + g {f, h}
        let gh = Observable::custom(|aks2, q| {
            let gv = q.alpha.trace_form(aks2.nu()) + q.g[(1, 0)] * q.jr[(0, 0)];
            let hv = q.jr[(0, 1)] + q.beta[(1, 0)];
            gv * hv
        });
        let lhs = poisson_bracket(&aks, &f, &gh, &p).unwrap();
        let gv = g.eval(&aks, &p);
        let hv = h.eval(&aks, &p);
        let rhs = fg * hv + gv * poisson_bracket(&aks, &f, &h, &p).unwrap();
        assert!((lhs - rhs).abs() < 1e-7, "{lhs} vs {rhs}");
    }

    #[test]
    fn primary_hamiltonian_values_and_secondary_constraints() {
        let aks = preset_toda(2);
        let mut rng = rng();
        let mut p = sample_constrained_point(&aks, &mut rng);
        p.alpha = Mat::zeros(2);
        p.beta = Mat::zeros(2);
        let z = Mat::zeros(2);
        let hp = primary_hamiltonian(&aks, &p, &z, &z).unwrap();
        assert!((hp - 0.5 * p.jr.trace_form(&p.jr)).abs() < 1e-12);

        // off the surface, {<pi_alpha, xi>, H_P} recovers <Jr_{A*} - mu, xi>
        let mut q = p.clone();
        q.jr = &q.jr + &Mat::elementary(2, 1, 0).scale(0.3);
        let xi = Mat::elementary(2, 0, 1);
        let hp_obs = Observable::primary_hamiltonian(z.clone(), z.clone());
        let lhs = poisson_bracket(
            &aks,
            &Observable::pi_alpha_pairing(xi.clone()),
            &hp_obs,
            &q,
        )
        .unwrap();
        let rhs = (&aks.splitting().proj_b_perp(&q.jr) - aks.mu()).trace_form(&xi);
        assert!((lhs - rhs).abs() < 1e-8, "{lhs} vs {rhs}");
    }

    #[test]
    fn constraint_counts_for_presets() {
        let aks2 = preset_toda(2);
        let cs2 = build_constraints(&aks2);
        assert_eq!(cs2.len(), 8);
        assert_eq!(cs2.count(ConstraintLabel::PrimaryPiAlpha), 1);
        assert_eq!(cs2.count(ConstraintLabel::PrimaryPiBeta), 2);
        assert_eq!(cs2.count(ConstraintLabel::SecondaryJr), 1);
        assert_eq!(cs2.count(ConstraintLabel::SecondaryJl), 2);
        assert_eq!(cs2.count(ConstraintLabel::SecondaryAlpha), 0);
        assert_eq!(cs2.count(ConstraintLabel::SecondaryBeta), 2);

        let aks3 = preset_toda(3);
        let cs3 = build_constraints(&aks3);
        assert_eq!(cs3.count(ConstraintLabel::PrimaryPiAlpha), 3);
        assert_eq!(cs3.count(ConstraintLabel::PrimaryPiBeta), 5);
        assert_eq!(cs3.count(ConstraintLabel::SecondaryJr), 3);
        assert_eq!(cs3.count(ConstraintLabel::SecondaryJl), 5);
        assert_eq!(cs3.count(ConstraintLabel::SecondaryAlpha), 0);
        assert_eq!(cs3.count(ConstraintLabel::SecondaryBeta), 4);
        assert_eq!(cs3.len(), 20);

        // zero moments: the multiplier constraint lists are empty
        let free = AksData::new(
            aks2.splitting().clone(),
            Mat::zeros(2),
            Mat::zeros(2),
        )
        .unwrap();
        let csf = build_constraints(&free);
        assert_eq!(csf.count(ConstraintLabel::SecondaryAlpha), 0);
        assert_eq!(csf.count(ConstraintLabel::SecondaryBeta), 0);
    }

    #[test]
    fn classification_toda_sl2() {
        let aks = preset_toda(2);
        let mut cs = build_constraints(&aks);
        let mut rng = rng();
        let points: Vec<PhasePoint> =
            (0..10).map(|_| sample_constrained_point(&aks, &mut rng)).collect();
        let cls = classify_constraints(&aks, &mut cs, &points).unwrap();
        assert_eq!(cls.first_class.len(), 2);
        assert_eq!(cls.second_class.len(), 6);
        assert_eq!(cls.reduced_dim, 2);
        assert_eq!(cls.reduced_dim, aks.phase_space_dim());

        // the first-class directions are pi_alpha and Jr along A_mu = A
        for (idx, label) in [(0usize, ConstraintLabel::PrimaryPiAlpha), (3, ConstraintLabel::SecondaryJr)] {
            assert_eq!(cs.labels()[idx], label);
            let mut e = alloc::vec![0.0; cs.len()];
            e[idx] = 1.0;
            let cols = Rect::from_columns(&cls.first_class);
            let c = numeric::lstsq(&cols, &e, 1e-12);
            let mut rec = alloc::vec![0.0; cs.len()];
            for (ci, col) in c.iter().zip(cls.first_class.iter()) {
                for (r, v) in rec.iter_mut().zip(col.iter()) {
                    *r += ci * v;
                }
            }
            let res: f64 = rec
                .iter()
                .zip(e.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
            assert!(res < 1e-12, "direction {idx} not first class");
        }
    }

    #[test]
    fn zero_moments_make_everything_first_class() {
        let base = preset_toda(2);
        let aks = AksData::new(base.splitting().clone(), Mat::zeros(2), Mat::zeros(2)).unwrap();
        let mut cs = build_constraints(&aks);
        let mut rng = rng();
        let points: Vec<PhasePoint> =
            (0..6).map(|_| sample_constrained_point(&aks, &mut rng)).collect();
        let cls = classify_constraints(&aks, &mut cs, &points).unwrap();
        assert_eq!(cls.second_class.len(), 0);
        assert_eq!(cls.first_class.len(), cs.len());
    }

    #[test]
    fn jr_constraint_brackets_reduce_to_isotropy() {
        let aks = preset_toda(3);
        let mut rng = rng();
        let p = sample_constrained_point(&aks, &mut rng);
        let s = aks.splitting();
        for xi in s.basis_a() {
            for xj in s.basis_a() {
                let f = Observable::jr_pairing(xi.clone()).with_shift(-aks.mu().trace_form(xi));
                let g = Observable::jr_pairing(xj.clone()).with_shift(-aks.mu().trace_form(xj));
                let lhs = poisson_bracket(&aks, &f, &g, &p).unwrap();
                let rhs = aks.mu().trace_form(&xi.bracket(xj));
                assert!((lhs - rhs).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn gauge_actions_preserve_surface_and_transform_factors() {
        let aks = preset_toda(2);
        let mut rng = rng();
        let p = sample_constrained_point(&aks, &mut rng);
        let id = Mat::identity(2);
        let zero = Mat::zeros(2);

        let same = gauge_actions(&aks, &p, &zero, &zero, &id, &id).unwrap();
        assert!((&same.g - &p.g).norm_max() == 0.0);

        let a = Mat::elementary(2, 0, 1).scale(0.7).exp().unwrap();
        let x = Mat::elementary(2, 0, 1).scale(-0.4);
        let out = gauge_actions(&aks, &p, &x, &zero, &a, &id).unwrap();
        // J^l transforms by b = I: unchanged
        let jl_before = p.jl().unwrap();
        let jl_after = out.jl().unwrap();
        assert!((&jl_after - &jl_before).norm_max() < 1e-10);

        // a non-little-algebra multiplier shift is rejected
        let bad = gauge_actions(&aks, &p, &zero, &Mat::elementary(2, 1, 0), &id, &id);
        assert!(bad.is_err());
    }

    #[test]
    fn ltilde_identity_orbit_and_gauge_invariance() {
        let aks = preset_toda(2);
        let mut rng = rng();
        let mut p = sample_constrained_point(&aks, &mut rng);
        p.g = Mat::identity(2);
        p.jr = (aks.mu() + aks.nu()).clone();
        let lt = ltilde(&aks, &p).unwrap();
        assert!((lt.matrix() - &p.jr).norm_max() < 1e-13);

        let q = sample_constrained_point(&aks, &mut rng);
        let lt_q = ltilde(&aks, &q).unwrap();
        // A-pairings of Ltilde see only the conjugated A*-part of J^r
        let s = aks.splitting();
        let (ga, _) = s.factorize(&q.g).unwrap();
        let ga_inv = ga.inverse().unwrap();
        let conj = &(&ga_inv * &s.proj_b_perp(&q.jr)) * &ga;
        for x in s.basis_a() {
            let lhs = lt_q.matrix().trace_form(x);
            let rhs = conj.trace_form(x);
            assert!((lhs - rhs).abs() < 1e-11);
        }
        // on the surface, Ltilde equals the orbit form
        let l = aks
            .orbit_point(&ga, &s.factorize(&q.g).unwrap().1)
            .unwrap();
        assert!((lt_q.matrix() - l.matrix()).norm_max() < 1e-9);

        // gauge scan
        for _ in 0..20 {
            let a = aks.random_little_group_a(&mut rng);
            let b = aks.random_little_group_b(&mut rng);
            let x = Mat::zeros(2);
            let moved = gauge_actions(&aks, &q, &x, &x, &a, &b).unwrap();
            let lt_moved = ltilde(&aks, &moved).unwrap();
            assert!((lt_moved.matrix() - lt_q.matrix()).norm_max() < 1e-9);
        }
    }

    #[test]
    fn dirac_brackets_reproduce_lie_poisson() {
        let aks = preset_toda(2);
        let mut cs = build_constraints(&aks);
        let mut rng = rng();
        let points: Vec<PhasePoint> =
            (0..10).map(|_| sample_constrained_point(&aks, &mut rng)).collect();
        classify_constraints(&aks, &mut cs, &points).unwrap();

        let s = aks.splitting();
        for p in points.iter().take(4) {
            let lt = ltilde(&aks, p).unwrap();
            // A-A block: {<Lt,X>, <Lt,X'>}* = -<Lt,[X,X']>
            for x in s.basis_a() {
                for x2 in s.basis_a() {
                    let v = dirac_bracket(
                        &aks,
                        &Observable::ltilde_pairing(x.clone()),
                        &Observable::ltilde_pairing(x2.clone()),
                        &cs,
                        p,
                    )
                    .unwrap();
                    let expect = -lt.matrix().trace_form(&x.bracket(x2));
                    assert!((v - expect).abs() < 1e-8, "{v} vs {expect}");
                }
                // mixed block vanishes
                for y in s.basis_b() {
                    let v = dirac_bracket(
                        &aks,
                        &Observable::ltilde_pairing(x.clone()),
                        &Observable::ltilde_pairing(y.clone()),
                        &cs,
                        p,
                    )
                    .unwrap();
                    assert!(v.abs() < 1e-8);
                }
            }
            // B-B block with the plus sign
            for y in s.basis_b() {
                for y2 in s.basis_b() {
                    let v = dirac_bracket(
                        &aks,
                        &Observable::ltilde_pairing(y.clone()),
                        &Observable::ltilde_pairing(y2.clone()),
                        &cs,
                        p,
                    )
                    .unwrap();
                    let expect = lt.matrix().trace_form(&y.bracket(y2));
                    assert!((v - expect).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn dirac_bracket_kills_second_class_constraints() {
        let aks = preset_toda(2);
        let mut cs = build_constraints(&aks);
        let mut rng = rng();
        let points: Vec<PhasePoint> =
            (0..8).map(|_| sample_constrained_point(&aks, &mut rng)).collect();
        let cls = classify_constraints(&aks, &mut cs, &points).unwrap();
        let p = &points[0];
        let f = Observable::custom(|_, q| q.jr[(0, 0)] + q.beta[(1, 0)] * q.g[(0, 0)]);
        for coeffs in &cls.second_class {
            // psi as an observable: sum of coefficient * constraint
            let parts: Vec<(f64, usize)> = coeffs
                .iter()
                .enumerate()
                .map(|(i, &c)| (c, i))
                .collect();
            let aks_clone = aks.clone();
            let cs_full = build_constraints(&aks_clone);
            let psi = Observable::custom(move |aks2, q| {
                parts
                    .iter()
                    .map(|(c, i)| c * cs_full.constraints()[*i].eval(aks2, q))
                    .sum()
            });
            let v = dirac_bracket(&aks, &f, &psi, &cs, p).unwrap();
            assert!(v.abs() < 1e-7, "second-class direction survives: {v}");
        }
    }

    #[test]
    fn hp_flow_matches_quadratic_invariant_flow() {
        // {<Lt,T>, H_P} = {<Lt,T>, <Lt,Lt>/2} pointwise: the constraint
        // terms of H_P commute with the gauge-invariant momentum.
        let aks = preset_toda(2);
        let mut rng = rng();
        let z = Mat::zeros(2);
        let hp = Observable::primary_hamiltonian(z.clone(), z.clone());
        let half_sq = Observable::custom(|aks2, q| {
            let lt = ltilde(aks2, q).unwrap();
            0.5 * lt.matrix().trace_form(lt.matrix())
        });
        for _ in 0..5 {
            let p = sample_constrained_point(&aks, &mut rng);
            for t in aks.splitting().algebra().basis() {
                let f = Observable::ltilde_pairing(t.clone());
                let lhs = poisson_bracket(&aks, &f, &hp, &p).unwrap();
                let rhs = poisson_bracket(&aks, &f, &half_sq, &p).unwrap();
                assert!((lhs - rhs).abs() < 1e-7, "{lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn momentum_flows_move_one_factor_only() {
        // behavioral version of the mixed factor brackets: the numerically
        // integrated Hamiltonian flow of <Jr, X> moves g_A and fixes g_B;
        // the flow of <Jl, Y> does the opposite.
        let aks = preset_toda(2);
        let mut rng = rng();
        let p = sample_constrained_point(&aks, &mut rng);
        let s = aks.splitting();
        let (ga0, gb0) = s.factorize(&p.g).unwrap();
        let step = 1e-2;

        // dg/ds = X g from {g, <Jr, X>}, four RK4 substeps
        let rk4_linear = |gen: &Mat, g0: &Mat, left: bool| -> Mat {
            let mut g = g0.clone();
            let h = step / 4.0;
            let f = |g: &Mat| if left { gen * g } else { g * gen };
            for _ in 0..4 {
                let k1 = f(&g);
                let k2 = f(&(&g + &k1.scale(0.5 * h)));
                let k3 = f(&(&g + &k2.scale(0.5 * h)));
                let k4 = f(&(&g + &k3.scale(h)));
                let incr = &(&k1 + &k4) + &(&k2 + &k3).scale(2.0);
                g = &g + &incr.scale(h / 6.0);
            }
            g
        };

        let x = Mat::elementary(2, 0, 1);
        let (ga1, gb1) = s.factorize(&rk4_linear(&x, &p.g, true)).unwrap();
        assert!((&gb1 - &gb0).norm_max() < 1e-10);
        assert!((&ga1 - &(&x.scale(step).exp().unwrap() * &ga0)).norm_max() < 1e-10);

        // dg/ds = g Y from {g, <Jl, Y>}
        let y = Mat::elementary(2, 1, 0);
        let (ga2, gb2) = s.factorize(&rk4_linear(&y, &p.g, false)).unwrap();
        assert!((&ga2 - &ga0).norm_max() < 1e-10);
        assert!((&gb2 - &(&gb0 * &y.scale(step).exp().unwrap())).norm_max() < 1e-10);
    }

    #[test]
    fn constrained_flow_matches_factorization() {
        let aks = preset_toda(2);
        let p0 = PhasePoint {
            g: Mat::identity(2),
            jr: (aks.mu() + aks.nu()).clone(),
            alpha: Mat::zeros(2),
            pi_alpha: Mat::zeros(2),
            beta: Mat::zeros(2),
            pi_beta: Mat::zeros(2),
        };
        let z = Mat::zeros(2);
        let traj = constrained_integrate(&aks, &p0, &z, &z, 0.5, 1e-3).unwrap();
        assert!(traj.max_drift() < 1e-8, "drift {}", traj.max_drift());

        let l0 = aks.lax_from_matrix(&p0.jr);
        let reference = factorization_solve(&aks, &l0, &traj.times).unwrap();
        for (lt, r) in traj.ltilde.iter().zip(reference.states()) {
            assert!((lt.matrix() - r.matrix()).norm_max() < 1e-6);
        }

        // nonzero gauge multiplier: phase path changes, Ltilde does not
        let v = Mat::elementary(2, 0, 1).scale(0.8);
        let traj2 = constrained_integrate(&aks, &p0, &v, &z, 0.5, 1e-3).unwrap();
        let mut path_moved = false;
        for (p1, p2) in traj.points.iter().zip(traj2.points.iter()) {
            if (&p1.alpha - &p2.alpha).norm_max() > 1e-3 {
                path_moved = true;
            }
        }
        assert!(path_moved);
        for (l1, l2) in traj.ltilde.iter().zip(traj2.ltilde.iter()) {
            assert!((l1.matrix() - l2.matrix()).norm_max() < 1e-6);
        }
    }

    #[test]
    fn coordinate_equations_match_numeric_brackets() {
        // the closed-form right-hand sides used by constrained_integrate
        // agree with {coordinate, H_P} evaluated through the bracket.
        let aks = preset_toda(2);
        let mut rng = rng();
        let p = sample_constrained_point(&aks, &mut rng);
        let v_alpha = Mat::elementary(2, 0, 1).scale(0.3);
        let z = Mat::zeros(2);
        let hp = Observable::primary_hamiltonian(v_alpha.clone(), z.clone());
        let s = aks.splitting();
        let g_inv = p.g.inverse().unwrap();

        // dg: {g_ij, H_P} = ((Jr - alpha - g beta g^-1) g)_ij
        let conj_beta = &(&p.g * &p.beta) * &g_inv;
        let gdot = &(&(&p.jr - &p.alpha) - &conj_beta) * &p.g;
        for i in 0..2 {
            for j in 0..2 {
                let v = poisson_bracket(&aks, &Observable::g_entry(i, j), &hp, &p).unwrap();
                assert!((v - gdot[(i, j)]).abs() < 1e-8);
            }
        }
        // dJr: {<Jr,T>, H_P} = <[Jr, alpha], T>
        let jrdot = p.jr.bracket(&p.alpha);
        for t in s.algebra().basis() {
            let v = poisson_bracket(&aks, &Observable::jr_pairing(t.clone()), &hp, &p).unwrap();
            assert!((v - jrdot.trace_form(t)).abs() < 1e-8);
        }
        // dalpha: {<alpha, X^m>, H_P} = <v_alpha, X^m>
        for xm in s.dual_a() {
            let v = poisson_bracket(&aks, &Observable::alpha_pairing(xm.clone()), &hp, &p).unwrap();
            assert!((v - v_alpha.trace_form(xm)).abs() < 1e-9);
        }
    }

    #[test]
    fn error_paths() {
        let aks = preset_toda(2);
        let mut rng = rng();
        let mut p = sample_constrained_point(&aks, &mut rng);

        // classification demands points on the surface
        let mut cs = build_constraints(&aks);
        let mut off = p.clone();
        off.pi_alpha = &off.pi_alpha + &Mat::elementary(2, 1, 0).scale(0.1);
        assert!(matches!(
            classify_constraints(&aks, &mut cs, &[off]),
            Err(Error::OffConstraintSurface { .. })
        ));

        // a Dirac bracket needs a classified set
        let cs_fresh = build_constraints(&aks);
        let f = Observable::jr_pairing(Mat::elementary(2, 0, 1));
        let g = Observable::jr_pairing(Mat::elementary(2, 1, 0));
        assert_eq!(
            dirac_bracket(&aks, &f, &g, &cs_fresh, &p).unwrap_err(),
            Error::Unclassified
        );

        // non-finite custom observables surface as gradient errors
        let bad = Observable::custom(|_, q| 1.0 / (q.g[(0, 0)] - q.g[(0, 0)]));
        assert!(gradients(&aks, &bad, &p).is_err());

        // invalid phase point memberships are caught
        p.alpha = Mat::elementary(2, 1, 0);
        assert!(p.validate(&aks).is_err());
    }

    #[test]
    fn primary_hamiltonian_on_surface_with_multipliers() {
        // on the constraint surface the alpha/beta terms vanish even for
        // nonzero multipliers, leaving the kinetic term alone.
        let aks = preset_toda(2);
        let mut rng = rng();
        let p = sample_constrained_point(&aks, &mut rng);
        assert!(p.alpha.norm_max() > 0.0, "sampled multiplier should be nonzero");
        let z = Mat::zeros(2);
        let hp = primary_hamiltonian(&aks, &p, &z, &z).unwrap();
        assert!((hp - 0.5 * p.jr.trace_form(&p.jr)).abs() < 1e-11);
    }

    #[test]
    fn iwasawa_classification_matches_prediction() {
        let aks = preset_iwasawa(3);
        let mut cs = build_constraints(&aks);
        let mut rng = rng();
        let points: Vec<PhasePoint> =
            (0..8).map(|_| sample_constrained_point(&aks, &mut rng)).collect();
        let cls = classify_constraints(&aks, &mut cs, &points).unwrap();
        let expected_fc = 2 * (aks.little_a().len() + aks.little_b().len());
        assert_eq!(cls.first_class.len(), expected_fc);
        assert_eq!(
            cls.reduced_dim,
            aks.phase_space_dim(),
            "reduced dimension must be the orbit dimension"
        );
    }
}
