//! Gauge-Lagrangian layer: an independent check on the dynamics.
//!
//! The Lagrangian
//!
//! ```text
//! L = <gdot g^-1, gdot g^-1>/2 + <alpha, gdot g^-1 - mu>
//!   + <beta, g^-1 gdot - nu> + <alpha, g beta g^-1>
//!   + <alpha, alpha>/2 + <beta, beta>/2
//! ```
//!
//! carries a gauge symmetry under curves in the little groups. Its
//! Euler-Lagrange equations pin the currents `C^r = gdot g^-1 + g beta
//! g^-1 + alpha` and `C^l = g^-1 C^r g` to the moments, and the
//! factorization of `g` assembles the gauge-invariant `Q = g_A^-1 C^r
//! g_A`, which solves the Lax equation. Everything here is evaluated on
//! sampled curves: stored velocities are exact, time derivatives of
//! derived quantities use central differences, and the action integral
//! uses Simpson quadrature so discretization error stays at fourth order.

use alloc::vec::Vec;

use crate::algebra::Subspace;
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::numeric;
use crate::orbit::{AksData, LaxElement};

/// Residual allowed on little-group membership of gauge curves.
pub const LITTLE_GROUP_TOL: f64 = 1e-8;

/// A configuration-velocity point `(g, gdot, alpha, beta)`.
#[derive(Clone, Debug)]
pub struct ConfigPoint {
    pub g: Mat,
    pub gdot: Mat,
    pub alpha: Mat,
    pub beta: Mat,
}

impl ConfigPoint {
    /// Check the memberships: `g` invertible, `g^-1 gdot` in the algebra,
    /// `alpha` in `A`, `beta` in `B`.
    pub fn validate(&self, aks: &AksData) -> Result<()> {
        let s = aks.splitting();
        let g_inv = self.g.inverse()?;
        let body = &g_inv * &self.gdot;
        if !s.algebra().contains(&body) {
            return Err(Error::NotInSubspace {
                subspace: "algebra",
                residual: s.algebra().membership_residual(&body),
            });
        }
        if !s.in_subspace(&self.alpha, Subspace::A) {
            return Err(Error::NotInSubspace {
                subspace: "A",
                residual: s.subspace_residual(&self.alpha, Subspace::A),
            });
        }
        if !s.in_subspace(&self.beta, Subspace::B) {
            return Err(Error::NotInSubspace {
                subspace: "B",
                residual: s.subspace_residual(&self.beta, Subspace::B),
            });
        }
        Ok(())
    }
}

/// A uniformly sampled configuration curve.
#[derive(Clone, Debug)]
pub struct ConfigTrajectory {
    times: Vec<f64>,
    points: Vec<ConfigPoint>,
}

impl ConfigTrajectory {
    pub fn new(times: Vec<f64>, points: Vec<ConfigPoint>) -> Self {
        assert_eq!(times.len(), points.len(), "length mismatch");
        assert!(times.len() >= 2, "need at least two samples");
        let dt = times[1] - times[0];
        assert!(dt > 0.0, "times must increase");
        for w in times.windows(2) {
            assert!(
                ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt,
                "sampling must be uniform"
            );
        }
        ConfigTrajectory { times, points }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[ConfigPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }
}

/// The exact solution curve `g(t) = exp(t L0)`, `alpha = beta = 0`, with
/// exact velocities `gdot = L0 g`.
pub fn exact_solution(aks: &AksData, l0: &LaxElement, times: &[f64]) -> ConfigTrajectory {
    let n = aks.n();
    let points: Vec<ConfigPoint> = times
        .iter()
        .map(|&t| {
            let g = l0
                .matrix()
                .scale(t)
                .exp()
                .expect("exact solution stays finite on the sampled window");
            let gdot = l0.matrix() * &g;
            ConfigPoint { g, gdot, alpha: Mat::zeros(n), beta: Mat::zeros(n) }
        })
        .collect();
    ConfigTrajectory::new(times.to_vec(), points)
}

/// Evaluate the gauge Lagrangian at a configuration point.
pub fn lagrangian(aks: &AksData, p: &ConfigPoint) -> Result<f64> {
    p.validate(aks)?;
    let g_inv = p.g.inverse()?;
    let w = &p.gdot * &g_inv;
    let body = &g_inv * &p.gdot;
    let conj_beta = &(&p.g * &p.beta) * &g_inv;
    Ok(0.5 * w.trace_form(&w)
        + p.alpha.trace_form(&(&w - aks.mu()))
        + p.beta.trace_form(&(&body - aks.nu()))
        + p.alpha.trace_form(&conj_beta)
        + 0.5 * p.alpha.trace_form(&p.alpha)
        + 0.5 * p.beta.trace_form(&p.beta))
}

/// The currents `C^r = gdot g^-1 + g beta g^-1 + alpha` and
/// `C^l = g^-1 gdot + g^-1 alpha g + beta`; the identity
/// `C^l = g^-1 C^r g` is asserted to roundoff.
pub fn currents(aks: &AksData, p: &ConfigPoint) -> Result<(Mat, Mat)> {
    p.validate(aks)?;
    let g_inv = p.g.inverse()?;
    let cr = &(&(&p.gdot * &g_inv) + &(&(&p.g * &p.beta) * &g_inv)) + &p.alpha;
    let cl = &(&(&g_inv * &p.gdot) + &(&(&g_inv * &p.alpha) * &p.g)) + &p.beta;
    let conj = &(&g_inv * &cr) * &p.g;
    let scale = cr.norm_max().max(1.0);
    assert!(
        (&cl - &conj).norm_max() <= 1e-12 * scale * p.g.norm_max().max(1.0) * g_inv.norm_max().max(1.0),
        "left and right currents disagree beyond roundoff"
    );
    Ok((cr, cl))
}

/// Euler-Lagrange residuals over a sampled curve.
///
/// `constraint[i]` is the max-norm violation of `proj_Bperp(C^r) = mu`
/// and `proj_Aperp(C^l) = nu` at sample `i` (stored velocities, so exact
/// solutions sit at roundoff). `evolution[i]` covers the interior
/// samples: central-difference residuals of `dC^r/dt = [C^r, alpha]` and
/// `dC^l/dt = [beta, C^l]`, which carry the `O(dt^2)` differencing error.
#[derive(Clone, Debug)]
pub struct ElResiduals {
    pub constraint: Vec<f64>,
    pub evolution: Vec<f64>,
}

impl ElResiduals {
    pub fn max_constraint(&self) -> f64 {
        self.constraint.iter().fold(0.0f64, |a, &b| a.max(b))
    }

    pub fn max_evolution(&self) -> f64 {
        self.evolution.iter().fold(0.0f64, |a, &b| a.max(b))
    }
}

pub fn el_residuals(aks: &AksData, traj: &ConfigTrajectory) -> Result<ElResiduals> {
    if traj.len() < 3 {
        return Err(Error::TooFewSamples { got: traj.len(), need: 3 });
    }
    let s = aks.splitting();
    let dt = traj.dt();
    let cs: Vec<(Mat, Mat)> = traj
        .points()
        .iter()
        .map(|p| currents(aks, p))
        .collect::<Result<_>>()?;
    let constraint = cs
        .iter()
        .map(|(cr, cl)| {
            let ra = (&s.proj_b_perp(cr) - aks.mu()).norm_max();
            let rb = (&s.proj_a_perp(cl) - aks.nu()).norm_max();
            ra.max(rb)
        })
        .collect();
    let mut evolution = Vec::new();
    for i in 1..traj.len() - 1 {
        let crdot = (&cs[i + 1].0 - &cs[i - 1].0).scale(0.5 / dt);
        let cldot = (&cs[i + 1].1 - &cs[i - 1].1).scale(0.5 / dt);
        let p = &traj.points()[i];
        let ra = (&crdot - &cs[i].0.bracket(&p.alpha)).norm_max();
        let rb = (&cldot - &p.beta.bracket(&cs[i].1)).norm_max();
        evolution.push(ra.max(rb));
    }
    Ok(ElResiduals { constraint, evolution })
}

/// A sampled little-group gauge curve with exact derivatives.
///
/// Curves are built as products of single-generator exponentials
/// `prod_k exp(c_k(t) xi_k)` with scalar coefficient paths supplying both
/// value and derivative, so `da/dt` is exact by the product rule and
/// membership holds by construction.
#[derive(Clone, Debug)]
pub struct GaugeCurve {
    times: Vec<f64>,
    a: Vec<Mat>,
    adot: Vec<Mat>,
    b: Vec<Mat>,
    bdot: Vec<Mat>,
}

/// One generator path: the matrix generator and the scalar coefficient
/// path `t -> (c(t), dc/dt(t))`.
pub struct GeneratorPath<'a> {
    pub generator: Mat,
    pub path: &'a dyn Fn(f64) -> (f64, f64),
}

impl GaugeCurve {
    /// Constant-identity curve.
    pub fn identity(times: &[f64], n: usize) -> Self {
        let id = Mat::identity(n);
        let zero = Mat::zeros(n);
        GaugeCurve {
            times: times.to_vec(),
            a: alloc::vec![id.clone(); times.len()],
            adot: alloc::vec![zero.clone(); times.len()],
            b: alloc::vec![id; times.len()],
            bdot: alloc::vec![zero; times.len()],
        }
    }

    /// Build from generator paths on both sides (either may be empty).
    pub fn from_generator_paths(
        times: &[f64],
        n: usize,
        a_paths: &[GeneratorPath<'_>],
        b_paths: &[GeneratorPath<'_>],
    ) -> Self {
        let mut a = Vec::with_capacity(times.len());
        let mut adot = Vec::with_capacity(times.len());
        let mut b = Vec::with_capacity(times.len());
        let mut bdot = Vec::with_capacity(times.len());
        for &t in times {
            let (va, da) = product_of_exponentials(n, a_paths, t);
            let (vb, db) = product_of_exponentials(n, b_paths, t);
            a.push(va);
            adot.push(da);
            b.push(vb);
            bdot.push(db);
        }
        GaugeCurve { times: times.to_vec(), a, adot, b, bdot }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn a(&self) -> &[Mat] {
        &self.a
    }

    pub fn b(&self) -> &[Mat] {
        &self.b
    }
}

/// Value and exact derivative of `prod_k exp(c_k(t) xi_k)`.
fn product_of_exponentials(
    n: usize,
    paths: &[GeneratorPath<'_>],
    t: f64,
) -> (Mat, Mat) {
    if paths.is_empty() {
        return (Mat::identity(n), Mat::zeros(n));
    }
    let factors: Vec<(Mat, Mat)> = paths
        .iter()
        .map(|p| {
            let (c, cdot) = (p.path)(t);
            let f = p
                .generator
                .scale(c)
                .exp()
                .expect("generator path exponentiates");
            let fdot = &p.generator.scale(cdot) * &f;
            (f, fdot)
        })
        .collect();
    let mut value = Mat::identity(n);
    for (f, _) in &factors {
        value = &value * f;
    }
    let mut deriv = Mat::zeros(n);
    for k in 0..factors.len() {
        let mut term = Mat::identity(n);
        for (j, (f, fdot)) in factors.iter().enumerate() {
            term = if j == k { &term * fdot } else { &term * f };
        }
        deriv = &deriv + &term;
    }
    (value, deriv)
}

pub(crate) fn check_little_group_a(aks: &AksData, a: &Mat) -> Result<()> {
    let s = aks.splitting();
    if !s.in_group_a(a, LITTLE_GROUP_TOL) {
        return Err(Error::NotInSubspace { subspace: "group A", residual: f64::INFINITY });
    }
    let a_inv = a.inverse()?;
    let moved = s.proj_b_perp(&(&(a * aks.mu()) * &a_inv));
    let res = (&moved - aks.mu()).norm_max();
    if res > LITTLE_GROUP_TOL * aks.mu().norm_max().max(1.0) {
        return Err(Error::NotInSubspace { subspace: "little group A_mu", residual: res });
    }
    Ok(())
}

pub(crate) fn check_little_group_b(aks: &AksData, b: &Mat) -> Result<()> {
    let s = aks.splitting();
    if !s.in_group_b(b, LITTLE_GROUP_TOL) {
        return Err(Error::NotInSubspace { subspace: "group B", residual: f64::INFINITY });
    }
    let b_inv = b.inverse()?;
    let moved = s.proj_a_perp(&(&(b * aks.nu()) * &b_inv));
    let res = (&moved - aks.nu()).norm_max();
    if res > LITTLE_GROUP_TOL * aks.nu().norm_max().max(1.0) {
        return Err(Error::NotInSubspace { subspace: "little group B_nu", residual: res });
    }
    Ok(())
}

/// Gauge-transform a single configuration point by `(a, da/dt, b, db/dt)`:
/// `g -> a g b^-1`, `alpha -> a alpha a^-1 - da a^-1`,
/// `beta -> b beta b^-1 + db b^-1`, with the velocity transported by the
/// exact product rule. Errors if `a` or `b` leaves its little group.
pub fn gauge_transform_point(
    aks: &AksData,
    p: &ConfigPoint,
    a: &Mat,
    adot: &Mat,
    b: &Mat,
    bdot: &Mat,
) -> Result<ConfigPoint> {
    check_little_group_a(aks, a)?;
    check_little_group_b(aks, b)?;
    let a_inv = a.inverse()?;
    let b_inv = b.inverse()?;
    let g = &(a * &p.g) * &b_inv;
    let gdot = &(&(&(adot * &p.g) * &b_inv) + &(&(a * &p.gdot) * &b_inv))
        - &(&(&(&(a * &p.g) * &b_inv) * bdot) * &b_inv);
    let alpha = &(&(a * &p.alpha) * &a_inv) - &(adot * &a_inv);
    let beta = &(&(b * &p.beta) * &b_inv) + &(bdot * &b_inv);
    Ok(ConfigPoint { g, gdot, alpha, beta })
}

/// Gauge-transform a sampled trajectory along a gauge curve. When a
/// sample's `g` factorizes, the factor transformation law
/// `g_A -> a g_A`, `g_B -> g_B b^-1` is asserted.
pub fn gauge_transform(
    aks: &AksData,
    traj: &ConfigTrajectory,
    curve: &GaugeCurve,
) -> Result<ConfigTrajectory> {
    assert_eq!(curve.times.len(), traj.len(), "curve must match trajectory sampling");
    let s = aks.splitting();
    let mut points = Vec::with_capacity(traj.len());
    for (i, p) in traj.points().iter().enumerate() {
        let q = gauge_transform_point(aks, p, &curve.a[i], &curve.adot[i], &curve.b[i], &curve.bdot[i])?;
        if let (Ok((ga, gb)), Ok((ga2, gb2))) = (s.factorize(&p.g), s.factorize(&q.g)) {
            let scale = ga2.norm_max().max(1.0);
            assert!(
                (&ga2 - &(&curve.a[i] * &ga)).norm_max() <= 1e-9 * scale,
                "A-factor does not transform by left multiplication"
            );
            let b_inv = curve.b[i].inverse()?;
            let scale_b = gb2.norm_max().max(1.0);
            assert!(
                (&gb2 - &(&gb * &b_inv)).norm_max() <= 1e-9 * scale_b,
                "B-factor does not transform by right multiplication"
            );
        }
        points.push(q);
    }
    Ok(ConfigTrajectory::new(traj.times().to_vec(), points))
}

/// Assemble the gauge-invariant `Q = g_A^-1 C^r g_A = g_B C^l g_B^-1`.
///
/// Both expressions are evaluated and must agree; when the point
/// satisfies the current constraints, `Q` is additionally checked against
/// the orbit form `proj_Bperp(g_A^-1 mu g_A) + proj_Aperp(g_B nu g_B^-1)`.
pub fn q_assemble(aks: &AksData, p: &ConfigPoint) -> Result<LaxElement> {
    let s = aks.splitting();
    let (cr, cl) = currents(aks, p)?;
    let (ga, gb) = s.factorize(&p.g)?;
    let ga_inv = ga.inverse()?;
    let gb_inv = gb.inverse()?;
    let q1 = &(&ga_inv * &cr) * &ga;
    let q2 = &(&gb * &cl) * &gb_inv;
    let scale = q1.norm_max().max(1.0);
    assert!(
        (&q1 - &q2).norm_max() <= 1e-10 * scale * cond_estimate(&gb, &gb_inv),
        "the two expressions for Q disagree"
    );

    let eps_c = (&s.proj_b_perp(&cr) - aks.mu())
        .norm_max()
        .max((&s.proj_a_perp(&cl) - aks.nu()).norm_max());
    if eps_c <= 1e-8 * scale {
        let orbit = aks.orbit_point(&ga, &gb)?;
        let dev = (orbit.matrix() - &q1).norm_max();
        assert!(
            dev <= (100.0 * eps_c + 1e-10) * scale,
            "Q off the orbit form by {dev:e} with constraint residual {eps_c:e}"
        );
    }
    Ok(aks.lax_from_matrix(&q1))
}

fn cond_estimate(m: &Mat, m_inv: &Mat) -> f64 {
    (m.norm_max() * m_inv.norm_max()).max(1.0)
}

/// `Q` along a sampled trajectory.
pub fn q_samples(aks: &AksData, traj: &ConfigTrajectory) -> Result<Vec<LaxElement>> {
    traj.points().iter().map(|p| q_assemble(aks, p)).collect()
}

/// Central-difference residuals of the Lax evolution of `Q`:
/// `dQ/dt + [proj_A(Q), Q]` at the interior samples.
pub fn q_evolution_residuals(aks: &AksData, traj: &ConfigTrajectory) -> Result<Vec<f64>> {
    if traj.len() < 3 {
        return Err(Error::TooFewSamples { got: traj.len(), need: 3 });
    }
    let s = aks.splitting();
    let dt = traj.dt();
    let qs = q_samples(aks, traj)?;
    let mut out = Vec::new();
    for i in 1..traj.len() - 1 {
        let qdot = (qs[i + 1].matrix() - qs[i - 1].matrix()).scale(0.5 / dt);
        let comm = s.proj_a(qs[i].matrix()).bracket(qs[i].matrix());
        out.push((&qdot + &comm).norm_max());
    }
    Ok(out)
}

/// Residuals of the split relations
/// `proj_A(Q) = g_A^-1 dg_A/dt + g_A^-1 alpha g_A` and
/// `proj_B(Q) = dg_B/dt g_B^-1 + g_B beta g_B^-1`
/// with factor velocities from central differences.
pub fn split_relation_residuals(aks: &AksData, traj: &ConfigTrajectory) -> Result<Vec<f64>> {
    if traj.len() < 3 {
        return Err(Error::TooFewSamples { got: traj.len(), need: 3 });
    }
    let s = aks.splitting();
    let dt = traj.dt();
    let factors: Vec<(Mat, Mat)> = traj
        .points()
        .iter()
        .map(|p| s.factorize(&p.g))
        .collect::<Result<_>>()?;
    let qs = q_samples(aks, traj)?;
    let mut out = Vec::new();
    for i in 1..traj.len() - 1 {
        let p = &traj.points()[i];
        let (ga, gb) = &factors[i];
        let ga_inv = ga.inverse()?;
        let gb_inv = gb.inverse()?;
        let gadot = (&factors[i + 1].0 - &factors[i - 1].0).scale(0.5 / dt);
        let gbdot = (&factors[i + 1].1 - &factors[i - 1].1).scale(0.5 / dt);
        let lhs_a = s.proj_a(qs[i].matrix());
        let rhs_a = &(&ga_inv * &gadot) + &(&(&ga_inv * &p.alpha) * ga);
        let lhs_b = s.proj_b(qs[i].matrix());
        let rhs_b = &(&gbdot * &gb_inv) + &(&(gb * &p.beta) * &gb_inv);
        out.push((&lhs_a - &rhs_a).norm_max().max((&lhs_b - &rhs_b).norm_max()));
    }
    Ok(out)
}

/// Action integral of the Lagrangian over a sampled curve (Simpson).
pub fn action(aks: &AksData, traj: &ConfigTrajectory) -> Result<f64> {
    let values: Vec<f64> = traj
        .points()
        .iter()
        .map(|p| lagrangian(aks, p))
        .collect::<Result<_>>()?;
    Ok(numeric::simpson(traj.dt(), &values))
}
