//! The AKS dynamics at the Lax level, two ways.
//!
//! The evolution equation `dL/dt = -[proj_A(L), L] = [proj_B(L), L]` is
//! integrated directly with classical fourth-order Runge-Kutta
//! ([`integrate_lax`]) and solved exactly by factorizing `exp(t L0) =
//! g_A(t) g_B(t)` and conjugating, `L(t) = g_A^-1 L0 g_A`
//! ([`factorization_solve`]). Both record the conserved quantities
//! (`H`, power traces, characteristic-polynomial coefficients) per sample
//! so drift is measurable rather than assumed.
//!
//! Factorization failure is a typed outcome, not a crash: the Hamiltonian
//! vector field of some triangular-splitting systems is incomplete, and
//! the first sample at which `exp(t L0)` leaves the factorizable set is
//! exactly where the ODE blows up.

use alloc::vec::Vec;

use crate::algebra::SplittingKind;
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::orbit::{AksData, LaxElement};

/// Conserved-quantity snapshot attached to each trajectory sample.
#[derive(Clone, Debug)]
pub struct Diagnostics {
    /// Quadratic Hamiltonian `tr(L^2) / 2`.
    pub h: f64,
    /// `tr(L^k)` for `k = 2..=n`.
    pub power_traces: Vec<f64>,
    /// Characteristic-polynomial coefficients, constant term first.
    pub char_poly: Vec<f64>,
}

impl Diagnostics {
    fn of(l: &Mat) -> Self {
        Diagnostics {
            h: 0.5 * l.trace_form(l),
            power_traces: l.power_traces(),
            char_poly: l.char_poly(),
        }
    }
}

/// Time-stamped sequence of Lax elements with per-sample diagnostics.
#[derive(Clone, Debug)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<LaxElement>,
    diagnostics: Vec<Diagnostics>,
}

impl Trajectory {
    fn new() -> Self {
        Trajectory { times: Vec::new(), states: Vec::new(), diagnostics: Vec::new() }
    }

    fn push(&mut self, t: f64, state: LaxElement) {
        if let Some(&last) = self.times.last() {
            assert!(t > last, "sample times must be strictly increasing");
        }
        self.diagnostics.push(Diagnostics::of(state.matrix()));
        self.times.push(t);
        self.states.push(state);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[LaxElement] {
        &self.states
    }

    pub fn diagnostics(&self) -> &[Diagnostics] {
        &self.diagnostics
    }

    pub fn last_state(&self) -> &LaxElement {
        self.states.last().expect("trajectory is never empty")
    }
}

/// Right-hand side of the Lax equation: `[proj_B(L), L]`.
///
/// The equivalent form `-[proj_A(L), L]` is evaluated as well and the two
/// are required to agree to roundoff (they differ by `[L, L]`), which
/// pins the complementarity of the projectors on every call.
pub fn aks_vector_field(aks: &AksData, l: &Mat) -> Mat {
    let s = aks.splitting();
    let via_b = s.proj_b(l).bracket(l);
    let via_a = s.proj_a(l).bracket(l);
    // Overflowing states are the integrator's job to catch; the agreement
    // check only means something in finite arithmetic.
    if via_b.is_finite() && via_a.is_finite() {
        let scale = l.norm_max();
        assert!(
            (&via_b + &via_a).norm_max() <= 1e-12 * scale * scale,
            "projector complementarity violated in vector field"
        );
    }
    via_b
}

/// Options for [`integrate_lax_with`].
#[derive(Clone, Copy, Debug, Default)]
pub struct LaxOptions {
    /// After each step, reset the `A*`-part of the state to `mu` (the
    /// orbit form). Off by default: drift is reported, not hidden.
    pub reproject: bool,
}

/// Uniform sample grid `0, dt, 2 dt, ..., t_end` (final point included,
/// with a shortened last step when `dt` does not divide `t_end`).
pub fn time_grid(t_end: f64, dt: f64) -> Vec<f64> {
    assert!(dt > 0.0 && t_end > 0.0, "need positive dt and t_end");
    let mut times = Vec::new();
    let mut i = 0u64;
    loop {
        let t = i as f64 * dt;
        if t >= t_end - 1e-12 * dt {
            times.push(t_end);
            break;
        }
        times.push(t);
        i += 1;
    }
    times
}

/// Classical fixed-step RK4 on the matrix Lax equation, sampling at every
/// step. Aborts with the last good time if the state stops being finite.
pub fn integrate_lax(aks: &AksData, l0: &LaxElement, t_end: f64, dt: f64) -> Result<Trajectory> {
    integrate_lax_with(aks, l0, t_end, dt, LaxOptions::default())
}

pub fn integrate_lax_with(
    aks: &AksData,
    l0: &LaxElement,
    t_end: f64,
    dt: f64,
    opts: LaxOptions,
) -> Result<Trajectory> {
    assert!(dt > 0.0 && t_end > 0.0, "need positive dt and t_end");
    let times = time_grid(t_end, dt);
    let mut traj = Trajectory::new();
    let mut l = l0.matrix().clone();
    traj.push(0.0, aks.lax_from_matrix(&l));
    for w in times.windows(2) {
        let (t_prev, t) = (w[0], w[1]);
        let h = t - t_prev;
        let k1 = aks_vector_field(aks, &l);
        let k2 = aks_vector_field(aks, &(&l + &k1.scale(0.5 * h)));
        let k3 = aks_vector_field(aks, &(&l + &k2.scale(0.5 * h)));
        let k4 = aks_vector_field(aks, &(&l + &k3.scale(h)));
        let incr = &(&k1 + &k4) + &(&k2 + &k3).scale(2.0);
        l = &l + &incr.scale(h / 6.0);
        if !l.is_finite() {
            return Err(Error::NonFiniteState { t_last: t_prev });
        }
        if opts.reproject {
            l = aks.mu() + &aks.splitting().proj_a_perp(&l);
        }
        traj.push(t, aks.lax_from_matrix(&l));
    }
    Ok(traj)
}

/// Exact solve by factorization: `exp(t L0) = g_A(t) g_B(t)` per the
/// splitting kind and `L(t) = g_A(t)^-1 L0 g_A(t)` at each requested time.
///
/// The factors are accumulated stepwise through the composition identity
/// `g_A(t + s) = g_A(t) a(s)` where `a(s)` is the `A`-factor of
/// `exp(s L(t))`: each elementary factorization then works on a
/// well-conditioned matrix however long the run is, while the trajectory
/// is identical to factorizing `exp(t L0)` directly.
///
/// For the triangular kind, leaving the factorizable set (a failed pivot,
/// a trailing factor diagonal crossing zero out of the connected `B`
/// group, or overflow of the locally exponentiated flow at a pole) is
/// reported as [`Error::FactorizationBlowup`] carrying the first failing
/// sample time.
pub fn factorization_solve(aks: &AksData, l0: &LaxElement, times: &[f64]) -> Result<Trajectory> {
    assert!(!times.is_empty(), "need at least one sample time");
    for w in times.windows(2) {
        assert!(w[1] > w[0], "sample times must be strictly increasing");
    }
    assert!(times[0] >= 0.0, "sample times start at or after zero");
    let s = aks.splitting();
    let l0m = l0.matrix();
    // The orbit-point cross-check below is exact only when L0 is the
    // identity orbit point mu + nu.
    let check_orbit = (l0m - &(aks.mu() + aks.nu())).norm_max()
        <= 1e-12 * l0m.norm_max().max(1.0);
    let step_cap = 2.0 / (1.0 + l0m.norm_one());

    let mut traj = Trajectory::new();
    let mut l = l0m.clone();
    let mut ga_total = Mat::identity(aks.n());
    let mut gb_total = Mat::identity(aks.n());
    let mut t_prev = 0.0;
    for &t in times {
        let gap = t - t_prev;
        if gap > 0.0 {
            let substeps = libm::ceil(gap / step_cap).max(1.0) as u64;
            let h = gap / substeps as f64;
            for _ in 0..substeps {
                let e = l
                    .scale(h)
                    .exp()
                    .map_err(|_| Error::FactorizationBlowup { t_fail: t })?;
                let (a, b) = match s.factorize(&e) {
                    Ok(p) => p,
                    Err(Error::NotInCheckedDomain { .. }) | Err(Error::Singular) => {
                        return Err(Error::FactorizationBlowup { t_fail: t });
                    }
                    Err(other) => return Err(other),
                };
                if s.kind() == SplittingKind::Triangular && !diag_positive(&b) {
                    return Err(Error::FactorizationBlowup { t_fail: t });
                }
                let a_inv = a.inverse()?;
                l = &(&a_inv * &l) * &a;
                if !l.is_finite() {
                    return Err(Error::FactorizationBlowup { t_fail: t });
                }
                ga_total = &ga_total * &a;
                gb_total = &b * &gb_total;
            }
        }
        if check_orbit {
            // The B-side evaluation loses all significance once g_B gets
            // too ill-conditioned (long-time runs), so the cross-check is
            // gated on an invertibility estimate.
            if let Ok(gb_inv) = gb_total.inverse() {
                if gb_total.norm_max() * gb_inv.norm_max() <= 1e6 {
                    let op = aks.orbit_point(&ga_total, &gb_total)?;
                    let dev = (op.matrix() - &l).norm_max();
                    assert!(
                        dev <= 1e-9 * l.norm_max().max(1.0),
                        "factorized flow left the orbit parametrization (dev {dev:e} at t = {t})"
                    );
                }
            }
        }
        traj.push(t, aks.lax_from_matrix(&l));
        t_prev = t;
    }
    Ok(traj)
}

fn diag_positive(m: &Mat) -> bool {
    (0..m.n()).all(|i| m[(i, i)] > 0.0)
}

/// Maximum absolute drift of each recorded invariant from its initial
/// value.
#[derive(Clone, Debug)]
pub struct DriftReport {
    pub h: f64,
    pub power_traces: Vec<f64>,
    pub char_poly: Vec<f64>,
}

impl DriftReport {
    /// Largest drift across all invariants.
    pub fn max_drift(&self) -> f64 {
        let mut m = self.h;
        for &v in self.power_traces.iter().chain(self.char_poly.iter()) {
            m = m.max(v);
        }
        m
    }
}

/// Per-invariant drift table over a trajectory.
pub fn invariant_report(traj: &Trajectory) -> DriftReport {
    assert!(!traj.is_empty(), "empty trajectory");
    let first = &traj.diagnostics()[0];
    let mut report = DriftReport {
        h: 0.0,
        power_traces: alloc::vec![0.0; first.power_traces.len()],
        char_poly: alloc::vec![0.0; first.char_poly.len()],
    };
    for d in traj.diagnostics() {
        report.h = report.h.max((d.h - first.h).abs());
        for (acc, (now, init)) in report
            .power_traces
            .iter_mut()
            .zip(d.power_traces.iter().zip(first.power_traces.iter()))
        {
            *acc = acc.max((now - init).abs());
        }
        for (acc, (now, init)) in report
            .char_poly
            .iter_mut()
            .zip(d.char_poly.iter().zip(first.char_poly.iter()))
        {
            *acc = acc.max((now - init).abs());
        }
    }
    report
}
