//! Verb implementations: `flow`, `lagrangian-check`, `dirac-report`.

use std::path::PathBuf;

use aks_core::dirac::{
    build_constraints, classify_constraints, constrained_integrate, dirac_bracket, ltilde,
    poisson_bracket, random_phase_point, sample_constrained_point, ConstraintLabel, Observable,
    PhasePoint,
};
use aks_core::flow::{factorization_solve, integrate_lax, invariant_report, time_grid, Trajectory};
use aks_core::gauge::{
    action, el_residuals, exact_solution, gauge_transform, q_samples, GaugeCurve, GeneratorPath,
};
use aks_core::numeric::{lstsq, Rect};
use aks_core::orbit::{hamiltonian, AksData, LaxElement};
use aks_core::{Error, Mat};
use anyhow::Context;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{to_mat, ConfigErrors, Initial, OutputFormat, RunConfig, Solver};
use crate::output::{self, SampleTable};
use crate::report::{
    ClassificationSummary, DiracSummary, GaugeSummary, Report, SolverReport,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BLOWUP: i32 = 3;
pub const EXIT_TOLERANCE: i32 = 4;

/// Resolved initial data: the orbit factors (when known) and the Lax
/// matrix they generate.
struct InitialData {
    factors: Option<(Mat, Mat)>,
    l0: LaxElement,
}

fn resolve_initial(
    config: &RunConfig,
    aks: &AksData,
    rng: &mut ChaCha8Rng,
) -> Result<InitialData, ConfigErrors> {
    match &config.initial {
        Initial::Orbit { g_a, g_b } => {
            let n = aks.n();
            let ga = g_a.as_ref().map(|m| to_mat(m)).unwrap_or_else(|| Mat::identity(n));
            let gb = g_b.as_ref().map(|m| to_mat(m)).unwrap_or_else(|| Mat::identity(n));
            let l0 = aks
                .orbit_point(&ga, &gb)
                .map_err(|e| ConfigErrors(vec![format!("initial: {e}")]))?;
            Ok(InitialData { factors: Some((ga, gb)), l0 })
        }
        Initial::RandomOrbit => {
            let (ga, gb) = aks.random_orbit_factors(rng);
            let l0 = aks
                .orbit_point(&ga, &gb)
                .expect("sampled factors are group elements");
            Ok(InitialData { factors: Some((ga, gb)), l0 })
        }
        Initial::Explicit { l0 } => {
            let m = to_mat(l0);
            if !aks.splitting().algebra().contains(&m) {
                return Err(ConfigErrors(vec![
                    "initial.l0: matrix is not in the working algebra".into(),
                ]));
            }
            Ok(InitialData { factors: None, l0: aks.lax_from_matrix(&m) })
        }
    }
}

/// Indices of the retained samples: every `stride`-th plus the last.
fn thin_indices(len: usize, stride: usize) -> Vec<usize> {
    if len == 0 {
        return Vec::new();
    }
    let mut idx: Vec<usize> = (0..len).step_by(stride.max(1)).collect();
    if *idx.last().unwrap() != len - 1 {
        idx.push(len - 1);
    }
    idx
}

struct SolverRun {
    solver: Solver,
    times: Vec<f64>,
    mats: Vec<Mat>,
    report: SolverReport,
    blow_up: Option<f64>,
}

fn drift_report(solver: Solver, traj: &Trajectory, constraint_drift: Option<f64>) -> SolverReport {
    let d = invariant_report(traj);
    SolverReport {
        solver: solver.name().to_string(),
        h_drift: d.h,
        power_trace_drift: d.power_traces.clone(),
        char_poly_drift: d.char_poly.clone(),
        max_drift: d.max_drift(),
        constraint_drift,
    }
}

fn empty_report(solver: Solver) -> SolverReport {
    SolverReport {
        solver: solver.name().to_string(),
        h_drift: 0.0,
        power_trace_drift: Vec::new(),
        char_poly_drift: Vec::new(),
        max_drift: 0.0,
        constraint_drift: None,
    }
}

fn traj_to_thinned(traj: &Trajectory, stride: usize) -> (Vec<f64>, Vec<Mat>) {
    let idx = thin_indices(traj.len(), stride);
    let times = idx.iter().map(|&i| traj.times()[i]).collect();
    let mats = idx
        .iter()
        .map(|&i| traj.states()[i].matrix().clone())
        .collect();
    (times, mats)
}

fn run_solver(
    config: &RunConfig,
    aks: &AksData,
    init: &InitialData,
    solver: Solver,
) -> anyhow::Result<Result<SolverRun, ConfigErrors>> {
    let full_grid = time_grid(config.t_end, config.dt);
    let thinned: Vec<f64> = thin_indices(full_grid.len(), config.sample_stride)
        .iter()
        .map(|&i| full_grid[i])
        .collect();
    match solver {
        Solver::LaxRk4 => match integrate_lax(aks, &init.l0, config.t_end, config.dt) {
            Ok(traj) => {
                let (times, mats) = traj_to_thinned(&traj, config.sample_stride);
                Ok(Ok(SolverRun {
                    solver,
                    times,
                    mats,
                    report: drift_report(solver, &traj, None),
                    blow_up: None,
                }))
            }
            Err(Error::NonFiniteState { t_last }) => {
                let (times, mats, report) = if t_last >= config.dt {
                    let traj = integrate_lax(aks, &init.l0, t_last, config.dt)
                        .context("partial re-run after abort")?;
                    let (times, mats) = traj_to_thinned(&traj, config.sample_stride);
                    (times, mats, drift_report(solver, &traj, None))
                } else {
                    (Vec::new(), Vec::new(), empty_report(solver))
                };
                Ok(Ok(SolverRun { solver, times, mats, report, blow_up: Some(t_last) }))
            }
            Err(e) => Err(e.into()),
        },
        Solver::Factorization => match factorization_solve(aks, &init.l0, &thinned) {
            Ok(traj) => {
                let times = traj.times().to_vec();
                let mats = traj.states().iter().map(|s| s.matrix().clone()).collect();
                Ok(Ok(SolverRun {
                    solver,
                    times,
                    mats,
                    report: drift_report(solver, &traj, None),
                    blow_up: None,
                }))
            }
            Err(Error::FactorizationBlowup { t_fail }) => {
                let before: Vec<f64> =
                    thinned.iter().copied().filter(|&t| t < t_fail).collect();
                let (times, mats, report) = if before.is_empty() {
                    (Vec::new(), Vec::new(), empty_report(solver))
                } else {
                    let traj = factorization_solve(aks, &init.l0, &before)
                        .context("partial re-run before blow-up")?;
                    let times = traj.times().to_vec();
                    let mats =
                        traj.states().iter().map(|s| s.matrix().clone()).collect();
                    (times, mats, drift_report(solver, &traj, None))
                };
                Ok(Ok(SolverRun { solver, times, mats, report, blow_up: Some(t_fail) }))
            }
            Err(e) => Err(e.into()),
        },
        Solver::Constrained => {
            let Some((ga, gb)) = &init.factors else {
                return Ok(Err(ConfigErrors(vec![
                    "initial: the constrained solver needs orbit-parametrized initial data (kind = \"orbit\" or \"random-orbit\")"
                        .into(),
                ])));
            };
            let ga_inv = ga.inverse().expect("group element invertible");
            let p0 = PhasePoint {
                g: ga * gb,
                jr: &(ga * init.l0.matrix()) * &ga_inv,
                alpha: Mat::zeros(aks.n()),
                pi_alpha: Mat::zeros(aks.n()),
                beta: Mat::zeros(aks.n()),
                pi_beta: Mat::zeros(aks.n()),
            };
            let z = Mat::zeros(aks.n());
            match constrained_integrate(aks, &p0, &z, &z, config.t_end, config.dt) {
                Ok(traj) => {
                    let idx = thin_indices(traj.times.len(), config.sample_stride);
                    let times: Vec<f64> = idx.iter().map(|&i| traj.times[i]).collect();
                    let mats: Vec<Mat> = idx
                        .iter()
                        .map(|&i| traj.ltilde[i].matrix().clone())
                        .collect();
                    // build the drift table over the gauge-invariant samples
                    let mut h0 = None;
                    let mut max_h = 0.0f64;
                    for m in &mats {
                        let h = 0.5 * m.trace_form(m);
                        let h0 = *h0.get_or_insert(h);
                        max_h = max_h.max((h - h0).abs());
                    }
                    let report = SolverReport {
                        solver: solver.name().to_string(),
                        h_drift: max_h,
                        power_trace_drift: Vec::new(),
                        char_poly_drift: Vec::new(),
                        max_drift: max_h,
                        constraint_drift: Some(traj.max_drift()),
                    };
                    Ok(Ok(SolverRun { solver, times, mats, report, blow_up: None }))
                }
                Err(Error::NonFiniteState { t_last }) => Ok(Ok(SolverRun {
                    solver,
                    times: Vec::new(),
                    mats: Vec::new(),
                    report: empty_report(solver),
                    blow_up: Some(t_last),
                })),
                Err(Error::ConstraintDrift { t, drift }) => {
                    let mut rep = empty_report(solver);
                    rep.constraint_drift = Some(drift);
                    Ok(Ok(SolverRun {
                        solver,
                        times: Vec::new(),
                        mats: Vec::new(),
                        report: rep,
                        blow_up: Some(t),
                    }))
                }
                Err(e) => Err(e.into()),
            }
        }
    }
}

fn write_outputs(
    config: &RunConfig,
    table: Option<&SampleTable>,
    report: &Report,
    out_override: Option<&PathBuf>,
) -> anyhow::Result<Vec<String>> {
    let mut written = Vec::new();
    let trajectory_path = out_override
        .map(|p| p.to_string_lossy().to_string())
        .or_else(|| config.output.trajectory.clone());
    if let (Some(path), Some(table)) = (&trajectory_path, table) {
        let format = config.output.format.unwrap_or_else(|| {
            if path.ends_with(".json") {
                OutputFormat::Json
            } else {
                OutputFormat::Csv
            }
        });
        let contents = match format {
            OutputFormat::Csv => output::to_csv(table),
            OutputFormat::Json => output::to_json(config, table, report),
        };
        output::write_file(std::path::Path::new(path), &contents)
            .with_context(|| format!("writing {path}"))?;
        written.push(path.clone());
    }
    if let Some(path) = &config.output.report {
        let mut s = serde_json::to_string_pretty(report)?;
        s.push('\n');
        output::write_file(std::path::Path::new(path), &s)
            .with_context(|| format!("writing {path}"))?;
        written.push(path.clone());
    }
    Ok(written)
}

/// The `flow` verb: run the requested solver(s), cross-check, serialize.
pub fn flow(config: &RunConfig, out_override: Option<&PathBuf>) -> anyhow::Result<i32> {
    let aks = match config.build_aks() {
        Ok(a) => a,
        Err(e) => {
            eprintln!("{e}");
            return Ok(EXIT_CONFIG);
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = match resolve_initial(config, &aks, &mut rng) {
        Ok(i) => i,
        Err(e) => {
            eprintln!("{e}");
            return Ok(EXIT_CONFIG);
        }
    };
    println!(
        "flow: sl({}) {:?} solvers {:?} t_end {} dt {} (H0 = {:.6})",
        config.n,
        config.splitting,
        config.solver.as_vec().iter().map(|s| s.name()).collect::<Vec<_>>(),
        config.t_end,
        config.dt,
        hamiltonian(&init.l0),
    );

    let mut runs = Vec::new();
    for solver in config.solver.as_vec() {
        match run_solver(config, &aks, &init, solver)? {
            Ok(run) => runs.push(run),
            Err(e) => {
                eprintln!("{e}");
                return Ok(EXIT_CONFIG);
            }
        }
    }

    let mut report = Report::default();
    for run in &runs {
        report.solvers.push(run.report.clone());
        if let Some(t) = run.blow_up {
            if report.blow_up_time.is_none() {
                report.blow_up_time = Some(t);
            }
            report
                .notes
                .push(format!("{} stopped at t = {t}", run.solver.name()));
        }
    }
    let complete: Vec<&SolverRun> = runs.iter().filter(|r| r.blow_up.is_none()).collect();
    if complete.len() >= 2 {
        let (a, b) = (complete[0], complete[1]);
        let mut worst = 0.0f64;
        for ((ta, ma), (tb, mb)) in a
            .times
            .iter()
            .zip(a.mats.iter())
            .zip(b.times.iter().zip(b.mats.iter()))
        {
            debug_assert!((ta - tb).abs() < 1e-12);
            worst = worst.max((ma - mb).norm_max());
        }
        report.cross_error = Some(worst);
    }

    let table = runs
        .first()
        .filter(|r| !r.times.is_empty())
        .map(|r| SampleTable::new(aks.n(), r.times.clone(), r.mats.clone()));
    let written = write_outputs(config, table.as_ref(), &report, out_override)?;

    for s in &report.solvers {
        println!(
            "  {}: max invariant drift {:.3e}{}",
            s.solver,
            s.max_drift,
            s.constraint_drift
                .map(|d| format!(", constraint drift {d:.3e}"))
                .unwrap_or_default()
        );
    }
    if let Some(c) = report.cross_error {
        println!("  cross-error: {c:.3e}");
    }
    if let Some(t) = report.blow_up_time {
        println!("  blow-up detected at t = {t}");
    }
    for w in &written {
        println!("  wrote {w}");
    }

    if report.blow_up_time.is_some() {
        return Ok(EXIT_BLOWUP);
    }
    if report.max_drift() > config.tolerances.drift {
        println!(
            "  invariant drift {:.3e} exceeds tolerance {:.3e}",
            report.max_drift(),
            config.tolerances.drift
        );
        return Ok(EXIT_TOLERANCE);
    }
    Ok(EXIT_OK)
}

fn in_span_local(basis: &[Mat], x: &Mat) -> bool {
    if basis.is_empty() {
        return x.norm_max() <= 1e-8;
    }
    let cols = Rect::from_mat_columns(basis);
    let c = lstsq(&cols, x.entries(), 1e-12);
    let mut rec = Mat::zeros(basis[0].n());
    for (ci, b) in c.iter().zip(basis.iter()) {
        rec = &rec + &b.scale(*ci);
    }
    (&rec - x).norm_max() <= 1e-8 * x.norm_max().max(1.0)
}

/// The `lagrangian-check` verb: gauge-layer diagnostics on an exact
/// solution of the Euler-Lagrange equations.
pub fn lagrangian_check(config: &RunConfig, out_override: Option<&PathBuf>) -> anyhow::Result<i32> {
    let aks = match config.build_aks() {
        Ok(a) => a,
        Err(e) => {
            eprintln!("{e}");
            return Ok(EXIT_CONFIG);
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = match resolve_initial(config, &aks, &mut rng) {
        Ok(i) => i,
        Err(e) => {
            eprintln!("{e}");
            return Ok(EXIT_CONFIG);
        }
    };
    // the exact solution needs its A*-part pinned at mu
    if (init.l0.a_star_part() - aks.mu()).norm_max() > 1e-9 {
        eprintln!(
            "configuration invalid:\n  initial: the A*-part of L0 must equal mu for lagrangian-check"
        );
        return Ok(EXIT_CONFIG);
    }

    let dt = config.dt;
    let t_end = config.t_end;
    let times = time_grid(t_end, dt);
    let traj = exact_solution(&aks, &init.l0, &times);
    let res0 = el_residuals(&aks, &traj)?;
    let qs0 = q_samples(&aks, &traj)?;

    let mut worst_q = 0.0f64;
    let mut worst_constraint = res0.max_constraint();
    let mut worst_evolution = res0.max_evolution();
    for _ in 0..10 {
        let curve = random_little_curve(&aks, &times, &mut rng);
        let moved = gauge_transform(&aks, &traj, &curve)?;
        let qs = q_samples(&aks, &moved)?;
        for (a, b) in qs0.iter().zip(qs.iter()) {
            worst_q = worst_q.max((a.matrix() - b.matrix()).norm_max());
        }
        let res = el_residuals(&aks, &moved)?;
        worst_constraint = worst_constraint.max(res.max_constraint());
        worst_evolution = worst_evolution.max(res.max_evolution());
    }

    // equal-endpoint action comparison over little-group curves, with the
    // coefficient paths parameterized by t / t_end so the endpoint values
    // coincide whatever the time window is
    let s0 = action(&aks, &traj)?;
    let ramp = move |t: f64| (t / t_end, 1.0 / t_end);
    let smooth = move |t: f64| {
        let x = t / t_end;
        (x * x * (3.0 - 2.0 * x), 6.0 * x * (1.0 - x) / t_end)
    };
    let little: Vec<Mat> = aks
        .little_a()
        .iter()
        .chain(aks.little_b().iter())
        .cloned()
        .collect();
    let action_gap = if little.is_empty() {
        0.0
    } else {
        let build = |flip: bool| -> GaugeCurve {
            let paths: Vec<GeneratorPath> = little
                .iter()
                .enumerate()
                .map(|(i, g)| GeneratorPath {
                    generator: g.clone(),
                    path: if (i % 2 == 0) ^ flip { &ramp } else { &smooth },
                })
                .collect();
            let na = aks.little_a().len();
            GaugeCurve::from_generator_paths(&times, aks.n(), &paths[..na], &paths[na..])
        };
        let ds1 = action(&aks, &gauge_transform(&aks, &traj, &build(false))?)? - s0;
        let ds2 = action(&aks, &gauge_transform(&aks, &traj, &build(true))?)? - s0;
        (ds1 - ds2).abs()
    };

    // negative control: a B-curve outside the little group must break the
    // equal-endpoint property
    let control = negative_control(&aks, &traj, &times, s0)?;

    let gauge = GaugeSummary {
        q_invariance: worst_q,
        el_constraint: worst_constraint,
        el_evolution: worst_evolution,
        action_endpoint_gap: action_gap,
        negative_control_gap: control,
    };
    let mut report = Report { gauge: Some(gauge.clone()), ..Default::default() };
    if control.is_none() {
        report
            .notes
            .push("negative control skipped: B_nu covers every available direction".into());
    }

    let mut config_for_report = config.clone();
    if let Some(p) = out_override {
        config_for_report.output.report = Some(p.to_string_lossy().to_string());
    }
    write_outputs(&config_for_report, None, &report, None)?;

    println!("lagrangian-check: sl({}) {:?}", config.n, config.splitting);
    println!("  Q gauge-invariance deviation: {:.3e}", gauge.q_invariance);
    println!("  EL constraint residual:       {:.3e}", gauge.el_constraint);
    println!("  EL evolution residual:        {:.3e}", gauge.el_evolution);
    println!("  equal-endpoint action gap:    {:.3e}", gauge.action_endpoint_gap);
    match gauge.negative_control_gap {
        Some(g) => println!("  negative-control gap:         {g:.3e}"),
        None => println!("  negative-control: skipped (no direction outside B_nu)"),
    }

    let ok = gauge.q_invariance <= 1e-9
        && gauge.el_constraint <= 1e-9
        && gauge.el_evolution <= 100.0 * dt * dt
        && gauge.action_endpoint_gap <= 1e-8
        && gauge.negative_control_gap.map(|g| g > 1e-3).unwrap_or(true);
    Ok(if ok { EXIT_OK } else { EXIT_TOLERANCE })
}

fn random_little_curve(aks: &AksData, times: &[f64], rng: &mut ChaCha8Rng) -> GaugeCurve {
    let coeffs = |rng: &mut ChaCha8Rng| {
        let p: f64 = rng.gen_range(-0.6..0.6);
        let q: f64 = rng.gen_range(-0.6..0.6);
        move |t: f64| (p * t + q * t.sin(), p + q * t.cos())
    };
    let a_paths: Vec<(Mat, Box<dyn Fn(f64) -> (f64, f64)>)> = aks
        .little_a()
        .iter()
        .map(|g| (g.clone(), Box::new(coeffs(rng)) as _))
        .collect();
    let b_paths: Vec<(Mat, Box<dyn Fn(f64) -> (f64, f64)>)> = aks
        .little_b()
        .iter()
        .map(|g| (g.clone(), Box::new(coeffs(rng)) as _))
        .collect();
    let a_refs: Vec<GeneratorPath> = a_paths
        .iter()
        .map(|(g, f)| GeneratorPath { generator: g.clone(), path: f.as_ref() })
        .collect();
    let b_refs: Vec<GeneratorPath> = b_paths
        .iter()
        .map(|(g, f)| GeneratorPath { generator: g.clone(), path: f.as_ref() })
        .collect();
    GaugeCurve::from_generator_paths(times, aks.n(), &a_refs, &b_refs)
}

/// Apply a raw (not little-group) B-side transform twice with
/// equal-endpoint interior variations and report the action-change gap.
/// Returns `None` when no direction outside `B_nu` exists.
fn negative_control(
    aks: &AksData,
    traj: &aks_core::gauge::ConfigTrajectory,
    times: &[f64],
    s0: f64,
) -> anyhow::Result<Option<f64>> {
    // Need a pair of B-generators that actually interact: the modulating
    // leg must be outside B_nu and the pairing of the modulated leg with
    // nu must vary at first order, <[y_mod, y_leg], nu> != 0. A commuting
    // pair would leave the action change endpoint-only and prove nothing.
    let s = aks.splitting();
    let mut pair = None;
    'outer: for y_mod in s.basis_b() {
        if in_span_local(aks.little_b(), y_mod) {
            continue;
        }
        for y_leg in s.basis_b() {
            if y_mod.bracket(y_leg).trace_form(aks.nu()).abs() > 0.1 {
                pair = Some((y_mod, y_leg));
                break 'outer;
            }
        }
    }
    let Some((y_mod, y_leg)) = pair else {
        return Ok(None);
    };
    let t_end = *times.last().unwrap();
    let apply = |interior: &dyn Fn(f64) -> (f64, f64)| -> anyhow::Result<f64> {
        let ramp = move |t: f64| (t / t_end, 1.0 / t_end);
        let points: Vec<aks_core::gauge::ConfigPoint> = times
            .iter()
            .zip(traj.points())
            .map(|(&t, p)| {
                let (c, cdot) = interior(t);
                let (d, ddot) = ramp(t);
                let f1 = y_mod.scale(c).exp().expect("bounded generator");
                let f2 = y_leg.scale(d).exp().expect("bounded generator");
                let b = &f1 * &f2;
                let bdot = &(&(&y_mod.scale(cdot) * &f1) * &f2)
                    + &(&f1 * &(&y_leg.scale(ddot) * &f2));
                let b_inv = b.inverse().expect("group element invertible");
                let g = &p.g * &b_inv;
                let gdot = &(&p.gdot * &b_inv) - &(&(&(&p.g * &b_inv) * &bdot) * &b_inv);
                let beta = &(&(&b * &p.beta) * &b_inv) + &(&bdot * &b_inv);
                aks_core::gauge::ConfigPoint { g, gdot, alpha: p.alpha.clone(), beta }
            })
            .collect();
        let tr = aks_core::gauge::ConfigTrajectory::new(times.to_vec(), points);
        Ok(action(aks, &tr)? - s0)
    };
    let flat = |_t: f64| (0.0, 0.0);
    let bump = move |t: f64| {
        let x = t / t_end;
        (4.0 * x * (1.0 - x), 4.0 * (1.0 - 2.0 * x) / t_end)
    };
    let gap = (apply(&flat)? - apply(&bump)?).abs();
    Ok(Some(gap))
}

/// The `dirac-report` verb: constraint counts, classification, bracket
/// spot checks.
pub fn dirac_report(config: &RunConfig, out_override: Option<&PathBuf>) -> anyhow::Result<i32> {
    let aks = match config.build_aks() {
        Ok(a) => a,
        Err(e) => {
            eprintln!("{e}");
            return Ok(EXIT_CONFIG);
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut cs = build_constraints(&aks);
    let points: Vec<PhasePoint> =
        (0..10).map(|_| sample_constrained_point(&aks, &mut rng)).collect();
    let cls = classify_constraints(&aks, &mut cs, &points)?;
    let expected_fc = 2 * (aks.little_a().len() + aks.little_b().len());
    let classification = ClassificationSummary {
        total_constraints: cs.len(),
        primary_pi_alpha: cs.count(ConstraintLabel::PrimaryPiAlpha),
        primary_pi_beta: cs.count(ConstraintLabel::PrimaryPiBeta),
        secondary_jr: cs.count(ConstraintLabel::SecondaryJr),
        secondary_jl: cs.count(ConstraintLabel::SecondaryJl),
        secondary_alpha: cs.count(ConstraintLabel::SecondaryAlpha),
        secondary_beta: cs.count(ConstraintLabel::SecondaryBeta),
        first_class: cls.first_class.len(),
        second_class: cls.second_class.len(),
        reduced_dim: cls.reduced_dim,
        orbit_dim: aks.phase_space_dim(),
        matches_prediction: cls.first_class.len() == expected_fc
            && cls.reduced_dim == aks.phase_space_dim(),
    };

    // generator bracket tables at a few random unconstrained points
    let basis = aks.splitting().algebra().basis().to_vec();
    let mut table_dev = 0.0f64;
    for _ in 0..5 {
        let p = random_phase_point(&aks, &mut rng);
        let jl = p.jl()?;
        for t in &basis {
            for u in &basis {
                let v = poisson_bracket(
                    &aks,
                    &Observable::jr_pairing(t.clone()),
                    &Observable::jr_pairing(u.clone()),
                    &p,
                )?;
                table_dev = table_dev.max((v - p.jr.trace_form(&t.bracket(u))).abs());
                let v = poisson_bracket(
                    &aks,
                    &Observable::jl_pairing(t.clone()),
                    &Observable::jl_pairing(u.clone()),
                    &p,
                )?;
                table_dev = table_dev.max((v + jl.trace_form(&t.bracket(u))).abs());
            }
        }
    }

    // Dirac brackets of Ltilde components against the Lie-Poisson values
    let s = aks.splitting();
    let mut dirac_dev = 0.0f64;
    for p in points.iter().take(3) {
        let lt = ltilde(&aks, p)?;
        for x in s.basis_a() {
            for x2 in s.basis_a() {
                let v = dirac_bracket(
                    &aks,
                    &Observable::ltilde_pairing(x.clone()),
                    &Observable::ltilde_pairing(x2.clone()),
                    &cs,
                    p,
                )?;
                dirac_dev = dirac_dev.max((v + lt.matrix().trace_form(&x.bracket(x2))).abs());
            }
        }
        for y in s.basis_b() {
            for y2 in s.basis_b() {
                let v = dirac_bracket(
                    &aks,
                    &Observable::ltilde_pairing(y.clone()),
                    &Observable::ltilde_pairing(y2.clone()),
                    &cs,
                    p,
                )?;
                dirac_dev = dirac_dev.max((v - lt.matrix().trace_form(&y.bracket(y2))).abs());
            }
        }
    }

    // H_P generates the same Ltilde flow as the quadratic invariant
    let z = Mat::zeros(aks.n());
    let hp = Observable::primary_hamiltonian(z.clone(), z.clone());
    let half_sq = Observable::custom(|aks2, q| {
        let lt = ltilde(aks2, q).expect("factorizable point");
        0.5 * lt.matrix().trace_form(lt.matrix())
    });
    let mut hp_dev = 0.0f64;
    for p in points.iter().take(2) {
        for t in &basis {
            let f = Observable::ltilde_pairing(t.clone());
            let lhs = poisson_bracket(&aks, &f, &hp, p)?;
            let rhs = poisson_bracket(&aks, &f, &half_sq, p)?;
            hp_dev = hp_dev.max((lhs - rhs).abs());
        }
    }

    let dirac = DiracSummary {
        generator_table_deviation: table_dev,
        dirac_vs_lie_poisson: dirac_dev,
        hamiltonian_identity: hp_dev,
    };
    let report = Report {
        classification: Some(classification.clone()),
        dirac: Some(dirac.clone()),
        ..Default::default()
    };
    let mut config_for_report = config.clone();
    if let Some(p) = out_override {
        config_for_report.output.report = Some(p.to_string_lossy().to_string());
    }
    write_outputs(&config_for_report, None, &report, None)?;

    println!("dirac-report: sl({}) {:?}", config.n, config.splitting);
    println!(
        "  constraints: {} total = pi_alpha {} + pi_beta {} + Jr {} + Jl {} + alpha {} + beta {}",
        classification.total_constraints,
        classification.primary_pi_alpha,
        classification.primary_pi_beta,
        classification.secondary_jr,
        classification.secondary_jl,
        classification.secondary_alpha,
        classification.secondary_beta,
    );
    println!(
        "  classification: {} first-class, {} second-class, reduced dim {} (orbit dim {}), prediction matched: {}",
        classification.first_class,
        classification.second_class,
        classification.reduced_dim,
        classification.orbit_dim,
        classification.matches_prediction,
    );
    // The finite-difference bracket error grows with the basis size and
    // the sampled magnitudes; the exact-gradient table does not. The spot
    // check thresholds carry seed-sweep headroom at the calibration point
    // (n <= 3) and widen quadratically past it so the verb stays
    // meaningful at larger n. The binding tolerances sit in the
    // acceptance suite at its pinned configuration.
    let fd_factor = 1.0f64.max((config.n as f64 - 1.0).powi(2) / 4.0);
    let dirac_tol = 2.5e-8 * fd_factor;
    let hp_tol = 2.5e-7 * fd_factor;
    println!("  generator-table deviation:  {table_dev:.3e} (tol 1.0e-8)");
    println!("  Dirac vs Lie-Poisson:       {dirac_dev:.3e} (tol {dirac_tol:.1e})");
    println!("  Hamiltonian identity:       {hp_dev:.3e} (tol {hp_tol:.1e})");

    let ok = classification.matches_prediction
        && table_dev <= 1e-8
        && dirac_dev <= dirac_tol
        && hp_dev <= hp_tol;
    Ok(if ok { EXIT_OK } else { EXIT_TOLERANCE })
}
