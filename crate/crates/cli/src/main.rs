//! `aks`: config-driven runner for AKS integrable flows.
//!
//! Three verbs mirror the three layers of the engine: `flow` integrates
//! the Lax dynamics (Runge-Kutta, exact factorization, or constrained
//! Hamiltonian), `lagrangian-check` exercises the gauge layer, and
//! `dirac-report` prints the constraint analysis.
//!
//! Exit codes: 0 success, 2 configuration error, 3 blow-up detected,
//! 4 an invariant or check exceeded its tolerance.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aks_cli::config::{RunConfig, Solver, SolverField};
use aks_cli::runner;

#[derive(Parser)]
#[command(
    name = "aks",
    about = "Adler-Kostant-Symes flows: Lax integration, factorization solving, and Dirac-constrained dynamics with cross-verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the flow with the configured solver(s) and serialize the
    /// trajectory and report.
    Flow(RunArgs),
    /// Gauge-layer diagnostics: Q invariance, Euler-Lagrange residuals,
    /// action quasi-invariance.
    LagrangianCheck(RunArgs),
    /// Constraint analysis: counts, first/second class split, Dirac
    /// bracket spot checks.
    DiracReport(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Matrix size n of sl(n, R).
    #[arg(long)]
    n: Option<usize>,
    /// Solver: lax-rk4 | factorization | constrained (repeatable).
    #[arg(long)]
    solver: Vec<String>,
    /// Integration end time.
    #[arg(long, allow_negative_numbers = true)]
    t_end: Option<f64>,
    /// Integration step.
    #[arg(long, allow_negative_numbers = true)]
    dt: Option<f64>,
    /// Seed for all randomized sampling.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path (trajectory for `flow`, report for the check verbs).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn resolve_config(args: &RunArgs) -> Result<RunConfig, String> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("config: cannot read {}: {e}", path.display()))?;
            RunConfig::from_toml(&text).map_err(|e| e.to_string())?
        }
        None => RunConfig::default(),
    };
    if let Some(n) = args.n {
        config.n = n;
    }
    if !args.solver.is_empty() {
        let mut solvers = Vec::new();
        for s in &args.solver {
            match Solver::parse(s) {
                Some(v) => solvers.push(v),
                None => {
                    return Err(format!(
                        "solver: unknown solver {s:?} (expected lax-rk4, factorization or constrained)"
                    ))
                }
            }
        }
        config.solver = SolverField::Many(solvers);
    }
    if let Some(t) = args.t_end {
        config.t_end = t;
    }
    if let Some(dt) = args.dt {
        config.dt = dt;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn run() -> i32 {
    let cli = Cli::parse();
    let (args, verb): (&RunArgs, fn(&RunConfig, Option<&PathBuf>) -> anyhow::Result<i32>) =
        match &cli.command {
            Command::Flow(a) => (a, runner::flow),
            Command::LagrangianCheck(a) => (a, runner::lagrangian_check),
            Command::DiracReport(a) => (a, runner::dirac_report),
        };
    let config = match resolve_config(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return runner::EXIT_CONFIG;
        }
    };
    if let Err(e) = config.validate() {
        eprintln!("{e}");
        return runner::EXIT_CONFIG;
    }
    match verb(&config, args.out.as_ref()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run() as u8)
}
