//! Run configuration: TOML file plus command-line overrides.

use aks_core::algebra::{Splitting, Subspace};
use aks_core::orbit::AksData;
use aks_core::preset::{preset_iwasawa, preset_toda};
use aks_core::Mat;
use serde::{Deserialize, Serialize};

/// Errors found while validating a configuration, each tagged with the
/// offending field path.
#[derive(Debug)]
pub struct ConfigErrors(pub Vec<String>);

impl std::fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "configuration invalid:")?;
        for e in &self.0 {
            writeln!(f, "  {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplittingChoice {
    Triangular,
    Iwasawa,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    LaxRk4,
    Factorization,
    Constrained,
}

impl Solver {
    pub fn parse(s: &str) -> Option<Solver> {
        match s {
            "lax-rk4" => Some(Solver::LaxRk4),
            "factorization" => Some(Solver::Factorization),
            "constrained" => Some(Solver::Constrained),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Solver::LaxRk4 => "lax-rk4",
            Solver::Factorization => "factorization",
            Solver::Constrained => "constrained",
        }
    }
}

/// Accepts either a single solver name or a list.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SolverField {
    One(Solver),
    Many(Vec<Solver>),
}

impl SolverField {
    pub fn as_vec(&self) -> Vec<Solver> {
        match self {
            SolverField::One(s) => vec![*s],
            SolverField::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Moments {
    TodaDefault,
    Explicit { mu: Vec<Vec<f64>>, nu: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Initial {
    /// Orbit point through the given group factors (identity if omitted).
    Orbit {
        #[serde(skip_serializing_if = "Option::is_none")]
        g_a: Option<Vec<Vec<f64>>>,
        #[serde(skip_serializing_if = "Option::is_none")]
        g_b: Option<Vec<Vec<f64>>>,
    },
    /// Orbit point through seeded random group elements.
    RandomOrbit,
    /// Explicit Lax matrix.
    Explicit { l0: Vec<Vec<f64>> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct OutputConfig {
    /// Trajectory file path; nothing is written when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<OutputFormat>,
    /// Report (JSON) file path.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Tolerances {
    /// Invariant drift threshold; exceeding it is an exit-code-4 failure.
    pub drift: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { drift: 1e-8 }
    }
}

fn default_n() -> usize {
    2
}

fn default_splitting() -> SplittingChoice {
    SplittingChoice::Triangular
}

fn default_solver() -> SolverField {
    SolverField::One(Solver::LaxRk4)
}

fn default_t_end() -> f64 {
    5.0
}

fn default_dt() -> f64 {
    1e-3
}

fn default_stride() -> usize {
    10
}

fn default_moments() -> Moments {
    Moments::TodaDefault
}

fn default_initial() -> Initial {
    Initial::Orbit { g_a: None, g_b: None }
}

/// The full run configuration. All fields have defaults so a minimal
/// config file (or none at all, with flags only) is enough.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_splitting")]
    pub splitting: SplittingChoice,
    #[serde(default = "default_solver")]
    pub solver: SolverField,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Keep every k-th sample when writing output files.
    #[serde(default = "default_stride")]
    pub sample_stride: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_moments")]
    pub moments: Moments,
    #[serde(default = "default_initial")]
    pub initial: Initial,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: default_n(),
            splitting: default_splitting(),
            solver: default_solver(),
            t_end: default_t_end(),
            dt: default_dt(),
            sample_stride: default_stride(),
            seed: 0,
            moments: default_moments(),
            initial: default_initial(),
            output: OutputConfig::default(),
            tolerances: Tolerances::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig, ConfigErrors> {
        toml::from_str(text).map_err(|e| ConfigErrors(vec![format!("parse: {e}")]))
    }

    /// Field-level validation; collects every problem rather than
    /// stopping at the first.
    pub fn validate(&self) -> Result<(), ConfigErrors> {
        let mut errs = Vec::new();
        if self.n < 2 {
            errs.push(format!("n: need n >= 2, got {}", self.n));
        }
        if !(self.dt > 0.0) {
            errs.push(format!("dt: must be positive, got {}", self.dt));
        }
        if !(self.t_end > 0.0) {
            errs.push(format!("t-end: must be positive, got {}", self.t_end));
        }
        if self.sample_stride == 0 {
            errs.push("sample-stride: must be at least 1".into());
        }
        if self.solver.as_vec().is_empty() {
            errs.push("solver: need at least one solver".into());
        }
        if let Moments::Explicit { mu, nu } = &self.moments {
            for (name, m) in [("moments.mu", mu), ("moments.nu", nu)] {
                if let Err(e) = check_square(m, self.n) {
                    errs.push(format!("{name}: {e}"));
                }
            }
        }
        match &self.initial {
            Initial::Orbit { g_a, g_b } => {
                for (name, m) in [("initial.g-a", g_a), ("initial.g-b", g_b)] {
                    if let Some(m) = m {
                        if let Err(e) = check_square(m, self.n) {
                            errs.push(format!("{name}: {e}"));
                        }
                    }
                }
            }
            Initial::Explicit { l0 } => {
                if let Err(e) = check_square(l0, self.n) {
                    errs.push(format!("initial.l0: {e}"));
                }
            }
            Initial::RandomOrbit => {}
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigErrors(errs))
        }
    }

    /// Build the AKS data from the splitting choice and moments; moment
    /// membership failures are reported as config errors with their field
    /// path.
    pub fn build_aks(&self) -> Result<AksData, ConfigErrors> {
        let preset = match self.splitting {
            SplittingChoice::Triangular => preset_toda(self.n),
            SplittingChoice::Iwasawa => preset_iwasawa(self.n),
        };
        match &self.moments {
            Moments::TodaDefault => Ok(preset),
            Moments::Explicit { mu, nu } => {
                let splitting: Splitting = preset.splitting().clone();
                let mu = to_mat(mu);
                let nu = to_mat(nu);
                let mut errs = Vec::new();
                if !splitting.in_subspace(&mu, Subspace::BPerp) {
                    errs.push("moments.mu: not in B-perp for this splitting".to_string());
                }
                if !splitting.in_subspace(&nu, Subspace::APerp) {
                    errs.push("moments.nu: not in A-perp for this splitting".to_string());
                }
                if !errs.is_empty() {
                    return Err(ConfigErrors(errs));
                }
                AksData::new(splitting, mu, nu)
                    .map_err(|e| ConfigErrors(vec![format!("moments: {e}")]))
            }
        }
    }
}

fn check_square(rows: &[Vec<f64>], n: usize) -> Result<(), String> {
    if rows.len() != n {
        return Err(format!("expected {n} rows, got {}", rows.len()));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(format!("row {i}: expected {n} entries, got {}", r.len()));
        }
        if r.iter().any(|x| !x.is_finite()) {
            return Err(format!("row {i}: non-finite entry"));
        }
    }
    Ok(())
}

pub fn to_mat(rows: &[Vec<f64>]) -> Mat {
    let n = rows.len();
    let mut m = Mat::zeros(n);
    for (i, r) in rows.iter().enumerate() {
        for (j, &v) in r.iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    m
}

pub fn mat_to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.n())
        .map(|i| (0..m.n()).map(|j| m[(i, j)]).collect())
        .collect()
}
