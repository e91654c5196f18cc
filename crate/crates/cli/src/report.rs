//! Run reports: drift tables, cross-checks, classification summaries.

use serde::{Deserialize, Serialize};

/// Per-solver invariant drift table.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SolverReport {
    pub solver: String,
    /// Max |H(t) - H(0)| along the trajectory.
    pub h_drift: f64,
    /// Max drift of tr(L^k), k = 2..=n.
    pub power_trace_drift: Vec<f64>,
    /// Max drift of each characteristic-polynomial coefficient.
    pub char_poly_drift: Vec<f64>,
    pub max_drift: f64,
    /// Constraint drift for the constrained solver.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constraint_drift: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ClassificationSummary {
    pub total_constraints: usize,
    pub primary_pi_alpha: usize,
    pub primary_pi_beta: usize,
    pub secondary_jr: usize,
    pub secondary_jl: usize,
    pub secondary_alpha: usize,
    pub secondary_beta: usize,
    pub first_class: usize,
    pub second_class: usize,
    pub reduced_dim: usize,
    pub orbit_dim: usize,
    /// First-class count equals twice the little-algebra dimensions and
    /// the reduced dimension equals the orbit dimension.
    pub matches_prediction: bool,
}

/// Gauge-layer check numbers.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct GaugeSummary {
    pub q_invariance: f64,
    pub el_constraint: f64,
    pub el_evolution: f64,
    pub action_endpoint_gap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub negative_control_gap: Option<f64>,
}

/// Dirac-layer check numbers.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct DiracSummary {
    pub generator_table_deviation: f64,
    pub dirac_vs_lie_poisson: f64,
    pub hamiltonian_identity: f64,
}

/// The full run report; sections are filled by whichever verb ran.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Report {
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub solvers: Vec<SolverReport>,
    /// Max sample-wise deviation between the first two solvers.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cross_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gauge: Option<GaugeSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dirac: Option<DiracSummary>,
    /// First detected blow-up time, when a solver left its domain.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blow_up_time: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

impl Report {
    pub fn max_drift(&self) -> f64 {
        self.solvers
            .iter()
            .map(|s| s.max_drift)
            .fold(0.0f64, f64::max)
    }
}
