//! JSON reports printed by each command.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub strongly_connected: bool,
    pub joint_rank: usize,
    pub n: usize,
    pub per_node_v: Vec<usize>,
    /// Second-smallest eigenvalue of the mirror Laplacian, when defined.
    pub lambda2: Option<f64>,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub gamma: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub per_node_v: Vec<usize>,
    pub lmi_margins: Vec<f64>,
    pub design_path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub abscissa: f64,
    pub alpha: f64,
    pub lyapunov_margin: f64,
    pub lyapunov_certified: bool,
    pub pass: bool,
    /// Stable at rate `alpha` but without the quadratic certificate.
    pub uncertified_but_stable: bool,
    pub condition_numbers: Vec<f64>,
    /// The abscissa test allows this much slack above `-alpha`.
    pub abscissa_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub fitted_rate: Option<f64>,
    pub final_error: f64,
    pub alpha: f64,
    pub pass: bool,
    pub t_final: f64,
    pub dt: f64,
    pub seed: u64,
    pub fit_window: (f64, f64),
    pub trace_path: Option<String>,
}
