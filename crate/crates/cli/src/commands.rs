use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use log::{info, warn};
use observer_kit_core::{decomp, synth, verify};
use observer_kit_core::{sim, Error as CoreError};

use crate::error::{CliError, Status};
use crate::files::{ConfigDocument, DesignDocument, Problem};
use crate::report::{CheckReport, SimulationReport, SynthesisReport, VerifyReport};

/// Relative shortfall tolerated between the fitted and the designed rate.
pub const RATE_TOLERANCE: f64 = 0.05;
/// Below this final error a trace without a fittable rate still passes.
pub const ZERO_ERROR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome<R> {
    pub report: R,
    pub status: Status,
}

fn load_problem(config: &Path) -> Result<Problem, CliError> {
    ConfigDocument::load(config)?.problem()
}

pub fn check(config: &Path) -> Result<Outcome<CheckReport>, CliError> {
    let problem = load_problem(config)?;
    let model = &problem.model;
    let tol = problem.params.rank_tol;
    let decomps = decomp::decompose_all(model, tol)?;
    let joint_rank = decomp::joint_observability_rank(model, Some(&decomps), tol)?;
    let strongly_connected = problem.graph.is_strongly_connected();
    let lambda2 = if strongly_connected {
        problem.graph.balance()?.lambda2
    } else {
        None
    };

    let mut failures = Vec::new();
    if !strongly_connected {
        failures.push("graph is not strongly connected".to_owned());
    }
    if joint_rank < model.state_dim() {
        failures.push(format!(
            "(H, A) is not observable: joint rank {joint_rank} < n = {}",
            model.state_dim()
        ));
    }
    let status = if failures.is_empty() {
        Status::Ok
    } else {
        Status::AssumptionViolated
    };
    Ok(Outcome {
        report: CheckReport {
            strongly_connected,
            joint_rank,
            n: model.state_dim(),
            per_node_v: decomps.iter().map(|d| d.observable_dim).collect(),
            lambda2,
            failures,
        },
        status,
    })
}

pub fn synthesize(config: &Path, alpha: Option<f64>, output: &Path) -> Result<Outcome<SynthesisReport>, CliError> {
    let mut problem = load_problem(config)?;
    if let Some(alpha) = alpha {
        problem.params.alpha = alpha;
        problem.params.validate(problem.model.node_count())?;
    }
    let syn = synth::synthesize(&problem.model, &problem.graph, &problem.params)?;
    DesignDocument::from(&syn.design).save(output)?;
    info!(
        "wrote design to {} (γ = {:.6e}, ε = {:.6e})",
        output.display(),
        syn.design.gamma,
        syn.design.epsilon
    );
    Ok(Outcome {
        report: SynthesisReport {
            gamma: syn.design.gamma,
            epsilon: syn.design.epsilon,
            alpha: syn.design.alpha,
            per_node_v: syn.design.nodes.iter().map(|g| g.observable_dim).collect(),
            lmi_margins: syn.lmi_margins,
            design_path: output.display().to_string(),
        },
        status: Status::Ok,
    })
}

pub fn verify(config: &Path, design: &Path) -> Result<Outcome<VerifyReport>, CliError> {
    let problem = load_problem(config)?;
    let design = DesignDocument::load(design)?.design(&problem.model)?;
    if design.r.len() != problem.graph.node_count() {
        return Err(CliError::Format("design and graph disagree on the node count".into()));
    }
    let cert = verify::certify(&problem.model, &problem.graph, &design, design.alpha)?;
    if cert.uncertified_but_stable() {
        warn!(
            "stable at rate α = {} but the Lyapunov certificate fails (λ_max = {:.3e})",
            design.alpha, cert.lyapunov.margin
        );
    }
    let pass = cert.abscissa.pass;
    Ok(Outcome {
        report: VerifyReport {
            abscissa: cert.abscissa.abscissa,
            alpha: design.alpha,
            lyapunov_margin: cert.lyapunov.margin,
            lyapunov_certified: cert.lyapunov.certified,
            pass,
            uncertified_but_stable: cert.uncertified_but_stable(),
            condition_numbers: cert.lyapunov.condition_numbers,
            abscissa_slack: verify::ABSCISSA_SLACK,
        },
        status: if pass { Status::Ok } else { Status::CheckFailed },
    })
}

#[derive(Debug, Clone, Default)]
pub struct SimulateOptions<'a> {
    pub t_final: Option<f64>,
    pub dt: Option<f64>,
    pub seed: Option<u64>,
    pub trace: Option<&'a Path>,
    pub include_states: bool,
}

/// Passing rule for a simulated trace at the designed rate.
pub fn rate_is_acceptable(fitted: Option<f64>, final_error: f64, alpha: f64) -> bool {
    match fitted {
        Some(rate) => rate >= (1.0 - RATE_TOLERANCE) * alpha,
        None => final_error <= ZERO_ERROR,
    }
}

pub fn simulate(config: &Path, design: &Path, opts: &SimulateOptions) -> Result<Outcome<SimulationReport>, CliError> {
    let mut problem = load_problem(config)?;
    let design = DesignDocument::load(design)?.design(&problem.model)?;
    let cfg = &mut problem.sim;
    if let Some(t) = opts.t_final {
        cfg.t_final = t;
    }
    if let Some(dt) = opts.dt {
        cfg.dt = dt;
    }
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let trace = sim::integrate(cfg, &problem.model, &problem.graph, &design)?;
    if let Some(path) = opts.trace {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        trace
            .write_csv(BufWriter::new(file), opts.include_states)
            .map_err(|e| CliError::io(path, e))?;
    }
    let final_error = trace.final_error();
    if trace.fitted_rate.is_none() && final_error > ZERO_ERROR {
        warn!("{}", CoreError::InsufficientData("too few positive error samples in the fit window".into()));
    }
    let pass = rate_is_acceptable(trace.fitted_rate, final_error, design.alpha);
    Ok(Outcome {
        report: SimulationReport {
            fitted_rate: trace.fitted_rate,
            final_error,
            alpha: design.alpha,
            pass,
            t_final: cfg.t_final,
            dt: cfg.dt,
            seed: cfg.seed,
            fit_window: cfg.window(),
            trace_path: opts.trace.map(|p| p.display().to_string()),
        },
        status: if pass { Status::Ok } else { Status::CheckFailed },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_rule() {
        assert!(rate_is_acceptable(Some(0.95), 1.0, 1.0));
        assert!(!rate_is_acceptable(Some(0.9499), 1.0, 1.0));
        assert!(rate_is_acceptable(None, 0.0, 1.0));
        assert!(!rate_is_acceptable(None, 1e-9, 1.0));
    }
}
