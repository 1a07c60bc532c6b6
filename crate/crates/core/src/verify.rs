//! Independent certification of a design against the global error system
//!
//! ```text
//! ė = Λ e − γ M̄ (R L ⊗ I_n) e,   Λ = diag(A − L_i H_i),   M̄ = diag(M_i)
//! ```
//!
//! Two checks: the spectral abscissa of the error matrix (ground truth),
//! and the quadratic Lyapunov certificate with `P = diag(M_i⁻¹)`.

use crate::decomp::SystemModel;
use crate::error::{Error, Result};
use crate::graph::Digraph;
use crate::numerics::{self, Matrix};
use crate::synth::ObserverDesign;

/// Slack on the abscissa test; strict inequality is not decidable in floating point.
pub const ABSCISSA_SLACK: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GlobalErrorSystem {
    /// `(nN) × (nN)` error dynamics matrix.
    pub matrix: Matrix,
    /// `Λ = diag(A − L_i H_i)`.
    pub local: Matrix,
    /// `P = diag(M_i⁻¹)`.
    pub lyapunov: Matrix,
    /// Condition numbers of the `M_i`.
    pub condition_numbers: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbscissaVerdict {
    pub abscissa: f64,
    pub alpha: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovVerdict {
    /// `λ_max(PΛ + ΛᵀP − γ(L̂ ⊗ I) + 2αP)`.
    pub margin: f64,
    pub certified: bool,
    pub condition_numbers: Vec<f64>,
}

/// Outcome of running both checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Certification {
    pub abscissa: AbscissaVerdict,
    pub lyapunov: LyapunovVerdict,
}

impl Certification {
    /// Stable at the requested rate but without a quadratic certificate.
    pub fn uncertified_but_stable(&self) -> bool {
        self.abscissa.pass && !self.lyapunov.certified
    }
}

fn condition_number(m: &Matrix) -> Result<f64> {
    let eig = numerics::symmetric_eigenvalues(m)?;
    match (eig.first(), eig.last()) {
        (Some(&lo), Some(&hi)) if lo > 0.0 => Ok(hi / lo),
        (Some(_), Some(_)) => Ok(f64::INFINITY),
        _ => Ok(1.0),
    }
}

pub fn build_global_error_matrix(
    model: &SystemModel,
    graph: &Digraph,
    design: &ObserverDesign,
) -> Result<GlobalErrorSystem> {
    design.check_dimensions(model)?;
    if graph.node_count() != model.node_count() {
        return Err(Error::dim(format!(
            "graph has {} nodes, system has {}",
            graph.node_count(),
            model.node_count()
        )));
    }
    let n = model.state_dim();
    let a = model.a();
    let locals: Vec<Matrix> = design
        .nodes
        .iter()
        .zip(model.outputs())
        .map(|(node, h)| a - &node.l * h)
        .collect();
    let local = numerics::block_diag(&locals);
    let m_bar = numerics::block_diag(&design.nodes.iter().map(|g| g.m.clone()).collect::<Vec<_>>());
    let rl = Matrix::from_diagonal(&design.r) * graph.laplacian();
    let matrix = &local - m_bar * rl.kronecker(&Matrix::identity(n, n)) * design.gamma;

    let mut inverses = Vec::with_capacity(design.nodes.len());
    let mut condition_numbers = Vec::with_capacity(design.nodes.len());
    for (i, node) in design.nodes.iter().enumerate() {
        let cond = condition_number(&node.m)?;
        let inv = match &node.m_inv {
            Some(inv) => {
                let err = (&node.m * inv - Matrix::identity(n, n)).amax();
                if !(err <= 1e-8 * cond.max(1.0)) {
                    return Err(Error::InvalidInput(format!(
                        "stored inverse of M_{i} is off by {err:.3e} (condition number {cond:.3e})"
                    )));
                }
                inv.clone()
            }
            None => node
                .m
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::numerical(format!("M_{i} is singular")))?,
        };
        inverses.push(numerics::symmetrize(&inv));
        condition_numbers.push(cond);
    }
    Ok(GlobalErrorSystem {
        matrix,
        local,
        lyapunov: numerics::block_diag(&inverses),
        condition_numbers,
    })
}

/// Passes iff `max Re λ(E) ≤ −α + 1e-6`.
pub fn spectral_abscissa_certificate(e: &Matrix, alpha: f64) -> Result<AbscissaVerdict> {
    let abscissa = numerics::spectral_abscissa(e)?;
    Ok(AbscissaVerdict {
        abscissa,
        alpha,
        pass: abscissa <= -alpha + ABSCISSA_SLACK,
    })
}

/// The matrix `PΛ + ΛᵀP − γ(L̂ ⊗ I_n) + 2αP` (symmetrized).
pub fn lyapunov_certificate_matrix(
    model: &SystemModel,
    graph: &Digraph,
    design: &ObserverDesign,
    alpha: f64,
) -> Result<(Matrix, Vec<f64>)> {
    let sys = build_global_error_matrix(model, graph, design)?;
    let n = model.state_dim();
    let rl = Matrix::from_diagonal(&design.r) * graph.laplacian();
    let mirror = &rl + rl.transpose();
    let p = &sys.lyapunov;
    let lambda = &sys.local;
    let cert = p * lambda + lambda.transpose() * p - mirror.kronecker(&Matrix::identity(n, n)) * design.gamma
        + p * (2.0 * alpha);
    Ok((numerics::symmetrize(&cert), sys.condition_numbers))
}

pub fn lyapunov_certificate(
    model: &SystemModel,
    graph: &Digraph,
    design: &ObserverDesign,
    alpha: f64,
) -> Result<LyapunovVerdict> {
    let (cert, condition_numbers) = lyapunov_certificate_matrix(model, graph, design, alpha)?;
    let d = numerics::is_negative_definite(&cert)?;
    Ok(LyapunovVerdict {
        margin: d.margin,
        certified: d.holds,
        condition_numbers,
    })
}

/// Runs both checks at rate `alpha`. A Lyapunov certificate without a
/// passing abscissa is contradictory and reported as a numerical failure.
pub fn certify(model: &SystemModel, graph: &Digraph, design: &ObserverDesign, alpha: f64) -> Result<Certification> {
    let sys = build_global_error_matrix(model, graph, design)?;
    let abscissa = spectral_abscissa_certificate(&sys.matrix, alpha)?;
    let lyapunov = lyapunov_certificate(model, graph, design, alpha)?;
    if lyapunov.certified && !abscissa.pass {
        return Err(Error::numerical(format!(
            "Lyapunov certificate holds (margin {:.3e}) but the spectral abscissa {:.6e} exceeds −α = {:.6e}",
            lyapunov.margin, abscissa.abscissa, -alpha
        )));
    }
    Ok(Certification { abscissa, lyapunov })
}
