//! Constructive observer design.
//!
//! Pipeline: per-node observability decomposition, balance weights of the
//! graph, the coupling bound `ε`, the coupling gain `γ`, output-injection
//! gains for each observable block, a per-node Lyapunov solve, and finally
//! the gains `L_i`, `M_i` in original coordinates. Every node's block LMI is
//! re-checked before a design is returned.

use log::debug;

use crate::decomp::{self, NodeDecomposition, SystemModel};
use crate::error::{Error, Result};
use crate::graph::{BalancedStructure, Digraph};
use crate::numerics::{self, Definiteness, Matrix, RankTolerance, Vector};

/// Safety factors turning the existence statements into concrete numbers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Margins {
    /// `ε = epsilon_shrink · λ_min(S)`, in (0, 1).
    pub epsilon_shrink: f64,
    /// Headroom on the minimal unobservable-block bound, in (1, ∞).
    pub gamma_inflation: f64,
}

impl Default for Margins {
    fn default() -> Self {
        Self {
            epsilon_shrink: 0.9,
            gamma_inflation: 1.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisParams {
    /// Desired error decay rate.
    pub alpha: f64,
    /// Per-node weights `g_i`; `None` means all ones.
    pub g: Option<Vec<f64>>,
    pub margins: Margins,
    pub rank_tol: RankTolerance,
}

impl SynthesisParams {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            g: None,
            margins: Margins::default(),
            rank_tol: RankTolerance::default(),
        }
    }

    pub fn validate(&self, node_count: usize) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidInput(format!("alpha must be positive, got {}", self.alpha)));
        }
        if let Some(g) = &self.g {
            if g.len() != node_count {
                return Err(Error::dim(format!("g has {} entries, expected {node_count}", g.len())));
            }
            if let Some(x) = g.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
                return Err(Error::InvalidInput(format!("g_i must be positive, got {x}")));
            }
        }
        let m = self.margins;
        if !(m.epsilon_shrink > 0.0 && m.epsilon_shrink < 1.0) {
            return Err(Error::InvalidInput(format!(
                "epsilon shrink factor must lie in (0, 1), got {}",
                m.epsilon_shrink
            )));
        }
        if !(m.gamma_inflation > 1.0 && m.gamma_inflation.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "gamma inflation factor must exceed 1, got {}",
                m.gamma_inflation
            )));
        }
        Ok(())
    }

    pub fn weights(&self, node_count: usize) -> Vec<f64> {
        self.g.clone().unwrap_or_else(|| vec![1.0; node_count])
    }
}

/// Gains of one local observer.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeGains {
    pub observable_dim: usize,
    /// Output injection `L_i` (n × p_i).
    pub l: Matrix,
    /// Coupling weight `M_i` (n × n, symmetric positive definite).
    pub m: Matrix,
    /// Lyapunov block `P_io` of the observable part.
    pub p_o: Matrix,
    /// `M_i⁻¹` formed from `P_io` directly, when known; inverting an
    /// ill-conditioned `M_i` loses the accuracy the certificate needs.
    pub m_inv: Option<Matrix>,
}

/// A complete distributed observer. The unobservable Lyapunov block is
/// fixed to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverDesign {
    pub gamma: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub r: Vector,
    pub nodes: Vec<NodeGains>,
}

impl ObserverDesign {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Checks that the gains fit `model`.
    pub fn check_dimensions(&self, model: &SystemModel) -> Result<()> {
        let n = model.state_dim();
        if self.nodes.len() != model.node_count() {
            return Err(Error::dim(format!(
                "design has {} nodes, system has {}",
                self.nodes.len(),
                model.node_count()
            )));
        }
        if self.r.len() != model.node_count() {
            return Err(Error::dim(format!(
                "design has {} balance weights, system has {} nodes",
                self.r.len(),
                model.node_count()
            )));
        }
        for (i, (node, h)) in self.nodes.iter().zip(model.outputs()).enumerate() {
            if node.l.shape() != (n, h.nrows()) {
                return Err(Error::dim(format!(
                    "L_{i} is {}x{}, expected {n}x{}",
                    node.l.nrows(),
                    node.l.ncols(),
                    h.nrows()
                )));
            }
            if node.m.shape() != (n, n) {
                return Err(Error::dim(format!(
                    "M_{i} is {}x{}, expected {n}x{n}",
                    node.m.nrows(),
                    node.m.ncols()
                )));
            }
            if node.m_inv.as_ref().is_some_and(|inv| inv.shape() != (n, n)) {
                return Err(Error::dim(format!("stored inverse of M_{i} is not {n}x{n}")));
            }
        }
        Ok(())
    }
}

/// Lower bound `ε` together with the eigenvalue it was derived from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Epsilon {
    pub value: f64,
    pub lambda_min: f64,
}

/// `S = Tᵀ (L̂ ⊗ I_n) T + G` with `T = diag(T_i)` and
/// `G = diag(diag(g_i I_{v_i}, 0))`.
pub fn epsilon_matrix(
    decomps: &[NodeDecomposition],
    balanced: &BalancedStructure,
    g: &[f64],
) -> Result<Matrix> {
    let big_n = decomps.len();
    if balanced.node_count() != big_n || g.len() != big_n {
        return Err(Error::dim(format!(
            "{big_n} decompositions, {} graph nodes, {} weights",
            balanced.node_count(),
            g.len()
        )));
    }
    let n = decomps.first().map(|d| d.state_dim()).unwrap_or(0);
    let t = numerics::block_diag(&decomps.iter().map(|d| d.transform.clone()).collect::<Vec<_>>());
    let coupling = balanced.mirror.kronecker(&Matrix::identity(n, n));
    let mut s = t.transpose() * coupling * &t;
    for (i, d) in decomps.iter().enumerate() {
        for k in 0..d.observable_dim {
            s[(i * n + k, i * n + k)] += g[i];
        }
    }
    Ok(numerics::symmetrize(&s))
}

pub fn compute_epsilon(
    decomps: &[NodeDecomposition],
    balanced: &BalancedStructure,
    g: &[f64],
    shrink: f64,
) -> Result<Epsilon> {
    if let Some(x) = g.iter().find(|x| !(**x > 0.0)) {
        return Err(Error::Precondition(format!("g_i must be positive, got {x}")));
    }
    let s = epsilon_matrix(decomps, balanced, g)?;
    let lambda_min = numerics::symmetric_eigenvalues(&s)?
        .first()
        .copied()
        .unwrap_or(f64::INFINITY);
    if lambda_min <= 1e-12 {
        return Err(Error::AssumptionViolation(format!(
            "λ_min(Tᵀ(L̂⊗I)T + G) = {lambda_min:.3e}: joint observability or strong connectivity fails numerically"
        )));
    }
    Ok(Epsilon {
        value: shrink * lambda_min,
        lambda_min,
    })
}

/// `λ_max(Sym(A_u) + A_r A_rᵀ / β) − β`; strictly decreasing in `β`.
fn coupling_defect(sym_au: &Matrix, ar_art: &Matrix, beta: f64) -> Result<f64> {
    let m = sym_au + ar_art / beta;
    let lam = numerics::symmetric_eigenvalues(&m)?;
    Ok(lam.last().copied().unwrap_or(f64::NEG_INFINITY) - beta)
}

/// Smallest `β ≥ 0` with `Sym(A_u) − βI + A_r A_rᵀ / β < 0` for all larger
/// `β` (to 1e-9). Zero when every positive `β` already works.
pub fn unobservable_bound(decomp: &NodeDecomposition) -> Result<f64> {
    if decomp.unobservable_dim() == 0 {
        return Ok(0.0);
    }
    let sym_au = numerics::sym(&decomp.a_u);
    let ar_art = &decomp.a_r * decomp.a_r.transpose();
    let phi = |b: f64| coupling_defect(&sym_au, &ar_art, b);

    let mut hi = 1.0;
    while phi(hi)? >= 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::numerical("unobservable-block bound search overflowed"));
        }
    }
    let mut lo = hi / 2.0;
    while phi(lo)? < 0.0 {
        lo /= 2.0;
        if lo < 1e-300 {
            return Ok(0.0);
        }
    }
    while hi - lo > 1e-9 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if phi(mid)? < 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Checks `Sym(A_u) − bI + A_r A_rᵀ / b < 0` at `b = γε − 2α`.
pub fn coupling_condition_holds(decomp: &NodeDecomposition, gamma: f64, epsilon: f64, alpha: f64) -> Result<bool> {
    let b = gamma * epsilon - 2.0 * alpha;
    if !(b > 0.0) {
        return Ok(false);
    }
    if decomp.unobservable_dim() == 0 {
        return Ok(true);
    }
    let sym_au = numerics::sym(&decomp.a_u);
    let ar_art = &decomp.a_r * decomp.a_r.transpose();
    let u = decomp.unobservable_dim();
    let lhs = sym_au - Matrix::identity(u, u) * b + ar_art / b;
    Ok(numerics::is_negative_definite(&lhs)?.holds)
}

/// Coupling gain: the larger of `(inflation·max β_i + 2α)/ε`, `2α + 1` and
/// `inflation·2α/ε`; the last term keeps `γε > 2α` when no node constrains `γ`.
pub fn select_gamma(decomps: &[NodeDecomposition], epsilon: f64, alpha: f64, inflation: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::Precondition(format!("ε must be positive, got {epsilon}")));
    }
    if !(alpha >= 0.0) {
        return Err(Error::Precondition(format!("α must be nonnegative, got {alpha}")));
    }
    let mut beta_max: f64 = 0.0;
    for d in decomps {
        beta_max = beta_max.max(unobservable_bound(d)?);
    }
    let gamma = ((inflation * beta_max + 2.0 * alpha) / epsilon)
        .max(2.0 * alpha + 1.0)
        .max(inflation * 2.0 * alpha / epsilon);
    for (i, d) in decomps.iter().enumerate() {
        if !coupling_condition_holds(d, gamma, epsilon, alpha)? {
            return Err(Error::numerical(format!(
                "coupling condition fails at node {i} for γ = {gamma:.6e}"
            )));
        }
    }
    debug!("β_max = {beta_max:.6e}, γ = {gamma:.6e}");
    Ok(gamma)
}

/// Extra distance, beyond `α`, between the observer poles and the
/// imaginary axis.
pub const POLE_MARGIN: f64 = 0.5;

/// Output injection for an observable block with all closed-loop poles in
/// `Re s < −α − POLE_MARGIN`.
///
/// With `A_s = A_o + (α + POLE_MARGIN) I`, take the stabilizing solution `Y`
/// of the filter Riccati equation `A_s Y + Y A_sᵀ − Y H_oᵀ H_o Y + I = 0` and
/// set `L_o = Y H_oᵀ`; then `A_s − L_o H_o` is Hurwitz.
pub fn place_observer_poles(a_o: &Matrix, h_o: &Matrix, alpha: f64) -> Result<Matrix> {
    let v = a_o.nrows();
    if h_o.ncols() != v || !a_o.is_square() {
        return Err(Error::dim(format!(
            "A_o is {}x{} but H_o is {}x{}",
            a_o.nrows(),
            a_o.ncols(),
            h_o.nrows(),
            h_o.ncols()
        )));
    }
    if v == 0 {
        return Ok(Matrix::zeros(0, h_o.nrows()));
    }
    let shifted = a_o + Matrix::identity(v, v) * (alpha + POLE_MARGIN);
    let gram = h_o.transpose() * h_o;
    let y = numerics::solve_riccati(&shifted.transpose(), &gram, &Matrix::identity(v, v)).map_err(|e| match e {
        Error::NumericalFailure(msg) => {
            Error::AssumptionViolation(format!("no stabilizing observer gain for the observable block: {msg}"))
        }
        other => other,
    })?;
    let l_o = y * h_o.transpose();

    let abscissa = numerics::spectral_abscissa(&(a_o - &l_o * h_o))?;
    if !(abscissa < -alpha - 1e-8) {
        return Err(Error::numerical(format!(
            "observer poles not placed: abscissa {abscissa:.6e} ≥ −α − 1e-8 = {:.6e}",
            -alpha - 1e-8
        )));
    }
    Ok(l_o)
}

/// `P_o` with `Sym(P_o (A_o − L_o H_o + αI)) + (γ − 2α) I = 0`.
pub fn solve_design_lyapunov(a_o: &Matrix, l_o: &Matrix, h_o: &Matrix, alpha: f64, gamma: f64) -> Result<Matrix> {
    if !(gamma > 2.0 * alpha) {
        return Err(Error::Precondition(format!(
            "γ = {gamma} must exceed 2α = {}",
            2.0 * alpha
        )));
    }
    let v = a_o.nrows();
    let f = a_o - l_o * h_o + Matrix::identity(v, v) * alpha;
    let q = Matrix::identity(v, v) * (gamma - 2.0 * alpha);
    numerics::solve_lyapunov(&f, &q)
}

/// `L_i = T_i col(L_io, 0)` and `M_i = T_i diag(P_io⁻¹, I) T_iᵀ`.
pub fn assemble_gains(
    decomps: &[NodeDecomposition],
    l_os: &[Matrix],
    p_os: &[Matrix],
    gamma: f64,
    epsilon: f64,
    r: &Vector,
    alpha: f64,
) -> Result<ObserverDesign> {
    if l_os.len() != decomps.len() || p_os.len() != decomps.len() || r.len() != decomps.len() {
        return Err(Error::dim("per-node gain lists must match the node count"));
    }
    let mut nodes = Vec::with_capacity(decomps.len());
    for (i, ((d, l_o), p_o)) in decomps.iter().zip(l_os).zip(p_os).enumerate() {
        let n = d.state_dim();
        let v = d.observable_dim;
        let p_i = d.h_o.nrows();
        if l_o.shape() != (v, p_i) || p_o.shape() != (v, v) {
            return Err(Error::dim(format!("node {i}: L_io or P_io has the wrong shape")));
        }
        let t = &d.transform;
        let mut padded = Matrix::zeros(n, p_i);
        padded.rows_mut(0, v).copy_from(l_o);
        let l = t * padded;

        let p_o_inv = if v == 0 {
            Matrix::zeros(0, 0)
        } else {
            p_o.clone()
                .cholesky()
                .ok_or_else(|| Error::numerical(format!("node {i}: P_io is not positive definite")))?
                .inverse()
        };
        let inner_inv = numerics::block_diag(&[p_o_inv, Matrix::identity(n - v, n - v)]);
        let m = numerics::symmetrize(&(t * inner_inv * t.transpose()));
        let inner = numerics::block_diag(&[p_o.clone(), Matrix::identity(n - v, n - v)]);
        let m_inv = t * inner * t.transpose();
        let pd = numerics::is_positive_definite(&m)?;
        if !pd.holds {
            return Err(Error::numerical(format!("node {i}: M_i is not positive definite")));
        }
        // Inversion error grows with the conditioning of P_io.
        let cond = if v == 0 {
            1.0
        } else {
            let eig = numerics::symmetric_eigenvalues(p_o)?;
            eig[v - 1] / eig[0]
        };
        let inv_err = (&m * &m_inv - Matrix::identity(n, n)).amax();
        if inv_err > 1e-8 * cond.max(1.0) {
            return Err(Error::numerical(format!(
                "node {i}: M_i · T diag(P_io, I) Tᵀ deviates from I by {inv_err:.3e}"
            )));
        }
        nodes.push(NodeGains {
            observable_dim: v,
            l,
            m,
            p_o: p_o.clone(),
            m_inv: Some(numerics::symmetrize(&m_inv)),
        });
    }
    Ok(ObserverDesign {
        gamma,
        epsilon,
        alpha,
        r: r.clone(),
        nodes,
    })
}

/// Per-node block inequality
///
/// ```text
/// [ Φ + γ g I      A_rᵀ P_u          ]
/// [ P_u A_r        Sym(P_u A_u) + 2αP_u ]  − γ ε I  < 0
/// ```
///
/// with `Φ = Sym(P_o A_o) − Sym(W H_o) + 2α P_o`.
#[allow(clippy::too_many_arguments)]
pub fn verify_design_lmi(
    decomp: &NodeDecomposition,
    p_o: &Matrix,
    p_u: &Matrix,
    w: &Matrix,
    gamma: f64,
    epsilon: f64,
    alpha: f64,
    g: f64,
) -> Result<Definiteness> {
    numerics::is_negative_definite(&design_lmi_matrix(decomp, p_o, p_u, w, gamma, epsilon, alpha, g)?)
}

#[allow(clippy::too_many_arguments)]
pub fn design_lmi_matrix(
    decomp: &NodeDecomposition,
    p_o: &Matrix,
    p_u: &Matrix,
    w: &Matrix,
    gamma: f64,
    epsilon: f64,
    alpha: f64,
    g: f64,
) -> Result<Matrix> {
    let n = decomp.state_dim();
    let v = decomp.observable_dim;
    let u = n - v;
    if p_o.shape() != (v, v) || p_u.shape() != (u, u) || w.shape() != (v, decomp.h_o.nrows()) {
        return Err(Error::dim("LMI blocks do not match the node decomposition"));
    }
    let phi = numerics::sym(&(p_o * &decomp.a_o)) - numerics::sym(&(w * &decomp.h_o)) + p_o * (2.0 * alpha);
    let mut lmi = Matrix::zeros(n, n);
    lmi.view_mut((0, 0), (v, v))
        .copy_from(&(phi + Matrix::identity(v, v) * (gamma * g)));
    let lower = p_u * &decomp.a_r;
    lmi.view_mut((v, 0), (u, v)).copy_from(&lower);
    lmi.view_mut((0, v), (v, u)).copy_from(&lower.transpose());
    lmi.view_mut((v, v), (u, u))
        .copy_from(&(numerics::sym(&(p_u * &decomp.a_u)) + p_u * (2.0 * alpha)));
    Ok(lmi - Matrix::identity(n, n) * (gamma * epsilon))
}

/// Everything the design pipeline computed along the way.
#[derive(Debug, Clone)]
pub struct Synthesis {
    pub design: ObserverDesign,
    pub decomps: Vec<NodeDecomposition>,
    pub balanced: BalancedStructure,
    pub epsilon: Epsilon,
    /// `λ_max` of each node's block inequality (all negative).
    pub lmi_margins: Vec<f64>,
}

pub fn synthesize(model: &SystemModel, graph: &Digraph, params: &SynthesisParams) -> Result<Synthesis> {
    let big_n = model.node_count();
    if graph.node_count() != big_n {
        return Err(Error::dim(format!(
            "graph has {} nodes but the system has {big_n} output blocks",
            graph.node_count()
        )));
    }
    params.validate(big_n)?;
    if !graph.is_strongly_connected() {
        return Err(Error::Precondition(
            "standing assumption violated: the communication graph is not strongly connected".into(),
        ));
    }
    let n = model.state_dim();
    let tol = params.rank_tol;
    let decomps = decomp::decompose_all(model, tol)?;
    let joint = decomp::joint_observability_rank(model, Some(&decomps), tol)?;
    if joint != n {
        return Err(Error::Precondition(format!(
            "standing assumption violated: (H, A) is not observable (rank {joint} < n = {n})"
        )));
    }
    let balanced = graph.balance()?;
    let g = params.weights(big_n);
    let alpha = params.alpha;
    let epsilon = compute_epsilon(&decomps, &balanced, &g, params.margins.epsilon_shrink)?;
    let gamma = select_gamma(&decomps, epsilon.value, alpha, params.margins.gamma_inflation)?;

    let mut l_os = Vec::with_capacity(big_n);
    let mut p_os = Vec::with_capacity(big_n);
    for d in &decomps {
        let l_o = place_observer_poles(&d.a_o, &d.h_o, alpha)?;
        let p_o = solve_design_lyapunov(&d.a_o, &l_o, &d.h_o, alpha, gamma)?;
        l_os.push(l_o);
        p_os.push(p_o);
    }
    let design = assemble_gains(&decomps, &l_os, &p_os, gamma, epsilon.value, &balanced.r, alpha)?;

    let mut lmi_margins = Vec::with_capacity(big_n);
    for (i, d) in decomps.iter().enumerate() {
        let u = d.unobservable_dim();
        let w = &p_os[i] * &l_os[i];
        let verdict = verify_design_lmi(d, &p_os[i], &Matrix::identity(u, u), &w, gamma, epsilon.value, alpha, g[i])?;
        if !verdict.holds {
            return Err(Error::numerical(format!(
                "node {i}: design LMI not satisfied (λ_max = {:.3e})",
                verdict.margin
            )));
        }
        lmi_margins.push(verdict.margin);
    }
    Ok(Synthesis {
        design,
        decomps,
        balanced,
        epsilon,
        lmi_margins,
    })
}
