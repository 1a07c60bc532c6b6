//! Plant model and per-node observability decomposition.
//!
//! For each node the orthogonal transform `T = [T1 T2]` has `im T2 = ker O`
//! (the unobservable subspace of `(H_i, A)`) and `im T1` its orthogonal
//! complement, so that
//!
//! ```text
//! Tᵀ A T = [A_o  0 ]      H_i T = [H_o  0]
//!          [A_r  A_u]
//! ```

use log::warn;

use crate::error::{Error, Result};
use crate::numerics::{self, Matrix, RankTolerance};

/// Plant `ẋ = Ax` with stacked output `y = Hx` split into per-node blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    a: Matrix,
    outputs: Vec<Matrix>,
}

impl SystemModel {
    pub fn new(a: Matrix, outputs: Vec<Matrix>) -> Result<Self> {
        if !a.is_square() || a.nrows() == 0 {
            return Err(Error::dim(format!(
                "A must be square and non-empty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        numerics::ensure_finite(&a, "A")?;
        if outputs.is_empty() {
            return Err(Error::InvalidInput("at least one node output is required".into()));
        }
        let n = a.nrows();
        for (i, h) in outputs.iter().enumerate() {
            if h.ncols() != n {
                return Err(Error::dim(format!(
                    "H_{i} has {} columns, expected n = {n}",
                    h.ncols()
                )));
            }
            numerics::ensure_finite(h, &format!("H_{i}"))?;
        }
        Ok(Self { a, outputs })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn node_count(&self) -> usize {
        self.outputs.len()
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn outputs(&self) -> &[Matrix] {
        &self.outputs
    }

    pub fn output(&self, node: usize) -> &Matrix {
        &self.outputs[node]
    }

    pub fn output_dims(&self) -> Vec<usize> {
        self.outputs.iter().map(|h| h.nrows()).collect()
    }

    /// `H = col(H_1, …, H_N)`.
    pub fn stacked_output(&self) -> Matrix {
        stack_rows(&self.outputs, self.state_dim())
    }
}

fn stack_rows(blocks: &[Matrix], cols: usize) -> Matrix {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), (b.nrows(), cols)).copy_from(b);
        r += b.nrows();
    }
    out
}

/// Observability decomposition of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeDecomposition {
    /// Dimension of the observable subspace.
    pub observable_dim: usize,
    /// Orthogonal `T = [T1 T2]`.
    pub transform: Matrix,
    pub a_o: Matrix,
    pub a_r: Matrix,
    pub a_u: Matrix,
    pub h_o: Matrix,
}

impl NodeDecomposition {
    pub fn state_dim(&self) -> usize {
        self.transform.nrows()
    }

    pub fn unobservable_dim(&self) -> usize {
        self.state_dim() - self.observable_dim
    }

    pub fn is_fully_observable(&self) -> bool {
        self.observable_dim == self.state_dim()
    }

    /// Basis of the observable subspace (`T1`).
    pub fn observable_basis(&self) -> Matrix {
        self.transform.columns(0, self.observable_dim).into_owned()
    }

    /// Basis of the unobservable subspace (`T2`).
    pub fn unobservable_basis(&self) -> Matrix {
        self.transform
            .columns(self.observable_dim, self.unobservable_dim())
            .into_owned()
    }
}

/// `O = col(H, HA, …, HA^{n-1})`.
pub fn observability_matrix(h: &Matrix, a: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    if !a.is_square() {
        return Err(Error::dim("A must be square"));
    }
    if h.ncols() != n {
        return Err(Error::dim(format!(
            "H has {} columns but A is {n}x{n}",
            h.ncols()
        )));
    }
    let a_norm = a.norm();
    if a_norm > 1e3 {
        warn!("‖A‖ = {a_norm:.3e}; the observability matrix may be badly conditioned");
    }
    let p = h.nrows();
    let mut o = Matrix::zeros(n * p, n);
    let mut power = h.clone();
    for k in 0..n {
        o.view_mut((k * p, 0), (p, n)).copy_from(&power);
        power = &power * a;
    }
    Ok(o)
}

/// Builds the orthogonal observability decomposition of `(h, a)` and checks
/// its structural invariants.
pub fn decompose_node(h: &Matrix, a: &Matrix, tol: RankTolerance) -> Result<NodeDecomposition> {
    let n = a.nrows();
    let o = observability_matrix(h, a)?;
    let (t1, t2) = numerics::orthonormal_row_space_basis(&o, tol)?;
    let v = t1.ncols();
    let mut transform = Matrix::zeros(n, n);
    transform.columns_mut(0, v).copy_from(&t1);
    transform.columns_mut(v, n - v).copy_from(&t2);

    let at = transform.transpose() * a * &transform;
    let ht = h * &transform;
    let dec = NodeDecomposition {
        observable_dim: v,
        a_o: at.view((0, 0), (v, v)).into_owned(),
        a_r: at.view((v, 0), (n - v, v)).into_owned(),
        a_u: at.view((v, v), (n - v, n - v)).into_owned(),
        h_o: ht.columns(0, v).into_owned(),
        transform,
    };

    let orth = (dec.transform.transpose() * &dec.transform - Matrix::identity(n, n)).amax();
    let a_upper = at.view((0, v), (v, n - v)).norm();
    let h_right = ht.columns(v, n - v).norm();
    let a_scale = 1e-8 * a.norm();
    let h_scale = 1e-8 * h.norm();
    let mut problems = Vec::new();
    if orth > 1e-10 {
        problems.push(format!("‖TᵀT − I‖_max = {orth:.3e}"));
    }
    if a_upper > a_scale {
        problems.push(format!("‖T1ᵀ A T2‖ = {a_upper:.3e} > {a_scale:.3e}"));
    }
    if h_right > h_scale {
        problems.push(format!("‖H T2‖ = {h_right:.3e} > {h_scale:.3e}"));
    }
    if v > 0 {
        let obs_rank = numerics::rank(&observability_matrix(&dec.h_o, &dec.a_o)?, tol)?;
        if obs_rank != v {
            problems.push(format!(
                "(H_o, A_o) observability rank {obs_rank} differs from v = {v}"
            ));
        }
    }
    if !problems.is_empty() {
        return Err(Error::numerical(format!(
            "observability decomposition residuals: {}",
            problems.join("; ")
        )));
    }
    Ok(dec)
}

pub fn decompose_all(model: &SystemModel, tol: RankTolerance) -> Result<Vec<NodeDecomposition>> {
    model
        .outputs()
        .iter()
        .map(|h| decompose_node(h, model.a(), tol))
        .collect()
}

/// Rank of `[T_11 … T_N1]`, the span of all observable subspaces.
pub fn observable_span_rank(decomps: &[NodeDecomposition], tol: RankTolerance) -> Result<usize> {
    let n = match decomps.first() {
        Some(d) => d.state_dim(),
        None => return Ok(0),
    };
    let bases: Vec<Matrix> = decomps.iter().map(|d| d.observable_basis()).collect();
    let cols = bases.iter().map(|b| b.ncols()).sum();
    let mut joined = Matrix::zeros(n, cols);
    let mut c = 0;
    for b in &bases {
        joined.columns_mut(c, b.ncols()).copy_from(b);
        c += b.ncols();
    }
    numerics::rank(&joined, tol)
}

/// Rank of `col(O_1, …, O_N)`; `(H, A)` is observable iff this equals `n`.
///
/// When decompositions are supplied, the rank of `[T_11 … T_N1]` is computed
/// as well and the two full-rank verdicts must agree.
pub fn joint_observability_rank(
    model: &SystemModel,
    decomps: Option<&[NodeDecomposition]>,
    tol: RankTolerance,
) -> Result<usize> {
    let n = model.state_dim();
    let blocks = model
        .outputs()
        .iter()
        .map(|h| observability_matrix(h, model.a()))
        .collect::<Result<Vec<_>>>()?;
    let rank = numerics::rank(&stack_rows(&blocks, n), tol)?;
    if let Some(decomps) = decomps {
        let span = observable_span_rank(decomps, tol)?;
        if (span == n) != (rank == n) {
            return Err(Error::numerical(format!(
                "joint observability rank {rank} and observable-span rank {span} disagree (n = {n})"
            )));
        }
    }
    Ok(rank)
}
