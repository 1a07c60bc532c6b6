//! Weighted communication digraph, its Laplacian, and the balance weights
//! that turn it into a symmetric "mirror" Laplacian.
//!
//! Indexing follows the adjacency convention `a[(j, i)]` = weight of the
//! edge `i -> j` (information flows from `i` to `j`), so row `j` of the
//! adjacency lists what node `j` receives.

use log::warn;

use crate::error::{Error, Result};
use crate::numerics::{self, Matrix, Vector};

/// A directed edge `from -> to` carrying `weight`. Node indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

impl Edge {
    pub fn new(from: usize, to: usize, weight: f64) -> Self {
        Self { from, to, weight }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Digraph {
    adjacency: Matrix,
}

impl Digraph {
    pub fn from_adjacency(adjacency: Matrix) -> Result<Self> {
        if !adjacency.is_square() {
            return Err(Error::dim(format!(
                "adjacency must be square, got {}x{}",
                adjacency.nrows(),
                adjacency.ncols()
            )));
        }
        if adjacency.nrows() == 0 {
            return Err(Error::InvalidInput("graph must have at least one node".into()));
        }
        numerics::ensure_finite(&adjacency, "adjacency")?;
        for i in 0..adjacency.nrows() {
            if adjacency[(i, i)] != 0.0 {
                return Err(Error::InvalidInput(format!("self loop at node {i}")));
            }
        }
        if let Some(w) = adjacency.iter().find(|&&w| w < 0.0) {
            return Err(Error::InvalidInput(format!("negative edge weight {w}")));
        }
        Ok(Self { adjacency })
    }

    /// Builds the graph from an edge list; edge `from -> to` lands in
    /// `adjacency[(to, from)]`.
    pub fn from_edges(node_count: usize, edges: &[Edge]) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidInput("graph must have at least one node".into()));
        }
        let mut adjacency = Matrix::zeros(node_count, node_count);
        for e in edges {
            if e.from >= node_count || e.to >= node_count {
                return Err(Error::InvalidInput(format!(
                    "edge {} -> {} references a node outside [0, {node_count})",
                    e.from, e.to
                )));
            }
            if e.from == e.to {
                return Err(Error::InvalidInput(format!("self loop at node {}", e.from)));
            }
            if !(e.weight.is_finite() && e.weight > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "edge {} -> {} has non-positive weight {}",
                    e.from, e.to, e.weight
                )));
            }
            if adjacency[(e.to, e.from)] != 0.0 {
                return Err(Error::InvalidInput(format!("duplicate edge {} -> {}", e.from, e.to)));
            }
            adjacency[(e.to, e.from)] = e.weight;
        }
        Self::from_adjacency(adjacency)
    }

    /// Undirected graph: every listed pair gets edges in both directions
    /// with the same weight.
    pub fn undirected(node_count: usize, pairs: &[(usize, usize, f64)]) -> Result<Self> {
        let edges: Vec<Edge> = pairs
            .iter()
            .flat_map(|&(i, j, w)| [Edge::new(i, j, w), Edge::new(j, i, w)])
            .collect();
        Self::from_edges(node_count, &edges)
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &Matrix {
        &self.adjacency
    }

    /// Edges in `from -> to` form, ordered by `(to, from)`.
    pub fn edges(&self) -> Vec<Edge> {
        let n = self.node_count();
        let mut out = Vec::new();
        for to in 0..n {
            for from in 0..n {
                let w = self.adjacency[(to, from)];
                if w != 0.0 {
                    out.push(Edge::new(from, to, w));
                }
            }
        }
        out
    }

    pub fn is_undirected(&self) -> bool {
        self.adjacency == self.adjacency.transpose()
    }

    /// `L = D - A` with `d_i = Σ_j a_ij`.
    pub fn laplacian(&self) -> Matrix {
        let n = self.node_count();
        let mut l = -self.adjacency.clone();
        for i in 0..n {
            let row_sum: f64 = (0..n).filter(|&j| j != i).map(|j| self.adjacency[(i, j)]).sum();
            l[(i, i)] = row_sum;
        }
        l
    }

    /// Strongly connected components (Tarjan), each sorted ascending.
    pub fn strongly_connected_components(&self) -> Vec<Vec<usize>> {
        let n = self.node_count();
        let successors: Vec<Vec<usize>> = (0..n)
            .map(|i| (0..n).filter(|&j| self.adjacency[(j, i)] != 0.0).collect())
            .collect();
        tarjan_scc(&successors)
    }

    pub fn is_strongly_connected(&self) -> bool {
        self.strongly_connected_components().len() == 1
    }

    /// Balance weights and mirror Laplacian of a strongly connected graph.
    pub fn balance(&self) -> Result<BalancedStructure> {
        let components = self.strongly_connected_components();
        if components.len() != 1 {
            return Err(Error::Precondition(format!(
                "communication graph is not strongly connected ({} components: {:?})",
                components.len(),
                components
            )));
        }
        let n = self.node_count();
        let laplacian = self.laplacian();

        // Left null vector of L = right null vector of Lᵀ.
        let dec = numerics::svd(&laplacian.transpose())?;
        let mut r: Vector = dec.v.column(n - 1).into_owned();
        let total = r.sum();
        if total == 0.0 {
            return Err(Error::numerical("null vector of Lᵀ sums to zero"));
        }
        r *= n as f64 / total;
        if let Some((i, &ri)) = r.iter().enumerate().find(|(_, &x)| !(x > 0.0)) {
            return Err(Error::numerical(format!(
                "balance weight r[{i}] = {ri:.3e} is not positive"
            )));
        }

        let l_norm = laplacian.norm();
        let residual = (r.transpose() * &laplacian).norm();
        if residual > 1e-10 * l_norm.max(f64::MIN_POSITIVE) && residual > 0.0 {
            return Err(Error::numerical(format!(
                "‖rL‖ = {residual:.3e} exceeds 1e-10·‖L‖ = {:.3e}",
                1e-10 * l_norm
            )));
        }

        let r_matrix = Matrix::from_diagonal(&r);
        let rl = &r_matrix * &laplacian;
        let mirror = &rl + rl.transpose();
        let spectrum = numerics::symmetric_eigenvalues(&mirror)?;
        let zero_tol = 1e-10 * mirror.norm().max(1.0);
        if spectrum[0] < -zero_tol {
            return Err(Error::numerical(format!(
                "mirror Laplacian has negative eigenvalue {:.3e}",
                spectrum[0]
            )));
        }
        let zeros = spectrum.iter().filter(|x| x.abs() <= zero_tol).count();
        if zeros != 1 {
            return Err(Error::numerical(format!(
                "mirror Laplacian has {zeros} zero eigenvalues, expected exactly one"
            )));
        }
        let lambda2 = spectrum.get(1).copied();
        if let Some(l2) = lambda2 {
            if l2 < 1e-8 {
                warn!("mirror Laplacian λ₂ = {l2:.3e} is tiny; the graph is nearly reducible");
            }
        }
        Ok(BalancedStructure {
            laplacian,
            r,
            r_matrix,
            mirror,
            spectrum,
            lambda2,
        })
    }
}

/// Balance weights `r` (positive, `r·1 = N`, `rL = 0`) and the mirror
/// Laplacian `L̂ = RL + LᵀR`.
#[derive(Debug, Clone, PartialEq)]
pub struct BalancedStructure {
    pub laplacian: Matrix,
    pub r: Vector,
    pub r_matrix: Matrix,
    pub mirror: Matrix,
    /// Ascending eigenvalues of the mirror Laplacian.
    pub spectrum: Vec<f64>,
    /// Second-smallest eigenvalue of the mirror Laplacian; `None` for a
    /// single-node graph.
    pub lambda2: Option<f64>,
}

impl BalancedStructure {
    pub fn node_count(&self) -> usize {
        self.r.len()
    }
}

/// Iterative Tarjan SCC over successor lists.
fn tarjan_scc(successors: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = successors.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut components = Vec::new();
    let mut counter = 0;

    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        // (node, next successor position)
        let mut work = vec![(root, 0usize)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&(v, pos)) = work.last() {
            if let Some(&w) = successors[v].get(pos) {
                if let Some(top) = work.last_mut() {
                    top.1 += 1;
                }
                if index[w] == usize::MAX {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    work.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            work.pop();
            if let Some(&(parent, _)) = work.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("Tarjan stack underflow");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                components.push(comp);
            }
        }
    }
    components
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle3() -> Digraph {
        Digraph::from_edges(3, &[Edge::new(0, 1, 1.0), Edge::new(1, 2, 1.0), Edge::new(2, 0, 1.0)]).unwrap()
    }

    fn two_node() -> Digraph {
        Digraph::from_edges(2, &[Edge::new(0, 1, 1.0), Edge::new(1, 0, 2.0)]).unwrap()
    }

    #[test]
    fn laplacian_of_cycle() {
        let l = cycle3().laplacian();
        let expected = Matrix::from_row_slice(3, 3, &[1.0, 0.0, -1.0, -1.0, 1.0, 0.0, 0.0, -1.0, 1.0]);
        assert_eq!(l, expected);
    }

    #[test]
    fn laplacian_of_empty_graph() {
        let g = Digraph::from_edges(3, &[]).unwrap();
        assert_eq!(g.laplacian(), Matrix::zeros(3, 3));
    }

    #[test]
    fn laplacian_of_two_node_graph() {
        let l = two_node().laplacian();
        assert_eq!(l, Matrix::from_row_slice(2, 2, &[2.0, -2.0, -1.0, 1.0]));
    }

    #[test]
    fn strong_connectivity_examples() {
        assert!(cycle3().is_strongly_connected());
        let chain = Digraph::from_edges(3, &[Edge::new(0, 1, 1.0), Edge::new(1, 2, 1.0)]).unwrap();
        assert!(!chain.is_strongly_connected());
        assert_eq!(chain.strongly_connected_components().len(), 3);
        assert!(Digraph::from_edges(1, &[]).unwrap().is_strongly_connected());
    }

    #[test]
    fn balance_cycle() {
        let b = cycle3().balance().unwrap();
        assert!((&b.r - Vector::from_element(3, 1.0)).amax() < 1e-12);
        let expected = Matrix::from_row_slice(3, 3, &[2.0, -1.0, -1.0, -1.0, 2.0, -1.0, -1.0, -1.0, 2.0]);
        assert!((&b.mirror - expected).amax() < 1e-12);
        assert!((b.lambda2.unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn balance_two_node() {
        let b = two_node().balance().unwrap();
        assert!((b.r[0] - 2.0 / 3.0).abs() < 1e-12 && (b.r[1] - 4.0 / 3.0).abs() < 1e-12);
        let e = 8.0 / 3.0;
        assert!((&b.mirror - Matrix::from_row_slice(2, 2, &[e, -e, -e, e])).amax() < 1e-12);
        assert!((b.lambda2.unwrap() - 16.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn balance_undirected_path_is_uniform() {
        let g = Digraph::undirected(4, &[(0, 1, 0.7), (1, 2, 1.9), (2, 3, 0.5)]).unwrap();
        let b = g.balance().unwrap();
        assert!((&b.r - Vector::from_element(4, 1.0)).amax() < 1e-10);
    }

    #[test]
    fn balance_requires_strong_connectivity() {
        let chain = Digraph::from_edges(3, &[Edge::new(0, 1, 1.0), Edge::new(1, 2, 1.0)]).unwrap();
        assert!(matches!(chain.balance(), Err(Error::Precondition(_))));
    }

    #[test]
    fn balance_single_node() {
        let b = Digraph::from_edges(1, &[]).unwrap().balance().unwrap();
        assert_eq!(b.r.as_slice(), &[1.0]);
        assert_eq!(b.lambda2, None);
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(Digraph::from_edges(2, &[Edge::new(0, 2, 1.0)]).is_err());
        assert!(Digraph::from_edges(2, &[Edge::new(0, 0, 1.0)]).is_err());
        assert!(Digraph::from_edges(2, &[Edge::new(0, 1, 0.0)]).is_err());
        assert!(Digraph::from_edges(2, &[Edge::new(0, 1, 1.0), Edge::new(0, 1, 2.0)]).is_err());
    }

    #[test]
    fn edges_round_trip() {
        let g = two_node();
        assert_eq!(Digraph::from_edges(2, &g.edges()).unwrap(), g);
    }
}
