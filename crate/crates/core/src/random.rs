//! Seeded generators for random graphs and plants, used by the property
//! tests, the acceptance suite and the benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::decomp::{self, SystemModel};
use crate::graph::{Digraph, Edge};
use crate::numerics::{Matrix, RankTolerance};

/// A plant with its communication graph.
#[derive(Debug, Clone)]
pub struct Instance {
    pub model: SystemModel,
    pub graph: Digraph,
}

/// Strongly connected digraph: a random Hamiltonian cycle plus each other
/// ordered pair with probability `extra_prob`. Weights are uniform in
/// `weights`.
pub fn strongly_connected_digraph<R: Rng>(rng: &mut R, nodes: usize, weights: (f64, f64), extra_prob: f64) -> Digraph {
    let mut order: Vec<usize> = (0..nodes).collect();
    order.shuffle(rng);
    let mut present = vec![vec![false; nodes]; nodes];
    let mut edges = Vec::new();
    if nodes > 1 {
        for k in 0..nodes {
            let (from, to) = (order[k], order[(k + 1) % nodes]);
            if !present[from][to] {
                present[from][to] = true;
                edges.push(Edge::new(from, to, rng.random_range(weights.0..=weights.1)));
            }
        }
    }
    for from in 0..nodes {
        for to in 0..nodes {
            if from != to && !present[from][to] && rng.random_bool(extra_prob) {
                present[from][to] = true;
                edges.push(Edge::new(from, to, rng.random_range(weights.0..=weights.1)));
            }
        }
    }
    Digraph::from_edges(nodes, &edges).expect("generated edges are valid")
}

/// Connected undirected graph: random spanning tree plus extra pairs.
pub fn connected_undirected_graph<R: Rng>(rng: &mut R, nodes: usize, weights: (f64, f64), extra_prob: f64) -> Digraph {
    let mut order: Vec<usize> = (0..nodes).collect();
    order.shuffle(rng);
    let mut present = vec![vec![false; nodes]; nodes];
    let mut pairs = Vec::new();
    for k in 1..nodes {
        let parent = order[rng.random_range(0..k)];
        let child = order[k];
        present[parent][child] = true;
        present[child][parent] = true;
        pairs.push((parent, child, rng.random_range(weights.0..=weights.1)));
    }
    for i in 0..nodes {
        for j in (i + 1)..nodes {
            if !present[i][j] && rng.random_bool(extra_prob) {
                pairs.push((i, j, rng.random_range(weights.0..=weights.1)));
            }
        }
    }
    Digraph::undirected(nodes, &pairs).expect("generated pairs are valid")
}

/// Random plant with block lower-triangular structure over a random grouping
/// of the coordinates, so that nodes measuring an early group cannot see the
/// later ones. Entries of `A` are uniform in [−1, 1]; each node measures one
/// or two random combinations of one group's coordinates.
///
/// The result is not necessarily jointly observable.
pub fn structured_model<R: Rng>(rng: &mut R, n: usize, nodes: usize) -> SystemModel {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let groups = rng.random_range(1..=n.min(3));
    // group[k] of coordinate perm[k], nondecreasing with at least one member each
    let mut cuts: Vec<usize> = (1..n).collect();
    cuts.shuffle(rng);
    let mut cuts: Vec<usize> = cuts.into_iter().take(groups - 1).collect();
    cuts.sort_unstable();
    let mut group_of = vec![0usize; n];
    for (k, &coord) in perm.iter().enumerate() {
        group_of[coord] = cuts.iter().filter(|&&c| c <= k).count();
    }
    let a = Matrix::from_fn(n, n, |i, j| {
        if group_of[j] <= group_of[i] {
            rng.random_range(-1.0..=1.0)
        } else {
            0.0
        }
    });
    let outputs = (0..nodes)
        .map(|_| {
            let g = rng.random_range(0..groups);
            let p = rng.random_range(1..=2);
            Matrix::from_fn(p, n, |_, j| {
                if group_of[j] == g {
                    rng.random_range(-1.0..=1.0)
                } else {
                    0.0
                }
            })
        })
        .collect();
    SystemModel::new(a, outputs).expect("generated model is valid")
}

/// Dense random plant whose measurements are split across the nodes: `A`
/// has entries uniform in [−1, 1], a random `p × n` output matrix with
/// `1 ≤ p ≤ n` has its rows dealt to uniformly random nodes, and a node that
/// receives no row gets a single zero row.
pub fn partitioned_output_model<R: Rng>(rng: &mut R, n: usize, nodes: usize) -> SystemModel {
    let a = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..=1.0));
    let p = rng.random_range(1..=n);
    let mut rows: Vec<Vec<Vec<f64>>> = vec![Vec::new(); nodes];
    for _ in 0..p {
        let row = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        rows[rng.random_range(0..nodes)].push(row);
    }
    let outputs = rows
        .into_iter()
        .map(|r| {
            if r.is_empty() {
                Matrix::zeros(1, n)
            } else {
                Matrix::from_fn(r.len(), n, |i, j| r[i][j])
            }
        })
        .collect();
    SystemModel::new(a, outputs).expect("generated model is valid")
}

/// Which plant generator an instance is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelFamily {
    /// [`partitioned_output_model`].
    PartitionedOutputs,
    /// [`structured_model`].
    Cascade,
}

impl ModelFamily {
    pub fn sample<R: Rng>(self, rng: &mut R, n: usize, nodes: usize) -> SystemModel {
        match self {
            Self::PartitionedOutputs => partitioned_output_model(rng, n, nodes),
            Self::Cascade => structured_model(rng, n, nodes),
        }
    }
}

/// Random strongly connected instance with `n` and the node count drawn
/// from the given inclusive ranges. Retries until `(H, A)` is observable.
pub fn jointly_observable_instance<R: Rng>(
    rng: &mut R,
    family: ModelFamily,
    n_range: (usize, usize),
    node_range: (usize, usize),
    weights: (f64, f64),
) -> Instance {
    let tol = RankTolerance::default();
    loop {
        let n = rng.random_range(n_range.0..=n_range.1);
        let nodes = rng.random_range(node_range.0..=node_range.1);
        let model = family.sample(rng, n, nodes);
        let rank = decomp::joint_observability_rank(&model, None, tol).expect("rank of a valid model");
        if rank == n {
            let graph = strongly_connected_digraph(rng, nodes, weights, 0.3);
            return Instance { model, graph };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn digraphs_are_strongly_connected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for nodes in 1..8 {
            let g = strongly_connected_digraph(&mut rng, nodes, (0.5, 2.0), 0.2);
            assert!(g.is_strongly_connected());
            assert!(g.adjacency().iter().all(|&w| w == 0.0 || (0.5..=2.0).contains(&w)));
        }
    }

    #[test]
    fn undirected_graphs_are_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = connected_undirected_graph(&mut rng, 6, (0.5, 2.0), 0.3);
        assert!(g.is_undirected() && g.is_strongly_connected());
    }

    #[test]
    fn structured_models_include_blind_nodes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tol = RankTolerance::default();
        let mut partial = 0;
        for _ in 0..50 {
            let inst = jointly_observable_instance(&mut rng, ModelFamily::Cascade, (2, 6), (2, 5), (0.5, 2.0));
            let decomps = decomp::decompose_all(&inst.model, tol).unwrap();
            partial += decomps.iter().filter(|d| !d.is_fully_observable()).count();
        }
        assert!(partial > 10, "only {partial} partially observable nodes");
    }

    #[test]
    fn partitioned_outputs_cover_every_node() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let model = partitioned_output_model(&mut rng, 4, 3);
            assert_eq!(model.node_count(), 3);
            assert!(model.outputs().iter().all(|h| h.ncols() == 4 && h.nrows() >= 1));
            let measured: usize = model.outputs().iter().filter(|h| h.amax() > 0.0).map(|h| h.nrows()).sum();
            assert!((1..=4).contains(&measured));
        }
    }
}
