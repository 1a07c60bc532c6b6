//! On-disk formats: the JSON configuration, the JSON design file, and
//! conversions to and from the core types. Matrices are row-major nested
//! arrays; node indices are 0-based.

use std::fs;
use std::path::Path;

use observer_kit_core::numerics::RankTolerance;
use observer_kit_core::sim::{InitialState, SimulationConfig};
use observer_kit_core::synth::{Margins, NodeGains, ObserverDesign, SynthesisParams};
use observer_kit_core::{Digraph, Edge, Matrix, SystemModel, Vector};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub system: SystemSection,
    pub graph: GraphSection,
    pub params: ParamsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub n: usize,
    #[serde(rename = "A")]
    pub a: Rows,
    pub outputs: Vec<OutputSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(rename = "H")]
    pub h: Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    #[serde(rename = "N")]
    pub nodes: usize,
    pub edges: Vec<EdgeSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSection {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margins: Option<MarginsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginsSection {
    pub epsilon_shrink: f64,
    pub gamma_inflation: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    /// One initial estimate per node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xhat0: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<(f64, f64)>,
}

/// A configuration after validation.
#[derive(Debug, Clone)]
pub struct Problem {
    pub model: SystemModel,
    pub graph: Digraph,
    pub params: SynthesisParams,
    pub sim: SimulationConfig,
}

pub fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<Matrix, CliError> {
    let cols = rows.first().map_or(0, Vec::len);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
        return Err(CliError::Format(format!(
            "{what}: row {i} has {} entries, row 0 has {cols}",
            r.len()
        )));
    }
    Ok(Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub fn rows_from_matrix(m: &Matrix) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn shaped(rows: &[Vec<f64>], shape: (usize, usize), what: &str) -> Result<Matrix, CliError> {
    // An empty list stands for any matrix with a zero dimension.
    if rows.is_empty() && (shape.0 == 0 || shape.1 == 0) {
        return Ok(Matrix::zeros(shape.0, shape.1));
    }
    let m = matrix_from_rows(rows, what)?;
    if m.shape() != shape {
        return Err(CliError::Format(format!(
            "{what} is {}x{}, expected {}x{}",
            m.nrows(),
            m.ncols(),
            shape.0,
            shape.1
        )));
    }
    Ok(m)
}

impl ConfigDocument {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Format(format!("configuration: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn problem(&self) -> Result<Problem, CliError> {
        let n = self.system.n;
        let a = shaped(&self.system.a, (n, n), "A")?;
        if self.graph.nodes != self.system.outputs.len() {
            return Err(CliError::Format(format!(
                "graph has N = {} nodes but the system lists {} outputs",
                self.graph.nodes,
                self.system.outputs.len()
            )));
        }
        let outputs = self
            .system
            .outputs
            .iter()
            .enumerate()
            .map(|(i, o)| {
                if o.h.is_empty() {
                    return Err(CliError::Format(format!(
                        "H_{i} has no rows; use a zero row for a node without measurements"
                    )));
                }
                let h = matrix_from_rows(&o.h, &format!("H_{i}"))?;
                if h.ncols() != n {
                    return Err(CliError::Format(format!("H_{i} has {} columns, expected n = {n}", h.ncols())));
                }
                Ok(h)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let model = SystemModel::new(a, outputs)?;

        let edges: Vec<Edge> = self.graph.edges.iter().map(|e| Edge::new(e.from, e.to, e.weight)).collect();
        let graph = Digraph::from_edges(self.graph.nodes, &edges)?;

        let p = &self.params;
        let mut params = SynthesisParams::new(p.alpha);
        params.g = p.g.clone();
        if let Some(m) = p.margins {
            params.margins = Margins {
                epsilon_shrink: m.epsilon_shrink,
                gamma_inflation: m.gamma_inflation,
            };
        }
        if let Some(tol) = p.rank_tolerance {
            params.rank_tol = RankTolerance::new(tol)?;
        }
        params.validate(self.graph.nodes)?;

        let mut sim = SimulationConfig::default();
        if let Some(seed) = p.seed {
            sim.seed = seed;
        }
        if let Some(s) = &p.sim {
            if let Some(t) = s.t_final {
                sim.t_final = t;
            }
            if let Some(dt) = s.dt {
                sim.dt = dt;
            }
            if let Some(x0) = &s.x0 {
                sim.x0 = InitialState::Explicit(x0.clone());
            }
            if let Some(xhat0) = &s.xhat0 {
                sim.xhat0 = InitialState::Explicit(xhat0.clone());
            }
            if let Some(stride) = s.record_stride {
                sim.record_stride = stride;
            }
            sim.fit_window = s.fit_window;
        }
        sim.validate()?;
        Ok(Problem {
            model,
            graph,
            params,
            sim,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignDocument {
    pub gamma: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub r: Vec<f64>,
    /// Always `"identity"`: the unobservable Lyapunov block is fixed.
    pub p_iu: String,
    pub nodes: Vec<NodeDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDocument {
    pub v: usize,
    #[serde(rename = "L")]
    pub l: Rows,
    #[serde(rename = "M")]
    pub m: Rows,
    #[serde(rename = "M_inv", default, skip_serializing_if = "Option::is_none")]
    pub m_inv: Option<Rows>,
    #[serde(rename = "P_io")]
    pub p_o: Rows,
}

pub const IDENTITY_TAG: &str = "identity";

impl From<&ObserverDesign> for DesignDocument {
    fn from(d: &ObserverDesign) -> Self {
        Self {
            gamma: d.gamma,
            epsilon: d.epsilon,
            alpha: d.alpha,
            r: d.r.iter().copied().collect(),
            p_iu: IDENTITY_TAG.to_owned(),
            nodes: d
                .nodes
                .iter()
                .map(|g| NodeDocument {
                    v: g.observable_dim,
                    l: rows_from_matrix(&g.l),
                    m: rows_from_matrix(&g.m),
                    m_inv: g.m_inv.as_ref().map(rows_from_matrix),
                    p_o: rows_from_matrix(&g.p_o),
                })
                .collect(),
        }
    }
}

impl DesignDocument {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Format(format!("design: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("design serializes")
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        fs::write(path, self.to_json() + "\n").map_err(|e| CliError::io(path, e))
    }

    /// Rebuilds the design, checking every block against the system it is
    /// meant for.
    pub fn design(&self, model: &SystemModel) -> Result<ObserverDesign, CliError> {
        let n = model.state_dim();
        if self.p_iu != IDENTITY_TAG {
            return Err(CliError::Format(format!(
                "p_iu must be \"{IDENTITY_TAG}\", found {:?}",
                self.p_iu
            )));
        }
        if self.nodes.len() != model.node_count() || self.r.len() != model.node_count() {
            return Err(CliError::Format(format!(
                "design has {} nodes and {} balance weights, system has {} nodes",
                self.nodes.len(),
                self.r.len(),
                model.node_count()
            )));
        }
        let nodes = self
            .nodes
            .iter()
            .zip(model.output_dims())
            .enumerate()
            .map(|(i, (node, p))| {
                if node.v > n {
                    return Err(CliError::Format(format!("node {i}: v = {} exceeds n = {n}", node.v)));
                }
                Ok(NodeGains {
                    observable_dim: node.v,
                    l: shaped(&node.l, (n, p), &format!("L_{i}"))?,
                    m: shaped(&node.m, (n, n), &format!("M_{i}"))?,
                    m_inv: node
                        .m_inv
                        .as_ref()
                        .map(|rows| shaped(rows, (n, n), &format!("M_inv_{i}")))
                        .transpose()?,
                    p_o: shaped(&node.p_o, (node.v, node.v), &format!("P_io_{i}"))?,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let design = ObserverDesign {
            gamma: self.gamma,
            epsilon: self.epsilon,
            alpha: self.alpha,
            r: Vector::from_vec(self.r.clone()),
            nodes,
        };
        let finite = [design.gamma, design.epsilon, design.alpha]
            .iter()
            .chain(design.r.iter())
            .all(|x| x.is_finite());
        if !finite {
            return Err(CliError::Format("design has non-finite scalars".into()));
        }
        design.check_dimensions(model)?;
        Ok(design)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCALAR_PAIR: &str = r#"{
        "system": {"n": 1, "A": [[0.5]], "outputs": [{"H": [[1.0]]}, {"H": [[0.0]]}]},
        "graph": {"N": 2, "edges": [{"from": 0, "to": 1, "weight": 1.0}, {"from": 1, "to": 0, "weight": 2.0}]},
        "params": {"alpha": 1.0, "seed": 3, "sim": {"t_final": 2.0, "fit_window": [0.5, 1.5]}}
    }"#;

    #[test]
    fn config_builds_problem() {
        let doc = ConfigDocument::parse(SCALAR_PAIR).unwrap();
        let p = doc.problem().unwrap();
        assert_eq!(p.model.state_dim(), 1);
        assert_eq!(p.graph.node_count(), 2);
        // Edge (from 1, to 0) lands at adjacency[(0, 1)].
        assert_eq!(p.graph.adjacency()[(0, 1)], 2.0);
        assert_eq!(p.sim.seed, 3);
        assert_eq!(p.sim.fit_window, Some((0.5, 1.5)));
        assert_eq!(p.sim.dt, 1e-3);
    }

    #[test]
    fn config_round_trips() {
        let doc = ConfigDocument::parse(SCALAR_PAIR).unwrap();
        assert_eq!(ConfigDocument::parse(&doc.to_json()).unwrap(), doc);
    }

    #[test]
    fn node_count_mismatch_is_rejected() {
        let text = SCALAR_PAIR.replace("\"N\": 2", "\"N\": 3");
        let err = ConfigDocument::parse(&text).unwrap().problem().unwrap_err();
        assert!(err.to_string().contains("N = 3"));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = SCALAR_PAIR.replace("\"alpha\"", "\"alhpa\"");
        assert!(ConfigDocument::parse(&text).is_err());
    }

    #[test]
    fn ragged_matrix_is_rejected() {
        let err = matrix_from_rows(&[vec![1.0, 2.0], vec![3.0]], "A").unwrap_err();
        assert!(err.to_string().contains("row 1"));
    }

    #[test]
    fn nonpositive_weight_is_rejected() {
        let text = SCALAR_PAIR.replace("\"weight\": 2.0", "\"weight\": -2.0");
        assert!(ConfigDocument::parse(&text).unwrap().problem().is_err());
    }

    #[test]
    fn design_round_trip_is_bit_exact() {
        let doc = ConfigDocument::parse(SCALAR_PAIR).unwrap();
        let p = doc.problem().unwrap();
        let syn = observer_kit_core::synth::synthesize(&p.model, &p.graph, &p.params).unwrap();
        let file = DesignDocument::from(&syn.design);
        let back = DesignDocument::parse(&file.to_json()).unwrap().design(&p.model).unwrap();
        assert_eq!(back, syn.design);
        for (a, b) in back.nodes.iter().zip(&syn.design.nodes) {
            assert!(a.m.iter().zip(b.m.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn design_for_other_system_is_rejected() {
        let doc = ConfigDocument::parse(SCALAR_PAIR).unwrap();
        let p = doc.problem().unwrap();
        let syn = observer_kit_core::synth::synthesize(&p.model, &p.graph, &p.params).unwrap();
        let file = DesignDocument::from(&syn.design);
        let other = SystemModel::new(Matrix::zeros(2, 2), vec![Matrix::zeros(1, 2); 2]).unwrap();
        assert!(matches!(file.design(&other), Err(CliError::Format(_))));
    }
}
