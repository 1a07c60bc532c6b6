#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use observer_kit_cli::files::{rows_from_matrix, ConfigDocument, EdgeSection, GraphSection, OutputSection, ParamsSection, SystemSection};
use observer_kit_core::random::Instance;
use serde_json::{json, Value};
use tempfile::TempDir;

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_observer-kit"))
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Run {
    pub fn json(&self) -> Value {
        serde_json::from_str(&self.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", self.stdout))
    }
}

fn finish(out: Output) -> Run {
    Run {
        code: out.status.code().expect("process exited normally"),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

pub fn run(args: &[&str]) -> Run {
    finish(bin().args(args).output().expect("binary runs"))
}

pub fn run_paths(cmd: &str, paths: &[&Path], extra: &[&str]) -> Run {
    let mut c = bin();
    c.arg(cmd);
    for p in paths {
        c.arg(p);
    }
    c.args(extra);
    finish(c.output().expect("binary runs"))
}

pub struct Workspace {
    pub dir: TempDir,
}

impl Workspace {
    pub fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn write(&self, name: &str, contents: &str) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, contents).unwrap();
        p
    }

    pub fn write_json(&self, name: &str, value: &Value) -> PathBuf {
        self.write(name, &serde_json::to_string_pretty(value).unwrap())
    }
}

/// Scalar unstable plant seen by node 0 only, on a two-cycle.
pub fn scalar_pair() -> Value {
    json!({
        "system": {"n": 1, "A": [[0.5]], "outputs": [{"H": [[1.0]]}, {"H": [[0.0]]}]},
        "graph": {"N": 2, "edges": [{"from": 0, "to": 1, "weight": 1.0}, {"from": 1, "to": 0, "weight": 1.0}]},
        "params": {"alpha": 1.0, "seed": 7, "sim": {"t_final": 10.0, "dt": 1e-3}}
    })
}

/// Two unstable modes, each visible to exactly one node.
pub fn split_modes() -> Value {
    json!({
        "system": {"n": 2, "A": [[1.0, 0.0], [0.0, 2.0]], "outputs": [{"H": [[1.0, 0.0]]}, {"H": [[0.0, 1.0]]}]},
        "graph": {"N": 2, "edges": [{"from": 0, "to": 1, "weight": 1.0}, {"from": 1, "to": 0, "weight": 1.0}]},
        "params": {"alpha": 1.0, "seed": 11, "sim": {"t_final": 10.0, "dt": 1e-3, "fit_window": [2.0, 8.0]}}
    })
}

/// Three nodes on a directed path; not strongly connected.
pub fn chain() -> Value {
    json!({
        "system": {"n": 1, "A": [[0.5]], "outputs": [{"H": [[1.0]]}, {"H": [[1.0]]}, {"H": [[1.0]]}]},
        "graph": {"N": 3, "edges": [{"from": 0, "to": 1, "weight": 1.0}, {"from": 1, "to": 2, "weight": 1.0}]},
        "params": {"alpha": 1.0}
    })
}

/// The second mode is invisible to every node.
pub fn jointly_unobservable() -> Value {
    json!({
        "system": {"n": 2, "A": [[1.0, 0.0], [0.0, 2.0]], "outputs": [{"H": [[1.0, 0.0]]}, {"H": [[1.0, 0.0]]}]},
        "graph": {"N": 2, "edges": [{"from": 0, "to": 1, "weight": 1.0}, {"from": 1, "to": 0, "weight": 1.0}]},
        "params": {"alpha": 1.0}
    })
}

pub fn config_for(inst: &Instance, alpha: f64, seed: u64) -> ConfigDocument {
    let model = &inst.model;
    ConfigDocument {
        system: SystemSection {
            n: model.state_dim(),
            a: rows_from_matrix(model.a()),
            outputs: model.outputs().iter().map(|h| OutputSection { h: rows_from_matrix(h) }).collect(),
        },
        graph: GraphSection {
            nodes: inst.graph.node_count(),
            edges: inst
                .graph
                .edges()
                .iter()
                .map(|e| EdgeSection {
                    from: e.from,
                    to: e.to,
                    weight: e.weight,
                })
                .collect(),
        },
        params: ParamsSection {
            alpha,
            g: None,
            margins: None,
            rank_tolerance: None,
            sim: None,
            seed: Some(seed),
        },
    }
}
