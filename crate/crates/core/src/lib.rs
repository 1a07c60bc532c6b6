//! Synthesis, certification and simulation of distributed Luenberger
//! observers over strongly connected weighted digraphs.
//!
//! Each node `i` runs
//!
//! ```text
//! x̂̇_i = A x̂_i + L_i (y_i − H_i x̂_i) + γ r_i M_i Σ_j a_ij (x̂_j − x̂_i)
//! ```
//!
//! and only sees its own output block `y_i = H_i x`. [`synth::synthesize`]
//! builds `L_i`, `M_i` and `γ` for a prescribed decay rate, [`verify`]
//! certifies a design independently and [`sim`] integrates the network.

// Negated float comparisons deliberately treat NaN as failing the test.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod decomp;
pub mod error;
pub mod graph;
pub mod numerics;
pub mod random;
pub mod sim;
pub mod synth;
pub mod verify;

pub use decomp::{NodeDecomposition, SystemModel};
pub use error::{Error, Result};
pub use graph::{BalancedStructure, Digraph, Edge};
pub use numerics::{Matrix, RankTolerance, Vector};
pub use sim::{InitialState, SimulationConfig, SimulationTrace};
pub use synth::{Margins, NodeGains, ObserverDesign, Synthesis, SynthesisParams};
pub use verify::{Certification, GlobalErrorSystem};
