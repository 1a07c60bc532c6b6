//! Fixed-step simulation of the plant and the network of local observers.
//!
//! The integrator advances the plant state `x` and the estimation errors
//! `e_i = x̂_i − x` rather than the raw estimates: the error dynamics do not
//! depend on `x`, and forming `x̂_i − x` after the fact loses every digit of
//! `e` once it has decayed below the rounding level of `x`. Estimates are
//! reported as `x + e_i`.

use std::io::{self, Write};

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::decomp::SystemModel;
use crate::error::{Error, Result};
use crate::graph::Digraph;
use crate::numerics::{self, Matrix, Vector};
use crate::synth::ObserverDesign;
use crate::verify;

/// How an initial state is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState<T> {
    Explicit(T),
    /// Uniform on [−1, 1] per coordinate, drawn from the config seed.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub t_final: f64,
    pub dt: f64,
    pub x0: InitialState<Vec<f64>>,
    pub xhat0: InitialState<Vec<Vec<f64>>>,
    pub seed: u64,
    /// Steps between recorded samples.
    pub record_stride: usize,
    /// Decay fitting window; defaults to `[0.2, 0.9]·t_final`.
    pub fit_window: Option<(f64, f64)>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            t_final: 10.0,
            dt: 1e-3,
            x0: InitialState::Random,
            xhat0: InitialState::Random,
            seed: 0,
            record_stride: 10,
            fit_window: None,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidInput(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final.is_finite() && self.t_final >= 10.0 * self.dt) {
            return Err(Error::InvalidInput(format!(
                "t_final = {} must be at least 10·dt = {}",
                self.t_final,
                10.0 * self.dt
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidInput("record_stride must be at least 1".into()));
        }
        let (a, b) = self.window();
        if !(0.0 <= a && a < b && b <= self.t_final) {
            return Err(Error::InvalidInput(format!(
                "fit window [{a}, {b}] must lie within [0, {}]",
                self.t_final
            )));
        }
        Ok(())
    }

    pub fn window(&self) -> (f64, f64) {
        self.fit_window
            .unwrap_or((0.2 * self.t_final, 0.9 * self.t_final))
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// Resolves the initial plant state and observer states.
    pub fn initial_states(&self, n: usize, nodes: usize) -> Result<(Vector, Vec<Vector>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut draw = |len: usize| Vector::from_fn(len, |_, _| rng.random_range(-1.0..=1.0));
        let x0 = match &self.x0 {
            InitialState::Explicit(v) => {
                if v.len() != n {
                    return Err(Error::dim(format!("x0 has length {}, expected {n}", v.len())));
                }
                Vector::from_column_slice(v)
            }
            InitialState::Random => draw(n),
        };
        let xhat0 = match &self.xhat0 {
            InitialState::Explicit(vs) => {
                if vs.len() != nodes {
                    return Err(Error::dim(format!(
                        "xhat0 has {} states, expected {nodes}",
                        vs.len()
                    )));
                }
                vs.iter()
                    .enumerate()
                    .map(|(i, v)| {
                        if v.len() != n {
                            Err(Error::dim(format!("xhat0[{i}] has length {}, expected {n}", v.len())))
                        } else {
                            Ok(Vector::from_column_slice(v))
                        }
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            InitialState::Random => (0..nodes).map(|_| draw(n)).collect(),
        };
        Ok((x0, xhat0))
    }
}

#[derive(Debug, Clone)]
pub struct SimulationTrace {
    pub times: Vec<f64>,
    pub x: Vec<Vector>,
    /// `xhat[k][i]`: estimate of node `i` at sample `k`.
    pub xhat: Vec<Vec<Vector>>,
    /// Stacked error `col(e_1, …, e_N)` at each sample.
    pub errors: Vec<Vector>,
    /// `node_error_norms[k][i] = ‖e_i‖₂`.
    pub node_error_norms: Vec<Vec<f64>>,
    pub global_error_norms: Vec<f64>,
    /// Least-squares decay rate over the fit window; `None` when the window
    /// holds too few positive samples (e.g. the error is identically zero).
    pub fitted_rate: Option<f64>,
}

impl SimulationTrace {
    pub fn final_error(&self) -> f64 {
        self.global_error_norms.last().copied().unwrap_or(0.0)
    }

    /// CSV with header `t,e_global,e_1,…,e_N` and, if requested, the plant
    /// and estimate columns. Values carry 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W, include_states: bool) -> io::Result<()> {
        let nodes = self.node_error_norms.first().map(|r| r.len()).unwrap_or(0);
        let n = self.x.first().map(|x| x.len()).unwrap_or(0);
        let mut header = vec!["t".to_string(), "e_global".to_string()];
        header.extend((1..=nodes).map(|i| format!("e_{i}")));
        if include_states {
            header.extend((1..=n).map(|k| format!("x_{k}")));
            for i in 1..=nodes {
                header.extend((1..=n).map(|k| format!("xhat_{i}_{k}")));
            }
        }
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.times.len() {
            let mut row = vec![fmt17(self.times[k]), fmt17(self.global_error_norms[k])];
            row.extend(self.node_error_norms[k].iter().map(|&v| fmt17(v)));
            if include_states {
                row.extend(self.x[k].iter().map(|&v| fmt17(v)));
                for xh in &self.xhat[k] {
                    row.extend(xh.iter().map(|&v| fmt17(v)));
                }
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Per-node constants of the observer vector field.
struct NetworkField<'a> {
    model: &'a SystemModel,
    adjacency: &'a Matrix,
    design: &'a ObserverDesign,
    /// `A − L_i H_i`.
    local: Vec<Matrix>,
    /// `γ r_i M_i`.
    coupling: Vec<Matrix>,
}

impl<'a> NetworkField<'a> {
    fn new(model: &'a SystemModel, graph: &'a Digraph, design: &'a ObserverDesign) -> Result<Self> {
        design.check_dimensions(model)?;
        if graph.node_count() != model.node_count() {
            return Err(Error::dim(format!(
                "graph has {} nodes, system has {}",
                graph.node_count(),
                model.node_count()
            )));
        }
        let local = design
            .nodes
            .iter()
            .zip(model.outputs())
            .map(|(g, h)| model.a() - &g.l * h)
            .collect();
        let coupling = design
            .nodes
            .iter()
            .enumerate()
            .map(|(i, g)| &g.m * (design.gamma * design.r[i]))
            .collect();
        Ok(Self {
            model,
            adjacency: graph.adjacency(),
            design,
            local,
            coupling,
        })
    }

    fn n(&self) -> usize {
        self.model.state_dim()
    }

    fn nodes(&self) -> usize {
        self.model.node_count()
    }

    /// `Σ_j a_ij (z_j − z_i)` for stacked `z`.
    fn neighbour_sum(&self, z: &Vector, i: usize) -> Vector {
        let n = self.n();
        let zi = z.rows(i * n, n);
        let mut acc = Vector::zeros(n);
        for j in 0..self.nodes() {
            let a_ij = self.adjacency[(i, j)];
            if a_ij != 0.0 {
                acc += (z.rows(j * n, n) - zi) * a_ij;
            }
        }
        acc
    }

    /// Observer right-hand side on `(x, x̂_1, …, x̂_N)`.
    fn full(&self, state: &Vector) -> Vector {
        let n = self.n();
        let a = self.model.a();
        let x = state.rows(0, n);
        let xhat = state.rows(n, n * self.nodes()).into_owned();
        let mut out = Vector::zeros(state.len());
        out.rows_mut(0, n).copy_from(&(a * x));
        for i in 0..self.nodes() {
            let h = self.model.output(i);
            let xi = xhat.rows(i * n, n);
            let innovation = h * x - h * xi;
            let d = a * xi + &self.design.nodes[i].l * innovation + &self.coupling[i] * self.neighbour_sum(&xhat, i);
            out.rows_mut(n + i * n, n).copy_from(&d);
        }
        out
    }

    /// Error right-hand side on stacked `e`.
    fn error(&self, e: &Vector) -> Vector {
        let n = self.n();
        let mut out = Vector::zeros(e.len());
        for i in 0..self.nodes() {
            let d = &self.local[i] * e.rows(i * n, n) + &self.coupling[i] * self.neighbour_sum(e, i);
            out.rows_mut(i * n, n).copy_from(&d);
        }
        out
    }
}

/// Derivative of the stacked state `(x, x̂_1, …, x̂_N)` under the plant and
/// the local observers.
pub fn rhs(state: &Vector, model: &SystemModel, graph: &Digraph, design: &ObserverDesign) -> Result<Vector> {
    let field = NetworkField::new(model, graph, design)?;
    let expected = field.n() * (field.nodes() + 1);
    if state.len() != expected {
        return Err(Error::dim(format!(
            "state has length {}, expected {expected}",
            state.len()
        )));
    }
    Ok(field.full(state))
}

/// Derivative of the stacked error `col(e_1, …, e_N)`.
pub fn error_rhs(e: &Vector, model: &SystemModel, graph: &Digraph, design: &ObserverDesign) -> Result<Vector> {
    let field = NetworkField::new(model, graph, design)?;
    if e.len() != field.n() * field.nodes() {
        return Err(Error::dim(format!("error has length {}", e.len())));
    }
    Ok(field.error(e))
}

fn rk4_step(y: &Vector, dt: f64, f: impl Fn(&Vector) -> Vector) -> Vector {
    let k1 = f(y);
    let k2 = f(&(y + &k1 * (0.5 * dt)));
    let k3 = f(&(y + &k2 * (0.5 * dt)));
    let k4 = f(&(y + &k3 * dt));
    y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

/// Classical RK4 with a fixed step.
pub fn integrate(
    config: &SimulationConfig,
    model: &SystemModel,
    graph: &Digraph,
    design: &ObserverDesign,
) -> Result<SimulationTrace> {
    config.validate()?;
    let field = NetworkField::new(model, graph, design)?;
    let (n, nodes) = (field.n(), field.nodes());
    let (x0, xhat0) = config.initial_states(n, nodes)?;

    let e_matrix = verify::build_global_error_matrix(model, graph, design)?.matrix;
    let stiffness = config.dt * numerics::spectral_norm(&e_matrix)?;
    if stiffness > 0.5 {
        warn!("dt·‖E‖₂ = {stiffness:.3} exceeds 0.5; RK4 accuracy may suffer");
    }

    let a = model.a();
    let mut x = x0;
    let mut e = Vector::zeros(n * nodes);
    for (i, xh) in xhat0.iter().enumerate() {
        e.rows_mut(i * n, n).copy_from(&(xh - &x));
    }

    let steps = config.steps();
    let mut trace = SimulationTrace {
        times: Vec::new(),
        x: Vec::new(),
        xhat: Vec::new(),
        errors: Vec::new(),
        node_error_norms: Vec::new(),
        global_error_norms: Vec::new(),
        fitted_rate: None,
    };
    let record = |trace: &mut SimulationTrace, t: f64, x: &Vector, e: &Vector| {
        trace.times.push(t);
        trace.x.push(x.clone());
        trace
            .xhat
            .push((0..nodes).map(|i| x + e.rows(i * n, n)).collect());
        trace
            .node_error_norms
            .push((0..nodes).map(|i| e.rows(i * n, n).norm()).collect());
        trace.global_error_norms.push(e.norm());
        trace.errors.push(e.clone());
    };
    record(&mut trace, 0.0, &x, &e);

    for step in 1..=steps {
        x = rk4_step(&x, config.dt, |y| a * y);
        e = rk4_step(&e, config.dt, |y| field.error(y));
        let t = step as f64 * config.dt;
        if !(x.iter().all(|v| v.is_finite()) && e.iter().all(|v| v.is_finite())) {
            return Err(Error::Divergence {
                step,
                time: t,
                detail: "non-finite state".into(),
            });
        }
        if step % config.record_stride == 0 || step == steps {
            record(&mut trace, t, &x, &e);
        }
    }

    trace.fitted_rate = match estimate_decay_rate(&trace.times, &trace.global_error_norms, config.window()) {
        Ok(rate) => Some(rate),
        Err(Error::InsufficientData(msg)) => {
            warn!("decay rate not fitted: {msg}");
            None
        }
        Err(e) => return Err(e),
    };
    Ok(trace)
}

/// Negated least-squares slope of `ln‖e‖` against `t` over `window`.
///
/// If a non-positive norm appears in the window, the window is cut just
/// before it. At least 10 samples are required.
pub fn estimate_decay_rate(times: &[f64], norms: &[f64], window: (f64, f64)) -> Result<f64> {
    if times.len() != norms.len() {
        return Err(Error::dim("times and norms differ in length"));
    }
    let (t0, t1) = window;
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for (&t, &v) in times.iter().zip(norms) {
        if t < t0 || t > t1 {
            continue;
        }
        if !(v > 0.0 && v.is_finite()) {
            warn!("error norm vanished at t = {t}; shrinking the fit window");
            break;
        }
        pts.push((t, v.ln()));
    }
    if pts.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "{} positive samples in [{t0}, {t1}], need at least 10",
            pts.len()
        )));
    }
    let k = pts.len() as f64;
    let t_mean = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let y_mean = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|(t, y)| (t - t_mean) * (y - y_mean)).sum();
    let sxx: f64 = pts.iter().map(|(t, _)| (t - t_mean).powi(2)).sum();
    Ok(-sxy / sxx)
}
