//! Transient simulation.
//!
//! Each step freezes the memristor states, assembles the modified nodal
//! analysis (MNA) system of the now purely resistive network, solves it with
//! a dense LU factorization and then advances every state with one explicit
//! Euler step of its rate law. The only dynamic element is the hidden state
//! capacitor, so there is no companion-model machinery.
//!
//! Unknown ordering: node voltages for nodes `1..=n` (ground excluded) come
//! first, followed by one branch current per voltage source in device order.
//! A source's branch current is the current it delivers out of its `+`
//! terminal into the network.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::devices::{MemristorParams, MemristorState, SourceSpec};
use crate::lu;
use crate::netlist::{Circuit, DeviceKind, NodeId, StrobeSchedule, GROUND};

/// Largest allowed state motion per step, as a fraction of `vdd`.
pub const STEP_GUARD_FRACTION: f64 = 0.02;

/// Residual bound of a linear solve, relative to `max(1, |b|_inf)`.
pub const RESIDUAL_TOL: f64 = 1e-9;

/// A recordable quantity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Signal {
    /// `v(<node>)`
    NodeVoltage(String),
    /// `i(<device>)`: terminal current from `a` to `b`, or the delivered
    /// current of a source.
    Current(String),
    /// `vg(<memristor>)`
    State(String),
    /// `vab(<memristor>)`
    Vab(String),
}

impl Signal {
    pub fn label(&self) -> String {
        match self {
            Signal::NodeVoltage(n) => format!("v({n})"),
            Signal::Current(d) => format!("i({d})"),
            Signal::State(d) => format!("vg({d})"),
            Signal::Vab(d) => format!("vab({d})"),
        }
    }

    /// Parses `v(x)`, `i(x)`, `vg(x)` or `vab(x)`.
    pub fn parse(label: &str) -> Option<Signal> {
        let label = label.trim();
        let open = label.find('(')?;
        if !label.ends_with(')') {
            return None;
        }
        let inner = label[open + 1..label.len() - 1].trim();
        if inner.is_empty() {
            return None;
        }
        let inner = inner.to_string();
        match label[..open].to_ascii_lowercase().as_str() {
            "v" => Some(Signal::NodeVoltage(inner)),
            "i" => Some(Signal::Current(inner)),
            "vg" => Some(Signal::State(inner)),
            "vab" => Some(Signal::Vab(inner)),
            _ => None,
        }
    }
}

/// Every node voltage, every device current and every memristor's state and
/// terminal voltage, in node then device order.
pub fn all_signals(c: &Circuit) -> Vec<Signal> {
    let mut out: Vec<Signal> = c.nodes().iter().skip(1).map(|n| Signal::NodeVoltage(n.clone())).collect();
    for d in c.devices() {
        out.push(Signal::Current(d.id.clone()));
        if matches!(d.kind, DeviceKind::Memristor { .. }) {
            out.push(Signal::State(d.id.clone()));
            out.push(Signal::Vab(d.id.clone()));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub tstop: f64,
    pub record: Vec<Signal>,
    pub strobe: StrobeSchedule,
}

impl SimConfig {
    /// Uses the circuit's `.tran` and `.strobe` and records everything.
    pub fn from_circuit(c: &Circuit) -> Self {
        SimConfig { dt: c.tran.dt, tstop: c.tran.tstop, record: all_signals(c), strobe: c.strobe.clone() }
    }

    /// Number of steps after the initial point.
    pub fn steps(&self) -> usize {
        let n = libm::ceil(self.tstop / self.dt - 1e-9);
        if n < 1.0 {
            1
        } else {
            n as usize
        }
    }

    pub fn validate(&self, c: &Circuit) -> Result<(), SimError> {
        if !(self.dt > 0.0 && self.dt.is_finite() && self.tstop.is_finite() && self.dt <= self.tstop) {
            return Err(SimError::InvalidConfig(format!(
                "need 0 < dt <= tstop, got dt={} tstop={}",
                self.dt, self.tstop
            )));
        }
        for (name, p) in c.models() {
            let step = p.max_state_step(self.dt);
            if step > STEP_GUARD_FRACTION * p.vdd {
                return Err(SimError::StepGuard { model: name.to_string(), step, limit: STEP_GUARD_FRACTION * p.vdd });
            }
        }
        Ok(())
    }
}

/// MNA matrix and right-hand side for one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    /// Non-ground node count.
    pub n_nodes: usize,
    pub n_sources: usize,
    /// Row-major, `dim() x dim()`.
    pub matrix: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl LinearSystem {
    pub fn zeros(n_nodes: usize, n_sources: usize) -> Self {
        let dim = n_nodes + n_sources;
        LinearSystem { n_nodes, n_sources, matrix: vec![0.0; dim * dim], rhs: vec![0.0; dim] }
    }

    /// Builds a system from explicit rows, with every unknown treated as a
    /// node voltage.
    pub fn from_rows(rows: &[&[f64]], rhs: &[f64]) -> Self {
        LinearSystem {
            n_nodes: rows.len(),
            n_sources: 0,
            matrix: rows.iter().flat_map(|r| r.iter().copied()).collect(),
            rhs: rhs.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n_nodes + self.n_sources
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.matrix[row * self.dim() + col]
    }

    fn add(&mut self, row: usize, col: usize, v: f64) {
        let dim = self.dim();
        self.matrix[row * dim + col] += v;
    }

    /// Stamps a conductance between two nodes.
    pub fn stamp_conductance(&mut self, a: NodeId, b: NodeId, g: f64) {
        if a != GROUND {
            self.add(a - 1, a - 1, g);
        }
        if b != GROUND {
            self.add(b - 1, b - 1, g);
        }
        if a != GROUND && b != GROUND {
            self.add(a - 1, b - 1, -g);
            self.add(b - 1, a - 1, -g);
        }
    }

    /// Stamps the incidence of voltage source `index`.
    pub fn stamp_source_incidence(&mut self, index: usize, pos: NodeId, neg: NodeId) {
        let row = self.n_nodes + index;
        if pos != GROUND {
            self.add(pos - 1, row, -1.0);
            self.add(row, pos - 1, 1.0);
        }
        if neg != GROUND {
            self.add(neg - 1, row, 1.0);
            self.add(row, neg - 1, -1.0);
        }
    }

    /// `|A x - b|_inf`
    pub fn residual(&self, x: &[f64]) -> f64 {
        let dim = self.dim();
        (0..dim)
            .map(|i| {
                let row = &self.matrix[i * dim..(i + 1) * dim];
                let ax: f64 = row.iter().zip(x).map(|(a, x)| a * x).sum();
                (ax - self.rhs[i]).abs()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LinearError {
    Dimension { rows: usize, rhs: usize },
    NonFinite,
    /// Pivot in `column` fell below threshold.
    Singular { column: usize },
    Residual { residual: f64, limit: f64 },
}

impl fmt::Display for LinearError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinearError::Dimension { rows, rhs } => write!(f, "matrix has {rows} rows but rhs has {rhs} entries"),
            LinearError::NonFinite => write!(f, "matrix or rhs has non-finite entries"),
            LinearError::Singular { column } => write!(f, "singular matrix at column {column}"),
            LinearError::Residual { residual, limit } => write!(f, "solve residual {residual:e} exceeds {limit:e}"),
        }
    }
}

impl core::error::Error for LinearError {}

/// Solves `A x = b` by dense LU with partial pivoting and checks the
/// residual.
pub fn solve_linear(sys: &LinearSystem) -> Result<Vec<f64>, LinearError> {
    let dim = sys.dim();
    if sys.matrix.len() != dim * dim || sys.rhs.len() != dim {
        return Err(LinearError::Dimension { rows: sys.matrix.len() / dim.max(1), rhs: sys.rhs.len() });
    }
    if sys.matrix.iter().chain(&sys.rhs).any(|v| !v.is_finite()) {
        return Err(LinearError::NonFinite);
    }
    let mut a = sys.matrix.clone();
    let mut x = sys.rhs.clone();
    lu::solve_in_place(&mut a, &mut x, dim).map_err(|column| LinearError::Singular { column })?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(LinearError::NonFinite);
    }
    let b_norm = sys.rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let limit = RESIDUAL_TOL * b_norm.max(1.0);
    let residual = sys.residual(&x);
    if residual > limit {
        return Err(LinearError::Residual { residual, limit });
    }
    Ok(x)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    InvalidConfig(String),
    StepGuard { model: String, step: f64, limit: f64 },
    UnknownSignal(String),
    MissingSignal(String),
    /// Singular system; `unknowns` names the floating nodes, or the unknown
    /// whose pivot failed when every node has a path to ground.
    Singular { step: usize, unknowns: Vec<String> },
    NonFinite { step: usize },
    Residual { step: usize, residual: f64 },
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::InvalidConfig(msg) => write!(f, "invalid simulation config: {msg}"),
            SimError::StepGuard { model, step, limit } => write!(
                f,
                "time step too large for model {model}: state may move {step:e} V per step (limit {limit:e} V)"
            ),
            SimError::UnknownSignal(s) => write!(f, "unknown signal {s}"),
            SimError::MissingSignal(s) => write!(f, "waveform does not record {s}"),
            SimError::Singular { step, unknowns } => {
                write!(f, "singular system at step {step}; check connectivity of: {}", unknowns.join(", "))
            }
            SimError::NonFinite { step } => write!(f, "non-finite value at step {step}"),
            SimError::Residual { step, residual } => write!(f, "KCL residual {residual:e} too large at step {step}"),
        }
    }
}

impl core::error::Error for SimError {}

/// Per-memristor state, in device order. `v_ab` holds the previous solve's
/// terminal voltage; square-law devices are stamped with their secant
/// conductance at that voltage.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MemristorStates {
    pub vg: Vec<f64>,
    pub v_ab: Vec<f64>,
}

impl MemristorStates {
    pub fn initial(c: &Circuit) -> Self {
        let vg: Vec<f64> = c
            .devices()
            .iter()
            .filter_map(|d| match d.kind {
                DeviceKind::Memristor { vg0, .. } => Some(vg0),
                _ => None,
            })
            .collect();
        let v_ab = vec![0.0; vg.len()];
        MemristorStates { vg, v_ab }
    }
}

struct Fixed {
    a: NodeId,
    b: NodeId,
    g: f64,
}

struct Mem {
    a: NodeId,
    b: NodeId,
    params: MemristorParams,
}

struct Src<'c> {
    spec: &'c SourceSpec,
}

/// Circuit flattened for repeated stamping.
struct Network<'c> {
    circuit: &'c Circuit,
    n_nodes: usize,
    fixed: Vec<Fixed>,
    mems: Vec<Mem>,
    sources: Vec<Src<'c>>,
    /// Device index to memristor / source / fixed index.
    slots: Vec<Slot>,
    base: LinearSystem,
}

#[derive(Clone, Copy)]
enum Slot {
    Fixed(usize),
    Mem(usize),
    Src(usize),
}

impl<'c> Network<'c> {
    fn new(c: &'c Circuit) -> Result<Self, SimError> {
        let mut fixed = Vec::new();
        let mut mems = Vec::new();
        let mut sources = Vec::new();
        let mut slots = Vec::with_capacity(c.devices().len());
        let mut incidence = Vec::new();
        for d in c.devices() {
            match &d.kind {
                DeviceKind::Resistor { a, b, ohms } => {
                    slots.push(Slot::Fixed(fixed.len()));
                    fixed.push(Fixed { a: *a, b: *b, g: 1.0 / ohms });
                }
                DeviceKind::Switch { a, b, params } => {
                    slots.push(Slot::Fixed(fixed.len()));
                    fixed.push(Fixed { a: *a, b: *b, g: params.conductance() });
                }
                DeviceKind::Memristor { a, b, model, .. } => {
                    let params = *c
                        .model(model)
                        .ok_or_else(|| SimError::InvalidConfig(format!("unresolved model {model}")))?;
                    slots.push(Slot::Mem(mems.len()));
                    mems.push(Mem { a: *a, b: *b, params });
                }
                DeviceKind::VSource { pos, neg, spec } => {
                    slots.push(Slot::Src(sources.len()));
                    incidence.push((sources.len(), *pos, *neg));
                    sources.push(Src { spec });
                }
            }
        }
        let n_nodes = c.nodes().len() - 1;
        let mut base = LinearSystem::zeros(n_nodes, sources.len());
        for f in &fixed {
            base.stamp_conductance(f.a, f.b, f.g);
        }
        for (j, pos, neg) in incidence {
            base.stamp_source_incidence(j, pos, neg);
        }
        Ok(Network { circuit: c, n_nodes, fixed, mems, sources, slots, base })
    }

    fn stamp(&self, states: &MemristorStates, t: f64, sys: &mut LinearSystem) {
        sys.matrix.copy_from_slice(&self.base.matrix);
        sys.rhs.iter_mut().for_each(|v| *v = 0.0);
        for (m, (vg, v_ab)) in self.mems.iter().zip(states.vg.iter().zip(&states.v_ab)) {
            let g = m.params.secant_conductance(*v_ab, MemristorState::new(*vg));
            sys.stamp_conductance(m.a, m.b, g);
        }
        for (j, s) in self.sources.iter().enumerate() {
            sys.rhs[self.n_nodes + j] = s.spec.value_at(t);
        }
    }

    fn voltage(x: &[f64], node: NodeId) -> f64 {
        if node == GROUND {
            0.0
        } else {
            x[node - 1]
        }
    }

    fn unknown_name(&self, column: usize) -> String {
        if column < self.n_nodes {
            self.circuit.node_name(column + 1).to_string()
        } else {
            let j = column - self.n_nodes;
            let id = self
                .slots
                .iter()
                .zip(self.circuit.devices())
                .find_map(|(s, d)| matches!(s, Slot::Src(k) if *k == j).then(|| d.id.clone()))
                .unwrap_or_default();
            format!("i({id})")
        }
    }

    /// Nodes with no conducting path to ground (sources count as paths).
    fn floating_nodes(&self) -> Vec<String> {
        let n = self.n_nodes + 1;
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut union = |a: usize, b: usize| {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra] = rb;
            }
        };
        for f in self.fixed.iter().filter(|f| f.g > 0.0) {
            union(f.a, f.b);
        }
        for m in &self.mems {
            union(m.a, m.b);
        }
        for d in self.circuit.devices() {
            if let DeviceKind::VSource { pos, neg, .. } = d.kind {
                union(pos, neg);
            }
        }
        let root = find(&mut parent, GROUND);
        (1..n).filter(|&k| find(&mut parent, k) != root).map(|k| self.circuit.node_name(k).to_string()).collect()
    }

    fn solve(&self, sys: &LinearSystem, step: usize) -> Result<Vec<f64>, SimError> {
        solve_linear(sys).map_err(|e| match e {
            LinearError::Singular { column } => {
                let mut unknowns = self.floating_nodes();
                if unknowns.is_empty() {
                    unknowns.push(self.unknown_name(column));
                }
                SimError::Singular { step, unknowns }
            }
            LinearError::Residual { residual, .. } => SimError::Residual { step, residual },
            LinearError::NonFinite | LinearError::Dimension { .. } => SimError::NonFinite { step },
        })
    }
}

/// Assembles the MNA system at time `t` with the given memristor states.
pub fn stamp_system(c: &Circuit, states: &MemristorStates, t: f64) -> Result<LinearSystem, SimError> {
    let net = Network::new(c)?;
    if states.vg.len() != net.mems.len() || states.v_ab.len() != net.mems.len() {
        return Err(SimError::InvalidConfig(format!(
            "expected {} memristor states, got {}",
            net.mems.len(),
            states.vg.len()
        )));
    }
    let mut sys = net.base.clone();
    net.stamp(states, t, &mut sys);
    Ok(sys)
}

/// Uniformly sampled record of a transient run; sample `k` is at `k * dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    dt: f64,
    names: Vec<String>,
    series: Vec<Vec<f64>>,
}

impl Waveform {
    pub fn new(dt: f64, names: Vec<String>) -> Self {
        let series = names.iter().map(|_| Vec::new()).collect();
        Waveform { dt, names, series }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.series.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.series[i].as_slice())
    }

    pub fn signal(&self, signal: &Signal) -> Option<&[f64]> {
        self.series(&signal.label())
    }

    /// `(name, samples)` pairs in column order.
    pub fn columns(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.names.iter().map(String::as_str).zip(self.series.iter().map(Vec::as_slice))
    }

    /// Appends one sample per series.
    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.series.len());
        for (s, v) in self.series.iter_mut().zip(row) {
            s.push(*v);
        }
    }
}

#[derive(Clone, Copy)]
enum Probe {
    Node(NodeId),
    Fixed(usize),
    MemCurrent(usize),
    SrcCurrent(usize),
    State(usize),
    Vab(usize),
}

fn resolve_probe(net: &Network<'_>, signal: &Signal) -> Result<Probe, SimError> {
    let unknown = || SimError::UnknownSignal(signal.label());
    let device_slot = |id: &str| {
        net.circuit.devices().iter().position(|d| d.id.eq_ignore_ascii_case(id)).map(|i| net.slots[i])
    };
    match signal {
        Signal::NodeVoltage(n) => net.circuit.node_id(n).map(Probe::Node).ok_or_else(unknown),
        Signal::Current(id) => match device_slot(id).ok_or_else(unknown)? {
            Slot::Fixed(k) => Ok(Probe::Fixed(k)),
            Slot::Mem(k) => Ok(Probe::MemCurrent(k)),
            Slot::Src(k) => Ok(Probe::SrcCurrent(k)),
        },
        Signal::State(id) | Signal::Vab(id) => match device_slot(id).ok_or_else(unknown)? {
            Slot::Mem(k) if matches!(signal, Signal::State(_)) => Ok(Probe::State(k)),
            Slot::Mem(k) => Ok(Probe::Vab(k)),
            _ => Err(unknown()),
        },
    }
}

/// Runs a transient analysis.
///
/// Sample 0 is the operating point at `t = 0` with the initial states. Step
/// `k` evaluates sources at `t_{k+1}`, solves with the states `x_k`, and
/// advances `x_{k+1} = clamp(x_k + dt * rate(v_ab, strobe(t_{k+1}), x_k))`.
/// Recorded currents at `t_{k+1}` therefore use `x_k`, recorded states are
/// `x_{k+1}`.
pub fn transient(c: &Circuit, cfg: &SimConfig) -> Result<Waveform, SimError> {
    cfg.validate(c)?;
    let net = Network::new(c)?;
    let probes = cfg.record.iter().map(|s| resolve_probe(&net, s)).collect::<Result<Vec<_>, _>>()?;
    let mut wave = Waveform::new(cfg.dt, cfg.record.iter().map(Signal::label).collect());

    let mut states = MemristorStates::initial(c);
    let mut next_vg = states.vg.clone();
    let mut sys = net.base.clone();
    let mut row = vec![0.0; probes.len()];
    let mut mem_g = vec![0.0; net.mems.len()];
    let steps = cfg.steps();

    for step in 0..=steps {
        let t = step as f64 * cfg.dt;
        net.stamp(&states, t, &mut sys);
        let x = net.solve(&sys, step)?;

        for (k, m) in net.mems.iter().enumerate() {
            let v_ab = Network::voltage(&x, m.a) - Network::voltage(&x, m.b);
            let vg = states.vg[k];
            mem_g[k] = m.params.secant_conductance(states.v_ab[k], MemristorState::new(vg));
            next_vg[k] = if step == 0 {
                vg
            } else {
                let rate = m.params.state_rate(v_ab, cfg.strobe.level_at(t), MemristorState::new(vg));
                m.params.clamp_state(vg + cfg.dt * rate).vg
            };
            if !next_vg[k].is_finite() {
                return Err(SimError::NonFinite { step });
            }
            states.v_ab[k] = v_ab;
        }

        for (slot, probe) in row.iter_mut().zip(&probes) {
            *slot = match *probe {
                Probe::Node(n) => Network::voltage(&x, n),
                Probe::Fixed(k) => {
                    let f = &net.fixed[k];
                    f.g * (Network::voltage(&x, f.a) - Network::voltage(&x, f.b))
                }
                Probe::MemCurrent(k) => mem_g[k] * states.v_ab[k],
                Probe::SrcCurrent(j) => x[net.n_nodes + j],
                Probe::State(k) => next_vg[k],
                Probe::Vab(k) => states.v_ab[k],
            };
        }
        wave.push_row(&row);
        core::mem::swap(&mut states.vg, &mut next_vg);
    }
    Ok(wave)
}

/// Supply-current summary of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupplySummary {
    /// Transconductor tail currents, which sit outside the solved network.
    pub static_bias: f64,
    /// Largest summed magnitude of all source branch currents over the run.
    pub peak_dynamic: f64,
}

/// Static bias of every memristor instance plus the peak source current of
/// a recorded run. Every voltage source's current must be recorded.
pub fn supply_current(c: &Circuit, w: &Waveform) -> Result<SupplySummary, SimError> {
    let mut static_bias = 0.0;
    let mut sources: Vec<&[f64]> = Vec::new();
    for d in c.devices() {
        match &d.kind {
            DeviceKind::Memristor { model, .. } => {
                static_bias += c.model(model).map_or(0.0, |p| p.ibias);
            }
            DeviceKind::VSource { .. } => {
                let label = Signal::Current(d.id.clone()).label();
                sources.push(w.series(&label).ok_or(SimError::MissingSignal(label))?);
            }
            _ => {}
        }
    }
    let peak_dynamic =
        (0..w.len()).map(|k| sources.iter().map(|s| s[k].abs()).sum::<f64>()).fold(0.0, f64::max);
    Ok(SupplySummary { static_bias, peak_dynamic })
}
