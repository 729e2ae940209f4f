//! Maze solving with a memristive network.
//!
//! Every grid cell becomes a network node. Each tile owns two edges (east
//! and south), each a memristor in series with a switch; the switch is
//! closed only when both cells are open. With the entrance and exit held at
//! different DC voltages and every state starting at zero, current flows
//! only along connected routes, the memristors on the solution path charge
//! fastest, and thresholding the final states reads out the path.
//!
//! [`bfs_shortest_path`] is the independent graph-search oracle.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand_core::RngCore;

use crate::devices::{MemristorParams, SourceSpec, SwitchParams, SwitchPosition};
use crate::engine::{supply_current, transient, Signal, SimConfig, SimError, SupplySummary, Waveform};
use crate::netlist::{Circuit, DeviceKind, Tran, GROUND};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Cell { row, col }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}c{}", self.row, self.col)
    }
}

/// Undirected edge between two adjacent cells, stored in row-major order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub a: Cell,
    pub b: Cell,
}

impl Edge {
    pub fn new(x: Cell, y: Cell) -> Self {
        if x <= y {
            Edge { a: x, b: y }
        } else {
            Edge { a: y, b: x }
        }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.a, self.b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MazeError {
    Empty,
    /// Rows and columns are 1-based.
    Ragged { row: usize, expected: usize, found: usize },
    UnknownChar { row: usize, col: usize, ch: char },
    MissingEntrance,
    MissingExit,
    DuplicateEntrance { row: usize, col: usize },
    DuplicateExit { row: usize, col: usize },
    Invalid(String),
    Unresolved,
    Sim(SimError),
}

impl fmt::Display for MazeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MazeError::Empty => write!(f, "empty maze"),
            MazeError::Ragged { row, expected, found } => {
                write!(f, "ragged maze: row {row} has {found} columns, expected {expected}")
            }
            MazeError::UnknownChar { row, col, ch } => write!(f, "unknown maze character {ch:?} at row {row}, column {col}"),
            MazeError::MissingEntrance => write!(f, "maze has no entrance 'S'"),
            MazeError::MissingExit => write!(f, "maze has no exit 'E'"),
            MazeError::DuplicateEntrance { row, col } => write!(f, "second entrance at row {row}, column {col}"),
            MazeError::DuplicateExit { row, col } => write!(f, "second exit at row {row}, column {col}"),
            MazeError::Invalid(msg) => write!(f, "invalid maze: {msg}"),
            MazeError::Unresolved => write!(f, "unresolved maze: increase t_settle or adjust threshold"),
            MazeError::Sim(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for MazeError {}

impl From<SimError> for MazeError {
    fn from(e: SimError) -> Self {
        MazeError::Sim(e)
    }
}

/// Rectangular grid of open and wall cells with one entrance and one exit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Maze {
    rows: usize,
    cols: usize,
    open: Vec<bool>,
    entrance: Cell,
    exit: Cell,
}

impl Maze {
    pub fn new(rows: usize, cols: usize, open: Vec<bool>, entrance: Cell, exit: Cell) -> Result<Self, MazeError> {
        if rows == 0 || cols == 0 {
            return Err(MazeError::Empty);
        }
        if open.len() != rows * cols {
            return Err(MazeError::Invalid(format!("{} cells for a {rows}x{cols} grid", open.len())));
        }
        let m = Maze { rows, cols, open, entrance, exit };
        for (name, c) in [("entrance", entrance), ("exit", exit)] {
            if c.row >= rows || c.col >= cols || !m.is_open(c) {
                return Err(MazeError::Invalid(format!("{name} {c} is not an open cell")));
            }
        }
        if entrance == exit {
            return Err(MazeError::Invalid("entrance and exit coincide".into()));
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entrance(&self) -> Cell {
        self.entrance
    }

    pub fn exit(&self) -> Cell {
        self.exit
    }

    fn index(&self, c: Cell) -> usize {
        c.row * self.cols + c.col
    }

    pub fn is_open(&self, c: Cell) -> bool {
        c.row < self.rows && c.col < self.cols && self.open[self.index(c)]
    }

    pub fn open_count(&self) -> usize {
        self.open.iter().filter(|&&o| o).count()
    }

    /// In-grid neighbors in N, E, S, W order, open or not.
    fn grid_neighbors(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        let candidates = [
            (c.row > 0).then(|| Cell::new(c.row - 1, c.col)),
            (c.col + 1 < self.cols).then(|| Cell::new(c.row, c.col + 1)),
            (c.row + 1 < self.rows).then(|| Cell::new(c.row + 1, c.col)),
            (c.col > 0).then(|| Cell::new(c.row, c.col - 1)),
        ];
        candidates.into_iter().flatten()
    }

    /// Open neighbors of `c` in N, E, S, W order.
    pub fn neighbors(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        self.grid_neighbors(c).filter(move |&n| self.is_open(n))
    }

    /// All edges between 4-connected open cells.
    pub fn open_edges(&self) -> BTreeSet<Edge> {
        let mut out = BTreeSet::new();
        for row in 0..self.rows {
            for col in 0..self.cols {
                let c = Cell::new(row, col);
                if self.is_open(c) {
                    out.extend(self.neighbors(c).map(|n| Edge::new(c, n)));
                }
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.rows * (self.cols + 1));
        for row in 0..self.rows {
            for col in 0..self.cols {
                let c = Cell::new(row, col);
                out.push(if c == self.entrance {
                    'S'
                } else if c == self.exit {
                    'E'
                } else if self.is_open(c) {
                    '.'
                } else {
                    '#'
                });
            }
            out.push('\n');
        }
        out
    }
}

/// Parses `#` (wall), `.` (open), `S` (entrance) and `E` (exit). Blank
/// lines at the end are ignored.
pub fn parse_maze(text: &str) -> Result<Maze, MazeError> {
    let lines: Vec<&str> = text.lines().map(|l| l.trim_end_matches('\r')).collect();
    let used = lines.iter().rposition(|l| !l.trim().is_empty()).map_or(0, |p| p + 1);
    let lines = &lines[..used];
    if lines.is_empty() {
        return Err(MazeError::Empty);
    }
    let cols = lines[0].chars().count();
    let mut open = Vec::with_capacity(lines.len() * cols);
    let mut entrance = None;
    let mut exit = None;
    for (r, line) in lines.iter().enumerate() {
        let found = line.chars().count();
        if found != cols {
            return Err(MazeError::Ragged { row: r + 1, expected: cols, found });
        }
        for (c, ch) in line.chars().enumerate() {
            let is_open = match ch {
                '#' => false,
                '.' => true,
                'S' => {
                    if entrance.replace(Cell::new(r, c)).is_some() {
                        return Err(MazeError::DuplicateEntrance { row: r + 1, col: c + 1 });
                    }
                    true
                }
                'E' => {
                    if exit.replace(Cell::new(r, c)).is_some() {
                        return Err(MazeError::DuplicateExit { row: r + 1, col: c + 1 });
                    }
                    true
                }
                _ => return Err(MazeError::UnknownChar { row: r + 1, col: c + 1, ch }),
            };
            open.push(is_open);
        }
    }
    let entrance = entrance.ok_or(MazeError::MissingEntrance)?;
    let exit = exit.ok_or(MazeError::MissingExit)?;
    Maze::new(lines.len(), cols, open, entrance, exit)
}

/// Breadth-first distances from `from` over open cells.
pub fn bfs_distances(m: &Maze, from: Cell) -> Vec<Option<usize>> {
    let mut dist = vec![None; m.rows * m.cols];
    if !m.is_open(from) {
        return dist;
    }
    let mut queue = VecDeque::new();
    dist[m.index(from)] = Some(0);
    queue.push_back(from);
    while let Some(c) = queue.pop_front() {
        let d = dist[m.index(c)].unwrap_or(0);
        for n in m.neighbors(c) {
            let slot = &mut dist[m.index(n)];
            if slot.is_none() {
                *slot = Some(d + 1);
                queue.push_back(n);
            }
        }
    }
    dist
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ShortestPath {
    Unique(BTreeSet<Edge>),
    /// Several shortest paths; the union of their edges.
    Multiple(BTreeSet<Edge>),
    Unreachable,
}

impl ShortestPath {
    pub fn edges(&self) -> Option<&BTreeSet<Edge>> {
        match self {
            ShortestPath::Unique(e) | ShortestPath::Multiple(e) => Some(e),
            ShortestPath::Unreachable => None,
        }
    }

    pub fn is_unique(&self) -> bool {
        matches!(self, ShortestPath::Unique(_))
    }
}

/// Shortest entrance-to-exit route by breadth-first search.
pub fn bfs_shortest_path(m: &Maze) -> ShortestPath {
    let from_start = bfs_distances(m, m.entrance);
    let Some(total) = from_start[m.index(m.exit)] else {
        return ShortestPath::Unreachable;
    };
    let from_exit = bfs_distances(m, m.exit);

    // Count shortest paths in BFS layer order, saturating at 2.
    let mut order: Vec<Cell> = (0..m.rows)
        .flat_map(|r| (0..m.cols).map(move |c| Cell::new(r, c)))
        .filter(|&c| from_start[m.index(c)].is_some())
        .collect();
    order.sort_by_key(|&c| from_start[m.index(c)]);
    let mut count = vec![0u8; m.rows * m.cols];
    count[m.index(m.entrance)] = 1;
    for &c in &order {
        let dc = from_start[m.index(c)];
        for n in m.neighbors(c) {
            if from_start[m.index(n)].zip(dc).is_some_and(|(dn, dc)| dn == dc + 1) {
                let add = count[m.index(c)];
                let slot = &mut count[m.index(n)];
                *slot = slot.saturating_add(add).min(2);
            }
        }
    }

    let mut edges = BTreeSet::new();
    for &c in &order {
        let Some(dc) = from_start[m.index(c)] else { continue };
        for n in m.neighbors(c) {
            if let Some(de) = from_exit[m.index(n)] {
                if dc + 1 + de == total {
                    edges.insert(Edge::new(c, n));
                }
            }
        }
    }
    if count[m.index(m.exit)] == 1 {
        ShortestPath::Unique(edges)
    } else {
        ShortestPath::Multiple(edges)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    East,
    South,
}

/// One memristor/switch pair of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSlot {
    pub tile: Cell,
    pub direction: Direction,
    /// `None` when the edge leaves the grid.
    pub neighbor: Option<Cell>,
    pub memristor: String,
    pub switch: String,
    pub closed: bool,
}

impl EdgeSlot {
    pub fn edge(&self) -> Option<Edge> {
        self.neighbor.map(|n| Edge::new(self.tile, n))
    }

    /// `r2c3e` style name.
    pub fn name(&self) -> String {
        let d = match self.direction {
            Direction::East => 'e',
            Direction::South => 's',
        };
        format!("{}{d}", self.tile)
    }
}

/// A maze compiled to a circuit, with the edge-to-device map.
#[derive(Debug, Clone, PartialEq)]
pub struct MazeNetwork {
    pub circuit: Circuit,
    pub slots: Vec<EdgeSlot>,
    pub entrance_source: String,
    pub exit_source: String,
}

pub const MAZE_MODEL: &str = "memr";

fn cell_node(c: Cell) -> String {
    format!("c{}_{}", c.row, c.col)
}

/// Builds the memristive network for a maze.
///
/// Each tile instantiates its east and south edges as memristor + switch in
/// series; edges leaving the grid end on a private dangling node. A switch
/// is on only when both cells are open. Each memristor's `A` terminal faces
/// the endpoint nearer the entrance by BFS distance (ties: the north/west
/// cell), so route devices see positive `v_ab` when current flows from the
/// entrance to the exit. `v1` drives the entrance, `v2` the exit, all
/// states start at 0 and the strobe is high.
pub fn maze_to_circuit(m: &Maze, v1: f64, v2: f64, model: MemristorParams) -> MazeNetwork {
    let mut c = Circuit::new(Tran { dt: 1e-9, tstop: 5e-6 });
    c.set_model(MAZE_MODEL, model);
    let dist = bfs_distances(m, m.entrance);
    let add = |c: &mut Circuit, id: &str, kind: DeviceKind| c.add_device(id, kind).expect("maze device ids are unique");

    let entrance = c.node(&cell_node(m.entrance));
    add(&mut c, "Vin", DeviceKind::VSource { pos: entrance, neg: GROUND, spec: SourceSpec::Dc(v1) });
    let exit = c.node(&cell_node(m.exit));
    add(&mut c, "Vout", DeviceKind::VSource { pos: exit, neg: GROUND, spec: SourceSpec::Dc(v2) });

    let mut slots = Vec::with_capacity(2 * m.rows * m.cols);
    for row in 0..m.rows {
        for col in 0..m.cols {
            let tile = Cell::new(row, col);
            for direction in [Direction::East, Direction::South] {
                let neighbor = match direction {
                    Direction::East => (col + 1 < m.cols).then(|| Cell::new(row, col + 1)),
                    Direction::South => (row + 1 < m.rows).then(|| Cell::new(row + 1, col)),
                };
                let mut slot = EdgeSlot {
                    tile,
                    direction,
                    neighbor,
                    memristor: String::new(),
                    switch: String::new(),
                    closed: neighbor.is_some_and(|n| m.is_open(tile) && m.is_open(n)),
                };
                let name = slot.name();
                slot.memristor = format!("X{name}");
                slot.switch = format!("S{name}");

                let far_name = match neighbor {
                    Some(n) => cell_node(n),
                    None => format!("d{name}"),
                };
                let tile_name = cell_node(tile);
                // A faces the endpoint nearer the entrance; unreachable
                // cells count as infinitely far.
                let flip = match neighbor {
                    Some(n) => match (dist[m.index(tile)], dist[m.index(n)]) {
                        (Some(dt), Some(dn)) => dn < dt,
                        (None, Some(_)) => true,
                        _ => false,
                    },
                    None => false,
                };
                let (a_name, b_name) = if flip { (far_name, tile_name) } else { (tile_name, far_name) };
                let a = c.node(&a_name);
                let mid = c.node(&format!("m{name}"));
                add(&mut c, &slot.memristor, DeviceKind::Memristor { a, b: mid, model: MAZE_MODEL.into(), vg0: 0.0 });
                let b = c.node(&b_name);
                let position = if slot.closed { SwitchPosition::On } else { SwitchPosition::Off };
                add(&mut c, &slot.switch, DeviceKind::Switch { a: mid, b, params: SwitchParams::new(position) });
                slots.push(slot);
            }
        }
    }
    MazeNetwork { circuit: c, slots, entrance_source: "Vin".into(), exit_source: "Vout".into() }
}

/// Edges whose memristor state exceeds `threshold`, among closed switches.
pub fn readout(final_vg: &[f64], slots: &[EdgeSlot], threshold: f64) -> BTreeSet<Edge> {
    slots
        .iter()
        .zip(final_vg)
        .filter(|(s, &vg)| s.closed && vg > threshold)
        .filter_map(|(s, _)| s.edge())
        .collect()
}

/// Midpoint of the largest gap between consecutive sorted states, with
/// the gap width. `None` when there is no positive gap.
pub fn largest_gap_threshold(values: &[f64]) -> Option<(f64, f64)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .windows(2)
        .map(|w| (0.5 * (w[0] + w[1]), w[1] - w[0]))
        .fold(None, |best: Option<(f64, f64)>, cand| match best {
            Some(b) if b.1 >= cand.1 => Some(b),
            _ => Some(cand),
        })
        .filter(|&(_, gap)| gap > 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdPolicy {
    /// Midpoint of the largest gap in the sorted final states.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettleConfig {
    pub v1: f64,
    pub v2: f64,
    pub model: MemristorParams,
    pub dt: f64,
    pub t_settle: f64,
    pub threshold: ThresholdPolicy,
}

impl Default for SettleConfig {
    fn default() -> Self {
        SettleConfig {
            v1: 0.8,
            v2: 0.4,
            model: MemristorParams::default(),
            dt: 1e-9,
            t_settle: 5e-6,
            threshold: ThresholdPolicy::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MazeSolution {
    pub solvable: bool,
    pub oracle: ShortestPath,
    pub on_edges: BTreeSet<Edge>,
    /// Final state per slot, aligned with [`MazeNetwork::slots`].
    pub final_vg: Vec<f64>,
    pub threshold: f64,
    /// `min(on states) - max(all other states)`.
    pub margin: f64,
    pub settle_time: f64,
    pub supply: SupplySummary,
}

/// Runs the settle transient, recording every state and both source
/// currents.
pub fn simulate_maze(net: &MazeNetwork, cfg: &SettleConfig) -> Result<Waveform, MazeError> {
    let mut record: Vec<Signal> = net.slots.iter().map(|s| Signal::State(s.memristor.clone())).collect();
    record.push(Signal::Current(net.entrance_source.clone()));
    record.push(Signal::Current(net.exit_source.clone()));
    let mut circuit = net.circuit.clone();
    circuit.tran = Tran { dt: cfg.dt, tstop: cfg.t_settle };
    let sim = SimConfig { dt: cfg.dt, tstop: cfg.t_settle, record, strobe: circuit.strobe.clone() };
    Ok(transient(&circuit, &sim)?)
}

/// Builds, settles and reads out the network for `m`.
pub fn solve_maze(m: &Maze, cfg: &SettleConfig) -> Result<(MazeNetwork, MazeSolution, Option<Waveform>), MazeError> {
    let net = maze_to_circuit(m, cfg.v1, cfg.v2, cfg.model);
    let oracle = bfs_shortest_path(m);
    if oracle == ShortestPath::Unreachable {
        let static_bias = net.slots.len() as f64 * cfg.model.ibias;
        let solution = MazeSolution {
            solvable: false,
            oracle,
            on_edges: BTreeSet::new(),
            final_vg: vec![0.0; net.slots.len()],
            threshold: 0.0,
            margin: 0.0,
            settle_time: 0.0,
            supply: SupplySummary { static_bias, peak_dynamic: 0.0 },
        };
        return Ok((net, solution, None));
    }

    let wave = simulate_maze(&net, cfg)?;
    let last = wave.len() - 1;
    let final_vg: Vec<f64> = net
        .slots
        .iter()
        .map(|s| wave.series(&Signal::State(s.memristor.clone()).label()).map_or(0.0, |v| v[last]))
        .collect();
    let threshold = match cfg.threshold {
        ThresholdPolicy::Fixed(t) => t,
        ThresholdPolicy::Auto => largest_gap_threshold(&final_vg).ok_or(MazeError::Unresolved)?.0,
    };
    let on_edges = readout(&final_vg, &net.slots, threshold);
    let (mut min_on, mut max_off) = (f64::INFINITY, f64::NEG_INFINITY);
    for (slot, &vg) in net.slots.iter().zip(&final_vg) {
        if slot.edge().is_some_and(|e| on_edges.contains(&e)) {
            min_on = min_on.min(vg);
        } else {
            max_off = max_off.max(vg);
        }
    }
    let margin = min_on - max_off;
    if on_edges.is_empty() || !(margin > 0.0) || !margin.is_finite() {
        return Err(MazeError::Unresolved);
    }
    let supply = supply_current(&net.circuit, &wave)?;
    let solution = MazeSolution {
        solvable: true,
        oracle,
        on_edges,
        final_vg,
        threshold,
        margin,
        settle_time: wave.time(last),
        supply,
    };
    Ok((net, solution, Some(wave)))
}

fn random_below<R: RngCore + ?Sized>(rng: &mut R, n: usize) -> usize {
    (rng.next_u64() % n as u64) as usize
}

/// Random maze whose open cells form a tree, so the entrance-to-exit route
/// is unique. The entrance is a random open cell and the exit the open
/// cell farthest from it (first in row-major order on ties).
pub fn generate_tree_maze<R: RngCore + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Result<Maze, MazeError> {
    if rows * cols < 2 {
        return Err(MazeError::Invalid("a tree maze needs at least two cells".into()));
    }
    let mut open = vec![false; rows * cols];
    let start = Cell::new(random_below(rng, rows), random_below(rng, cols));
    open[start.row * cols + start.col] = true;
    // Scratch maze for neighbor queries; entrance and exit are fixed below.
    let mut grid = Maze { rows, cols, open, entrance: start, exit: start };
    let mut frontier: Vec<Cell> = grid.grid_neighbors(start).collect();
    while !frontier.is_empty() {
        let cell = frontier.swap_remove(random_below(rng, frontier.len()));
        if grid.is_open(cell) || grid.neighbors(cell).count() != 1 {
            continue;
        }
        let idx = grid.index(cell);
        grid.open[idx] = true;
        frontier.extend(grid.grid_neighbors(cell).filter(|&n| !grid.open[grid.index(n)]));
    }

    let open_cells: Vec<Cell> =
        (0..rows).flat_map(|r| (0..cols).map(move |c| Cell::new(r, c))).filter(|&c| grid.is_open(c)).collect();
    let entrance = open_cells[random_below(rng, open_cells.len())];
    let dist = bfs_distances(&grid, entrance);
    let exit = open_cells
        .iter()
        .copied()
        .fold((entrance, 0), |best, c| {
            let d = dist[grid.index(c)].unwrap_or(0);
            if d > best.1 {
                (c, d)
            } else {
                best
            }
        })
        .0;
    Maze::new(rows, cols, grid.open, entrance, exit)
}
