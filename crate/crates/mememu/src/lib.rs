//! File formats, reports and command plumbing on top of `mememu_core`.
//!
//! Everything here is deterministic: running the same command twice writes
//! byte-identical files.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use mememu_core::analysis::{
    check_frequencies, pulse_staircase, sweep_point, AnalysisError, LoopMetrics, PolarityPattern, PulseTrain, Staircase,
};
use mememu_core::engine::{all_signals, transient, Signal, SimConfig, SimError, Waveform};
use mememu_core::maze::{parse_maze, solve_maze, MazeError, MazeNetwork, MazeSolution, SettleConfig, ThresholdPolicy};
use mememu_core::netlist::{parse_netlist, Circuit, NetlistError};
use mememu_core::MemristorParams;

/// Exit status 1: bad input (files, syntax, options).
pub const EXIT_INPUT: i32 = 1;
/// Exit status 2: the simulation itself failed.
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<NetlistError> for CliError {
    fn from(e: NetlistError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidConfig(_) | SimError::StepGuard { .. } | SimError::UnknownSignal(_) => {
                CliError::Input(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Sim(s) => s.into(),
            AnalysisError::NoPinchPoints | AnalysisError::TooFewSamples(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<MazeError> for CliError {
    fn from(e: MazeError) -> Self {
        match e {
            MazeError::Sim(s) => s.into(),
            MazeError::Unresolved => CliError::Numerical(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

pub fn load_netlist(path: &Path) -> Result<Circuit, CliError> {
    let text = read_text(path)?;
    parse_netlist(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Shortest decimal that reads back exactly, in exponent form.
pub fn fmt_num(v: f64) -> String {
    format!("{v:e}")
}

/// Waveform as CSV: a `t` column followed by each recorded signal, nine
/// significant digits.
pub fn waveform_csv(w: &Waveform) -> String {
    let mut out = String::from("t");
    for name in w.names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    let cols: Vec<&[f64]> = w.columns().map(|(_, s)| s).collect();
    for k in 0..w.len() {
        let _ = write!(out, "{:.8e}", w.time(k));
        for col in &cols {
            let _ = write!(out, ",{:.8e}", col[k] + 0.0);
        }
        out.push('\n');
    }
    out
}

pub fn metrics_csv(metrics: &[LoopMetrics]) -> String {
    let mut out = String::from("freq,area,pinch_dev,lobes\n");
    for m in metrics {
        let _ = writeln!(out, "{:.8e},{:.8e},{:.8e},{}", m.frequency, m.area, m.pinch_deviation, m.lobes);
    }
    out
}

pub fn staircase_csv(train: &PulseTrain, w: &Waveform, stairs: &Staircase) -> String {
    let vg = w.series("vg(X1)").unwrap_or(&[]);
    let mut out = String::from("pulse,t_start,polarity,step,vg_after\n");
    let schedule = train.schedule();
    for (k, ((t, pol), step)) in schedule.iter().zip(&stairs.step_sizes).enumerate() {
        let end = schedule.get(k + 1).map_or(w.len() - 1, |&(t_next, _)| {
            ((t_next / w.dt()).ceil() as usize).saturating_sub(1).min(w.len() - 1)
        });
        let after = vg.get(end).copied().unwrap_or(f64::NAN);
        let _ = writeln!(out, "{},{:.8e},{},{:.8e},{:.8e}", k + 1, t, if pol.sign() > 0.0 { "+" } else { "-" }, step, after);
    }
    out
}

/// Key/value solution report, one item per line.
pub fn maze_report(net: &MazeNetwork, sol: &MazeSolution) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "solvable={}", sol.solvable);
    let _ = writeln!(out, "memristors={}", net.slots.len());
    let _ = writeln!(out, "closed_switches={}", net.slots.iter().filter(|s| s.closed).count());
    let _ = writeln!(out, "threshold={}", fmt_num(sol.threshold));
    let _ = writeln!(out, "margin={}", fmt_num(sol.margin));
    let _ = writeln!(out, "settle_time={}", fmt_num(sol.settle_time));
    let _ = writeln!(out, "static_bias={}", fmt_num(round_sig(sol.supply.static_bias, 12)));
    let _ = writeln!(out, "peak_dynamic={}", fmt_num(round_sig(sol.supply.peak_dynamic, 9)));
    let _ = writeln!(out, "on_edges={}", sol.on_edges.len());
    for e in &sol.on_edges {
        let _ = writeln!(out, "on {e}");
    }
    out
}

/// Per-edge final states.
pub fn maze_state_csv(net: &MazeNetwork, sol: &MazeSolution) -> String {
    let mut out = String::from("edge,memristor,closed,vg,on\n");
    for (slot, vg) in net.slots.iter().zip(&sol.final_vg) {
        let on = slot.edge().is_some_and(|e| sol.on_edges.contains(&e));
        let _ = writeln!(out, "{},{},{},{:.8e},{}", slot.name(), slot.memristor, u8::from(slot.closed), vg, u8::from(on));
    }
    out
}

/// Rounds to `digits` significant digits so that sums like `128 * 1e-7`
/// print as `1.28e-5`.
fn round_sig(v: f64, digits: usize) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.*e}", digits - 1).parse().unwrap_or(v)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Run {
        netlist: PathBuf,
        out: PathBuf,
        signals: Option<Vec<String>>,
    },
    Fingerprint {
        netlist: PathBuf,
        freqs: Vec<f64>,
        out: PathBuf,
    },
    Maze {
        maze: PathBuf,
        v1: f64,
        v2: f64,
        t_settle: f64,
        dt: f64,
        threshold: Option<f64>,
        out: PathBuf,
        states: Option<PathBuf>,
    },
    PulseDemo {
        count: usize,
        v_spk: f64,
        width: f64,
        spacing: f64,
        polarity: PolarityPattern,
        out: PathBuf,
    },
}

/// `wave.csv` plus `tag` gives `wave_<tag>.csv`.
pub fn sibling_path(base: &Path, tag: &str) -> PathBuf {
    let stem = base.file_stem().map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
    let name = match base.extension() {
        Some(ext) => format!("{stem}_{tag}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{tag}"),
    };
    base.with_file_name(name)
}

/// Runs one command, writing its artifacts. Returns a one-line summary.
pub fn run_command(cmd: &Command) -> Result<String, CliError> {
    match cmd {
        Command::Run { netlist, out, signals } => {
            let c = load_netlist(netlist)?;
            let mut cfg = SimConfig::from_circuit(&c);
            if let Some(names) = signals {
                cfg.record = names
                    .iter()
                    .map(|n| Signal::parse(n).ok_or_else(|| CliError::Input(format!("cannot parse signal {n:?}"))))
                    .collect::<Result<_, _>>()?;
            } else {
                cfg.record = all_signals(&c);
            }
            let w = transient(&c, &cfg)?;
            write_text(out, &waveform_csv(&w))?;
            Ok(format!("wrote {} samples to {}", w.len(), out.display()))
        }
        Command::Fingerprint { netlist, freqs, out } => {
            let c = load_netlist(netlist)?;
            check_frequencies(freqs)?;
            let mut metrics = Vec::with_capacity(freqs.len());
            for &f in freqs {
                let point = sweep_point(&c, f)?;
                write_text(&sibling_path(out, &format!("f{}", fmt_num(f))), &waveform_csv(&point.waveform))?;
                metrics.push(point.metrics);
            }
            write_text(out, &metrics_csv(&metrics))?;
            Ok(format!("wrote {} frequencies to {}", metrics.len(), out.display()))
        }
        Command::Maze { maze, v1, v2, t_settle, dt, threshold, out, states } => {
            let text = read_text(maze)?;
            let m = parse_maze(&text).map_err(|e| CliError::Input(format!("{}: {e}", maze.display())))?;
            let cfg = SettleConfig {
                v1: *v1,
                v2: *v2,
                model: MemristorParams::default(),
                dt: *dt,
                t_settle: *t_settle,
                threshold: threshold.map_or(ThresholdPolicy::Auto, ThresholdPolicy::Fixed),
            };
            let (net, sol, _) = solve_maze(&m, &cfg)?;
            write_text(out, &maze_report(&net, &sol))?;
            let states_path = states.clone().unwrap_or_else(|| sibling_path(&out.with_extension("csv"), "states"));
            write_text(&states_path, &maze_state_csv(&net, &sol))?;
            if sol.solvable {
                Ok(format!("{} on-edges, margin {}", sol.on_edges.len(), fmt_num(sol.margin)))
            } else {
                Ok("maze has no route from entrance to exit".into())
            }
        }
        Command::PulseDemo { count, v_spk, width, spacing, polarity, out } => {
            let model = MemristorParams::default();
            let train = PulseTrain {
                offset: model.vcm,
                v_spk: *v_spk,
                width: *width,
                spacing: *spacing,
                polarities: polarity.sequence(*count),
                dt: 1e-9,
            };
            if !(*width > 0.0 && *width < *spacing) {
                return Err(CliError::Input("pulse width must be positive and shorter than the spacing".into()));
            }
            let c = train.circuit(model, 0.0);
            let mut cfg = SimConfig::from_circuit(&c);
            cfg.record = vec![Signal::State("X1".into())];
            let w = transient(&c, &cfg)?;
            let stairs = pulse_staircase(&w, "vg(X1)", &train.schedule())?;
            write_text(out, &staircase_csv(&train, &w, &stairs))?;
            Ok(format!("{} pulses, monotone={}", stairs.step_sizes.len(), stairs.monotone_ok))
        }
    }
}
