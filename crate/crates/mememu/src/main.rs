use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mememu::{run_command, Command, EXIT_INPUT};
use mememu_core::analysis::PolarityPattern;
use mememu_core::netlist::parse_value;

/// Behavioral memristor emulator simulator.
#[derive(Parser, Debug)]
#[command(name = "mememu", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Transient simulation of a netlist; writes a waveform CSV.
    Run {
        netlist: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated labels such as `v(a),i(X1),vg(X1)`; default all.
        #[arg(long, value_delimiter = ',')]
        signals: Option<Vec<String>>,
    },
    /// Loop area and pinch metrics across drive frequencies.
    Fingerprint {
        netlist: PathBuf,
        #[arg(long, value_delimiter = ',', value_parser = number, default_value = "1meg,3meg,10meg,30meg")]
        freqs: Vec<f64>,
        #[arg(long, default_value = "metrics.csv")]
        out: PathBuf,
    },
    /// Settle the memristive network for a maze and read out the path.
    Maze {
        maze: PathBuf,
        #[arg(long, value_parser = number, default_value = "0.8")]
        v1: f64,
        #[arg(long, value_parser = number, default_value = "0.4")]
        v2: f64,
        #[arg(long, value_parser = positive, default_value = "5u")]
        t_settle: f64,
        #[arg(long, value_parser = positive, default_value = "1n")]
        dt: f64,
        /// Fixed readout threshold in volts; default is the largest-gap midpoint.
        #[arg(long, value_parser = positive)]
        threshold: Option<f64>,
        #[arg(long, default_value = "maze_report.txt")]
        out: PathBuf,
        /// Per-edge state CSV; default `<out stem>_states.csv`.
        #[arg(long)]
        states: Option<PathBuf>,
    },
    /// Pulsed programming of a single device; writes the staircase CSV.
    PulseDemo {
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, value_parser = positive, default_value = "100m")]
        v_spk: f64,
        #[arg(long, value_parser = positive, default_value = "5n")]
        width: f64,
        /// Pulse start-to-start spacing.
        #[arg(long, value_parser = positive, default_value = "1u")]
        spacing: f64,
        #[arg(long, value_enum, default_value_t = Pattern::Up)]
        polarity: Pattern,
        #[arg(long, default_value = "staircase.csv")]
        out: PathBuf,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Pattern {
    Up,
    Alternating,
    Prbs,
}

fn number(s: &str) -> Result<f64, String> {
    parse_value(s).map_err(|e| e.to_string())
}

fn positive(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{s} must be positive"))
    }
}

fn to_command(cmd: Cmd) -> Command {
    match cmd {
        Cmd::Run { netlist, out, signals } => Command::Run { netlist, out, signals },
        Cmd::Fingerprint { netlist, freqs, out } => Command::Fingerprint { netlist, freqs, out },
        Cmd::Maze { maze, v1, v2, t_settle, dt, threshold, out, states } => {
            Command::Maze { maze, v1, v2, t_settle, dt, threshold, out, states }
        }
        Cmd::PulseDemo { count, v_spk, width, spacing, polarity, out } => {
            let polarity = match polarity {
                Pattern::Up => PolarityPattern::Up,
                Pattern::Alternating => PolarityPattern::Alternating,
                Pattern::Prbs => PolarityPattern::Prbs,
            };
            Command::PulseDemo { count, v_spk, width, spacing, polarity, out }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INPUT as u8) } else { ExitCode::SUCCESS };
        }
    };
    match run_command(&to_command(cli.command)) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
