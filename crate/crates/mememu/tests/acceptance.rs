//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails at the end if any criterion failed.
//!
//! Run with `cargo test -p mememu --test acceptance -- --nocapture`.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use mememu_core::analysis::{frequency_collapse, loop_area, pinch_test, pulse_staircase, PolarityPattern, PulseTrain};
use mememu_core::engine::{solve_linear, transient, LinearSystem, SimConfig, Waveform};
use mememu_core::maze::{
    bfs_shortest_path, generate_tree_maze, maze_to_circuit, parse_maze, solve_maze, MazeSolution, SettleConfig,
};
use mememu_core::netlist::{parse_netlist, serialize_netlist, Circuit, DeviceKind, Tran};
use mememu_core::{MemristorParams, MemristorState, SourceSpec};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn sine_circuit(dt: f64) -> Circuit {
    let text = std::fs::read_to_string(repo_root().join("circuits/sine1mhz.net")).unwrap();
    let mut c = parse_netlist(&text).unwrap();
    c.tran = Tran { dt, tstop: 2e-6 };
    c
}

fn run_sine(dt: f64) -> Waveform {
    let c = sine_circuit(dt);
    transient(&c, &SimConfig::from_circuit(&c)).unwrap()
}

struct Report {
    failures: Vec<usize>,
}

impl Report {
    fn check(&mut self, id: usize, ok: bool, detail: String) {
        println!("criterion {id:2}: {} {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failures.push(id);
        }
    }
}

fn criterion_1(r: &mut Report) {
    let start = Instant::now();
    let w = run_sine(1e-9);
    let v = w.series("vab(X1)").unwrap();
    let i = w.series("i(X1)").unwrap();
    let area = loop_area(&v[1000..2000], &i[1000..2000]).unwrap();
    let pinch = pinch_test(&v[1000..=2000], &i[1000..=2000]).unwrap();
    let elapsed = start.elapsed();
    r.check(
        1,
        area > 0.0 && pinch < 1e-9 && elapsed < Duration::from_secs(1),
        format!("area={area:.4e} pinch={pinch:.3e} A runtime={elapsed:.2?}"),
    );
}

fn criterion_2(r: &mut Report) {
    let start = Instant::now();
    let m = frequency_collapse(&sine_circuit(1e-9), &[1e6, 3e6, 1e7, 3e7]).unwrap();
    let elapsed = start.elapsed();
    let areas: Vec<f64> = m.iter().map(|p| p.area).collect();
    let decreasing = areas.windows(2).all(|w| w[1] < w[0]);
    let ratio = areas[3] / areas[0];
    r.check(
        2,
        decreasing && ratio < 0.1 && elapsed < Duration::from_secs(5),
        format!("areas={areas:?} ratio={ratio:.4} runtime={elapsed:.2?}"),
    );
}

fn criterion_3(r: &mut Report) {
    let w = run_sine(1e-9);
    let vg = w.series("vg(X1)").unwrap();
    let first = (vg[1000] - vg[0]).abs();
    let second = (vg[2000] - vg[1000]).abs();
    r.check(3, first < 1e-6 && second < 1e-6, format!("|vg(T)-vg(0)|={first:.3e} V, next period {second:.3e} V"));
}

fn criterion_4(r: &mut Report) {
    let start = Instant::now();
    let model = MemristorParams::default();
    let train = PulseTrain {
        offset: model.vcm,
        v_spk: 0.1,
        width: 5e-9,
        spacing: 1e-6,
        polarities: PolarityPattern::Up.sequence(10),
        dt: 1e-9,
    };
    let c = train.circuit(model, 0.0);
    let w = transient(&c, &SimConfig::from_circuit(&c)).unwrap();
    let stairs = pulse_staircase(&w, "vg(X1)", &train.schedule()).unwrap();
    let elapsed = start.elapsed();
    // Closed form, pulse by pulse from the same starting state.
    let mut state = MemristorState::new(0.0);
    let mut worst_closed = 0.0f64;
    let mut worst_nominal = 0.0f64;
    for step in &stairs.step_sizes {
        let next = model.apply_pulse(state, 0.1, 5e-9);
        worst_closed = worst_closed.max((step - (next.vg - state.vg)).abs());
        worst_nominal = worst_nominal.max((step - 5e-3).abs() / 5e-3);
        state = next;
    }
    r.check(
        4,
        stairs.monotone_ok
            && stairs.step_sizes.len() == 10
            && worst_nominal <= 1e-3
            && worst_closed <= 5e-6
            && elapsed < Duration::from_secs(1),
        format!(
            "steps={} worst rel dev={worst_nominal:.2e} vs closed form={worst_closed:.2e} V runtime={elapsed:.2?}",
            stairs.step_sizes.len()
        ),
    );
}

fn reference_maze() -> mememu_core::maze::Maze {
    parse_maze(&std::fs::read_to_string(repo_root().join("circuits/m8x8.txt")).unwrap()).unwrap()
}

fn criterion_5(r: &mut Report, default_run: &MazeSolution) {
    let net = maze_to_circuit(&reference_maze(), 0.8, 0.4, MemristorParams::default());
    let count = net.circuit.memristor_count();
    let bias = default_run.supply.static_bias;
    let rel = (bias - 12.9e-6).abs() / 12.9e-6;
    r.check(
        5,
        count == 128 && (bias - 12.8e-6).abs() < 1e-12 && rel < 0.05,
        format!("memristors={count} static_bias={bias:.4e} A ({:.2}% from 12.9 uA)", rel * 100.0),
    );
}

struct MazeRun {
    matches: bool,
    unique: bool,
    margin: f64,
    peak: f64,
    elapsed: Duration,
}

fn criterion_6(r: &mut Report) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d617a65);
    let mazes: Vec<_> = (0..20).map(|_| generate_tree_maze(8, 8, &mut rng).unwrap()).collect();
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(mazes.len());
    let chunk = mazes.len().div_ceil(threads);
    let cfg = SettleConfig { v1: 0.8, v2: 0.4, t_settle: 5e-6, dt: 1e-9, ..SettleConfig::default() };
    let runs: Vec<MazeRun> = std::thread::scope(|s| {
        let handles: Vec<_> = mazes
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || {
                    part.iter()
                        .map(|m| {
                            let oracle = bfs_shortest_path(m);
                            let start = Instant::now();
                            let (_, sol, _) = solve_maze(m, &cfg).unwrap();
                            MazeRun {
                                matches: oracle.edges() == Some(&sol.on_edges),
                                unique: oracle.is_unique(),
                                margin: sol.margin,
                                peak: sol.supply.peak_dynamic,
                                elapsed: start.elapsed(),
                            }
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
    });

    let matched = runs.iter().filter(|x| x.matches && x.unique).count();
    let min_margin = runs.iter().map(|x| x.margin).fold(f64::INFINITY, f64::min);
    let slowest = runs.iter().map(|x| x.elapsed).max().unwrap();
    r.check(
        6,
        matched == 20 && min_margin > 0.0 && slowest < Duration::from_secs(10),
        format!("{matched}/20 match BFS, min margin={min_margin:.4} V, slowest={slowest:.2?}"),
    );

    runs.iter().map(|x| x.peak).collect()
}

fn criterion_8(r: &mut Report, peaks: &[f64]) {
    let lo = peaks.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = peaks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let in_band = peaks.iter().all(|&p| p.is_finite() && p > 0.0 && (4.8e-7..=4.8e-5).contains(&p));
    r.check(8, in_band, format!("peak_dynamic range {lo:.3e}..{hi:.3e} A (target band 4.8e-7..4.8e-5)"));
}

fn criterion_7(r: &mut Report, default_run: &MazeSolution) {
    let m = reference_maze();
    // Equal slew needs the transconductance scaled with the bias current.
    let scaled = MemristorParams { cm: 1e-12, ibias: 1e-6, gm0: 2e-5, ..MemristorParams::default() };
    let (_, big, _) = solve_maze(&m, &SettleConfig { model: scaled, ..SettleConfig::default() }).unwrap();
    let rel = (big.margin - default_run.margin).abs() / default_run.margin;
    r.check(
        7,
        big.on_edges == default_run.on_edges && rel < 0.1,
        format!("on-sets equal={} margins {:.4} / {:.4} V", big.on_edges == default_run.on_edges, default_run.margin, big.margin),
    );
}

fn random_resistor_network(rng: &mut ChaCha8Rng) -> (Circuit, Vec<(usize, usize, f64)>, Vec<(usize, f64)>) {
    let n = 2 + (rng.next_u32() % 29) as usize; // non-ground nodes, at most 30
    let unit = |rng: &mut ChaCha8Rng| (rng.next_u32() as f64) / (u32::MAX as f64);
    let mut c = Circuit::new(Tran { dt: 1e-9, tstop: 3e-9 });
    let ids: Vec<usize> = (0..=n).map(|k| c.node(&if k == 0 { "0".to_string() } else { format!("n{k}") })).collect();
    let mut resistors = Vec::new();
    // Spanning tree to ground, then random extra links.
    for k in 1..=n {
        let parent = (rng.next_u32() as usize) % k;
        resistors.push((k, parent, 10f64.powf(1.0 + 5.0 * unit(rng))));
    }
    for _ in 0..n {
        let a = (rng.next_u32() as usize) % (n + 1);
        let b = (rng.next_u32() as usize) % (n + 1);
        if a != b {
            resistors.push((a, b, 10f64.powf(1.0 + 5.0 * unit(rng))));
        }
    }
    let n_src = 1 + (rng.next_u32() % 3) as usize;
    let mut sources = Vec::new();
    for s in 0..n_src {
        let node = 1 + (rng.next_u32() as usize) % n;
        if sources.iter().any(|&(m, _)| m == node) {
            continue;
        }
        let volts = 4.0 * unit(rng) - 2.0;
        c.add_device(&format!("V{s}"), DeviceKind::VSource { pos: ids[node], neg: ids[0], spec: SourceSpec::Dc(volts) })
            .unwrap();
        sources.push((node, volts));
    }
    for (k, &(a, b, ohms)) in resistors.iter().enumerate() {
        c.add_device(&format!("R{k}"), DeviceKind::Resistor { a: ids[a], b: ids[b], ohms }).unwrap();
    }
    (c, resistors, sources)
}

/// Nodal solve with fixed-voltage nodes eliminated, by Gauss-Jordan with
/// full pivoting.
fn brute_force_voltages(n: usize, resistors: &[(usize, usize, f64)], sources: &[(usize, f64)]) -> Vec<f64> {
    let mut fixed: Vec<Option<f64>> = vec![None; n + 1];
    fixed[0] = Some(0.0);
    for &(node, v) in sources {
        fixed[node] = Some(v);
    }
    let free: Vec<usize> = (1..=n).filter(|&k| fixed[k].is_none()).collect();
    let pos = |k: usize| free.iter().position(|&f| f == k);
    let m = free.len();
    let mut a = vec![vec![0.0; m + 1]; m];
    for &(x, y, ohms) in resistors {
        let g = 1.0 / ohms;
        for (p, q) in [(x, y), (y, x)] {
            if let Some(i) = pos(p) {
                a[i][i] += g;
                match pos(q) {
                    Some(j) => a[i][j] -= g,
                    None => a[i][m] += g * fixed[q].unwrap(),
                }
            }
        }
    }
    let mut cols: Vec<usize> = (0..m).collect();
    for k in 0..m {
        let (mut bi, mut bj, mut best) = (k, k, 0.0);
        for (i, row) in a.iter().enumerate().skip(k) {
            for j in k..m {
                if row[cols[j]].abs() > best {
                    best = row[cols[j]].abs();
                    bi = i;
                    bj = j;
                }
            }
        }
        a.swap(k, bi);
        cols.swap(k, bj);
        let pc = cols[k];
        let piv = a[k][pc];
        for v in a[k].iter_mut() {
            *v /= piv;
        }
        let pivot_row = a[k].clone();
        for (i, row) in a.iter_mut().enumerate() {
            if i != k && row[pc] != 0.0 {
                let f = row[pc];
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
            }
        }
    }
    let mut out: Vec<f64> = fixed.iter().map(|f| f.unwrap_or(0.0)).collect();
    for (k, row) in a.iter().enumerate() {
        out[free[cols[k]]] = row[m];
    }
    out
}

fn criterion_9(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    let mut all_ok = true;
    for _ in 0..50 {
        let (c, resistors, sources) = random_resistor_network(&mut rng);
        let n = c.nodes().len() - 1;
        let expect = brute_force_voltages(n, &resistors, &sources);
        let w = transient(&c, &SimConfig::from_circuit(&c)).unwrap();
        for k in 1..=n {
            let series = w.series(&format!("v(n{k})")).unwrap();
            for &v in series {
                let err = (v - expect[k]).abs();
                worst = worst.max(err);
                all_ok &= err <= 1e-9;
            }
        }
    }
    // A direct MNA solve through the public API as a second reference.
    let sys = LinearSystem::from_rows(&[&[2.0, -1.0], &[-1.0, 2.0]], &[1.0, 0.0]);
    let x = solve_linear(&sys).unwrap();
    all_ok &= (x[0] - 2.0 / 3.0).abs() < 1e-12 && (x[1] - 1.0 / 3.0).abs() < 1e-12;
    r.check(9, all_ok, format!("50 networks, worst node error={worst:.3e} V"));
}

fn criterion_10(r: &mut Report) {
    let coarse = run_sine(1e-9);
    let fine = run_sine(0.5e-9);
    let a = coarse.series("vg(X1)").unwrap();
    let b = fine.series("vg(X1)").unwrap();
    let worst = a.iter().enumerate().map(|(k, v)| (v - b[2 * k]).abs()).fold(0.0, f64::max);
    let limit = 0.01 * MemristorParams::default().vdd;
    r.check(10, worst <= limit, format!("max |dvg|={worst:.3e} V (limit {limit:.3e} V)"));
}

const MALFORMED: &[(&str, &str)] = &[
    ("unknown card", "Q1 a 0 1\n.tran 1n 1u\n"),
    ("bad arity", "R1 a 0\n.tran 1n 1u\n"),
    ("duplicate id", "R1 a 0 1k\nR1 a 0 2k\n.tran 1n 1u\n"),
    ("unresolved model", "V1 a 0 dc 1\nX1 a 0 nomodel\n.tran 1n 1u\n"),
    ("missing .tran", "V1 a 0 dc 1\nR1 a 0 1k\n.end\n"),
    ("malformed number", "V1 a 0 dc 1\nR1 a 0 1.2.3\n.tran 1n 1u\n"),
];

fn criterion_11(r: &mut Report) {
    let mut ok = true;
    let mut netlists = 0;
    let mut entries: Vec<_> = std::fs::read_dir(repo_root().join("circuits")).unwrap().map(|e| e.unwrap().path()).collect();
    entries.sort();
    for path in entries.iter().filter(|p| p.extension().is_some_and(|e| e == "net")) {
        let c = parse_netlist(&std::fs::read_to_string(path).unwrap()).unwrap();
        let text = serialize_netlist(&c);
        let again = parse_netlist(&text).unwrap();
        ok &= again == c && serialize_netlist(&again) == text;
        netlists += 1;
    }
    let dir = tempfile::tempdir().unwrap();
    let mut rejected = 0;
    for (name, text) in MALFORMED {
        let path = dir.path().join("bad.net");
        std::fs::write(&path, text).unwrap();
        let out = Command::new(env!("CARGO_BIN_EXE_mememu"))
            .args(["run", path.to_str().unwrap(), "--out", dir.path().join("w.csv").to_str().unwrap()])
            .output()
            .unwrap();
        let stderr = String::from_utf8_lossy(&out.stderr);
        let good = out.status.code() == Some(1) && stderr.contains(" at line ");
        if !good {
            println!("    {name}: status {:?}, stderr {stderr}", out.status.code());
        }
        rejected += usize::from(good);
    }
    ok &= netlists > 0 && rejected == MALFORMED.len();
    r.check(11, ok, format!("{netlists} netlists round-trip, {rejected}/{} malformed inputs exit 1 with a line number", MALFORMED.len()));
}

#[test]
fn acceptance() {
    let mut r = Report { failures: Vec::new() };
    criterion_1(&mut r);
    criterion_2(&mut r);
    criterion_3(&mut r);
    criterion_4(&mut r);
    let (_, default_run, _) = solve_maze(&reference_maze(), &SettleConfig::default()).unwrap();
    criterion_5(&mut r, &default_run);
    let peaks = criterion_6(&mut r);
    criterion_7(&mut r, &default_run);
    criterion_8(&mut r, &peaks);
    criterion_9(&mut r);
    criterion_10(&mut r);
    criterion_11(&mut r);
    assert!(r.failures.is_empty(), "failed criteria: {:?}", r.failures);
}
