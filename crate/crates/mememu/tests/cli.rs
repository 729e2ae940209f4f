use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn circuits() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../circuits")
}

fn mememu(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mememu")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_requested_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("wave.csv");
    let net = circuits().join("sine1mhz.net");
    let o = mememu(&["run", s(&net), "--out", s(&out), "--signals", "v(A),i(X1),vg(X1)"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,v(A),i(X1),vg(X1)"));
    assert_eq!(lines.count(), 2001);

    let all = dir.path().join("all.csv");
    assert!(mememu(&["run", s(&net), "--out", s(&all)]).status.success());
    let header = std::fs::read_to_string(&all).unwrap().lines().next().unwrap().to_string();
    for col in ["t", "v(A)", "i(X1)", "vg(X1)"] {
        assert!(header.split(',').any(|c| c == col), "{header}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let net = circuits().join("sine1mhz.net");
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(mememu(&["run", s(&net), "--out", s(&a)]).status.success());
    assert!(mememu(&["run", s(&net), "--out", s(&b)]).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn fingerprint_areas_decrease() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("metrics.csv");
    let net = circuits().join("sine1mhz.net");
    let o = mememu(&["fingerprint", s(&net), "--freqs", "1e6,3e6,1e7,3e7", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "freq,area,pinch_dev,lobes");
    assert_eq!(rows.len(), 5);
    let areas: Vec<f64> = rows[1..].iter().map(|r| r.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(areas.windows(2).all(|w| w[1] < w[0]), "{areas:?}");
    for tag in ["f1e6", "f3e6", "f1e7", "f3e7"] {
        assert!(dir.path().join(format!("metrics_{tag}.csv")).exists());
    }
}

#[test]
fn maze_report_has_static_bias() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.txt");
    let maze = circuits().join("m8x8.txt");
    let o = mememu(&["maze", s(&maze), "--v1", "0.8", "--v2", "400m", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = std::fs::read_to_string(&out).unwrap();
    assert!(report.lines().any(|l| l == "static_bias=1.28e-5"), "{report}");
    assert!(report.contains("solvable=true"));
    let states = std::fs::read_to_string(dir.path().join("report_states.csv")).unwrap();
    assert_eq!(states.lines().count(), 129);
}

#[test]
fn unsolvable_maze_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let maze = dir.path().join("blocked.txt");
    std::fs::write(&maze, "S#E\n").unwrap();
    let out = dir.path().join("r.txt");
    let o = mememu(&["maze", s(&maze), "--out", s(&out)]);
    assert!(o.status.success());
    assert!(std::fs::read_to_string(&out).unwrap().contains("solvable=false"));
}

#[test]
fn pulse_demo_staircase() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("stairs.csv");
    let o = mememu(&["pulse-demo", "--count", "10", "--v-spk", "100m", "--width", "5n", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let steps: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert_eq!(steps.len(), 10);
    assert!(steps.iter().all(|&x| (x - 5e-3).abs() < 5e-6));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("w.csv");

    let missing = mememu(&["run", "/nonexistent/file.net", "--out", s(&out)]);
    assert_eq!(missing.status.code(), Some(1));

    let usage = mememu(&["run"]);
    assert_eq!(usage.status.code(), Some(1));

    let bad_number = mememu(&["maze", "x.txt", "--v1", "0.8.1"]);
    assert_eq!(bad_number.status.code(), Some(1));

    let bad_maze = dir.path().join("bad.txt");
    std::fs::write(&bad_maze, "S.\n.\n").unwrap();
    let o = mememu(&["maze", s(&bad_maze), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 2"));

    // A node with no path to ground makes the system singular.
    let floating = dir.path().join("floating.net");
    std::fs::write(&floating, "V1 1 0 dc 1\nR1 1 0 1k\nR2 2 3 1k\n.tran 1n 10n\n").unwrap();
    let o = mememu(&["run", s(&floating), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("singular"));

    let help = mememu(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
}
