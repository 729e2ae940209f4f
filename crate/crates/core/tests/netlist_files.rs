use std::path::Path;

use mememu_core::engine::{transient, SimConfig};
use mememu_core::netlist::{parse_netlist, serialize_netlist};

#[test]
fn example_netlists_round_trip_and_simulate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../circuits");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "net") {
            continue;
        }
        let c = parse_netlist(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let text = serialize_netlist(&c);
        assert_eq!(parse_netlist(&text).unwrap(), c, "{}", path.display());
        let w = transient(&c, &SimConfig::from_circuit(&c)).unwrap();
        assert!(w.columns().all(|(_, s)| s.iter().all(|v| v.is_finite())));
        seen += 1;
    }
    assert!(seen >= 3);
}

#[test]
fn strobe_window_freezes_state() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../circuits");
    let c = parse_netlist(&std::fs::read_to_string(dir.join("square_law_hold.net")).unwrap()).unwrap();
    let w = transient(&c, &SimConfig::from_circuit(&c)).unwrap();
    let vg = w.series("vg(X1)").unwrap();
    // Rising while the window is open, flat after it closes.
    assert!(vg[400] > vg[100] + 0.1);
    assert!(vg[500..].iter().all(|&v| v == vg[500]));
}
