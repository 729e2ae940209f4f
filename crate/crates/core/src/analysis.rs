//! Memristor fingerprints over simulated waveforms.
//!
//! A memristor driven by a periodic zero-mean voltage traces an i-v loop
//! pinched at the origin whose lobes shrink as the drive frequency rises.
//! This module measures the pinch, the lobe area and the pulsed staircase
//! response, and builds the stimulus circuits for those experiments.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::devices::{MemristorParams, SourceSpec};
use crate::engine::{transient, SimConfig, SimError, Waveform};
use crate::netlist::{Circuit, DeviceKind, Tran};

/// Per-frequency fingerprint of a pinched loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopMetrics {
    pub frequency: f64,
    /// Unsigned lobe area summed over one period (V*A).
    pub area: f64,
    /// Largest |i| interpolated at the zero crossings of v (A).
    pub pinch_deviation: f64,
    pub lobes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnalysisError {
    NoPinchPoints,
    TooFewSamples(usize),
    LengthMismatch { v: usize, i: usize },
    BadFrequencies(String),
    Template(String),
    MissingSignal(String),
    ScheduleOutOfRange(f64),
    Sim(SimError),
}

impl fmt::Display for AnalysisError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalysisError::NoPinchPoints => write!(f, "no pinch points"),
            AnalysisError::TooFewSamples(n) => write!(f, "need at least 3 samples, got {n}"),
            AnalysisError::LengthMismatch { v, i } => write!(f, "series lengths differ: {v} vs {i}"),
            AnalysisError::BadFrequencies(msg) => write!(f, "bad frequency list: {msg}"),
            AnalysisError::Template(msg) => write!(f, "bad sweep template: {msg}"),
            AnalysisError::MissingSignal(s) => write!(f, "waveform does not record {s}"),
            AnalysisError::ScheduleOutOfRange(t) => write!(f, "pulse time {t:e} outside the record"),
            AnalysisError::Sim(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for AnalysisError {}

impl From<SimError> for AnalysisError {
    fn from(e: SimError) -> Self {
        AnalysisError::Sim(e)
    }
}

fn check_lengths(v: &[f64], i: &[f64]) -> Result<(), AnalysisError> {
    if v.len() != i.len() {
        return Err(AnalysisError::LengthMismatch { v: v.len(), i: i.len() });
    }
    Ok(())
}

/// Largest |i| at the zero crossings of `v`, with `i` linearly interpolated
/// to each crossing. Samples where `v` is exactly zero count as crossings.
pub fn pinch_test(v: &[f64], i: &[f64]) -> Result<f64, AnalysisError> {
    check_lengths(v, i)?;
    let mut worst: Option<f64> = None;
    let mut note = |x: f64| worst = Some(worst.map_or(x, |w: f64| w.max(x)));
    for k in 0..v.len() {
        if v[k] == 0.0 {
            note(i[k].abs());
        } else if k + 1 < v.len() && v[k] * v[k + 1] < 0.0 {
            let f = v[k] / (v[k] - v[k + 1]);
            note((i[k] + f * (i[k + 1] - i[k])).abs());
        }
    }
    worst.ok_or(AnalysisError::NoPinchPoints)
}

/// Zero crossings of `v` around the closed loop, as fractional sample
/// positions in `[0, n)` with the interpolated current there.
fn cyclic_crossings(v: &[f64], i: &[f64]) -> Vec<(f64, f64)> {
    let n = v.len();
    let mut out = Vec::new();
    for k in 0..n {
        let next = (k + 1) % n;
        if v[k] == 0.0 {
            out.push((k as f64, i[k]));
        } else if v[k] * v[next] < 0.0 {
            let f = v[k] / (v[k] - v[next]);
            out.push((k as f64 + f, i[k] + f * (i[next] - i[k])));
        }
    }
    out
}

fn shoelace(points: &[(f64, f64)]) -> f64 {
    let n = points.len();
    let twice: f64 = (0..n)
        .map(|k| {
            let (x0, y0) = points[k];
            let (x1, y1) = points[(k + 1) % n];
            x0 * y1 - x1 * y0
        })
        .sum();
    0.5 * twice.abs()
}

/// Unsigned area enclosed by one period of an i-v loop.
///
/// The samples are treated as a closed polygon (the last sample connects to
/// the first). The loop is split into lobes at its pinch points and each
/// lobe's shoelace area is taken unsigned, so counter-rotating lobes add.
pub fn loop_area(v: &[f64], i: &[f64]) -> Result<f64, AnalysisError> {
    check_lengths(v, i)?;
    let n = v.len();
    if n < 3 {
        return Err(AnalysisError::TooFewSamples(n));
    }
    let crossings = cyclic_crossings(v, i);
    if crossings.is_empty() {
        let pts: Vec<(f64, f64)> = v.iter().copied().zip(i.iter().copied()).collect();
        return Ok(shoelace(&pts));
    }
    let m = crossings.len();
    let mut total = 0.0;
    let mut lobe = Vec::new();
    for j in 0..m {
        let (start, i_start) = crossings[j];
        let (end, i_end) = crossings[(j + 1) % m];
        let span = if m == 1 { n as f64 } else { {
            let d = end - start;
            if d < 0.0 { d + n as f64 } else { d }
        } };
        lobe.clear();
        lobe.push((0.0, i_start));
        let mut s = libm::floor(start) + 1.0;
        while s < start + span {
            let idx = (s as usize) % n;
            lobe.push((v[idx], i[idx]));
            s += 1.0;
        }
        lobe.push((0.0, i_end));
        total += shoelace(&lobe);
    }
    Ok(total)
}

/// Number of lobes of a closed loop: one per pinch point, at least one.
pub fn lobe_count(v: &[f64]) -> usize {
    let n = v.len();
    (0..n).filter(|&k| v[k] == 0.0 || v[k] * v[(k + 1) % n] < 0.0).count().max(1)
}

/// Minimum samples per drive period in a frequency sweep.
pub const MIN_SAMPLES_PER_PERIOD: usize = 200;

/// Periods simulated per sweep point; the last one is analyzed.
pub const SWEEP_PERIODS: usize = 2;

/// One simulated frequency of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub metrics: LoopMetrics,
    pub circuit: Circuit,
    pub waveform: Waveform,
}

fn sine_source_index(c: &Circuit) -> Result<usize, AnalysisError> {
    let mut found = c
        .devices()
        .iter()
        .enumerate()
        .filter(|(_, d)| matches!(d.kind, DeviceKind::VSource { spec: SourceSpec::Sin { .. }, .. }));
    let (idx, _) = found.next().ok_or_else(|| AnalysisError::Template("no SIN source".into()))?;
    if found.next().is_some() {
        return Err(AnalysisError::Template("more than one SIN source".into()));
    }
    Ok(idx)
}

fn probe_memristor(c: &Circuit) -> Result<String, AnalysisError> {
    c.devices()
        .iter()
        .find(|d| matches!(d.kind, DeviceKind::Memristor { .. }))
        .map(|d| d.id.clone())
        .ok_or_else(|| AnalysisError::Template("no memristor".into()))
}

/// Re-runs the template at `freq` and measures the last period of the first
/// memristor's `vab`/`i` loop.
///
/// The step is the template's `.tran` step shrunk, if needed, so that one
/// period spans a whole number of at least [`MIN_SAMPLES_PER_PERIOD`]
/// samples.
pub fn sweep_point(template: &Circuit, freq: f64) -> Result<SweepPoint, AnalysisError> {
    if !(freq.is_finite() && freq > 0.0) {
        return Err(AnalysisError::BadFrequencies(format!("{freq} is not a positive frequency")));
    }
    let src = sine_source_index(template)?;
    let probe = probe_memristor(template)?;
    let mut c = template.clone();
    let id = c.devices()[src].id.clone();
    if let Some(DeviceKind::VSource { spec: SourceSpec::Sin { freq: f, .. }, .. }) = c.device_mut(&id).map(|d| &mut d.kind) {
        *f = freq;
    }
    let period = 1.0 / freq;
    let per_period = (libm::round(period / template.tran.dt) as usize).max(MIN_SAMPLES_PER_PERIOD);
    let dt = period / per_period as f64;
    c.tran = Tran { dt, tstop: SWEEP_PERIODS as f64 * period };
    let cfg = SimConfig::from_circuit(&c);
    let waveform = transient(&c, &cfg)?;

    let v_name = format!("vab({probe})");
    let i_name = format!("i({probe})");
    let v = waveform.series(&v_name).ok_or(AnalysisError::MissingSignal(v_name.clone()))?;
    let i = waveform.series(&i_name).ok_or(AnalysisError::MissingSignal(i_name))?;
    let last = (SWEEP_PERIODS - 1) * per_period;
    let end = last + per_period;
    let metrics = LoopMetrics {
        frequency: freq,
        area: loop_area(&v[last..end], &i[last..end])?,
        pinch_deviation: pinch_test(&v[last..=end], &i[last..=end])?,
        lobes: lobe_count(&v[last..end]),
    };
    Ok(SweepPoint { metrics, circuit: c, waveform })
}

/// Loop metrics for each frequency, in input order. Frequencies must be
/// strictly increasing.
pub fn frequency_collapse(template: &Circuit, freqs: &[f64]) -> Result<Vec<LoopMetrics>, AnalysisError> {
    check_frequencies(freqs)?;
    freqs.iter().map(|&f| sweep_point(template, f).map(|p| p.metrics)).collect()
}

pub fn check_frequencies(freqs: &[f64]) -> Result<(), AnalysisError> {
    if freqs.is_empty() {
        return Err(AnalysisError::BadFrequencies("empty".into()));
    }
    if freqs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(AnalysisError::BadFrequencies("not strictly increasing".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn sign(self) -> f64 {
        match self {
            Polarity::Positive => 1.0,
            Polarity::Negative => -1.0,
        }
    }
}

/// Polarity sequences for pulse trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolarityPattern {
    Up,
    Alternating,
    /// 7-bit maximal-length LFSR, fixed seed.
    Prbs,
}

impl PolarityPattern {
    pub fn sequence(self, count: usize) -> Vec<Polarity> {
        match self {
            PolarityPattern::Up => vec![Polarity::Positive; count],
            PolarityPattern::Alternating => (0..count)
                .map(|k| if k % 2 == 0 { Polarity::Positive } else { Polarity::Negative })
                .collect(),
            PolarityPattern::Prbs => {
                let mut lfsr: u8 = 0x5a;
                (0..count)
                    .map(|_| {
                        let bit = ((lfsr >> 6) ^ (lfsr >> 5)) & 1;
                        lfsr = ((lfsr << 1) | bit) & 0x7f;
                        if bit == 1 {
                            Polarity::Positive
                        } else {
                            Polarity::Negative
                        }
                    })
                    .collect()
            }
        }
    }
}

/// Rectangular pulses riding on a DC offset, applied across one memristor.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseTrain {
    pub offset: f64,
    pub v_spk: f64,
    pub width: f64,
    /// Pulse start-to-start spacing (the clock period).
    pub spacing: f64,
    pub polarities: Vec<Polarity>,
    /// Simulation step; edges are placed half a step before grid points.
    pub dt: f64,
}

impl PulseTrain {
    /// Pulse start times, the first half a spacing in.
    pub fn schedule(&self) -> Vec<(f64, Polarity)> {
        self.polarities
            .iter()
            .enumerate()
            .map(|(k, &p)| ((k as f64 + 0.5) * self.spacing, p))
            .collect()
    }

    pub fn duration(&self) -> f64 {
        self.polarities.len().max(1) as f64 * self.spacing
    }

    /// PWL drive for the `A` terminal. Each edge sits between two grid
    /// points, so a pulse of width `m * dt` covers exactly `m` samples.
    pub fn source(&self) -> SourceSpec {
        let half = 0.5 * self.dt;
        let edge = 1e-3 * self.dt;
        let mut points = vec![(0.0, self.offset)];
        for (t, pol) in self.schedule() {
            let high = self.offset + pol.sign() * self.v_spk;
            points.push((t - half, self.offset));
            points.push((t - half + edge, high));
            points.push((t + self.width - half, high));
            points.push((t + self.width - half + edge, self.offset));
        }
        SourceSpec::Pwl(points)
    }

    /// `V1 a 0 pwl(...)`, `V2 b 0 dc offset`, `X1 a b memr`, strobe high.
    pub fn circuit(&self, model: MemristorParams, vg0: f64) -> Circuit {
        let mut c = Circuit::new(Tran { dt: self.dt, tstop: self.duration() });
        c.set_model("memr", model);
        let a = c.node("a");
        let b = c.node("b");
        let gnd = crate::netlist::GROUND;
        let add = |c: &mut Circuit, id: &str, kind| c.add_device(id, kind).expect("fresh ids");
        add(&mut c, "V1", DeviceKind::VSource { pos: a, neg: gnd, spec: self.source() });
        add(&mut c, "V2", DeviceKind::VSource { pos: b, neg: gnd, spec: SourceSpec::Dc(self.offset) });
        add(&mut c, "X1", DeviceKind::Memristor { a, b, model: "memr".to_string(), vg0 });
        c
    }
}

/// Result of a pulsed characterization.
#[derive(Debug, Clone, PartialEq)]
pub struct Staircase {
    pub monotone_ok: bool,
    pub step_sizes: Vec<f64>,
}

/// Tolerance on the sign of a staircase step (V).
pub const STAIRCASE_SIGN_TOL: f64 = 1e-9;

/// Measures the state change caused by each scheduled pulse.
///
/// A pulse's step is the state at the last sample before the next pulse (or
/// the end of the record) minus the state at the last sample before the
/// pulse starts.
pub fn pulse_staircase(w: &Waveform, state: &str, schedule: &[(f64, Polarity)]) -> Result<Staircase, AnalysisError> {
    let vg = w.series(state).ok_or_else(|| AnalysisError::MissingSignal(state.to_string()))?;
    let n = w.len();
    let eps = 1e-6 * w.dt();
    let t_end = w.time(n.saturating_sub(1));
    let last_before = |t: f64| -> Option<usize> {
        let k = libm::ceil((t - eps) / w.dt()) as i64 - 1;
        (k >= 0).then_some((k as usize).min(n - 1))
    };
    let mut step_sizes = Vec::with_capacity(schedule.len());
    let mut monotone_ok = true;
    for (j, &(t, pol)) in schedule.iter().enumerate() {
        if !(t > 0.0 && t <= t_end) {
            return Err(AnalysisError::ScheduleOutOfRange(t));
        }
        let before = last_before(t).ok_or(AnalysisError::ScheduleOutOfRange(t))?;
        let after = match schedule.get(j + 1) {
            Some(&(t_next, _)) => last_before(t_next).ok_or(AnalysisError::ScheduleOutOfRange(t_next))?,
            None => n - 1,
        };
        let step = vg[after] - vg[before];
        monotone_ok &= match pol {
            Polarity::Positive => step >= -STAIRCASE_SIGN_TOL,
            Polarity::Negative => step <= STAIRCASE_SIGN_TOL,
        };
        step_sizes.push(step);
    }
    Ok(Staircase { monotone_ok, step_sizes })
}

/// A train of positive half-sine sweeps whose amplitude steps up linearly
/// from `peak / cycles` to `peak`, as a PWL source. Each cycle of `1/freq`
/// holds one half-sine followed by a half period at `offset`.
pub fn modulated_half_sine(offset: f64, peak: f64, freq: f64, cycles: usize, samples_per_half: usize) -> SourceSpec {
    let period = 1.0 / freq;
    let samples = samples_per_half.max(2);
    let mut points = Vec::with_capacity(cycles * (samples + 1) + 1);
    for c in 0..cycles {
        let amp = peak * (c + 1) as f64 / cycles as f64;
        let t0 = c as f64 * period;
        for s in 0..samples {
            let phase = s as f64 / samples as f64;
            points.push((t0 + 0.5 * period * phase, offset + amp * libm::sin(core::f64::consts::PI * phase)));
        }
        points.push((t0 + 0.5 * period, offset));
    }
    points.push((cycles as f64 * period, offset));
    SourceSpec::Pwl(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_netlist;
    use core::f64::consts::PI;
    use proptest::prelude::*;

    const SINE: &str = "\
V1 a 0 sin(0.6 0.2 1meg)
V2 b 0 dc 0.6
X1 a b memr vg0=0.6
.model memr memristor
.tran 1n 2u
";

    #[test]
    fn pinch_on_exact_zero_samples() {
        let v = [0.0, 0.1, 0.0, -0.1, 0.0];
        let i = [0.0, 1e-5, 0.0, -1e-5, 0.0];
        assert_eq!(pinch_test(&v, &i).unwrap(), 0.0);
    }

    #[test]
    fn pinch_interpolates() {
        let v = [-1.0, 1.0];
        let i = [0.0, 2.0];
        assert_eq!(pinch_test(&v, &i).unwrap(), 1.0);
    }

    #[test]
    fn constant_voltage_has_no_pinch() {
        let v = [0.6; 10];
        assert_eq!(pinch_test(&v, &[1e-6; 10]), Err(AnalysisError::NoPinchPoints));
    }

    #[test]
    fn circle_area() {
        let n = 3600;
        let (v, i): (Vec<f64>, Vec<f64>) = (0..n)
            .map(|k| {
                let th = 2.0 * PI * k as f64 / n as f64;
                (libm::cos(th), libm::sin(th))
            })
            .unzip();
        let area = loop_area(&v, &i).unwrap();
        assert!((area - PI).abs() < 1e-3 * PI, "{area}");
        assert_eq!(lobe_count(&v), 2);
    }

    #[test]
    fn figure_eight_lobes_add() {
        let n = 2000;
        let (v, i): (Vec<f64>, Vec<f64>) = (0..n)
            .map(|k| {
                let th = 2.0 * PI * k as f64 / n as f64;
                (libm::sin(th), libm::sin(2.0 * th))
            })
            .unzip();
        // Each lobe of (sin t, sin 2t) has area 4/3.
        let area = loop_area(&v, &i).unwrap();
        assert!((area - 8.0 / 3.0).abs() < 1e-3, "{area}");
    }

    #[test]
    fn too_few_samples() {
        assert_eq!(loop_area(&[0.0, 1.0], &[0.0, 1.0]), Err(AnalysisError::TooFewSamples(2)));
    }

    #[test]
    fn frozen_state_has_zero_area() {
        let text = SINE.replace(".tran 1n 2u", ".tran 1n 2u\n.strobe low").replace("memristor", "memristor tauleak=inf");
        let c = parse_netlist(&text).unwrap();
        let w = transient(&c, &SimConfig::from_circuit(&c)).unwrap();
        let v = &w.series("vab(X1)").unwrap()[1000..2000];
        let i = &w.series("i(X1)").unwrap()[1000..2000];
        assert!(loop_area(v, i).unwrap() <= 1e-18);
    }

    #[test]
    fn sine_loop_is_pinched_with_area() {
        let c = parse_netlist(SINE).unwrap();
        let p = sweep_point(&c, 1e6).unwrap();
        assert!(p.metrics.area > 0.0);
        assert!(p.metrics.pinch_deviation < 1e-9);
        assert_eq!(p.metrics.lobes, 2);
    }

    #[test]
    fn single_frequency_sweep() {
        let c = parse_netlist(SINE).unwrap();
        let m = frequency_collapse(&c, &[2e6]).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].frequency, 2e6);
    }

    #[test]
    fn sweep_rejects_bad_input() {
        let c = parse_netlist(SINE).unwrap();
        assert!(matches!(frequency_collapse(&c, &[3e6, 1e6]), Err(AnalysisError::BadFrequencies(_))));
        let dc = parse_netlist("V1 a 0 dc 0.6\nX1 a 0 m\n.model m memristor\n.tran 1n 1u\n").unwrap();
        assert!(matches!(sweep_point(&dc, 1e6), Err(AnalysisError::Template(_))));
    }

    fn pulse_run(pattern: PolarityPattern, count: usize, vg0: f64) -> (PulseTrain, Waveform) {
        let train = PulseTrain {
            offset: 0.6,
            v_spk: 0.1,
            width: 5e-9,
            spacing: 1e-6,
            polarities: pattern.sequence(count),
            dt: 1e-9,
        };
        let c = train.circuit(MemristorParams::default(), vg0);
        let w = transient(&c, &SimConfig::from_circuit(&c)).unwrap();
        (train, w)
    }

    #[test]
    fn positive_staircase_matches_closed_form() {
        let (train, w) = pulse_run(PolarityPattern::Up, 10, 0.0);
        let s = pulse_staircase(&w, "vg(X1)", &train.schedule()).unwrap();
        assert!(s.monotone_ok);
        assert_eq!(s.step_sizes.len(), 10);
        for step in s.step_sizes {
            assert!((step - 5e-3).abs() < 5e-6, "{step}");
        }
    }

    #[test]
    fn alternating_steps_follow_polarity() {
        let (train, w) = pulse_run(PolarityPattern::Alternating, 8, 0.6);
        let s = pulse_staircase(&w, "vg(X1)", &train.schedule()).unwrap();
        assert!(s.monotone_ok);
        let p = MemristorParams::default();
        let mut vg = crate::devices::MemristorState::new(0.6);
        for (step, (_, pol)) in s.step_sizes.iter().zip(train.schedule()) {
            let next = p.apply_pulse(vg, pol.sign() * 0.1, 5e-9);
            assert!((step - (next.vg - vg.vg)).abs() < 1e-3 * 5e-3);
            vg = next;
        }
    }

    #[test]
    fn empty_schedule() {
        let (_, w) = pulse_run(PolarityPattern::Up, 1, 0.0);
        let s = pulse_staircase(&w, "vg(X1)", &[]).unwrap();
        assert!(s.monotone_ok);
        assert!(s.step_sizes.is_empty());
    }

    #[test]
    fn schedule_outside_record() {
        let (_, w) = pulse_run(PolarityPattern::Up, 1, 0.0);
        let err = pulse_staircase(&w, "vg(X1)", &[(5e-6, Polarity::Positive)]).unwrap_err();
        assert_eq!(err, AnalysisError::ScheduleOutOfRange(5e-6));
    }

    #[test]
    fn prbs_has_both_polarities() {
        let seq = PolarityPattern::Prbs.sequence(127);
        let pos = seq.iter().filter(|&&p| p == Polarity::Positive).count();
        assert_eq!(pos, 64);
        assert_eq!(seq, PolarityPattern::Prbs.sequence(127));
    }

    #[test]
    fn half_sine_envelope() {
        let src = modulated_half_sine(0.6, 0.2, 1e9, 4, 50);
        assert!(src.validate().is_ok());
        assert!((src.value_at(0.25e-9) - 0.65).abs() < 1e-12);
        assert!((src.value_at(3.25e-9) - 0.8).abs() < 1e-12);
        assert!((src.value_at(0.75e-9) - 0.6).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn area_invariant_under_rotation(shift in 0usize..500, a in 0.1..2.0f64, b in 0.1..2.0f64, phase in 0.0..3.0f64) {
            let n = 500;
            let (v, i): (Vec<f64>, Vec<f64>) = (0..n)
                .map(|k| {
                    let th = 2.0 * PI * k as f64 / n as f64;
                    (a * libm::sin(th), b * libm::sin(th + phase) * libm::sin(th).abs())
                })
                .unzip();
            let base = loop_area(&v, &i).unwrap();
            let mut vr = v.clone();
            let mut ir = i.clone();
            vr.rotate_left(shift);
            ir.rotate_left(shift);
            let rotated = loop_area(&vr, &ir).unwrap();
            prop_assert!((base - rotated).abs() <= 1e-9 * base.max(1e-12));
            prop_assert!(base >= 0.0);
        }
    }
}
