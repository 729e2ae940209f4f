//! Device laws.
//!
//! The memristor emulator has one state variable, the gate voltage `vg` held
//! on the state capacitor. Its channel conductance grows linearly with the
//! gate overdrive above `vcm + vthn`, and the state is driven by a
//! transconductor that saturates at its tail current.

use alloc::vec::Vec;
use core::fmt;

/// Selects the channel law used for the memristor current.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeviceLevel {
    /// `I = G(vg) * v_ab`.
    #[default]
    Linear,
    /// Square-law triode with the `v_ab^2 / 2` channel-end term.
    SquareLaw,
}

impl DeviceLevel {
    pub fn from_index(level: u32) -> Option<Self> {
        match level {
            0 => Some(DeviceLevel::Linear),
            1 => Some(DeviceLevel::SquareLaw),
            _ => None,
        }
    }

    pub fn index(self) -> u32 {
        match self {
            DeviceLevel::Linear => 0,
            DeviceLevel::SquareLaw => 1,
        }
    }
}

/// Constants of one memristor emulator instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemristorParams {
    /// Transconductance parameter of the triode device (A/V^2).
    pub kp: f64,
    pub w_over_l: f64,
    /// Threshold voltage (V). Zero for a zero-threshold device.
    pub vthn: f64,
    /// Source (common-mode) voltage of the triode device (V).
    pub vcm: f64,
    pub vdd: f64,
    /// State capacitance (F).
    pub cm: f64,
    /// Transconductor tail current (A); the output saturates at +/- this value.
    pub ibias: f64,
    /// Small-signal transconductance below saturation (S).
    pub gm0: f64,
    /// Conductance floor (S).
    pub g_leak: f64,
    /// Hold-mode decay constant of the state (s). May be infinite.
    pub tau_leak: f64,
    pub level: DeviceLevel,
}

impl Default for MemristorParams {
    fn default() -> Self {
        MemristorParams {
            kp: 300e-6,
            w_over_l: 3.0 / 0.42,
            vthn: 0.0,
            vcm: 0.6,
            vdd: 1.2,
            cm: 100e-15,
            ibias: 100e-9,
            gm0: 2e-6,
            g_leak: 10e-9,
            tau_leak: 1.0,
            level: DeviceLevel::Linear,
        }
    }
}

/// A parameter that violates its declared range.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamError {
    pub name: &'static str,
    pub value: f64,
    pub requirement: &'static str,
}

impl fmt::Display for ParamError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parameter {} = {} must be {}", self.name, self.value, self.requirement)
    }
}

impl core::error::Error for ParamError {}

fn require(ok: bool, name: &'static str, value: f64, requirement: &'static str) -> Result<(), ParamError> {
    if ok {
        Ok(())
    } else {
        Err(ParamError { name, value, requirement })
    }
}

impl MemristorParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        let positive = "finite and > 0";
        require(self.kp.is_finite() && self.kp > 0.0, "kp", self.kp, positive)?;
        require(self.w_over_l.is_finite() && self.w_over_l > 0.0, "wl", self.w_over_l, positive)?;
        require(self.cm.is_finite() && self.cm > 0.0, "cm", self.cm, positive)?;
        require(self.ibias.is_finite() && self.ibias > 0.0, "ibias", self.ibias, positive)?;
        require(self.gm0.is_finite() && self.gm0 > 0.0, "gm0", self.gm0, positive)?;
        require(self.vdd.is_finite() && self.vdd > 0.0, "vdd", self.vdd, positive)?;
        require(self.g_leak.is_finite() && self.g_leak >= 0.0, "gleak", self.g_leak, "finite and >= 0")?;
        require(self.tau_leak > 0.0, "tauleak", self.tau_leak, "> 0 or inf")?;
        require(self.vthn.is_finite() && self.vthn >= 0.0, "vthn", self.vthn, "finite and >= 0")?;
        require(
            self.vcm.is_finite() && self.vcm >= 0.0 && self.vcm <= self.vdd,
            "vcm",
            self.vcm,
            "within [0, vdd]",
        )
    }

    /// `kp * W/L`, the conductance per volt of overdrive.
    pub fn beta(&self) -> f64 {
        self.kp * self.w_over_l
    }

    pub fn overdrive(&self, state: MemristorState) -> f64 {
        state.vg - self.vcm - self.vthn
    }

    /// Channel conductance at the given state, floored at `g_leak`.
    pub fn conductance(&self, state: MemristorState) -> f64 {
        let g = self.beta() * self.overdrive(state);
        if g > self.g_leak {
            g
        } else {
            self.g_leak
        }
    }

    /// Largest conductance reachable inside the rails.
    pub fn max_conductance(&self) -> f64 {
        self.conductance(MemristorState::new(self.vdd))
    }

    /// Terminal current for a voltage `v_ab` across the device.
    pub fn current(&self, v_ab: f64, state: MemristorState) -> f64 {
        if v_ab == 0.0 {
            return 0.0;
        }
        match self.level {
            DeviceLevel::Linear => self.conductance(state) * v_ab,
            DeviceLevel::SquareLaw => {
                // Odd in v_ab: the channel end at the lower potential acts as source.
                let mag = v_ab.abs();
                let ov = self.overdrive(state);
                let triode = if ov <= 0.0 {
                    0.0
                } else if mag <= ov {
                    self.beta() * (ov * mag - 0.5 * mag * mag)
                } else {
                    0.5 * self.beta() * ov * ov
                };
                let i = triode.max(self.g_leak * mag);
                if v_ab > 0.0 {
                    i
                } else {
                    -i
                }
            }
        }
    }

    /// Large-signal conductance `I(v_ab) / v_ab`. At `v_ab = 0` this is the
    /// limit, which equals [`conductance`](Self::conductance).
    pub fn secant_conductance(&self, v_ab: f64, state: MemristorState) -> f64 {
        match self.level {
            DeviceLevel::Linear => self.conductance(state),
            DeviceLevel::SquareLaw if v_ab == 0.0 => self.conductance(state),
            DeviceLevel::SquareLaw => self.current(v_ab, state) / v_ab,
        }
    }

    /// Transconductor output: linear with slope `gm0`, hard-clamped at the
    /// tail current.
    pub fn transconductor_current(&self, v_ab: f64) -> f64 {
        (self.gm0 * v_ab).clamp(-self.ibias, self.ibias)
    }

    /// Time derivative of the state.
    ///
    /// With the strobe high the transconductor charges the state capacitor;
    /// motion past either rail is zeroed. With the strobe low the capacitor
    /// is isolated and only decays with `tau_leak`.
    pub fn state_rate(&self, v_ab: f64, strobe: bool, state: MemristorState) -> f64 {
        if strobe {
            let rate = self.transconductor_current(v_ab) / self.cm;
            if (rate > 0.0 && state.vg >= self.vdd) || (rate < 0.0 && state.vg <= 0.0) {
                0.0
            } else {
                rate
            }
        } else if self.tau_leak.is_infinite() || state.vg == 0.0 {
            0.0
        } else {
            -state.vg / self.tau_leak
        }
    }

    /// Closed-form state after a rectangular pulse of height `v_spk` and
    /// width `width` applied with the strobe high.
    pub fn apply_pulse(&self, state: MemristorState, v_spk: f64, width: f64) -> MemristorState {
        let dv = self.transconductor_current(v_spk) * width / self.cm;
        self.clamp_state(state.vg + dv)
    }

    pub fn clamp_state(&self, vg: f64) -> MemristorState {
        MemristorState::new(vg.clamp(0.0, self.vdd))
    }

    /// Per-step state motion bound at the slew limit: `dt * ibias / cm`.
    pub fn max_state_step(&self, dt: f64) -> f64 {
        dt * self.ibias / self.cm
    }
}

/// Gate voltage on the state capacitor.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct MemristorState {
    pub vg: f64,
}

impl MemristorState {
    pub const fn new(vg: f64) -> Self {
        MemristorState { vg }
    }
}

/// Independent voltage source waveforms.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    Dc(f64),
    /// `offset + amplitude * sin(2 pi freq t + phase)`, phase in radians.
    Sin { offset: f64, amplitude: f64, freq: f64, phase: f64 },
    /// Periodic trapezoid, SPICE argument order.
    Pulse { v0: f64, v1: f64, delay: f64, rise: f64, fall: f64, width: f64, period: f64 },
    /// Piecewise linear, held constant outside the breakpoints.
    Pwl(Vec<(f64, f64)>),
}

/// Relative tolerance applied to pulse edge times so that edges placed on a
/// `k * dt` grid are not shifted by one sample through rounding.
const PULSE_EDGE_REL_TOL: f64 = 1e-9;

impl SourceSpec {
    pub fn validate(&self) -> Result<(), ParamError> {
        match self {
            SourceSpec::Dc(v) => require(v.is_finite(), "dc", *v, "finite"),
            SourceSpec::Sin { offset, amplitude, freq, phase } => {
                require(offset.is_finite(), "offset", *offset, "finite")?;
                require(amplitude.is_finite(), "amplitude", *amplitude, "finite")?;
                require(phase.is_finite(), "phase", *phase, "finite")?;
                require(freq.is_finite() && *freq > 0.0, "freq", *freq, "finite and > 0")
            }
            SourceSpec::Pulse { v0, v1, delay, rise, fall, width, period } => {
                require(v0.is_finite(), "v0", *v0, "finite")?;
                require(v1.is_finite(), "v1", *v1, "finite")?;
                require(delay.is_finite(), "delay", *delay, "finite")?;
                require(rise.is_finite() && *rise >= 0.0, "rise", *rise, "finite and >= 0")?;
                require(fall.is_finite() && *fall >= 0.0, "fall", *fall, "finite and >= 0")?;
                require(width.is_finite() && *width >= 0.0, "width", *width, "finite and >= 0")?;
                require(period.is_finite() && *period > 0.0, "period", *period, "finite and > 0")
            }
            SourceSpec::Pwl(points) => {
                require(!points.is_empty(), "pwl", f64::NAN, "non-empty")?;
                for (t, v) in points {
                    require(t.is_finite(), "pwl time", *t, "finite")?;
                    require(v.is_finite(), "pwl value", *v, "finite")?;
                }
                for pair in points.windows(2) {
                    require(pair[1].0 > pair[0].0, "pwl time", pair[1].0, "strictly increasing")?;
                }
                Ok(())
            }
        }
    }

    /// Source voltage at time `t`.
    pub fn value_at(&self, t: f64) -> f64 {
        match self {
            SourceSpec::Dc(v) => *v,
            SourceSpec::Sin { offset, amplitude, freq, phase } => {
                offset + amplitude * libm::sin(2.0 * core::f64::consts::PI * freq * t + phase)
            }
            SourceSpec::Pulse { v0, v1, delay, rise, fall, width, period } => {
                let eps = PULSE_EDGE_REL_TOL * period;
                let local = t - delay;
                if local < -eps {
                    return *v0;
                }
                let cycles = libm::floor((local + eps) / period);
                let local = (local - cycles * period).max(0.0);
                if local < rise - eps {
                    v0 + (v1 - v0) * local / rise
                } else if local < rise + width - eps {
                    *v1
                } else if local < rise + width + fall - eps {
                    v1 + (v0 - v1) * (local - rise - width) / fall
                } else {
                    *v0
                }
            }
            SourceSpec::Pwl(points) => {
                let idx = points.partition_point(|&(tp, _)| tp <= t);
                if idx == 0 {
                    points[0].1
                } else if idx == points.len() {
                    points[points.len() - 1].1
                } else {
                    let (t0, v0) = points[idx - 1];
                    let (t1, v1) = points[idx];
                    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwitchPosition {
    On,
    Off,
}

/// Behavioral stand-in for an NMOS pass switch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchParams {
    pub r_on: f64,
    pub g_off: f64,
    pub position: SwitchPosition,
}

impl SwitchParams {
    pub const DEFAULT_R_ON: f64 = 5e3;
    pub const DEFAULT_G_OFF: f64 = 1e-12;

    pub fn new(position: SwitchPosition) -> Self {
        SwitchParams { r_on: Self::DEFAULT_R_ON, g_off: Self::DEFAULT_G_OFF, position }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        require(self.r_on.is_finite() && self.r_on > 0.0, "ron", self.r_on, "finite and > 0")?;
        require(self.g_off.is_finite() && self.g_off >= 0.0, "goff", self.g_off, "finite and >= 0")?;
        require(self.g_off < 1.0 / self.r_on, "goff", self.g_off, "below 1/ron")
    }

    pub fn conductance(&self) -> f64 {
        match self.position {
            SwitchPosition::On => 1.0 / self.r_on,
            SwitchPosition::Off => self.g_off,
        }
    }

    pub fn is_on(&self) -> bool {
        self.position == SwitchPosition::On
    }
}
