//! Behavioral simulation of a transconductor-based CMOS memristor emulator.
//!
//! The emulator is a triode NMOS whose gate voltage (the state) is set by a
//! saturating transconductor integrating the terminal voltage onto a hidden
//! capacitor. This crate holds everything that does not touch the outside
//! world:
//!
//! - [`devices`]: device laws for the emulator, switches and sources.
//! - [`netlist`]: a small SPICE-like netlist grammar and the [`Circuit`] it
//!   describes.
//! - [`engine`]: modified nodal analysis with a dense LU solver and a
//!   semi-implicit transient loop.
//! - [`analysis`]: pinched-hysteresis fingerprints and pulse characterization.
//! - [`maze`]: the memristive maze-solving network and its BFS oracle.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![deny(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod devices;
pub mod engine;
pub mod maze;
pub mod netlist;

mod lu;

pub use devices::{DeviceLevel, MemristorParams, MemristorState, SourceSpec, SwitchParams, SwitchPosition};
pub use engine::{LinearSystem, Signal, SimConfig, SimError, Waveform};
pub use netlist::{Circuit, NetlistError, StrobeSchedule};
