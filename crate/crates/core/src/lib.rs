//! Differential synchronisation with pluggable cycle schedulers, a radio
//! tail-energy model and a deterministic discrete-event simulator.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, the preset
//! registry and the command-line runner live in the `diffsync-sim` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod calibration;
pub mod diff;
pub mod energy;
pub mod scheduler;
pub mod simnet;
pub mod sync;
pub mod time;
pub mod workload;

pub use time::SimTime;
