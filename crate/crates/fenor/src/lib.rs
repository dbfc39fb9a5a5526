//! Device-to-array read models for NOR-type IGZO FeFET memories.
//!
//! The crate covers the read-centric design loop for back-end-of-line
//! ferroelectric memories:
//!
//! - [`festack`] — metal–ferroelectric–IGZO gate-stack model: hysteresis
//!   traversal with minor loops, the pinched-erase clamp, self-consistent
//!   charge/voltage tracing and loadline threshold-voltage extraction.
//! - [`device`] — smooth single-piece FeFET / selector I–V compact model
//!   calibrated from (Vt, SS, on-current) targets.
//! - [`netsolve`] — minimal nonlinear network engine: DC operating point by
//!   damped Newton and transient by backward Euler, with per-source energy
//!   accounting.
//! - [`array`] — NOR read netlist builders (planar, vertical-channel,
//!   monolithic-3D strings), bitline-discharge read simulation, sensing
//!   margin / delay / energy, inhibition-voltage and stack-limit searches.
//! - [`planner`] — bitcell area and bit-density arithmetic plus benchmark
//!   table assembly.
//! - [`defaults`] — the calibrated default parameter set shared by tests and
//!   the command-line front end.

pub mod array;
pub mod consts;
pub mod defaults;
pub mod device;
pub mod festack;
pub mod netsolve;
