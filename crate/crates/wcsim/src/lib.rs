//! Deterministic co-simulation of wireless control loops.
//!
//! A multi-hop low-power mesh carries sensor measurements to a controller
//! and command sequences back to actuators. Every link transmission can
//! fail, so each hop may be scheduled several redundant attempts; more
//! attempts buy reliability and cost energy. This crate closes the loop
//! around that trade-off:
//!
//! * [`plant`] integrates linear time-invariant dynamics at a fast sub-rate
//!   and holds setpoint arithmetic.
//! * [`estimator`] is a Kalman filter that tolerates missing measurements.
//! * [`mpc`] solves a condensed finite-horizon quadratic program whose
//!   optimal cost doubles as a stability certificate, with constants that
//!   bound its decay.
//! * [`actuation`] buffers delivered command sequences so lost packets are
//!   bridged by playing the tail of the last delivered plan.
//! * [`adaptation`] moves the per-hop transmission count: a
//!   certificate-driven policy ([`adaptation::hc_step`]) and a
//!   delivery-ratio heuristic ([`adaptation::pn_step`]).
//! * [`wsan`] schedules multi-hop flows into a slotted, channel-hopping
//!   superframe and simulates per-slot delivery with an SNR link model.
//! * [`metrics`] accumulates tracking error, energy, and lifetime figures
//!   and fixes the run log format.
//! * [`harness`] wires everything into seeded Monte-Carlo batches.
//!
//! Runs are bit-reproducible: all randomness flows through a counter-based
//! generator ([`rng::CounterRng`]) keyed by (seed, purpose, coordinates),
//! never by draw order, so two policies given the same seed see identical
//! channel conditions.
//!
//! The `examples/` directory demonstrates each capability end to end; the
//! `wcsim` binary exposes `run`, `sweep`, and `report` subcommands over
//! TOML scenario files.

pub mod actuation;
pub mod adaptation;
pub mod config;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod mpc;
pub mod plant;
pub mod qp;
pub mod rng;
pub mod svgplot;
pub mod wsan;

pub use config::{Algo, ScenarioSpec};
pub use error::{Result, SimError};
pub use harness::{run_batch, sweep, BatchOutcome, Scenario};
