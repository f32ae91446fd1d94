//! Discrete-event simulator and analytic model for FAST-TCP persistent
//! congestion: equilibrium fairness predictions, the rate-reduction throttle,
//! and the sender-side delay-probe correction of base-RTT overestimation.
//!
//! The crate is organized as:
//!
//! - [`model`] — closed-form and numerically solved equilibrium predictions
//!   (pure functions, no simulator dependency).
//! - [`sim`] — deterministic event engine: clock, event queue, links with
//!   store-and-forward transmission and tail-drop FIFO queues.
//! - [`flow`] — the FAST sender endpoint: window clocking, RTT estimation,
//!   base-RTT tracking, periodic window updates.
//! - [`remedy`] — the two anti-persistent-congestion mechanisms.
//! - [`traffic`] — Pareto on/off background traffic.
//! - [`scenario`] — topology builders, scenario files, the run loop, metric
//!   collection, CSV export, and parameter sweeps.

pub mod flow;
pub mod model;
pub mod remedy;
pub mod scenario;
pub mod sim;
pub mod traffic;
