//! Proactive fault tolerance workbench for edge clusters.
//!
//! The crate bundles four pieces that together drive replication and
//! decommission decisions from resource-usage forecasts:
//!
//! * [`trace`] — monitoring-trace ingestion, synthesis and windowed datasets
//! * [`nn`] / [`model`] — a from-scratch layer library and the two-channel
//!   forecasting model built on it
//! * [`hbes`] — evolution-strategy hyperparameter search with a nested
//!   Gaussian-process search over the nominal choices
//! * [`sim`] / [`controller`] / [`metrics`] — a deterministic discrete-event
//!   cluster simulation, the proactive/reactive controllers and the
//!   fault-tolerance metrics they are scored by
//!
//! [`scenario`] holds the config schema and [`pipeline`] wires the stages
//! together the same way the `ipft` binary does.

pub mod controller;
pub mod hbes;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod scenario;
pub mod sim;
pub mod trace;
