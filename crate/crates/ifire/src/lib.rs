//! Simulation and analysis of pulse-coupled integrate-and-fire oscillators.
//!
//! The crate models ensembles of non-identical oscillators that integrate a
//! positive flow toward a firing threshold, reset, and pulse their peers.
//! It provides:
//!
//! * [`model`] — the ensemble data model, catalog models, and jump rules;
//! * [`flow`] — adaptive Runge-Kutta integration with dense output and
//!   threshold-crossing detection;
//! * [`map`] — the one-dimensional firing map, its fixed points,
//!   synchronization regions, timing windows, perturbation bounds and the
//!   monotone (Kamke) reduction;
//! * [`sim`] — event-driven hybrid simulation with firing logs, cluster
//!   detection and sync-window audits;
//! * [`cli`] — the command-line front end.

pub mod cli;
pub mod error;
pub mod flow;
pub mod map;
pub mod model;
pub mod schema;
pub mod sim;
pub mod verify;

pub use error::{Error, Result};
