//! Self-organizing LoRa cells.
//!
//! - [`phy`]: rates, airtime, energy and the action space.
//! - [`bandit`]: per-device learners and reward shaping.
//! - [`analytic`]: stochastic-geometry success probability and the
//!   centralized SF-density optimizer.
//! - [`netsim`]: event-driven cell simulator.
//! - [`cli`]: presets, config files and output writers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod bandit;
pub mod cli;
pub mod error;
pub mod netsim;
pub mod phy;

pub use error::{Error, Result};
