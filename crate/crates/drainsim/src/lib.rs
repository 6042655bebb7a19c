//! Stochastic hybrid simulation of smartphone battery discharge.
//!
//! The library couples a first-order Thevenin equivalent-circuit cell with a
//! lumped thermal node (Joule + entropic heating, Newtonian cooling,
//! Arrhenius-coupled ohmic resistance) and drives it with a continuous-time
//! Markov chain over user activity modes. Session loads are truncated
//! Gaussians held constant between mode jumps, so the coupled system is a
//! piecewise deterministic Markov process. Time-to-empty is the first passage
//! of a debounced voltage-cutoff / power-infeasibility event, estimated by
//! event-driven Monte Carlo.
//!
//! Main entry points:
//!
//! - [`battery`]: cell parameters, constant-power current solve, thermal
//!   balance, Arrhenius resistance, cycle aging.
//! - [`usage`]: mode table, CTMC generator, dwell/transition/load sampling,
//!   contributor power decomposition.
//! - [`sim`]: trajectory integration, shutdown detection, Monte Carlo TTE
//!   distributions, ablation variants.
//! - [`control`]: resistance-aware throttling policy and its evaluation.
//! - [`identify`]: parameter identification from pulse-discharge records.
//! - [`analysis`]: elasticities, Sobol indices, risk frontier, usage
//!   perturbation study, validation metrics.
//! - [`config`] / [`cli`]: scenario configuration files and the command-line
//!   surface.
//!
//! The `examples/` directory has one runnable program per capability; the
//! `drainsim` binary exposes the same flows as subcommands.

pub mod analysis;
pub mod battery;
pub mod cli;
pub mod config;
pub mod control;
pub mod identify;
pub mod numerics;
pub mod output;
pub mod sim;
pub mod usage;




pub use numerics::rng::RngStream;


