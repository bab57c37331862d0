//! Simulation and numerical verification of interacting Brownian particle
//! systems: finite-N log-gases and Ruelle-class systems, m-particle
//! re-solves against a frozen environment, and diagnostics for collisions,
//! tame-set exits and time reversal.

pub mod analysis;
pub mod config;
pub mod configuration;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod fields;
pub mod ifc;
pub mod integrator;
pub mod io;
pub mod models;
pub mod potentials;
pub mod report;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod tame;

pub use configuration::{label, split_m, unlabel, Configuration, LabeledState, MLabeledState, Point};
pub use error::{Error, Result};
pub use models::{DriftValue, InteractionSpec, ModelKind};
pub use tame::{LevelScale, TameLevel, TameSchedule};
