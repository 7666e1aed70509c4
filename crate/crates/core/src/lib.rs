//! Repeated pricing and matrix games played by reinforcement-learning
//! agents.
//!
//! The crate provides:
//!
//! - a logit-demand market with symmetric equilibrium solvers and a
//!   discretized price grid ([`market`]);
//! - iterated matrix games, primarily the prisoner's dilemma ([`matrix`]);
//! - the joint-action memory codec shared by tabular indices and network
//!   features ([`memory`]);
//! - tabular Q-learning, a small value network with experience replay, the
//!   dual online/offline-buffer learner, and a policy-evaluation reference
//!   ([`agents`]);
//! - a deterministic experiment runner with Monte-Carlo replication,
//!   convergence detection, scripted interventions and scenario presets
//!   ([`harness`]).
//!
//! Determinism contract: every random stream derives from a single master
//! seed (see [`seed`]); identical configurations and seeds reproduce
//! identical trajectories byte for byte.

pub mod agents;
pub mod error;
pub mod game;
pub mod harness;
pub mod market;
pub mod matrix;
pub mod memory;
pub mod seed;
pub mod snapshot;

pub use error::{Error, Result};
