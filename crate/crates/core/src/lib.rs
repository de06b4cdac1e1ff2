//! System-level simulator for a multi-STAR-RIS assisted UAV uplink NOMA
//! network, plus a constrained policy-gradient trainer that jointly learns
//! the UAV trajectory, STAR-RIS phase shifts, per-RIS time switching, and
//! per-UE transmit power under cumulative rate and energy constraints.
//!
//! The crate is organised around the simulation pipeline:
//!
//! - [`scenario`] — static world geometry and nearest-RIS association
//! - [`channel`] — Rician fading links and the composite STAR-RIS channel
//! - [`access`] — NOMA/SIC decoding, OMA baseline rates, energy accounting
//! - [`env`] — the constrained Markov decision process (state, action,
//!   step, rollout, trace accounting)
//! - [`nn`] — a small dense network with hand-rolled backprop
//! - [`policy`] — bounded Gaussian policy with change-of-variables densities
//! - [`trainer`] — Lagrangian penalized-reward PPO (three-timescale updates)
//! - [`baselines`] — fixed-phase / equal-time / circular / reward-shaping
//!   comparison schemes and the reflecting-only and OMA architectures
//! - [`experiment`] — reproducible experiment runner with CSV emission
//! - [`exec`] — sequential/parallel execution of independent work items
//!
//! All randomness flows through explicitly seeded [`rand_chacha::ChaCha8Rng`]
//! streams; identical seeds yield identical outputs regardless of the
//! `parallel` feature.

pub mod access;
pub mod baselines;
pub mod channel;
pub mod env;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod nn;
pub mod policy;
pub mod scenario;
pub mod trainer;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
