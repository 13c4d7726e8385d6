//! Online reinforcement learning with quantum-accessible environments.
//!
//! The crate simulates the quantum query model at the contract level
//! (error radius, failure probability, episode cost) and runs two
//! lazily-updating optimistic algorithms on top of it:
//!
//! * [`tabular`]: Quantum UCRL for finite episodic MDPs, with doubling-triggered
//!   model re-estimation through multi-dimensional amplitude estimation.
//! * [`vtr`]: Quantum UCRL-VTR for linear mixture MDPs, with weighted ridge
//!   regression, confidence ellipsoids and binary-search feature estimation.
//!
//! [`baselines`] holds the classical counterparts and [`harness`] runs seeded
//! experiments, persists per-episode regret traces and fits growth curves.

pub mod baselines;
pub mod error;
pub mod harness;
pub mod mdp;
pub mod oracle;
pub mod params;
pub mod tabular;
pub mod trace;
pub mod vtr;

pub use error::{Error, Result};
