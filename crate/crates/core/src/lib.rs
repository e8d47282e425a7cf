//! Asynchronous stochastic saddle-point (ASSP) optimization over agent networks.
//!
//! Agents on a symmetric connected graph each minimize a local stochastic
//! objective while proximity constraints couple neighboring decisions. The
//! engine alternates projected primal descent and regularized dual ascent,
//! evaluating every gradient at per-node stale iterates whose staleness is
//! bounded by a delay schedule. Asynchrony is simulated deterministically so
//! every run is reproducible from a single 64-bit seed.
//!
//! Module map:
//!
//! - [`graph`]: network topology and the structural checks it must pass.
//! - [`problem`] / [`domain`]: objectives, constraint families, samplers and
//!   domain projections.
//! - [`delay`]: delay schedules and the staleness buffer.
//! - [`saddle`]: the engine, the synchronous reference method and the
//!   hyperparameter advisor.
//! - [`metrics`]: suboptimality, violation, rate fits and assumption audits.
//! - [`apps`]: interference pricing and decentralized regression instances.

pub mod apps;
pub mod delay;
pub mod domain;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod problem;
pub mod rng;
pub mod saddle;

pub use delay::{DelaySchedule, StalenessBuffer};
pub use domain::DomainSpec;
pub use error::{Error, Result};
pub use graph::NetworkGraph;
pub use problem::{ConstraintFamily, ProblemSpec};
pub use saddle::{Engine, Hyperparams, RunTrace, SaddleState};
