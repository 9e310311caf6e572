//! Batch hierarchical reinforcement learning over task DAGs.
//!
//! Learners consume a fixed dataset of flat transitions collected by a
//! uniform-random behaviour policy and produce one Q-table (or fitted
//! Q-function) per subtask of a hierarchical decomposition. Subtasks are
//! trained bottom-up: every subtask is solved only after all of its
//! subtask children, using one-step intra-option backups that keep only the
//! samples consistent with each child's greedy behaviour.
//!
//! Module map:
//!
//! - [`mdp`]: state/action spaces, experiences, tabular models, Q-tables and
//!   the value-iteration oracle.
//! - [`env`]: the sampling environment trait and a model-backed environment.
//! - [`taxi`]: the stochastic Taxi domain (simulator and exact model).
//! - [`hierarchy`]: subtask DAGs, termination predicates, validation and the
//!   built-in Taxi decompositions.
//! - [`tabular`]: greedy hierarchical policies, the backup target, SQI and HQI.
//! - [`fitted`]: Fitted-SQI/HQI with a pluggable regressor and a tree ensemble.
//! - [`eval`]: data collection, call-and-return execution and experiments.
//! - [`io`]: dataset, policy, config and manifest file formats.

pub mod env;
pub mod error;
pub mod eval;
pub mod fitted;
pub mod hierarchy;
pub mod io;
pub mod mdp;
pub mod rng;
pub mod tabular;
pub mod taxi;

pub use error::{Error, Result};
