//! Enumerable MDPs: factored spaces, experiences, exact models and Q-tables.

mod dataset;
mod model;
mod qtable;
mod space;

pub use dataset::{Dataset, Experience};
pub use model::{empirical_model, value_iteration, TabularModel, Transition};
pub use qtable::{all_columns, argmax, known, FlatPolicy, QTable};
pub use space::{Abstraction, ActionSpace, StateSpace, Variable};

/// Default tolerance of the value-iteration oracle.
pub const ORACLE_TOL: f64 = 1e-8;
