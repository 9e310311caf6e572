//! Data collection, greedy hierarchical execution and the experiment
//! protocol.

mod collect;
mod execute;
mod experiment;
mod oracle;

pub use collect::{collect, CollectionSpec};
pub use execute::{evaluate, execute_hierarchical, EpisodeResult, EvalSpec, EvalSummary};
pub use experiment::{
    builtin_resolver, eval_seed, run_experiment, train, Aggregate, ArmSpec, Cell, EvalReport, ExperimentSpec, Failure,
    LearnerKind, Policy,
};
pub use oracle::{oracle, Oracle, ORACLE_MAX_SWEEPS};
