//! Tabular SQI and HQI.

mod backup;
mod greedy;
mod learner;

pub use backup::{backup_target, Backup, BackupContext, Continuation, PlannedBackup, TerminalCheck};
pub use greedy::{best_in_mask, greedy_child, greedy_policy, max_in_mask, GreedyAction, QFunction};
pub use learner::{fqi_flat, hqi, sqi, AlphaSchedule, HierarchicalQ, HqiOutcome, LearnerConfig, SqiOutcome, SqiReport};

pub(crate) use learner::{check_bounds, value_bounds};
