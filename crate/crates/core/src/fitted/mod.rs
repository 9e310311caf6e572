//! Fitted-SQI and Fitted-HQI: the tabular backups with each sweep's Q-table
//! replaced by freshly fit regressors, one per (subtask, child), over
//! encoded full states.

mod encoder;
mod forest;
mod regressor;
mod sqi;

pub use encoder::{Encoding, FeatureEncoder};
pub use forest::{Node, Tree, TreeEnsemble, TreeEnsembleConfig};
pub use regressor::{AnyRegressor, MemorizingRegressor, Regressor, RegressorConfig, RegressorFactory};
pub use sqi::{
    fitted_hqi, fitted_sqi, regressor_seed, FittedConfig, FittedHierarchicalQ, FittedHqiOutcome, FittedSqiOutcome,
    FittedSubtask,
};
