use crate::error::{Error, Result};
use crate::hierarchy::{flat, BasicPredicates, TaskDag};
use crate::mdp::{value_iteration, ActionSpace, QTable, StateSpace, TabularModel, ORACLE_TOL};
use crate::tabular::HierarchicalQ;

pub const ORACLE_MAX_SWEEPS: usize = 100_000;

/// Flat optimal Q of a known model, packaged as a one-subtask hierarchy so
/// the executor can run it.
pub struct Oracle {
    pub dag: TaskDag,
    pub q: HierarchicalQ,
    pub table: QTable,
}

pub fn oracle(model: &TabularModel, states: &StateSpace, actions: &ActionSpace) -> Result<Oracle> {
    if model.n_states() != states.len() || model.n_actions() != actions.len() {
        return Err(Error::schema("model size differs from the state and action spaces"));
    }
    let table = value_iteration(model, ORACLE_TOL, ORACLE_MAX_SWEEPS)?;
    let dag = TaskDag::build(flat(actions), states, actions, &BasicPredicates)?;
    let mut q = HierarchicalQ::new(&dag);
    q.insert(&dag, dag.root(), table.clone())?;
    Ok(Oracle { dag, q, table })
}
