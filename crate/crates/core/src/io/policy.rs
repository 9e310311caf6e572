//! Policy files: JSON with one block per subtask. Tabular blocks keep the
//! table bit-exactly; fitted blocks keep the regressors structurally and
//! their predictions are recomputed on load.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Policy;
use crate::fitted::{AnyRegressor, FeatureEncoder, FittedHierarchicalQ, FittedSubtask};
use crate::hierarchy::{Subtask, TaskDag};
use crate::io::{read_text, write_atomic};
use crate::mdp::{all_columns, QTable};
use crate::tabular::HierarchicalQ;

pub const POLICY_FORMAT: &str = "hqi-policy";
pub const POLICY_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyFile {
    format: String,
    version: u32,
    dag: String,
    variables: Vec<(String, usize)>,
    actions: Vec<String>,
    body: Body,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum Body {
    Tabular { subtasks: Vec<TableBlock> },
    Fitted { encoder: FeatureEncoder, subtasks: Vec<FittedBlock> },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableBlock {
    subtask: String,
    children: Vec<String>,
    abstraction: Vec<String>,
    rows: usize,
    values: Vec<f64>,
    visited: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FittedBlock {
    subtask: String,
    children: Vec<String>,
    models: Vec<Option<AnyRegressor>>,
    visited: Vec<u64>,
}

fn children(dag: &TaskDag, st: &Subtask) -> Vec<String> {
    st.children.iter().map(|&c| dag.child_name(c).to_string()).collect()
}

fn abstraction(dag: &TaskDag, st: &Subtask) -> Vec<String> {
    st.abstraction.vars().iter().map(|&v| dag.states().variables()[v].name.clone()).collect()
}

pub fn policy_to_json(policy: &Policy, dag: &TaskDag) -> Result<String> {
    let incomplete = || Error::Hierarchy(format!("policy for `{}` is missing subtasks", dag.name()));
    let body = match policy {
        Policy::Tabular(q) => Body::Tabular {
            subtasks: dag
                .subtasks()
                .iter()
                .map(|st| {
                    let t = q.table(st.id).ok_or_else(incomplete)?;
                    Ok(TableBlock {
                        subtask: st.name.clone(),
                        children: children(dag, st),
                        abstraction: abstraction(dag, st),
                        rows: t.rows(),
                        values: t.values().to_vec(),
                        visited: t.visited_rows().to_vec(),
                    })
                })
                .collect::<Result<_>>()?,
        },
        Policy::Fitted(q) => Body::Fitted {
            encoder: q.encoder().clone(),
            subtasks: dag
                .subtasks()
                .iter()
                .map(|st| {
                    let f = q.subtask(st.id).ok_or_else(incomplete)?;
                    Ok(FittedBlock {
                        subtask: st.name.clone(),
                        children: children(dag, st),
                        models: f.models.clone(),
                        visited: f.visited().to_vec(),
                    })
                })
                .collect::<Result<_>>()?,
        },
    };
    let file = PolicyFile {
        format: POLICY_FORMAT.into(),
        version: POLICY_VERSION,
        dag: dag.name().into(),
        variables: dag.states().variables().iter().map(|v| (v.name.clone(), v.cardinality)).collect(),
        actions: dag.actions().names().to_vec(),
        body,
    };
    Ok(serde_json::to_string(&file).expect("policy serializes"))
}

/// Parses a policy and binds it to `dag`, which must have the same
/// subtasks, children and abstractions as the DAG it was trained on.
pub fn policy_from_json(text: &str, dag: &TaskDag) -> Result<Policy> {
    let file: PolicyFile = serde_json::from_str(text).map_err(|e| Error::schema(format!("policy file: {e}")))?;
    if file.format != POLICY_FORMAT || file.version != POLICY_VERSION {
        return Err(Error::schema(format!(
            "expected {POLICY_FORMAT} v{POLICY_VERSION}, found {} v{}",
            file.format, file.version
        )));
    }
    let vars: Vec<(String, usize)> = dag.states().variables().iter().map(|v| (v.name.clone(), v.cardinality)).collect();
    if file.variables != vars || file.actions != dag.actions().names() {
        return Err(Error::schema("policy state or action space differs from the hierarchy's"));
    }
    let block_count = match &file.body {
        Body::Tabular { subtasks } => subtasks.len(),
        Body::Fitted { subtasks, .. } => subtasks.len(),
    };
    let mismatch = |why: String| {
        Error::schema(format!("policy trained on `{}` does not fit hierarchy `{}`: {why}", file.dag, dag.name()))
    };
    if block_count != dag.len() {
        return Err(mismatch(format!("{block_count} subtasks, expected {}", dag.len())));
    }
    let check = |name: &str, kids: &[String], st: &Subtask| -> Result<()> {
        if name != st.name {
            return Err(mismatch(format!("found subtask `{name}` where `{}` was expected", st.name)));
        }
        if kids != children(dag, st) {
            return Err(mismatch(format!("children of `{name}` differ")));
        }
        Ok(())
    };
    match file.body {
        Body::Tabular { subtasks } => {
            let mut q = HierarchicalQ::new(dag);
            for (block, st) in subtasks.into_iter().zip(dag.subtasks()) {
                check(&block.subtask, &block.children, st)?;
                if block.abstraction != abstraction(dag, st) {
                    return Err(mismatch(format!("abstraction of `{}` differs", st.name)));
                }
                let table = QTable::from_parts(
                    st.abstraction.vars().to_vec(),
                    block.rows,
                    block.children.len(),
                    block.values,
                    block.visited,
                )
                .ok_or_else(|| mismatch(format!("malformed table for `{}`", st.name)))?;
                q.insert(dag, st.id, table).map_err(|e| mismatch(e.to_string()))?;
            }
            Ok(Policy::Tabular(q))
        }
        Body::Fitted { encoder, subtasks } => {
            let n = dag.states().len();
            let mut q = FittedHierarchicalQ::new(dag, encoder)?;
            for (block, st) in subtasks.into_iter().zip(dag.subtasks()) {
                check(&block.subtask, &block.children, st)?;
                let cols = all_columns(st.children.len());
                if block.models.len() != st.children.len()
                    || block.visited.len() != n
                    || block.visited.iter().any(|v| v & !cols != 0)
                {
                    return Err(mismatch(format!("malformed models for `{}`", st.name)));
                }
                let fitted = FittedSubtask::new(block.models, block.visited, q.encoder());
                q.insert(st.id, fitted)?;
            }
            Ok(Policy::Fitted(q))
        }
    }
}

pub fn save_policy(path: &Path, policy: &Policy, dag: &TaskDag) -> Result<()> {
    write_atomic(path, policy_to_json(policy, dag)?.as_bytes())
}

pub fn load_policy(path: &Path, dag: &TaskDag) -> Result<Policy> {
    policy_from_json(&read_text(path)?, dag)
}
