//! Task hierarchies: subtask DAGs over primitive actions.
//!
//! A [`DagConfig`] is the declarative form read from files. Binding it to a
//! state space, an action space and a [`PredicateRegistry`] yields a
//! [`TaskDag`], which carries resolved children, projections and a
//! termination table per subtask.

mod builtin;
mod predicate;
mod validate;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Abstraction, ActionSpace, StateSpace};

pub use builtin::{builtin, builtin_dags, dag1, dag2, dag3, flat, BUILTIN_NAMES};
pub use predicate::{BasicPredicates, PredicateRegistry, PredicateSpec, TerminationFn};
pub use validate::{validate, ValidationReport, Violation};

/// Most children a subtask may have; admissibility sets are bitmasks.
pub const MAX_CHILDREN: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DagConfig {
    pub name: String,
    pub root: String,
    #[serde(rename = "subtask")]
    pub subtasks: Vec<SubtaskConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubtaskConfig {
    pub name: String,
    /// Primitive action names or subtask names, in tie-break order.
    pub children: Vec<String>,
    pub termination: PredicateSpec,
    /// State variables the subtask's Q-table is indexed by; all when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abstraction: Option<Vec<String>>,
}

impl DagConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("dag config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("dag config serializes")
    }

    /// Same DAG with every subtask indexed by the full state.
    pub fn without_abstraction(&self) -> DagConfig {
        let mut out = self.clone();
        for s in &mut out.subtasks {
            s.abstraction = None;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SubtaskId(pub usize);

impl fmt::Display for SubtaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Child {
    Primitive(usize),
    Subtask(SubtaskId),
}

pub struct Subtask {
    pub id: SubtaskId,
    pub name: String,
    pub children: Vec<Child>,
    pub termination: PredicateSpec,
    pub abstraction: Abstraction,
    terminal: Vec<bool>,
}

impl Subtask {
    /// β_i(s).
    #[inline]
    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn terminal_states(&self) -> &[bool] {
        &self.terminal
    }

    pub fn has_only_primitive_children(&self) -> bool {
        self.children.iter().all(|c| matches!(c, Child::Primitive(_)))
    }
}

impl fmt::Debug for Subtask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Subtask")
            .field("id", &self.id)
            .field("name", &self.name)
            .field("children", &self.children)
            .field("termination", &self.termination.to_string())
            .field("abstraction", &self.abstraction.vars())
            .finish()
    }
}

/// A validated hierarchy bound to concrete spaces.
#[derive(Debug)]
pub struct TaskDag {
    config: DagConfig,
    states: StateSpace,
    actions: ActionSpace,
    subtasks: Vec<Subtask>,
    root: SubtaskId,
}

impl TaskDag {
    pub fn build(
        config: DagConfig,
        states: &StateSpace,
        actions: &ActionSpace,
        registry: &dyn PredicateRegistry,
    ) -> Result<Self> {
        let report = validate(&config, states, actions, registry);
        if !report.is_valid() {
            return Err(Error::Hierarchy(format!("`{}`: {report}", config.name)));
        }
        let index_of = |name: &str| config.subtasks.iter().position(|s| s.name == name);
        let mut subtasks = Vec::with_capacity(config.subtasks.len());
        for (i, sc) in config.subtasks.iter().enumerate() {
            let children = sc
                .children
                .iter()
                .map(|c| match index_of(c) {
                    Some(j) => Child::Subtask(SubtaskId(j)),
                    None => Child::Primitive(actions.index(c).expect("validated child")),
                })
                .collect();
            let mask: Vec<usize> = match &sc.abstraction {
                Some(vars) => vars.iter().map(|v| states.var_index(v).expect("validated variable")).collect(),
                None => (0..states.variables().len()).collect(),
            };
            let predicate = registry
                .resolve(&sc.termination, states)
                .map_err(|e| Error::Hierarchy(format!("subtask `{}`: {e}", sc.name)))?;
            let terminal = (0..states.len()).map(|s| predicate(&states.decode_unchecked(s))).collect();
            subtasks.push(Subtask {
                id: SubtaskId(i),
                name: sc.name.clone(),
                children,
                termination: sc.termination.clone(),
                abstraction: Abstraction::new(states, &mask)?,
                terminal,
            });
        }
        let root = SubtaskId(index_of(&config.root).expect("validated root"));
        Ok(TaskDag { config, states: states.clone(), actions: actions.clone(), subtasks, root })
    }

    pub fn name(&self) -> &str {
        &self.config.name
    }

    pub fn config(&self) -> &DagConfig {
        &self.config
    }

    pub fn states(&self) -> &StateSpace {
        &self.states
    }

    pub fn actions(&self) -> &ActionSpace {
        &self.actions
    }

    pub fn root(&self) -> SubtaskId {
        self.root
    }

    pub fn subtasks(&self) -> &[Subtask] {
        &self.subtasks
    }

    pub fn subtask(&self, id: SubtaskId) -> &Subtask {
        &self.subtasks[id.0]
    }

    pub fn find(&self, name: &str) -> Option<SubtaskId> {
        self.subtasks.iter().find(|s| s.name == name).map(|s| s.id)
    }

    pub fn len(&self) -> usize {
        self.subtasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subtasks.is_empty()
    }

    pub fn child_name(&self, child: Child) -> &str {
        match child {
            Child::Primitive(a) => self.actions.name(a),
            Child::Subtask(id) => &self.subtasks[id.0].name,
        }
    }

    /// β_u(s) for a child; primitive actions always terminate after one step.
    #[inline]
    pub fn child_terminates(&self, child: Child, s: usize) -> bool {
        match child {
            Child::Primitive(_) => true,
            Child::Subtask(id) => self.subtasks[id.0].is_terminal(s),
        }
    }

    /// A child may be invoked at `s` unless it is a subtask already
    /// terminated there.
    #[inline]
    pub fn child_admissible(&self, child: Child, s: usize) -> bool {
        match child {
            Child::Primitive(_) => true,
            Child::Subtask(id) => !self.subtasks[id.0].is_terminal(s),
        }
    }

    /// Bitmask of the children of `subtask` admissible at `s`, or of all
    /// children when none is.
    pub fn admissible_mask(&self, subtask: SubtaskId, s: usize) -> u64 {
        let children = &self.subtasks[subtask.0].children;
        let mask = children
            .iter()
            .enumerate()
            .filter(|(_, &c)| self.child_admissible(c, s))
            .fold(0u64, |m, (i, _)| m | (1 << i));
        if mask == 0 {
            full_mask(children.len())
        } else {
            mask
        }
    }

    /// Subtasks in children-before-parents order.
    pub fn training_order(&self) -> Result<Vec<SubtaskId>> {
        let edges: Vec<Vec<usize>> = self
            .subtasks
            .iter()
            .map(|s| {
                s.children
                    .iter()
                    .filter_map(|c| match c {
                        Child::Subtask(id) => Some(id.0),
                        Child::Primitive(_) => None,
                    })
                    .collect()
            })
            .collect();
        training_order(&edges)
            .map(|order| order.into_iter().map(SubtaskId).collect())
            .map_err(|cycle| Error::Hierarchy(format!("cycle through subtask `{}`", self.subtasks[cycle].name)))
    }

    /// Number of subtasks on the longest root-to-leaf path; the bound on
    /// the execution stack.
    pub fn depth(&self) -> usize {
        fn go(dag: &TaskDag, id: SubtaskId, memo: &mut Vec<Option<usize>>) -> usize {
            if let Some(d) = memo[id.0] {
                return d;
            }
            let d = 1 + dag.subtasks[id.0]
                .children
                .iter()
                .filter_map(|c| match c {
                    Child::Subtask(child) => Some(go(dag, *child, memo)),
                    Child::Primitive(_) => None,
                })
                .max()
                .unwrap_or(0);
            memo[id.0] = Some(d);
            d
        }
        go(self, self.root, &mut vec![None; self.subtasks.len()])
    }
}

pub(crate) fn full_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Topological order of the child-to-parent graph: every node appears
/// after all of its children. `children[i]` lists the node children of node
/// `i`. Nodes are emitted in waves: first every node with no node children,
/// then every node whose children are all emitted, and so on; each wave in
/// ascending index order. On a cycle, returns a node on it.
pub fn training_order(children: &[Vec<usize>]) -> std::result::Result<Vec<usize>, usize> {
    let n = children.len();
    let mut pending: Vec<usize> = children.iter().map(|c| c.iter().collect::<BTreeSet<_>>().len()).collect();
    let mut parents = vec![Vec::new(); n];
    for (p, cs) in children.iter().enumerate() {
        for &c in cs.iter().collect::<BTreeSet<_>>() {
            parents[c].push(p);
        }
    }
    let mut wave: Vec<usize> = (0..n).filter(|&i| pending[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while !wave.is_empty() {
        let mut next = Vec::new();
        for &i in &wave {
            for &p in &parents[i] {
                pending[p] -= 1;
                if pending[p] == 0 {
                    next.push(p);
                }
            }
        }
        order.append(&mut wave);
        next.sort_unstable();
        wave = next;
    }
    if order.len() < n {
        return Err((0..n).find(|&i| pending[i] > 0).unwrap());
    }
    Ok(order)
}
