use std::fmt;

use crate::hierarchy::{training_order, DagConfig, PredicateRegistry, MAX_CHILDREN};
use crate::mdp::{ActionSpace, StateSpace};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NoSubtasks,
    DuplicateSubtask(String),
    MissingRoot(String),
    EmptyChildren(String),
    TooManyChildren(String, usize),
    UnknownChild { subtask: String, child: String },
    AmbiguousChild { subtask: String, child: String },
    DuplicateChild { subtask: String, child: String },
    SelfLoop(String),
    Cycle(String),
    Unreachable(String),
    UnknownVariable { subtask: String, variable: String },
    DuplicateVariable { subtask: String, variable: String },
    Predicate { subtask: String, message: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoSubtasks => write!(f, "no subtasks"),
            Violation::DuplicateSubtask(s) => write!(f, "subtask `{s}` defined twice"),
            Violation::MissingRoot(s) => write!(f, "root `{s}` is not a subtask"),
            Violation::EmptyChildren(s) => write!(f, "subtask `{s}` has no children"),
            Violation::TooManyChildren(s, n) => write!(f, "subtask `{s}` has {n} children (max {MAX_CHILDREN})"),
            Violation::UnknownChild { subtask, child } => {
                write!(f, "child `{child}` of `{subtask}` is neither an action nor a subtask")
            }
            Violation::AmbiguousChild { subtask, child } => {
                write!(f, "child `{child}` of `{subtask}` names both an action and a subtask")
            }
            Violation::DuplicateChild { subtask, child } => write!(f, "child `{child}` listed twice in `{subtask}`"),
            Violation::SelfLoop(s) => write!(f, "subtask `{s}` lists itself as a child"),
            Violation::Cycle(s) => write!(f, "cycle through subtask `{s}`"),
            Violation::Unreachable(s) => write!(f, "subtask `{s}` is unreachable from the root"),
            Violation::UnknownVariable { subtask, variable } => {
                write!(f, "abstraction of `{subtask}` names unknown variable `{variable}`")
            }
            Violation::DuplicateVariable { subtask, variable } => {
                write!(f, "abstraction of `{subtask}` repeats `{variable}`")
            }
            Violation::Predicate { subtask, message } => write!(f, "termination of `{subtask}`: {message}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("valid");
        }
        let parts: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join("; "))
    }
}

/// Checks a DAG config against the spaces and predicate registry. Never
/// fails; every problem found is listed in the report.
pub fn validate(
    config: &DagConfig,
    states: &StateSpace,
    actions: &ActionSpace,
    registry: &dyn PredicateRegistry,
) -> ValidationReport {
    let mut v = Vec::new();
    let subtasks = &config.subtasks;
    if subtasks.is_empty() {
        v.push(Violation::NoSubtasks);
    }
    for (i, s) in subtasks.iter().enumerate() {
        if subtasks[..i].iter().any(|o| o.name == s.name) {
            v.push(Violation::DuplicateSubtask(s.name.clone()));
        }
    }
    let index_of = |name: &str| subtasks.iter().position(|s| s.name == name);
    let root = index_of(&config.root);
    if root.is_none() && !subtasks.is_empty() {
        v.push(Violation::MissingRoot(config.root.clone()));
    }

    let mut edges = vec![Vec::new(); subtasks.len()];
    for (i, s) in subtasks.iter().enumerate() {
        if s.children.is_empty() {
            v.push(Violation::EmptyChildren(s.name.clone()));
        }
        if s.children.len() > MAX_CHILDREN {
            v.push(Violation::TooManyChildren(s.name.clone(), s.children.len()));
        }
        for (k, c) in s.children.iter().enumerate() {
            if s.children[..k].contains(c) {
                v.push(Violation::DuplicateChild { subtask: s.name.clone(), child: c.clone() });
            }
            match (index_of(c), actions.index(c)) {
                (Some(_), Some(_)) => {
                    v.push(Violation::AmbiguousChild { subtask: s.name.clone(), child: c.clone() });
                }
                (Some(j), None) if j == i => v.push(Violation::SelfLoop(s.name.clone())),
                (Some(j), None) => edges[i].push(j),
                (None, Some(_)) => {}
                (None, None) => v.push(Violation::UnknownChild { subtask: s.name.clone(), child: c.clone() }),
            }
        }
        if let Some(vars) = &s.abstraction {
            for (k, name) in vars.iter().enumerate() {
                if states.var_index(name).is_none() {
                    v.push(Violation::UnknownVariable { subtask: s.name.clone(), variable: name.clone() });
                }
                if vars[..k].contains(name) {
                    v.push(Violation::DuplicateVariable { subtask: s.name.clone(), variable: name.clone() });
                }
            }
        }
        if let Err(message) = registry.resolve(&s.termination, states) {
            v.push(Violation::Predicate { subtask: s.name.clone(), message });
        }
    }

    if let Err(node) = training_order(&edges) {
        v.push(Violation::Cycle(subtasks[node].name.clone()));
    }
    if let Some(root) = root {
        let mut seen = vec![false; subtasks.len()];
        let mut stack = vec![root];
        while let Some(i) = stack.pop() {
            if !std::mem::replace(&mut seen[i], true) {
                stack.extend(edges[i].iter().copied());
            }
        }
        for (i, s) in subtasks.iter().enumerate() {
            if !seen[i] {
                v.push(Violation::Unreachable(s.name.clone()));
            }
        }
    }
    ValidationReport { violations: v }
}
