//! Built-in decompositions of the Taxi task.
//!
//! `dag1` is the get/put/navigate hierarchy with per-subtask state
//! abstraction. `dag2` and `dag3` are reconstructions of two alternative
//! shapes: `dag2` mixes pickup/putdown with the move actions inside get and
//! put, `dag3` keeps pickup/putdown at the root above one shared navigate
//! subtask. Neither uses state abstraction. `flat` is a single root over all
//! primitives.

use crate::hierarchy::{DagConfig, PredicateSpec, SubtaskConfig};
use crate::mdp::ActionSpace;

pub const BUILTIN_NAMES: [&str; 4] = ["dag1", "dag2", "dag3", "flat"];

const MOVES: [&str; 4] = ["north", "south", "east", "west"];

fn subtask(name: &str, children: &[&str], termination: PredicateSpec, abstraction: Option<&[&str]>) -> SubtaskConfig {
    SubtaskConfig {
        name: name.into(),
        children: children.iter().map(|c| c.to_string()).collect(),
        termination,
        abstraction: abstraction.map(|vars| vars.iter().map(|v| v.to_string()).collect()),
    }
}

fn with_moves(extra: &str) -> Vec<&str> {
    let mut v = MOVES.to_vec();
    v.push(extra);
    v
}

pub fn dag1() -> DagConfig {
    DagConfig {
        name: "dag1".into(),
        root: "root".into(),
        subtasks: vec![
            subtask("root", &["get", "put"], PredicateSpec::never(), Some(&["pass"])),
            subtask(
                "get",
                &["pickup", "navi_get"],
                PredicateSpec::new("passenger_in_taxi", &[]),
                Some(&["pass", "x", "y"]),
            ),
            subtask(
                "put",
                &["putdown", "navi_put"],
                PredicateSpec::new("passenger_not_in_taxi", &[]),
                Some(&["dest", "x", "y"]),
            ),
            subtask("navi_get", &MOVES, PredicateSpec::new("at_landmark", &["pass"]), Some(&["pass", "x", "y"])),
            subtask("navi_put", &MOVES, PredicateSpec::new("at_landmark", &["dest"]), Some(&["dest", "x", "y"])),
        ],
    }
}

pub fn dag2() -> DagConfig {
    DagConfig {
        name: "dag2".into(),
        root: "root".into(),
        subtasks: vec![
            subtask("root", &["get", "put"], PredicateSpec::never(), None),
            subtask("get", &with_moves("pickup"), PredicateSpec::new("passenger_in_taxi", &[]), None),
            subtask("put", &with_moves("putdown"), PredicateSpec::new("passenger_not_in_taxi", &[]), None),
        ],
    }
}

pub fn dag3() -> DagConfig {
    DagConfig {
        name: "dag3".into(),
        root: "root".into(),
        subtasks: vec![
            subtask("root", &["navigate", "pickup", "putdown"], PredicateSpec::never(), None),
            subtask("navigate", &MOVES, PredicateSpec::new("at_target", &[]), None),
        ],
    }
}

/// One root over every primitive action, full state, ended only by the
/// environment.
pub fn flat(actions: &ActionSpace) -> DagConfig {
    let children: Vec<&str> = actions.names().iter().map(String::as_str).collect();
    DagConfig {
        name: "flat".into(),
        root: "root".into(),
        subtasks: vec![subtask("root", &children, PredicateSpec::never(), None)],
    }
}

pub fn builtin(name: &str, actions: &ActionSpace) -> Option<DagConfig> {
    match name {
        "dag1" => Some(dag1()),
        "dag2" => Some(dag2()),
        "dag3" => Some(dag3()),
        "flat" => Some(flat(actions)),
        _ => None,
    }
}

pub fn builtin_dags(actions: &ActionSpace) -> Vec<DagConfig> {
    BUILTIN_NAMES.iter().map(|n| builtin(n, actions).unwrap()).collect()
}
