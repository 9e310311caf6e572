use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::mdp::StateSpace;

/// Termination predicate over decoded variable tuples.
pub type TerminationFn = Box<dyn Fn(&[usize]) -> bool + Send + Sync>;

/// A named predicate with positional arguments, written `name` or
/// `name(arg, ...)` in config files.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PredicateSpec {
    pub name: String,
    pub args: Vec<String>,
}

impl PredicateSpec {
    pub fn new(name: impl Into<String>, args: &[&str]) -> Self {
        PredicateSpec { name: name.into(), args: args.iter().map(|a| a.to_string()).collect() }
    }

    pub fn never() -> Self {
        PredicateSpec::new("never", &[])
    }
}

impl FromStr for PredicateSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self, Error> {
        let text = text.trim();
        let valid_ident = |s: &str| !s.is_empty() && s.chars().all(|c| c.is_alphanumeric() || c == '_');
        let (name, args) = match text.find('(') {
            None => (text, Vec::new()),
            Some(open) => {
                let inner = text[open + 1..]
                    .strip_suffix(')')
                    .ok_or_else(|| Error::config(format!("predicate `{text}` is missing `)`")))?;
                let args = if inner.trim().is_empty() {
                    Vec::new()
                } else {
                    inner.split(',').map(|a| a.trim().to_string()).collect()
                };
                (text[..open].trim(), args)
            }
        };
        if !valid_ident(name) || args.iter().any(|a| !valid_ident(a)) {
            return Err(Error::config(format!("malformed predicate `{text}`")));
        }
        Ok(PredicateSpec { name: name.to_string(), args })
    }
}

impl TryFrom<String> for PredicateSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self, Error> {
        s.parse()
    }
}

impl From<PredicateSpec> for String {
    fn from(p: PredicateSpec) -> Self {
        p.to_string()
    }
}

impl fmt::Display for PredicateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.args.is_empty() {
            f.write_str(&self.name)
        } else {
            write!(f, "{}({})", self.name, self.args.join(", "))
        }
    }
}

/// Resolves predicate names to functions for a given state space.
pub trait PredicateRegistry {
    fn resolve(&self, spec: &PredicateSpec, space: &StateSpace) -> Result<TerminationFn, String>;
}

/// Domain-independent predicates: `never`, `var_equals(var, value)` and
/// `var_not_equals(var, value)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct BasicPredicates;

impl PredicateRegistry for BasicPredicates {
    fn resolve(&self, spec: &PredicateSpec, space: &StateSpace) -> Result<TerminationFn, String> {
        let var_value = |args: &[String]| -> Result<(usize, usize), String> {
            let var = space
                .var_index(&args[0])
                .ok_or_else(|| format!("state variable `{}` missing", args[0]))?;
            let value: usize = args[1].parse().map_err(|_| format!("`{}` is not an integer", args[1]))?;
            Ok((var, value))
        };
        match (spec.name.as_str(), spec.args.len()) {
            ("never", 0) => Ok(Box::new(|_: &[usize]| false)),
            ("var_equals", 2) => {
                let (var, value) = var_value(&spec.args)?;
                Ok(Box::new(move |v: &[usize]| v[var] == value))
            }
            ("var_not_equals", 2) => {
                let (var, value) = var_value(&spec.args)?;
                Ok(Box::new(move |v: &[usize]| v[var] != value))
            }
            _ => Err(format!("unknown predicate `{spec}`")),
        }
    }
}
