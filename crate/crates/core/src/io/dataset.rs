//! Dataset text format, one experience per line:
//!
//! ```text
//! # hqi-dataset v1
//! # vars dest:4 pass:5 x:5 y:5
//! # actions north south east west pickup putdown
//! 1 0 2 3 north -1 1 0 2 4 0
//! ```
//!
//! A record lists the state's variable values, the action name, the
//! reward, the next state's values and a 0/1 terminal flag. Rewards are
//! written in shortest round-trip form.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{read_text, write_atomic};
use crate::mdp::{ActionSpace, Dataset, Experience, StateSpace};

pub const DATASET_FORMAT: &str = "hqi-dataset";
pub const DATASET_VERSION: u32 = 1;

fn check_token(kind: &str, name: &str) -> Result<()> {
    if name.is_empty() || name.chars().any(|c| c.is_whitespace() || c == ':' || c == '#') {
        return Err(Error::schema(format!("{kind} name `{name}` cannot be written to a dataset file")));
    }
    Ok(())
}

pub fn format_dataset(data: &Dataset) -> Result<String> {
    let states = data.states();
    let actions = data.actions();
    for v in states.variables() {
        check_token("variable", &v.name)?;
    }
    for a in actions.names() {
        check_token("action", a)?;
    }
    let mut out = format!("# {DATASET_FORMAT} v{DATASET_VERSION}\n# vars");
    for v in states.variables() {
        let _ = write!(out, " {}:{}", v.name, v.cardinality);
    }
    out.push_str("\n# actions");
    for a in actions.names() {
        let _ = write!(out, " {a}");
    }
    out.push('\n');
    let push_state = |out: &mut String, s: usize| {
        for v in 0..states.variables().len() {
            let _ = write!(out, "{} ", states.digit(s, v));
        }
    };
    for e in data.records() {
        push_state(&mut out, e.s);
        let _ = write!(out, "{} {} ", actions.name(e.a), e.r);
        push_state(&mut out, e.s_next);
        out.push_str(if e.terminal { "1\n" } else { "0\n" });
    }
    Ok(out)
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    write_atomic(path, format_dataset(data)?.as_bytes())
}

/// Parses a dataset file; `path` only labels errors.
pub fn parse_dataset(text: &str, path: &Path) -> Result<Dataset> {
    let err = |line: usize, message: String| Error::Parse { path: path.to_path_buf(), line, message };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let expected = format!("# {DATASET_FORMAT} v{DATASET_VERSION}");
    match lines.next() {
        Some((_, l)) if l.trim_end() == expected => {}
        Some((n, l)) => return Err(err(n, format!("expected `{expected}`, found `{l}`"))),
        None => return Err(err(1, "empty file".into())),
    }
    let (n, vars) = lines.next().ok_or_else(|| err(2, "missing `# vars` header".into()))?;
    let vars = vars.strip_prefix("# vars").ok_or_else(|| err(n, "expected `# vars` header".into()))?;
    let mut variables = Vec::new();
    for tok in vars.split_whitespace() {
        let (name, card) = tok.split_once(':').ok_or_else(|| err(n, format!("variable `{tok}` lacks `:cardinality`")))?;
        let card: usize = card.parse().map_err(|_| err(n, format!("bad cardinality in `{tok}`")))?;
        variables.push((name.to_string(), card));
    }
    let states = StateSpace::new(variables).map_err(|e| err(n, e.to_string()))?;
    let (n, acts) = lines.next().ok_or_else(|| err(3, "missing `# actions` header".into()))?;
    let acts = acts.strip_prefix("# actions").ok_or_else(|| err(n, "expected `# actions` header".into()))?;
    let actions = ActionSpace::new(acts.split_whitespace()).map_err(|e| err(n, e.to_string()))?;

    let k = states.variables().len();
    let mut data = Dataset::new(states.clone(), actions.clone());
    let mut digits = vec![0usize; k];
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 * k + 3 {
            return Err(err(n, format!("expected {} fields, found {}", 2 * k + 3, fields.len())));
        }
        let mut state = |at: usize| -> Result<usize> {
            for (i, d) in digits.iter_mut().enumerate() {
                *d = fields[at + i].parse().map_err(|_| err(n, format!("bad variable value `{}`", fields[at + i])))?;
            }
            states.encode(&digits).map_err(|e| err(n, e.to_string()))
        };
        let s = state(0)?;
        let s_next = state(k + 2)?;
        let a = actions.index(fields[k]).ok_or_else(|| err(n, format!("unknown action `{}`", fields[k])))?;
        let r: f64 = fields[k + 1].parse().map_err(|_| err(n, format!("bad reward `{}`", fields[k + 1])))?;
        if !r.is_finite() {
            return Err(err(n, format!("non-finite reward `{}`", fields[k + 1])));
        }
        let terminal = match fields[2 * k + 2] {
            "0" => false,
            "1" => true,
            other => return Err(err(n, format!("terminal flag must be 0 or 1, found `{other}`"))),
        };
        data.push(Experience { s, a, r, s_next, terminal }).map_err(|e| err(n, e.to_string()))?;
    }
    Ok(data)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    parse_dataset(&read_text(path)?, path)
}

/// Rejects a dataset whose header differs from the expected spaces.
pub fn check_schema(data: &Dataset, states: &StateSpace, actions: &ActionSpace) -> Result<()> {
    if data.states() != states {
        return Err(Error::schema(format!(
            "dataset variables {:?} differ from {:?}",
            data.states().variables(),
            states.variables()
        )));
    }
    if data.actions() != actions {
        return Err(Error::schema(format!(
            "dataset actions {:?} differ from {:?}",
            data.actions().names(),
            actions.names()
        )));
    }
    Ok(())
}
