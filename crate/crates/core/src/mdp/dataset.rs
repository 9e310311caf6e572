use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{ActionSpace, StateSpace};

/// One flat transition `(s, a, r, s', terminal)`. `terminal` marks the end of
/// the environment episode; `s_next` is still a live state index then, but no
/// continuation value is ever read from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub s: usize,
    pub a: usize,
    pub r: f64,
    pub s_next: usize,
    pub terminal: bool,
}

/// An ordered batch of experiences over fixed state and action spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    states: StateSpace,
    actions: ActionSpace,
    records: Vec<Experience>,
}

impl Dataset {
    pub fn new(states: StateSpace, actions: ActionSpace) -> Self {
        Dataset { states, actions, records: Vec::new() }
    }

    pub fn from_records(
        states: StateSpace,
        actions: ActionSpace,
        records: Vec<Experience>,
    ) -> Result<Self> {
        let mut data = Dataset::new(states, actions);
        data.records.reserve(records.len());
        for e in records {
            data.push(e)?;
        }
        Ok(data)
    }

    pub fn push(&mut self, e: Experience) -> Result<()> {
        if e.s >= self.states.len() || e.s_next >= self.states.len() {
            return Err(Error::domain(format!(
                "experience state outside 0..{}: s={}, s'={}",
                self.states.len(),
                e.s,
                e.s_next
            )));
        }
        if e.a >= self.actions.len() {
            return Err(Error::domain(format!("action {} outside 0..{}", e.a, self.actions.len())));
        }
        if !e.r.is_finite() {
            return Err(Error::domain("reward must be finite"));
        }
        self.records.push(e);
        Ok(())
    }

    pub fn states(&self) -> &StateSpace {
        &self.states
    }

    pub fn actions(&self) -> &ActionSpace {
        &self.actions
    }

    pub fn records(&self) -> &[Experience] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// The first `n` records (all of them if `n` exceeds the length).
    pub fn prefix(&self, n: usize) -> Dataset {
        Dataset {
            states: self.states.clone(),
            actions: self.actions.clone(),
            records: self.records[..n.min(self.records.len())].to_vec(),
        }
    }

    /// (min, max) reward, both widened to include 0.
    pub fn reward_range(&self) -> (f64, f64) {
        self.records
            .iter()
            .fold((0.0f64, 0.0f64), |(lo, hi), e| (lo.min(e.r), hi.max(e.r)))
    }
}
