//! The one-step intra-option backup shared by tabular and fitted SQI.
//!
//! For subtask i, experience (s, a, r, s') and child u, the sample is used
//! only if s is active for i, u may be invoked at s, and u's greedy
//! primitive at s is a. The target is then
//!
//! ```text
//! y = r                                                     if s' ends i
//! y = r + γ [(1 − β_u(s')) Q(s', u) + β_u(s') max_u' Q(s', u')]   otherwise
//! ```
//!
//! with β_u ≡ 1 for primitive u and the max taken over children
//! admissible at s'. Learners narrow that max to the children that receive
//! updates at s' (see [`BackupContext::plan_known`]).

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::hierarchy::{Child, SubtaskId, TaskDag};
use crate::mdp::{known, Dataset, Experience};
use crate::tabular::greedy::{greedy_policy, max_in_mask, QFunction};

/// Whether the greedy-consistency filter also guards the terminal branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminalCheck {
    /// Terminal-branch updates also require the child to have taken `a`.
    #[default]
    Consistent,
    /// Terminal-branch updates apply to every admissible child.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Continuation {
    /// s' ends the subtask or the episode.
    Terminal,
    /// The child keeps running at s': Q(s', u).
    SameChild { s_next: usize },
    /// The child terminated at s': max over the admissible children.
    MaxOver { s_next: usize, mask: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Backup {
    pub reward: f64,
    pub continuation: Continuation,
}

impl Backup {
    /// y given the subtask's previous value function `q_prev(s', child)`.
    #[inline]
    pub fn target(&self, gamma: f64, q_prev: impl Fn(usize, usize) -> f64, child: usize) -> f64 {
        match self.continuation {
            Continuation::Terminal => self.reward,
            Continuation::SameChild { s_next } => self.reward + gamma * q_prev(s_next, child),
            Continuation::MaxOver { s_next, mask } => {
                self.reward + gamma * max_in_mask(mask, |c| q_prev(s_next, c))
            }
        }
    }
}

/// Per-subtask state needed to classify samples: the frozen greedy
/// primitive of every child at every state.
pub struct BackupContext<'a> {
    dag: &'a TaskDag,
    subtask: SubtaskId,
    greedy: Vec<Vec<usize>>,
    check: TerminalCheck,
}

impl<'a> BackupContext<'a> {
    /// `children` must hold value functions for every subtask child.
    pub fn new<Q: QFunction + ?Sized>(
        dag: &'a TaskDag,
        subtask: SubtaskId,
        children: &Q,
        check: TerminalCheck,
    ) -> Result<Self> {
        let n = dag.states().len();
        let greedy = dag
            .subtask(subtask)
            .children
            .iter()
            .map(|&u| match u {
                Child::Primitive(a) => Ok(vec![a; n]),
                Child::Subtask(_) => (0..n).map(|s| greedy_policy(children, dag, u, s).map(|g| g.action)).collect(),
            })
            .collect::<Result<_>>()?;
        Ok(BackupContext { dag, subtask, greedy, check })
    }

    pub fn dag(&self) -> &TaskDag {
        self.dag
    }

    pub fn subtask(&self) -> SubtaskId {
        self.subtask
    }

    pub fn n_children(&self) -> usize {
        self.greedy.len()
    }

    /// Greedy primitive of child `child` at `s`.
    pub fn child_action(&self, child: usize, s: usize) -> usize {
        self.greedy[child][s]
    }

    /// The sample's backup for `child`, or `None` if the sample is skipped.
    pub fn classify(&self, e: &Experience, child: usize) -> Option<Backup> {
        let st = self.dag.subtask(self.subtask);
        if st.is_terminal(e.s) {
            return None;
        }
        let u = st.children[child];
        if !self.dag.child_admissible(u, e.s) {
            return None;
        }
        let consistent = self.greedy[child][e.s] == e.a;
        if e.terminal || st.is_terminal(e.s_next) {
            if !consistent && self.check == TerminalCheck::Consistent {
                return None;
            }
            return Some(Backup { reward: e.r, continuation: Continuation::Terminal });
        }
        if !consistent {
            return None;
        }
        let continuation = if self.dag.child_terminates(u, e.s_next) {
            Continuation::MaxOver { s_next: e.s_next, mask: self.dag.admissible_mask(self.subtask, e.s_next) }
        } else {
            Continuation::SameChild { s_next: e.s_next }
        };
        Some(Backup { reward: e.r, continuation })
    }

    /// Every non-skipped (experience, child) pair, in dataset order.
    pub fn plan(&self, data: &Dataset) -> Vec<PlannedBackup> {
        let mut out = Vec::new();
        for e in data.records() {
            for child in 0..self.n_children() {
                if let Some(backup) = self.classify(e, child) {
                    debug_assert!(
                        self.check == TerminalCheck::Literal || self.greedy[child][e.s] == e.a,
                        "update for a child that did not take the observed action"
                    );
                    out.push(PlannedBackup { s: e.s, child, backup });
                }
            }
        }
        out
    }

    /// [`Self::plan`] plus the children updated at each table row, with
    /// every max narrowed to the children updated at the successor's row.
    /// `row_of` maps a state to its row among `n_rows`.
    pub fn plan_known(&self, data: &Dataset, row_of: impl Fn(usize) -> usize, n_rows: usize) -> (Vec<PlannedBackup>, Vec<u64>) {
        let mut plans = self.plan(data);
        let mut visited = vec![0u64; n_rows];
        for p in &plans {
            visited[row_of(p.s)] |= 1 << p.child;
        }
        for p in &mut plans {
            if let Continuation::MaxOver { s_next, mask } = &mut p.backup.continuation {
                *mask = known(*mask, visited[row_of(*s_next)]);
            }
        }
        (plans, visited)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannedBackup {
    pub s: usize,
    pub child: usize,
    pub backup: Backup,
}

/// Backup target of one experience for one child, or `None` (skip).
pub fn backup_target(
    ctx: &BackupContext<'_>,
    e: &Experience,
    child: usize,
    gamma: f64,
    q_prev: impl Fn(usize, usize) -> f64,
) -> Option<f64> {
    ctx.classify(e, child).map(|b| b.target(gamma, q_prev, child))
}
