use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::{flat, BasicPredicates, SubtaskId, TaskDag};
use crate::mdp::{Dataset, QTable};
use crate::tabular::backup::{BackupContext, Continuation, TerminalCheck};
use crate::tabular::greedy::{max_in_mask, QFunction};

/// Step size of the stochastic update Q ← (1 − α) Q + α y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaSchedule {
    /// α = 1 / (1 + n(s, u)) with n counted within the current sweep, so
    /// every sweep replaces Q(s, u) by the mean of its targets.
    VisitCount,
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub alpha: AlphaSchedule,
    pub max_iter: usize,
    /// Stop once a sweep changes no entry by more than this.
    pub convergence_tol: f64,
    pub gamma: f64,
    pub terminal_check: TerminalCheck,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            alpha: AlphaSchedule::VisitCount,
            max_iter: 500,
            convergence_tol: 1e-6,
            gamma: 0.99,
            terminal_check: TerminalCheck::Consistent,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if let AlphaSchedule::Constant(a) = self.alpha {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::config(format!("alpha {a} outside (0, 1]")));
            }
        }
        if !(self.convergence_tol >= 0.0) {
            return Err(Error::config("convergence_tol must be nonnegative"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config(format!("gamma {} outside (0, 1]", self.gamma)));
        }
        if self.max_iter == 0 {
            return Err(Error::config("max_iter must be positive"));
        }
        Ok(())
    }
}

/// One Q-table per subtask, indexed through that subtask's abstraction.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalQ {
    tables: Vec<Option<QTable>>,
    projections: Vec<Vec<usize>>,
}

impl HierarchicalQ {
    pub fn new(dag: &TaskDag) -> Self {
        HierarchicalQ {
            tables: vec![None; dag.len()],
            projections: dag.subtasks().iter().map(|st| st.abstraction.table(dag.states())).collect(),
        }
    }

    /// Attach a table, checking its shape against the subtask.
    pub fn insert(&mut self, dag: &TaskDag, id: SubtaskId, table: QTable) -> Result<()> {
        let st = dag.subtask(id);
        let full = st.abstraction.vars().len() == dag.states().variables().len();
        let mask_ok = table.mask() == st.abstraction.vars() || (full && table.mask().is_empty());
        if table.rows() != st.abstraction.len() || table.cols() != st.children.len() || !mask_ok {
            return Err(Error::schema(format!(
                "table {}x{} over {:?} does not fit subtask `{}` ({}x{} over {:?})",
                table.rows(),
                table.cols(),
                table.mask(),
                st.name,
                st.abstraction.len(),
                st.children.len(),
                st.abstraction.vars()
            )));
        }
        self.tables[id.0] = Some(table);
        Ok(())
    }

    pub fn table(&self, id: SubtaskId) -> Option<&QTable> {
        self.tables[id.0].as_ref()
    }

    pub fn tables(&self) -> impl Iterator<Item = (SubtaskId, &QTable)> {
        self.tables.iter().enumerate().filter_map(|(i, t)| t.as_ref().map(|t| (SubtaskId(i), t)))
    }

    pub fn is_complete(&self) -> bool {
        self.tables.iter().all(Option::is_some)
    }
}

impl QFunction for HierarchicalQ {
    fn has(&self, subtask: SubtaskId) -> bool {
        self.tables[subtask.0].is_some()
    }

    #[inline]
    fn q(&self, subtask: SubtaskId, s: usize, child: usize) -> f64 {
        self.tables[subtask.0]
            .as_ref()
            .expect("value function requested for an untrained subtask")
            .get(self.projections[subtask.0][s], child)
    }

    #[inline]
    fn visited(&self, subtask: SubtaskId, s: usize) -> u64 {
        self.tables[subtask.0]
            .as_ref()
            .expect("value function requested for an untrained subtask")
            .visited(self.projections[subtask.0][s])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqiReport {
    pub subtask: String,
    pub sweeps: usize,
    pub converged: bool,
    pub final_delta: f64,
    /// Non-skipped (experience, child) pairs per sweep.
    pub updates_per_sweep: usize,
}

#[derive(Debug, Clone)]
pub struct SqiOutcome {
    pub table: QTable,
    pub report: SqiReport,
}

/// Admissible range of Q-values implied by the reward range, or `None`
/// without discounting.
pub(crate) fn value_bounds(data: &Dataset, gamma: f64) -> Option<(f64, f64)> {
    (gamma < 1.0).then(|| {
        let (lo, hi) = data.reward_range();
        (lo / (1.0 - gamma), hi / (1.0 - gamma))
    })
}

pub(crate) fn check_bounds(name: &str, values: &[f64], bounds: Option<(f64, f64)>) -> Result<()> {
    let Some((lo, hi)) = bounds else { return Ok(()) };
    let slack = 1e-9 * (hi - lo).abs().max(1.0);
    match values.iter().find(|v| !(**v >= lo - slack && **v <= hi + slack)) {
        Some(&value) => Err(Error::ValueOutOfBounds { subtask: name.to_string(), value, lo, hi }),
        None => Ok(()),
    }
}

#[derive(Clone, Copy)]
enum Cont {
    Terminal,
    Same(usize),
    Max(usize, u64),
}

#[derive(Clone, Copy)]
struct Update {
    cell: usize,
    row_next: Cont,
    reward: f64,
}

/// Subtask Q-value iteration: synchronous sweeps over the dataset, each
/// reading targets from the previous sweep's table.
///
/// All subtask children of `subtask` must already have tables in `hq`.
pub fn sqi(dag: &TaskDag, subtask: SubtaskId, data: &Dataset, hq: &HierarchicalQ, cfg: &LearnerConfig) -> Result<SqiOutcome> {
    cfg.validate()?;
    let st = dag.subtask(subtask);
    let ctx = BackupContext::new(dag, subtask, hq, cfg.terminal_check)?;
    let proj = st.abstraction.table(dag.states());
    let cols = st.children.len();
    let (plans, visited) = ctx.plan_known(data, |s| proj[s], st.abstraction.len());
    let updates: Vec<Update> = plans
        .into_iter()
        .map(|p| Update {
            cell: proj[p.s] * cols + p.child,
            row_next: match p.backup.continuation {
                Continuation::Terminal => Cont::Terminal,
                Continuation::SameChild { s_next } => Cont::Same(proj[s_next] * cols + p.child),
                Continuation::MaxOver { s_next, mask } => Cont::Max(proj[s_next] * cols, mask),
            },
            reward: p.backup.reward,
        })
        .collect();

    let bounds = value_bounds(data, cfg.gamma);
    let gamma = cfg.gamma;
    let mut table = QTable::for_abstraction(&st.abstraction, cols);
    for (row, &v) in visited.iter().enumerate() {
        table.set_visited(row, v);
    }
    let mut counts = vec![0u32; table.values().len()];
    let mut report = SqiReport {
        subtask: st.name.clone(),
        sweeps: 0,
        converged: false,
        final_delta: f64::INFINITY,
        updates_per_sweep: updates.len(),
    };
    for sweep in 1..=cfg.max_iter {
        let prev = table.clone();
        let prev_values = prev.values();
        counts.iter_mut().for_each(|c| *c = 0);
        let next = table.values_mut();
        for u in &updates {
            let y = u.reward
                + match u.row_next {
                    Cont::Terminal => 0.0,
                    Cont::Same(cell) => gamma * prev_values[cell],
                    Cont::Max(row, mask) => gamma * max_in_mask(mask, |c| prev_values[row + c]),
                };
            let q = &mut next[u.cell];
            match cfg.alpha {
                AlphaSchedule::VisitCount => {
                    counts[u.cell] += 1;
                    match counts[u.cell] {
                        1 => *q = y,
                        n => *q += (y - *q) / n as f64,
                    }
                }
                AlphaSchedule::Constant(alpha) => *q = (1.0 - alpha) * *q + alpha * y,
            }
        }
        check_bounds(&st.name, table.values(), bounds)?;
        let delta = table.max_abs_diff(&prev);
        report.sweeps = sweep;
        report.final_delta = delta;
        if delta <= cfg.convergence_tol {
            report.converged = true;
            break;
        }
    }
    Ok(SqiOutcome { table, report })
}

#[derive(Debug, Clone)]
pub struct HqiOutcome {
    pub q: HierarchicalQ,
    pub order: Vec<SubtaskId>,
    pub reports: Vec<SqiReport>,
}

/// Hierarchical Q-value iteration: SQI on every subtask, children first.
pub fn hqi(dag: &TaskDag, data: &Dataset, cfg: &LearnerConfig) -> Result<HqiOutcome> {
    if data.is_empty() {
        return Err(Error::domain("cannot train on an empty dataset"));
    }
    if data.states() != dag.states() || data.actions() != dag.actions() {
        return Err(Error::schema("dataset spaces differ from the hierarchy's spaces"));
    }
    let order = dag.training_order()?;
    let mut q = HierarchicalQ::new(dag);
    let mut reports = Vec::with_capacity(order.len());
    for &id in &order {
        let out = sqi(dag, id, data, &q, cfg)?;
        q.insert(dag, id, out.table)?;
        reports.push(out.report);
    }
    Ok(HqiOutcome { q, order, reports })
}

/// Flat batch Q-value iteration: HQI on the single-root hierarchy over all
/// primitives and the full state.
pub fn fqi_flat(data: &Dataset, cfg: &LearnerConfig) -> Result<QTable> {
    let dag = TaskDag::build(flat(data.actions()), data.states(), data.actions(), &BasicPredicates)?;
    let out = hqi(&dag, data, cfg)?;
    Ok(out.q.table(dag.root()).expect("root trained").clone())
}
