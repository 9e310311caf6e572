use crate::error::{Error, Result};
use crate::hierarchy::{Child, SubtaskId, TaskDag};
use crate::mdp::known;

/// Read access to per-subtask action values over full states.
pub trait QFunction {
    /// Whether `subtask` has a trained value function.
    fn has(&self, subtask: SubtaskId) -> bool;

    /// Q_subtask(s, child); `child` indexes the subtask's children.
    fn q(&self, subtask: SubtaskId, s: usize, child: usize) -> f64;

    /// Children whose value at `s` was estimated from data. The rest hold
    /// their initial value and are passed over when anything else is known.
    fn visited(&self, _subtask: SubtaskId, _s: usize) -> u64 {
        u64::MAX
    }
}

/// Greedy admissible child of `subtask` at `s`, lowest index on exact ties.
/// Subtask children already terminated at `s` are skipped unless no child
/// is admissible, and children without an estimate unless none has one.
pub fn greedy_child<Q: QFunction + ?Sized>(q: &Q, dag: &TaskDag, subtask: SubtaskId, s: usize) -> usize {
    let mask = known(dag.admissible_mask(subtask, s), q.visited(subtask, s));
    best_in_mask(mask, |c| q.q(subtask, s, c))
}

/// argmax of `value` over the set bits of `mask`, lowest index on ties.
#[inline]
pub fn best_in_mask(mut mask: u64, value: impl Fn(usize) -> f64) -> usize {
    debug_assert!(mask != 0);
    let mut best = mask.trailing_zeros() as usize;
    let mut best_v = value(best);
    mask &= mask - 1;
    while mask != 0 {
        let c = mask.trailing_zeros() as usize;
        let v = value(c);
        if v > best_v {
            best = c;
            best_v = v;
        }
        mask &= mask - 1;
    }
    best
}

/// max of `value` over the set bits of `mask`.
#[inline]
pub fn max_in_mask(mask: u64, value: impl Fn(usize) -> f64) -> f64 {
    let mut m = mask;
    let mut best = f64::NEG_INFINITY;
    while m != 0 {
        let c = m.trailing_zeros() as usize;
        best = best.max(value(c));
        m &= m - 1;
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GreedyAction {
    pub action: usize,
    /// Set when the descent passed through a subtask already terminated at
    /// the queried state.
    pub through_terminated: bool,
}

/// Primitive action chosen at `s` by recursively following greedy children
/// from `child` down to a primitive.
pub fn greedy_policy<Q: QFunction + ?Sized>(q: &Q, dag: &TaskDag, child: Child, s: usize) -> Result<GreedyAction> {
    let mut current = child;
    let mut through_terminated = false;
    loop {
        match current {
            Child::Primitive(action) => return Ok(GreedyAction { action, through_terminated }),
            Child::Subtask(id) => {
                if !q.has(id) {
                    return Err(Error::Hierarchy(format!(
                        "subtask `{}` has no value function yet",
                        dag.subtask(id).name
                    )));
                }
                let st = dag.subtask(id);
                through_terminated |= st.is_terminal(s);
                current = st.children[greedy_child(q, dag, id, s)];
            }
        }
    }
}
