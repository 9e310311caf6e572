use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::mdp::{Dataset, QTable};

const PROB_TOL: f64 = 1e-9;

/// One outcome of a state-action pair. `next == n_states` is the absorbing
/// terminal state, whose value is fixed at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub next: usize,
    pub prob: f64,
    pub reward: f64,
}

/// Exact transition and reward model of an enumerable MDP.
///
/// Live states are `0..n_states`; index `n_states` is a single absorbing
/// terminal. A row of `None` marks a state-action pair with no information
/// (only produced by [`empirical_model`]).
#[derive(Debug, Clone, PartialEq)]
pub struct TabularModel {
    n_states: usize,
    n_actions: usize,
    rows: Vec<Option<Vec<Transition>>>,
    initial: Vec<f64>,
    gamma: f64,
}

impl TabularModel {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        rows: Vec<Option<Vec<Transition>>>,
        initial: Vec<f64>,
        gamma: f64,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidModel("model needs states and actions".into()));
        }
        if n_actions > 64 {
            return Err(Error::InvalidModel(format!("{n_actions} actions (max 64)")));
        }
        if rows.len() != n_states * n_actions {
            return Err(Error::InvalidModel(format!(
                "expected {} rows, got {}",
                n_states * n_actions,
                rows.len()
            )));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidModel(format!("gamma {gamma} outside (0, 1]")));
        }
        for (i, row) in rows.iter().enumerate() {
            let Some(row) = row else { continue };
            let mut total = 0.0;
            for t in row {
                if t.next > n_states || !(t.prob >= 0.0) || !t.reward.is_finite() {
                    return Err(Error::InvalidModel(format!(
                        "bad transition {t:?} in row (s={}, a={})",
                        i / n_actions,
                        i % n_actions
                    )));
                }
                total += t.prob;
            }
            if (total - 1.0).abs() > PROB_TOL {
                return Err(Error::InvalidModel(format!(
                    "P(.|s={}, a={}) sums to {total}",
                    i / n_actions,
                    i % n_actions
                )));
            }
        }
        if initial.len() != n_states || initial.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidModel("initial distribution has wrong shape".into()));
        }
        let total: f64 = initial.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidModel(format!("P0 sums to {total}")));
        }
        Ok(TabularModel { n_states, n_actions, rows, initial, gamma })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn absorbing(&self) -> usize {
        self.n_states
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn row(&self, s: usize, a: usize) -> Option<&[Transition]> {
        self.rows[s * self.n_actions + a].as_deref()
    }

    pub fn is_visited(&self, s: usize, a: usize) -> bool {
        self.rows[s * self.n_actions + a].is_some()
    }

    /// Successor distribution with duplicate successors merged, sorted by index.
    pub fn successors(&self, s: usize, a: usize) -> Vec<(usize, f64)> {
        let mut merged = BTreeMap::new();
        for t in self.row(s, a).unwrap_or(&[]) {
            *merged.entry(t.next).or_insert(0.0) += t.prob;
        }
        merged.into_iter().collect()
    }

    /// Expected one-step reward r(s, a).
    pub fn expected_reward(&self, s: usize, a: usize) -> Option<f64> {
        self.row(s, a).map(|row| row.iter().map(|t| t.prob * t.reward).sum())
    }

    /// One application of the Bellman optimality operator.
    pub fn bellman(&self, q: &QTable) -> QTable {
        let mut out = q.clone();
        let values = self.state_values(q);
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                if let Some(row) = self.row(s, a) {
                    let v = row
                        .iter()
                        .map(|t| t.prob * (t.reward + self.gamma * values[t.next]))
                        .sum();
                    out.set(s, a, v);
                }
            }
        }
        out
    }

    /// max_a Q(s, a) for every live state, followed by 0 for the absorbing state.
    fn state_values(&self, q: &QTable) -> Vec<f64> {
        let mut v: Vec<f64> = (0..self.n_states).map(|s| q.state_value(s)).collect();
        v.push(0.0);
        v
    }
}

/// Flat Q-value iteration to a max-norm Bellman residual of at most `tol`.
///
/// Rows without information keep Q = 0 and are marked unknown, as in the
/// batch learners, so state values only range over observed actions.
pub fn value_iteration(model: &TabularModel, tol: f64, max_sweeps: usize) -> Result<QTable> {
    if !(tol > 0.0) {
        return Err(Error::domain("value iteration tolerance must be positive"));
    }
    let mut q = QTable::flat(model.n_states, model.n_actions);
    for s in 0..model.n_states {
        let seen = (0..model.n_actions).filter(|&a| model.is_visited(s, a)).fold(0u64, |m, a| m | 1 << a);
        q.set_visited(s, seen);
    }
    let mut residual = f64::INFINITY;
    for _ in 0..max_sweeps {
        let next = model.bellman(&q);
        residual = next.max_abs_diff(&q);
        q = next;
        // The returned table's own residual is at most gamma * residual.
        if residual * model.gamma <= tol {
            return Ok(q);
        }
    }
    Err(Error::NotConverged { sweeps: max_sweeps, residual })
}

/// Maximum-likelihood model of the data: P(s'|s,a) = n(s,a,s')/n(s,a) and
/// R(s,a,s') the mean observed reward. Terminal experiences lead to the
/// absorbing state. P0 is the empirical distribution of episode starts: the
/// first record and every record that follows a terminal one.
pub fn empirical_model(data: &Dataset, gamma: f64) -> Result<TabularModel> {
    if data.is_empty() {
        return Err(Error::domain("cannot estimate a model from an empty dataset"));
    }
    let n_states = data.states().len();
    let n_actions = data.actions().len();
    let mut counts: Vec<BTreeMap<usize, (usize, f64)>> = vec![BTreeMap::new(); n_states * n_actions];
    let mut starts = vec![0usize; n_states];
    let mut fresh = true;
    for e in data.records() {
        if fresh {
            starts[e.s] += 1;
        }
        fresh = e.terminal;
        let next = if e.terminal { n_states } else { e.s_next };
        let cell = counts[e.s * n_actions + e.a].entry(next).or_insert((0, 0.0));
        cell.0 += 1;
        cell.1 += e.r;
    }
    let rows = counts
        .into_iter()
        .map(|succ| {
            let total: usize = succ.values().map(|(n, _)| n).sum();
            (total > 0).then(|| {
                succ.into_iter()
                    .map(|(next, (n, r))| Transition {
                        next,
                        prob: n as f64 / total as f64,
                        reward: r / n as f64,
                    })
                    .collect()
            })
        })
        .collect();
    let n_starts: usize = starts.iter().sum();
    let initial = starts.iter().map(|&c| c as f64 / n_starts as f64).collect();
    TabularModel::new(n_states, n_actions, rows, initial, gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{ActionSpace, Experience, StateSpace};

    fn det(next: usize, reward: f64) -> Option<Vec<Transition>> {
        Some(vec![Transition { next, prob: 1.0, reward }])
    }

    #[test]
    fn two_state_chain() {
        // s0 -a0-> s1 with reward 1; s1 loops on itself with reward 0.
        let model =
            TabularModel::new(2, 1, vec![det(1, 1.0), det(1, 0.0)], vec![1.0, 0.0], 0.5).unwrap();
        let q = value_iteration(&model, 1e-12, 1000).unwrap();
        assert!((q.get(0, 0) - 1.0).abs() < 1e-12);
        assert!(q.get(1, 0).abs() < 1e-12);
    }

    #[test]
    fn three_state_chain_by_hand() {
        // fwd: s0 -> s1 (r 0), s1 -> s2 (r 1), s2 -> s2 (r 0); stay: s_i -> s_i (r 0).
        // By hand: V(s2) = 0, Q(s1,fwd) = 1, Q(s1,stay) = 0.9 * V(s1) = 0.9,
        // Q(s0,fwd) = 0.9 * 1 = 0.9, Q(s0,stay) = 0.9 * V(s0) = 0.81.
        let rows = vec![
            det(1, 0.0),
            det(0, 0.0),
            det(2, 1.0),
            det(1, 0.0),
            det(2, 0.0),
            det(2, 0.0),
        ];
        let model = TabularModel::new(3, 2, rows, vec![1.0, 0.0, 0.0], 0.9).unwrap();
        let q = value_iteration(&model, 1e-12, 10_000).unwrap();
        let expect = [[0.9, 0.81], [1.0, 0.9], [0.0, 0.0]];
        for s in 0..3 {
            for a in 0..2 {
                assert!((q.get(s, a) - expect[s][a]).abs() < 1e-9, "Q({s},{a}) = {}", q.get(s, a));
            }
        }
        assert_eq!(q.argmax(0), 0);
        // exact tie resolves to the lowest index
        assert_eq!(q.argmax(2), 0);
    }

    #[test]
    fn residual_bound_holds_by_substitution() {
        let rows = vec![
            Some(vec![
                Transition { next: 0, prob: 0.3, reward: 1.0 },
                Transition { next: 1, prob: 0.7, reward: -2.0 },
            ]),
            det(2, 5.0),
            det(0, 0.5),
            det(1, -1.0),
        ];
        let model = TabularModel::new(2, 2, rows, vec![0.5, 0.5], 0.95).unwrap();
        let q = value_iteration(&model, 1e-8, 100_000).unwrap();
        assert!(model.bellman(&q).max_abs_diff(&q) <= 1e-8);
    }

    #[test]
    fn non_convergence_reports_residual() {
        let model = TabularModel::new(1, 1, vec![det(0, 1.0)], vec![1.0], 0.99).unwrap();
        match value_iteration(&model, 1e-8, 3) {
            Err(Error::NotConverged { sweeps: 3, residual }) => assert!(residual > 0.9),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_unnormalised_rows() {
        let rows = vec![Some(vec![Transition { next: 0, prob: 0.5, reward: 0.0 }])];
        assert!(TabularModel::new(1, 1, rows, vec![1.0], 0.9).is_err());
        assert!(TabularModel::new(1, 1, vec![det(0, 0.0)], vec![0.5], 0.9).is_err());
        assert!(TabularModel::new(1, 1, vec![det(0, 0.0)], vec![1.0], 0.0).is_err());
    }

    fn tiny_data(records: Vec<Experience>) -> Dataset {
        Dataset::from_records(
            StateSpace::new([("s", 3)]).unwrap(),
            ActionSpace::anonymous(2).unwrap(),
            records,
        )
        .unwrap()
    }

    #[test]
    fn single_sample_estimate() {
        let data = tiny_data(vec![Experience { s: 0, a: 1, r: 5.0, s_next: 2, terminal: false }]);
        let m = empirical_model(&data, 0.9).unwrap();
        assert_eq!(m.successors(0, 1), vec![(2, 1.0)]);
        assert_eq!(m.expected_reward(0, 1), Some(5.0));
        assert!(!m.is_visited(0, 0));
        assert_eq!(m.expected_reward(1, 0), None);
    }

    #[test]
    fn empirical_frequencies() {
        let data = tiny_data(vec![
            Experience { s: 0, a: 0, r: 1.0, s_next: 1, terminal: false },
            Experience { s: 0, a: 0, r: 3.0, s_next: 2, terminal: false },
            Experience { s: 1, a: 0, r: 7.0, s_next: 1, terminal: true },
        ]);
        let m = empirical_model(&data, 0.9).unwrap();
        assert_eq!(m.successors(0, 0), vec![(1, 0.5), (2, 0.5)]);
        assert_eq!(m.expected_reward(0, 0), Some(2.0));
        assert_eq!(m.successors(1, 0), vec![(m.absorbing(), 1.0)]);
        for s in 0..3 {
            for a in 0..2 {
                if m.is_visited(s, a) {
                    let total: f64 = m.successors(s, a).iter().map(|p| p.1).sum();
                    assert!((total - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn empty_dataset_rejected() {
        assert!(empirical_model(&tiny_data(vec![]), 0.9).is_err());
    }
}
