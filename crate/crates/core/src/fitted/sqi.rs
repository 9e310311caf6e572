use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitted::encoder::FeatureEncoder;
use crate::fitted::regressor::{Regressor, RegressorFactory};
use crate::hierarchy::{SubtaskId, TaskDag};
use crate::mdp::Dataset;
use crate::rng;
use crate::tabular::{check_bounds, value_bounds, Backup, BackupContext, QFunction, SqiReport, TerminalCheck};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FittedConfig {
    pub max_iter: usize,
    /// Stop once no prediction at a training input moves by more than this.
    pub convergence_tol: f64,
    pub gamma: f64,
    pub terminal_check: TerminalCheck,
    /// Root of the per-(subtask, child) regressor seeds.
    pub seed: u64,
}

impl Default for FittedConfig {
    fn default() -> Self {
        FittedConfig { max_iter: 100, convergence_tol: 1e-3, gamma: 0.99, terminal_check: TerminalCheck::Consistent, seed: 0 }
    }
}

impl FittedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::config("max_iter must be positive"));
        }
        if !(self.convergence_tol >= 0.0) {
            return Err(Error::config("convergence_tol must be nonnegative"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config(format!("gamma {} outside (0, 1]", self.gamma)));
        }
        Ok(())
    }
}

/// Seed of the regressor for child `child` of `subtask`; the same in every
/// sweep.
pub fn regressor_seed(root: u64, subtask: SubtaskId, child: usize) -> u64 {
    rng::mix(rng::mix(root, subtask.0 as u64), child as u64)
}

/// The fitted models of one subtask, one per child (`None` when the child
/// had no training samples and predicts 0), their predictions at every
/// state, and per state the children trained there.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedSubtask<M> {
    pub models: Vec<Option<M>>,
    table: Vec<f64>,
    visited: Vec<u64>,
}

impl<M: Regressor> FittedSubtask<M> {
    /// Tabulates the models over every state. `visited` holds one child
    /// bitmask per state.
    pub fn new(models: Vec<Option<M>>, visited: Vec<u64>, encoder: &FeatureEncoder) -> Self {
        let n = encoder.states().len();
        let cols = models.len();
        let mut table = vec![0.0; n * cols];
        let mut x = vec![0.0; encoder.dim()];
        for s in 0..n {
            encoder.encode_into(s, &mut x);
            for (c, m) in models.iter().enumerate() {
                if let Some(m) = m {
                    table[s * cols + c] = m.predict(&x);
                }
            }
        }
        assert_eq!(visited.len(), n, "one visited mask per state");
        FittedSubtask { models, table, visited }
    }

    /// Predictions, row-major over (state, child).
    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn visited(&self) -> &[u64] {
        &self.visited
    }
}

/// Fitted Q-functions for the subtasks of one DAG over full states.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedHierarchicalQ<M> {
    encoder: FeatureEncoder,
    cols: Vec<usize>,
    subtasks: Vec<Option<FittedSubtask<M>>>,
}

impl<M: Regressor> FittedHierarchicalQ<M> {
    pub fn new(dag: &TaskDag, encoder: FeatureEncoder) -> Result<Self> {
        if encoder.states() != dag.states() {
            return Err(Error::schema("encoder state space differs from the hierarchy's"));
        }
        Ok(FittedHierarchicalQ {
            encoder,
            cols: dag.subtasks().iter().map(|s| s.children.len()).collect(),
            subtasks: (0..dag.len()).map(|_| None).collect(),
        })
    }

    pub fn encoder(&self) -> &FeatureEncoder {
        &self.encoder
    }

    pub fn insert(&mut self, id: SubtaskId, fitted: FittedSubtask<M>) -> Result<()> {
        if fitted.models.len() != self.cols[id.0] {
            return Err(Error::schema(format!(
                "{} models for a subtask with {} children",
                fitted.models.len(),
                self.cols[id.0]
            )));
        }
        self.subtasks[id.0] = Some(fitted);
        Ok(())
    }

    pub fn subtask(&self, id: SubtaskId) -> Option<&FittedSubtask<M>> {
        self.subtasks[id.0].as_ref()
    }

    pub fn is_complete(&self) -> bool {
        self.subtasks.iter().all(Option::is_some)
    }

    pub fn into_parts(self) -> (FeatureEncoder, Vec<Option<FittedSubtask<M>>>) {
        (self.encoder, self.subtasks)
    }
}

impl<M> QFunction for FittedHierarchicalQ<M> {
    fn has(&self, subtask: SubtaskId) -> bool {
        self.subtasks[subtask.0].is_some()
    }

    #[inline]
    fn q(&self, subtask: SubtaskId, s: usize, child: usize) -> f64 {
        let cols = self.cols[subtask.0];
        self.subtasks[subtask.0].as_ref().expect("value function requested for an untrained subtask").table
            [s * cols + child]
    }

    #[inline]
    fn visited(&self, subtask: SubtaskId, s: usize) -> u64 {
        self.subtasks[subtask.0].as_ref().expect("value function requested for an untrained subtask").visited[s]
    }
}

#[derive(Debug, Clone)]
pub struct FittedSqiOutcome<M> {
    pub fitted: FittedSubtask<M>,
    pub report: SqiReport,
}

/// Fitted subtask Q-value iteration: every sweep builds (x, y) pairs per
/// child from the previous sweep's predictions and fits fresh regressors.
///
/// `children` must hold value functions for every subtask child.
pub fn fitted_sqi<F: RegressorFactory, Q: QFunction + ?Sized>(
    dag: &TaskDag,
    subtask: SubtaskId,
    data: &Dataset,
    children: &Q,
    encoder: &FeatureEncoder,
    factory: &F,
    cfg: &FittedConfig,
) -> Result<FittedSqiOutcome<F::Model>> {
    cfg.validate()?;
    if encoder.states() != dag.states() {
        return Err(Error::schema("encoder state space differs from the hierarchy's"));
    }
    let st = dag.subtask(subtask);
    let cols = st.children.len();
    let n_states = dag.states().len();
    let ctx = BackupContext::new(dag, subtask, children, cfg.terminal_check)?;
    let (plans, visited) = ctx.plan_known(data, |s| s, n_states);
    let mut per_child: Vec<Vec<(usize, Backup)>> = vec![Vec::new(); cols];
    for p in plans {
        per_child[p.child].push((p.s, p.backup));
    }
    let features = encoder.table();
    let inputs: Vec<Vec<&[f64]>> =
        per_child.iter().map(|b| b.iter().map(|(s, _)| features[*s].as_slice()).collect()).collect();

    let bounds = value_bounds(data, cfg.gamma);
    let mut current = FittedSubtask {
        models: (0..cols).map(|_| None).collect(),
        table: vec![0.0; n_states * cols],
        visited: visited.clone(),
    };
    let mut report = SqiReport {
        subtask: st.name.clone(),
        sweeps: 0,
        converged: false,
        final_delta: f64::INFINITY,
        updates_per_sweep: per_child.iter().map(Vec::len).sum(),
    };
    for sweep in 1..=cfg.max_iter {
        let prev = &current.table;
        let q_prev = |s: usize, c: usize| prev[s * cols + c];
        let mut models = Vec::with_capacity(cols);
        for (c, backups) in per_child.iter().enumerate() {
            if backups.is_empty() {
                models.push(None);
                continue;
            }
            let targets: Vec<f64> = backups.iter().map(|(_, b)| b.target(cfg.gamma, q_prev, c)).collect();
            let mut model = factory.build(regressor_seed(cfg.seed, subtask, c));
            model
                .fit(&inputs[c], &targets)
                .map_err(|message| Error::Fit { subtask: st.name.clone(), sweep, message })?;
            models.push(Some(model));
        }
        let next = FittedSubtask::new(models, visited.clone(), encoder);
        check_bounds(&st.name, &next.table, bounds)?;
        let mut delta: f64 = 0.0;
        for (s, &v) in visited.iter().enumerate() {
            for c in (0..cols).filter(|c| v >> c & 1 == 1) {
                delta = delta.max((next.table[s * cols + c] - current.table[s * cols + c]).abs());
            }
        }
        current = next;
        report.sweeps = sweep;
        report.final_delta = delta;
        if delta <= cfg.convergence_tol {
            report.converged = true;
            break;
        }
    }
    Ok(FittedSqiOutcome { fitted: current, report })
}

#[derive(Debug, Clone)]
pub struct FittedHqiOutcome<M> {
    pub q: FittedHierarchicalQ<M>,
    pub order: Vec<SubtaskId>,
    pub reports: Vec<SqiReport>,
}

/// Fitted-SQI on every subtask, children first.
pub fn fitted_hqi<F: RegressorFactory>(
    dag: &TaskDag,
    data: &Dataset,
    encoder: &FeatureEncoder,
    factory: &F,
    cfg: &FittedConfig,
) -> Result<FittedHqiOutcome<F::Model>> {
    if data.is_empty() {
        return Err(Error::domain("cannot train on an empty dataset"));
    }
    if data.states() != dag.states() || data.actions() != dag.actions() {
        return Err(Error::schema("dataset spaces differ from the hierarchy's spaces"));
    }
    let order = dag.training_order()?;
    let mut q = FittedHierarchicalQ::new(dag, encoder.clone())?;
    let mut reports = Vec::with_capacity(order.len());
    for &id in &order {
        let out = fitted_sqi(dag, id, data, &q, encoder, factory, cfg)?;
        q.insert(id, out.fitted)?;
        reports.push(out.report);
    }
    Ok(FittedHqiOutcome { q, order, reports })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Environment;
    use crate::fitted::{MemorizingRegressor, TreeEnsembleConfig};
    use crate::hierarchy::{dag1, flat, BasicPredicates};
    use crate::mdp::Experience;
    use crate::tabular::{fqi_flat, hqi, LearnerConfig};
    use crate::taxi::{Taxi, WEST};

    fn random_data(taxi: &Taxi, n: usize, seed: u64) -> Dataset {
        let mut r = rng::stream(seed);
        let mut data = Dataset::new(taxi.states().clone(), taxi.actions().clone());
        let mut s = taxi.initial_state(&mut r);
        for _ in 0..n {
            let a = rand::Rng::random_range(&mut r, 0..6);
            let out = taxi.step(s, a, &mut r);
            data.push(Experience { s, a, r: out.reward, s_next: out.next, terminal: out.terminal }).unwrap();
            s = if out.terminal { taxi.initial_state(&mut r) } else { out.next };
        }
        data
    }

    fn memorizing(_: u64) -> MemorizingRegressor {
        MemorizingRegressor::new()
    }

    #[test]
    fn memorizing_regressor_reproduces_tabular_hqi() {
        let taxi = Taxi::standard();
        let data = random_data(&taxi, 3000, 1);
        let dag = TaskDag::build(dag1().without_abstraction(), taxi.states(), taxi.actions(), &taxi.predicates())
            .unwrap();
        let tab_cfg = LearnerConfig { convergence_tol: 1e-10, max_iter: 5000, ..Default::default() };
        let fit_cfg = FittedConfig { convergence_tol: 1e-10, max_iter: 5000, ..Default::default() };
        let tab = hqi(&dag, &data, &tab_cfg).unwrap();
        let encoder = FeatureEncoder::taxi(taxi.states()).unwrap();
        let fit = fitted_hqi(&dag, &data, &encoder, &memorizing, &fit_cfg).unwrap();
        for st in dag.subtasks() {
            for s in 0..500 {
                for c in 0..st.children.len() {
                    let (a, b) = (tab.q.q(st.id, s, c), fit.q.q(st.id, s, c));
                    assert!((a - b).abs() < 1e-10, "{} s={s} c={c}: {a} vs {b}", st.name);
                }
            }
        }
    }

    #[test]
    fn flat_memorizing_equals_fqi() {
        let taxi = Taxi::standard();
        let data = random_data(&taxi, 2000, 2);
        let dag = TaskDag::build(flat(taxi.actions()), taxi.states(), taxi.actions(), &BasicPredicates).unwrap();
        let q = fqi_flat(&data, &LearnerConfig { convergence_tol: 1e-10, max_iter: 5000, ..Default::default() })
            .unwrap();
        let encoder = FeatureEncoder::scalar(taxi.states());
        let cfg = FittedConfig { convergence_tol: 1e-10, max_iter: 5000, ..Default::default() };
        let fit = fitted_hqi(&dag, &data, &encoder, &memorizing, &cfg).unwrap();
        for s in 0..500 {
            for a in 0..6 {
                assert!((q.get(s, a) - fit.q.q(dag.root(), s, a)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn removing_one_childs_samples_leaves_the_others_alone() {
        let taxi = Taxi::standard();
        let data = random_data(&taxi, 4000, 3);
        let dag = TaskDag::build(dag1().without_abstraction(), taxi.states(), taxi.actions(), &taxi.predicates())
            .unwrap();
        let navi = dag.find("navi_get").unwrap();
        let encoder = FeatureEncoder::taxi(taxi.states()).unwrap();
        let forest = crate::fitted::RegressorConfig::TreeEnsemble(TreeEnsembleConfig { n_trees: 10, ..Default::default() });
        let cfg = FittedConfig { max_iter: 1, ..Default::default() };
        let q = FittedHierarchicalQ::<crate::fitted::AnyRegressor>::new(&dag, encoder.clone()).unwrap();
        let full = fitted_sqi(&dag, navi, &data, &q, &encoder, &forest, &cfg).unwrap();
        let kept: Vec<Experience> = data.records().iter().copied().filter(|e| e.a != WEST).collect();
        let reduced = Dataset::from_records(data.states().clone(), data.actions().clone(), kept).unwrap();
        let part = fitted_sqi(&dag, navi, &reduced, &q, &encoder, &forest, &cfg).unwrap();
        // children of navi_get: north, south, east, west
        for c in 0..3 {
            assert_eq!(full.fitted.models[c], part.fitted.models[c], "child {c}");
        }
        assert!(part.fitted.models[3].is_none());
        assert!(full.fitted.models[3].is_some());
    }

    #[test]
    fn forest_fit_is_deterministic() {
        let taxi = Taxi::standard();
        let data = random_data(&taxi, 2000, 4);
        let dag = TaskDag::build(dag1().without_abstraction(), taxi.states(), taxi.actions(), &taxi.predicates())
            .unwrap();
        let encoder = FeatureEncoder::taxi(taxi.states()).unwrap();
        let forest = crate::fitted::RegressorConfig::TreeEnsemble(TreeEnsembleConfig { n_trees: 5, ..Default::default() });
        let cfg = FittedConfig { max_iter: 3, seed: 9, ..Default::default() };
        let a = fitted_hqi(&dag, &data, &encoder, &forest, &cfg).unwrap();
        let b = fitted_hqi(&dag, &data, &encoder, &forest, &cfg).unwrap();
        assert_eq!(a.q, b.q);
        assert!(a.q.is_complete());
    }

    #[test]
    fn fit_failures_name_the_sweep() {
        #[derive(Debug)]
        struct Broken;
        impl Regressor for Broken {
            fn fit(&mut self, _: &[&[f64]], _: &[f64]) -> std::result::Result<(), String> {
                Err("nope".into())
            }
            fn predict(&self, _: &[f64]) -> f64 {
                0.0
            }
        }
        let taxi = Taxi::standard();
        let data = random_data(&taxi, 200, 5);
        let dag = TaskDag::build(flat(taxi.actions()), taxi.states(), taxi.actions(), &BasicPredicates).unwrap();
        let encoder = FeatureEncoder::scalar(taxi.states());
        let err = fitted_hqi(&dag, &data, &encoder, &|_: u64| Broken, &FittedConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Fit { sweep: 1, .. }), "{err}");
    }
}
