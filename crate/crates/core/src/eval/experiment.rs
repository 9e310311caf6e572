//! The learning-curve protocol: per seed, collect the largest checkpoint
//! once, train every arm from scratch on each prefix and evaluate greedily
//! with a shared evaluation seed.

use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::eval::collect::{collect, CollectionSpec};
use crate::eval::execute::{evaluate, sample_std, EvalSpec};
use crate::eval::oracle::oracle;
use crate::fitted::{fitted_hqi, AnyRegressor, FeatureEncoder, FittedConfig, FittedHierarchicalQ, RegressorConfig};
use crate::hierarchy::{builtin, DagConfig, SubtaskId, TaskDag};
use crate::mdp::Dataset;
use crate::rng;
use crate::tabular::{hqi, HierarchicalQ, LearnerConfig, QFunction};
use crate::taxi::{Taxi, TaxiConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerKind {
    #[default]
    Tabular,
    Fitted,
}

/// One learning curve: a learner on a hierarchy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmSpec {
    /// Learner column of the results.
    pub name: String,
    /// Built-in hierarchy name, or whatever the caller's resolver accepts.
    pub dag: String,
    #[serde(default)]
    pub learner: LearnerKind,
    /// Keep the hierarchy's per-subtask abstraction (tabular only).
    #[serde(default = "yes")]
    pub abstraction: bool,
}

fn yes() -> bool {
    true
}

impl ArmSpec {
    pub fn new(name: &str, dag: &str, learner: LearnerKind, abstraction: bool) -> Self {
        ArmSpec { name: name.into(), dag: dag.into(), learner, abstraction }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    /// Ascending sample counts; each is a prefix of the next.
    pub checkpoints: Vec<usize>,
    /// Runs use data seeds `seed`, `seed + 1`, ...
    pub repeats: usize,
    pub seed: u64,
    pub eval_episodes: usize,
    pub max_steps: usize,
    /// Overrides the discount of the environment and of both learners.
    pub gamma: f64,
    pub episode_cap: usize,
    /// Adds an `oracle` row per seed, evaluated on the same episodes.
    pub include_oracle: bool,
    pub env: TaxiConfig,
    pub tabular: LearnerConfig,
    pub fitted: FittedConfig,
    pub regressor: RegressorConfig,
    #[serde(rename = "arm")]
    pub arms: Vec<ArmSpec>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            name: "taxi".into(),
            checkpoints: (1..=12).map(|k| 5000 * k).collect(),
            repeats: 5,
            seed: 0,
            eval_episodes: 100,
            max_steps: 1000,
            gamma: 0.99,
            episode_cap: 500,
            include_oracle: true,
            env: TaxiConfig::default(),
            tabular: LearnerConfig::default(),
            fitted: FittedConfig::default(),
            regressor: RegressorConfig::default(),
            arms: vec![
                ArmSpec::new("fqi", "flat", LearnerKind::Tabular, true),
                ArmSpec::new("hqi", "dag1", LearnerKind::Tabular, false),
                ArmSpec::new("hqi-sa", "dag1", LearnerKind::Tabular, true),
            ],
        }
    }
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("experiment spec: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.checkpoints.is_empty() || self.checkpoints[0] == 0 {
            return Err(Error::config("checkpoints must be nonempty and positive"));
        }
        if self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("checkpoints must be strictly ascending"));
        }
        if self.repeats == 0 {
            return Err(Error::config("repeats must be at least 1"));
        }
        if self.eval_episodes == 0 || self.max_steps == 0 || self.episode_cap == 0 {
            return Err(Error::config("eval_episodes, max_steps and episode_cap must be positive"));
        }
        if self.arms.is_empty() {
            return Err(Error::config("no arms"));
        }
        for (i, a) in self.arms.iter().enumerate() {
            if self.arms[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::config(format!("arm `{}` listed twice", a.name)));
            }
            if a.name == "oracle" || a.name.contains([',', '"', '\n']) {
                return Err(Error::config(format!("arm name `{}` is reserved or not CSV-safe", a.name)));
            }
        }
        self.env_config().validate()?;
        self.learner_config().validate()?;
        self.fitted_config(0).validate()?;
        self.regressor.validate()
    }

    pub fn env_config(&self) -> TaxiConfig {
        TaxiConfig { gamma: self.gamma, ..self.env.clone() }
    }

    pub fn learner_config(&self) -> LearnerConfig {
        LearnerConfig { gamma: self.gamma, ..self.tabular.clone() }
    }

    /// Fitted settings for data seed `seed`.
    pub fn fitted_config(&self, seed: u64) -> FittedConfig {
        FittedConfig { gamma: self.gamma, seed: rng::mix(self.fitted.seed, seed), ..self.fitted.clone() }
    }

    /// Evaluation episodes for data seed `seed`, shared by all arms.
    pub fn eval_spec(&self, seed: u64) -> EvalSpec {
        EvalSpec { episodes: self.eval_episodes, max_steps: self.max_steps, gamma: self.gamma, seed: eval_seed(seed) }
    }
}

/// Evaluation seed paired with a data seed.
pub fn eval_seed(data_seed: u64) -> u64 {
    rng::mix(data_seed, 0xE7A1)
}

/// A trained hierarchical policy of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    Tabular(HierarchicalQ),
    Fitted(FittedHierarchicalQ<AnyRegressor>),
}

impl QFunction for Policy {
    fn has(&self, subtask: SubtaskId) -> bool {
        match self {
            Policy::Tabular(q) => q.has(subtask),
            Policy::Fitted(q) => q.has(subtask),
        }
    }

    #[inline]
    fn q(&self, subtask: SubtaskId, s: usize, child: usize) -> f64 {
        match self {
            Policy::Tabular(q) => q.q(subtask, s, child),
            Policy::Fitted(q) => q.q(subtask, s, child),
        }
    }

    #[inline]
    fn visited(&self, subtask: SubtaskId, s: usize) -> u64 {
        match self {
            Policy::Tabular(q) => q.visited(subtask, s),
            Policy::Fitted(q) => q.visited(subtask, s),
        }
    }
}

/// One (arm, checkpoint, seed) result. `mean_return` is NaN for a failed cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub dag: String,
    pub learner: String,
    pub checkpoint: usize,
    pub seed: u64,
    pub mean_return: f64,
    pub episodes: usize,
    pub truncations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub learner: String,
    pub checkpoint: usize,
    pub seed: u64,
    pub message: String,
}

/// Across-seed statistics of one (dag, learner, checkpoint); failed cells
/// are left out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub dag: String,
    pub learner: String,
    pub checkpoint: usize,
    pub runs: usize,
    pub mean: f64,
    /// Sample standard deviation.
    pub std: f64,
    pub best: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub cells: Vec<Cell>,
    pub failures: Vec<Failure>,
}

impl EvalReport {
    pub fn aggregates(&self) -> Vec<Aggregate> {
        let mut keys: Vec<(&str, &str, usize)> = Vec::new();
        for c in &self.cells {
            let k = (c.dag.as_str(), c.learner.as_str(), c.checkpoint);
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        keys.into_iter()
            .map(|(dag, learner, checkpoint)| {
                let xs: Vec<f64> = self
                    .cells
                    .iter()
                    .filter(|c| c.dag == dag && c.learner == learner && c.checkpoint == checkpoint)
                    .map(|c| c.mean_return)
                    .filter(|v| !v.is_nan())
                    .collect();
                let mean = if xs.is_empty() { f64::NAN } else { xs.iter().sum::<f64>() / xs.len() as f64 };
                let best = xs.iter().copied().fold(f64::NAN, f64::max);
                Aggregate {
                    dag: dag.into(),
                    learner: learner.into(),
                    checkpoint,
                    runs: xs.len(),
                    mean,
                    std: sample_std(&xs),
                    best,
                }
            })
            .collect()
    }

    /// Cells of one learner, in run order.
    pub fn cells_of<'a>(&'a self, learner: &'a str) -> impl Iterator<Item = &'a Cell> + 'a {
        self.cells.iter().filter(move |c| c.learner == learner)
    }

    pub fn cells_csv(&self) -> String {
        to_csv(&self.cells)
    }

    pub fn aggregate_csv(&self) -> String {
        to_csv(&self.aggregates())
    }

    pub fn from_cells_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let cells = rdr
            .deserialize()
            .collect::<std::result::Result<Vec<Cell>, _>>()
            .map_err(|e| Error::schema(format!("results CSV: {e}")))?;
        Ok(EvalReport { cells, failures: Vec::new() })
    }
}

fn to_csv<T: Serialize>(rows: &[T]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory CSV write");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8")
}

/// Trains one arm on a dataset.
pub fn train(arm: &ArmSpec, dag: &TaskDag, data: &Dataset, spec: &ExperimentSpec, seed: u64) -> Result<Policy> {
    match arm.learner {
        LearnerKind::Tabular => Ok(Policy::Tabular(hqi(dag, data, &spec.learner_config())?.q)),
        LearnerKind::Fitted => {
            let encoder = FeatureEncoder::taxi(dag.states())?;
            let out = fitted_hqi(dag, data, &encoder, &spec.regressor, &spec.fitted_config(seed))?;
            Ok(Policy::Fitted(out.q))
        }
    }
}

/// Resolves built-in hierarchy names only.
pub fn builtin_resolver(taxi: &Taxi) -> impl Fn(&str) -> Result<DagConfig> + '_ {
    move |name| builtin(name, taxi.actions()).ok_or_else(|| Error::config(format!("unknown hierarchy `{name}`")))
}

/// Runs the whole protocol. A failing arm or cell is recorded with a NaN
/// mean and the run continues; `progress` sees every finished cell.
pub fn run_experiment(
    spec: &ExperimentSpec,
    resolve: &dyn Fn(&str) -> Result<DagConfig>,
    progress: &mut dyn FnMut(&Cell),
) -> Result<EvalReport> {
    spec.validate()?;
    let taxi = Taxi::new(spec.env_config())?;
    let predicates = taxi.predicates();
    let dags: Vec<Result<TaskDag>> = spec
        .arms
        .iter()
        .map(|arm| {
            let mut cfg = resolve(&arm.dag)?;
            if !arm.abstraction || arm.learner == LearnerKind::Fitted {
                cfg = cfg.without_abstraction();
            }
            TaskDag::build(cfg, taxi.states(), taxi.actions(), &predicates)
        })
        .collect();
    let oracle = if spec.include_oracle { Some(oracle(&taxi.true_model(), taxi.states(), taxi.actions())?) } else { None };

    let mut report = EvalReport::default();
    let max = *spec.checkpoints.last().expect("validated");
    for r in 0..spec.repeats as u64 {
        let seed = spec.seed.wrapping_add(r);
        let eval = spec.eval_spec(seed);
        let full = collect(&taxi, &CollectionSpec { n_samples: max, episode_cap: spec.episode_cap, seed })?;
        if let Some(o) = &oracle {
            let summary = evaluate(&o.q, &o.dag, &taxi, &eval)?;
            let cell = Cell {
                dag: "flat".into(),
                learner: "oracle".into(),
                checkpoint: 0,
                seed,
                mean_return: summary.mean_return,
                episodes: summary.episodes,
                truncations: summary.truncations,
            };
            progress(&cell);
            report.cells.push(cell);
        }
        for (arm, dag) in spec.arms.iter().zip(&dags) {
            for &checkpoint in &spec.checkpoints {
                let outcome = match dag {
                    Ok(dag) => train(arm, dag, &full.prefix(checkpoint), spec, seed)
                        .and_then(|policy| evaluate(&policy, dag, &taxi, &eval)),
                    Err(e) => Err(Error::Hierarchy(e.to_string())),
                };
                let (mean_return, truncations) = match outcome {
                    Ok(s) => (s.mean_return, s.truncations),
                    Err(e) => {
                        report.failures.push(Failure {
                            learner: arm.name.clone(),
                            checkpoint,
                            seed,
                            message: e.to_string(),
                        });
                        (f64::NAN, 0)
                    }
                };
                let cell = Cell {
                    dag: arm.dag.clone(),
                    learner: arm.name.clone(),
                    checkpoint,
                    seed,
                    mean_return,
                    episodes: spec.eval_episodes,
                    truncations,
                };
                progress(&cell);
                report.cells.push(cell);
            }
        }
    }
    Ok(report)
}
