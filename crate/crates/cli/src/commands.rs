use std::path::{Path, PathBuf};

use clap::Args;
use hqi_core::env::Environment;
use hqi_core::eval::{self, CollectionSpec, EvalSpec, ExperimentSpec, LearnerKind, Policy};
use hqi_core::fitted::{FittedConfig, RegressorConfig};
use hqi_core::hierarchy::{validate, DagConfig, TaskDag};
use hqi_core::io::{self, RunManifest};
use hqi_core::tabular::LearnerConfig;
use hqi_core::taxi::Taxi;
use hqi_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::opts::{load_dag, load_env, required, resolve, to_toml, Layered};

fn manifest_path(explicit: &Option<PathBuf>, out: Option<&Path>, command: &str) -> PathBuf {
    match (explicit, out) {
        (Some(p), _) => p.clone(),
        (None, Some(out)) => {
            let mut s = out.as_os_str().to_owned();
            s.push(".manifest.json");
            PathBuf::from(s)
        }
        (None, None) => PathBuf::from(format!("{command}.manifest.json")),
    }
}

fn parse_kind(s: &str) -> std::result::Result<LearnerKind, String> {
    match s {
        "tabular" => Ok(LearnerKind::Tabular),
        "fitted" => Ok(LearnerKind::Fitted),
        _ => Err(format!("expected `tabular` or `fitted`, found `{s}`")),
    }
}

/// Builds a hierarchy for the taxi domain, recording a DAG file as input.
fn bind_dag(spec: &str, abstraction: bool, taxi: &Taxi, manifest: &mut RunManifest) -> Result<TaskDag> {
    let (mut cfg, path) = load_dag(spec, taxi.actions())?;
    if let Some(p) = path {
        manifest.input(&p)?;
    }
    if !abstraction {
        cfg = cfg.without_abstraction();
    }
    TaskDag::build(cfg, taxi.states(), taxi.actions(), &taxi.predicates())
}

fn env_input(path: &Option<PathBuf>, manifest: &mut RunManifest) -> Result<Taxi> {
    let cfg = load_env(path.as_ref())?;
    if let Some(p) = path {
        manifest.input(p)?;
    }
    Taxi::new(cfg)
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CollectOpts {
    /// Taxi config file; the standard domain when absent.
    #[arg(long)]
    pub env: Option<PathBuf>,
    /// Number of transitions.
    #[arg(short = 'n', long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Steps before an unfinished episode restarts; the env's cap when absent.
    #[arg(long)]
    pub episode_cap: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

impl Layered for CollectOpts {
    fn defaults() -> Self {
        CollectOpts { samples: Some(60_000), seed: Some(0), ..Default::default() }
    }
}

pub fn collect(config: Option<&Path>, flags: &CollectOpts) -> Result<()> {
    let mut o = resolve(config, flags)?;
    let out = required(&o.out, "--out")?.clone();
    let seed = *required(&o.seed, "--seed")?;
    let mut m = RunManifest::begin("collect", String::new(), Some(seed));
    let taxi = env_input(&o.env, &mut m)?;
    o.episode_cap = Some(o.episode_cap.unwrap_or(taxi.config().episode_cap));
    let spec = CollectionSpec { n_samples: *required(&o.samples, "--samples")?, episode_cap: o.episode_cap.unwrap(), seed };
    let data = eval::collect(&taxi, &spec)?;
    io::write_dataset(&out, &data)?;
    m.output(&out)?;
    println!("wrote {} transitions to {}", data.len(), out.display());
    finish(m, &o, &o.manifest, Some(&out))
}

fn finish<T: Serialize>(mut m: RunManifest, effective: &T, explicit: &Option<PathBuf>, out: Option<&Path>) -> Result<()> {
    m.set_config(to_toml(effective));
    let path = manifest_path(explicit, out, &m.command);
    m.finish(&path)?;
    Ok(())
}

/// Learner settings file for `train`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerFile {
    pub tabular: LearnerConfig,
    pub fitted: FittedConfig,
    pub regressor: RegressorConfig,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TrainOpts {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Built-in hierarchy (dag1, dag2, dag3, flat) or a DAG config file.
    #[arg(long)]
    pub dag: Option<String>,
    /// Learner settings file.
    #[arg(long)]
    pub learner: Option<PathBuf>,
    #[arg(long, value_parser = parse_kind)]
    pub kind: Option<LearnerKind>,
    /// Keep the hierarchy's state abstraction (tabular only).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub abstraction: Option<bool>,
    #[arg(long)]
    pub env: Option<PathBuf>,
    /// Regressor seed for the fitted learner.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

impl Layered for TrainOpts {
    fn defaults() -> Self {
        TrainOpts { dag: Some("dag1".into()), kind: Some(LearnerKind::Tabular), abstraction: Some(true), ..Default::default() }
    }
}

pub fn train(config: Option<&Path>, flags: &TrainOpts) -> Result<()> {
    let o = resolve(config, flags)?;
    let dataset = required(&o.dataset, "--dataset")?;
    let out = required(&o.out, "--out")?;
    let kind = o.kind.unwrap_or_default();
    let mut m = RunManifest::begin("train", String::new(), o.seed);
    let taxi = env_input(&o.env, &mut m)?;
    let mut learner = match &o.learner {
        Some(p) => {
            m.input(p)?;
            io::load_toml(p)?
        }
        None => LearnerFile::default(),
    };
    if let Some(seed) = o.seed {
        learner.fitted.seed = seed;
    }
    let abstraction = o.abstraction.unwrap_or(true) && kind == LearnerKind::Tabular;
    let dag = bind_dag(required(&o.dag, "--dag")?, abstraction, &taxi, &mut m)?;
    let data = io::read_dataset(dataset)?;
    io::check_schema(&data, taxi.states(), taxi.actions())?;
    m.input(dataset)?;

    let (policy, reports) = match kind {
        LearnerKind::Tabular => {
            let out = hqi_core::tabular::hqi(&dag, &data, &learner.tabular)?;
            (Policy::Tabular(out.q), out.reports)
        }
        LearnerKind::Fitted => {
            let encoder = hqi_core::fitted::FeatureEncoder::taxi(taxi.states())?;
            let out = hqi_core::fitted::fitted_hqi(&dag, &data, &encoder, &learner.regressor, &learner.fitted)?;
            (Policy::Fitted(out.q), out.reports)
        }
    };
    for r in &reports {
        println!(
            "{:<12} sweeps {:>4}  converged {:<5}  delta {:.3e}  updates/sweep {}",
            r.subtask, r.sweeps, r.converged, r.final_delta, r.updates_per_sweep
        );
    }
    io::save_policy(out, &policy, &dag)?;
    m.output(out)?;
    println!("wrote policy to {}", out.display());

    #[derive(Serialize)]
    struct Effective<'a> {
        #[serde(flatten)]
        opts: &'a TrainOpts,
        settings: &'a LearnerFile,
    }
    finish(m, &Effective { opts: &o, settings: &learner }, &o.manifest, Some(out))
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct EvaluateOpts {
    #[arg(long)]
    pub policy: Option<PathBuf>,
    /// Hierarchy the policy was trained on.
    #[arg(long)]
    pub dag: Option<String>,
    /// Whether the policy was trained with state abstraction.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub abstraction: Option<bool>,
    #[arg(long)]
    pub env: Option<PathBuf>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Discount of the reported return; the env's when absent.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// JSON summary with every episode's return.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

impl Layered for EvaluateOpts {
    fn defaults() -> Self {
        EvaluateOpts {
            dag: Some("dag1".into()),
            abstraction: Some(true),
            episodes: Some(100),
            max_steps: Some(1000),
            seed: Some(0),
            ..Default::default()
        }
    }
}

fn print_summary(s: &eval::EvalSummary) {
    println!(
        "mean return {:.4} (std {:.4}) over {} episodes, {} truncated",
        s.mean_return,
        s.std_return(),
        s.episodes,
        s.truncations
    );
}

fn write_summary(out: &Path, s: &eval::EvalSummary, m: &mut RunManifest) -> Result<()> {
    io::write_atomic(out, serde_json::to_string_pretty(s).expect("summary serializes").as_bytes())?;
    m.output(out)
}

pub fn evaluate(config: Option<&Path>, flags: &EvaluateOpts) -> Result<()> {
    let mut o = resolve(config, flags)?;
    let policy_path = required(&o.policy, "--policy")?.clone();
    let mut m = RunManifest::begin("evaluate", String::new(), o.seed);
    let taxi = env_input(&o.env, &mut m)?;
    o.gamma = Some(o.gamma.unwrap_or(taxi.config().gamma));
    let dag = bind_dag(required(&o.dag, "--dag")?, o.abstraction.unwrap_or(true), &taxi, &mut m)?;
    let policy = io::load_policy(&policy_path, &dag)?;
    m.input(&policy_path)?;
    let spec = EvalSpec {
        episodes: *required(&o.episodes, "--episodes")?,
        max_steps: *required(&o.max_steps, "--max-steps")?,
        gamma: o.gamma.unwrap(),
        seed: *required(&o.seed, "--seed")?,
    };
    let summary = eval::evaluate(&policy, &dag, &taxi, &spec)?;
    print_summary(&summary);
    if let Some(out) = &o.out {
        write_summary(out, &summary, &mut m)?;
    }
    finish(m, &o, &o.manifest, o.out.as_deref())
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExperimentOpts {
    /// Experiment spec file; the built-in three-learner Taxi protocol when absent.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Directory for `cells.csv`, `aggregate.csv` and the manifest.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Overrides the spec's first data seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the spec's number of seeds.
    #[arg(long)]
    pub repeats: Option<usize>,
    /// No per-cell progress on stderr.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub quiet: Option<bool>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

impl Layered for ExperimentOpts {
    fn defaults() -> Self {
        ExperimentOpts { out_dir: Some("results".into()), quiet: Some(false), ..Default::default() }
    }
}

pub fn experiment(config: Option<&Path>, flags: &ExperimentOpts) -> Result<()> {
    let o = resolve(config, flags)?;
    let out_dir = required(&o.out_dir, "--out-dir")?;
    let mut m = RunManifest::begin("experiment", String::new(), None);
    let mut spec = match &o.spec {
        Some(p) => {
            m.input(p)?;
            ExperimentSpec::from_toml(&io::read_text(p)?)?
        }
        None => ExperimentSpec::default(),
    };
    if let Some(seed) = o.seed {
        spec.seed = seed;
    }
    if let Some(r) = o.repeats {
        spec.repeats = r;
    }
    m.seed = Some(spec.seed);
    spec.validate()?;

    let taxi = Taxi::new(spec.env_config())?;
    let mut dag_files = Vec::new();
    for arm in &spec.arms {
        if let (_, Some(p)) = load_dag(&arm.dag, taxi.actions())? {
            dag_files.push(p);
        }
    }
    for p in &dag_files {
        m.input(p)?;
    }
    let resolve_dag = |name: &str| -> Result<DagConfig> { load_dag(name, taxi.actions()).map(|(cfg, _)| cfg) };
    let quiet = o.quiet.unwrap_or(false);
    let report = eval::run_experiment(&spec, &resolve_dag, &mut |c| {
        if !quiet {
            eprintln!(
                "{:<10} {:<6} n={:<6} seed={:<4} mean {:>9.3}  truncated {}",
                c.learner, c.dag, c.checkpoint, c.seed, c.mean_return, c.truncations
            );
        }
    })?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let cells = out_dir.join("cells.csv");
    let aggregate = out_dir.join("aggregate.csv");
    io::write_atomic(&cells, report.cells_csv().as_bytes())?;
    io::write_atomic(&aggregate, report.aggregate_csv().as_bytes())?;
    m.output(&cells)?;
    m.output(&aggregate)?;
    for f in &report.failures {
        eprintln!("failed: {} n={} seed={}: {}", f.learner, f.checkpoint, f.seed, f.message);
    }
    let last = *spec.checkpoints.last().expect("validated");
    for a in report.aggregates().iter().filter(|a| a.checkpoint == last || a.learner == "oracle") {
        println!("{:<10} {:<6} n={:<6} mean {:>9.3}  std {:>8.3}  runs {}", a.learner, a.dag, a.checkpoint, a.mean, a.std, a.runs);
    }
    println!("wrote {} and {}", cells.display(), aggregate.display());

    #[derive(Serialize)]
    struct Effective<'a> {
        #[serde(flatten)]
        opts: &'a ExperimentOpts,
        experiment: &'a ExperimentSpec,
    }
    let path = o.manifest.clone().unwrap_or_else(|| out_dir.join("manifest.json"));
    finish(m, &Effective { opts: &o, experiment: &spec }, &Some(path), None)
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ValidateOpts {
    /// Built-in hierarchy or DAG config file.
    #[arg(long)]
    pub dag: Option<String>,
    #[arg(long)]
    pub env: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

impl Layered for ValidateOpts {
    fn defaults() -> Self {
        ValidateOpts { dag: Some("dag1".into()), ..Default::default() }
    }
}

pub fn validate_dag(config: Option<&Path>, flags: &ValidateOpts) -> Result<()> {
    let o = resolve(config, flags)?;
    let mut m = RunManifest::begin("validate-dag", String::new(), None);
    let taxi = env_input(&o.env, &mut m)?;
    let (cfg, path) = load_dag(required(&o.dag, "--dag")?, taxi.actions())?;
    if let Some(p) = &path {
        m.input(p)?;
    }
    let report = validate(&cfg, taxi.states(), taxi.actions(), &taxi.predicates());
    if !report.is_valid() {
        for v in &report.violations {
            println!("violation: {v}");
        }
        finish(m, &o, &o.manifest, None)?;
        return Err(Error::Hierarchy(format!("`{}` is not a valid hierarchy", cfg.name)));
    }
    let dag = TaskDag::build(cfg, taxi.states(), taxi.actions(), &taxi.predicates())?;
    println!("`{}` is valid: {} subtasks, depth {}", dag.name(), dag.len(), dag.depth());
    let order = dag.training_order()?;
    let names: Vec<&str> = order.iter().map(|&id| dag.subtask(id).name.as_str()).collect();
    println!("training order: {}", names.join(", "));
    finish(m, &o, &o.manifest, None)
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OracleOpts {
    #[arg(long)]
    pub env: Option<PathBuf>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Policy file of the flat solution, loadable with `--dag flat`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

impl Layered for OracleOpts {
    fn defaults() -> Self {
        OracleOpts { episodes: Some(10_000), max_steps: Some(1000), seed: Some(0), ..Default::default() }
    }
}

pub fn oracle(config: Option<&Path>, flags: &OracleOpts) -> Result<()> {
    let o = resolve(config, flags)?;
    let mut m = RunManifest::begin("oracle", String::new(), o.seed);
    let taxi = env_input(&o.env, &mut m)?;
    let solved = eval::oracle(&taxi.true_model(), taxi.states(), taxi.actions())?;
    let spec = EvalSpec {
        episodes: *required(&o.episodes, "--episodes")?,
        max_steps: *required(&o.max_steps, "--max-steps")?,
        gamma: taxi.config().gamma,
        seed: *required(&o.seed, "--seed")?,
    };
    let summary = eval::evaluate(&solved.q, &solved.dag, &taxi, &spec)?;
    print_summary(&summary);
    if let Some(out) = &o.out {
        io::save_policy(out, &Policy::Tabular(solved.q), &solved.dag)?;
        m.output(out)?;
    }
    finish(m, &o, &o.manifest, o.out.as_deref())
}
