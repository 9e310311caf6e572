use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::fitted::forest::{TreeEnsemble, TreeEnsembleConfig};

/// A real-valued function approximator refit from scratch on every call to
/// [`Regressor::fit`].
pub trait Regressor {
    fn fit(&mut self, inputs: &[&[f64]], targets: &[f64]) -> Result<(), String>;

    fn predict(&self, x: &[f64]) -> f64;
}

/// Builds fresh regressors from a seed.
pub trait RegressorFactory {
    type Model: Regressor;

    fn build(&self, seed: u64) -> Self::Model;
}

impl<M: Regressor, F: Fn(u64) -> M> RegressorFactory for F {
    type Model = M;

    fn build(&self, seed: u64) -> M {
        self(seed)
    }
}

fn key(x: &[f64]) -> Vec<u64> {
    // +0.0 and -0.0 are the same input
    x.iter().map(|v| (v + 0.0).to_bits()).collect()
}

/// Exact lookup table: the prediction at a training input is the mean of its
/// targets, 0 anywhere else.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<(Vec<f64>, f64)>", into = "Vec<(Vec<f64>, f64)>")]
pub struct MemorizingRegressor {
    values: HashMap<Vec<u64>, f64>,
}

impl MemorizingRegressor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl Regressor for MemorizingRegressor {
    fn fit(&mut self, inputs: &[&[f64]], targets: &[f64]) -> Result<(), String> {
        if inputs.len() != targets.len() {
            return Err(format!("{} inputs for {} targets", inputs.len(), targets.len()));
        }
        let mut acc: HashMap<Vec<u64>, (f64, u32)> = HashMap::with_capacity(inputs.len());
        // running mean in input order, as the tabular update computes it
        for (x, &y) in inputs.iter().zip(targets) {
            let (mean, n) = acc.entry(key(x)).or_insert((0.0, 0));
            *n += 1;
            match *n {
                1 => *mean = y,
                n => *mean += (y - *mean) / n as f64,
            }
        }
        self.values = acc.into_iter().map(|(k, (mean, _))| (k, mean)).collect();
        Ok(())
    }

    fn predict(&self, x: &[f64]) -> f64 {
        self.values.get(&key(x)).copied().unwrap_or(0.0)
    }
}

impl From<Vec<(Vec<f64>, f64)>> for MemorizingRegressor {
    fn from(entries: Vec<(Vec<f64>, f64)>) -> Self {
        MemorizingRegressor { values: entries.into_iter().map(|(x, v)| (key(&x), v)).collect() }
    }
}

impl From<MemorizingRegressor> for Vec<(Vec<f64>, f64)> {
    fn from(m: MemorizingRegressor) -> Self {
        let mut entries: Vec<_> = m
            .values
            .into_iter()
            .map(|(k, v)| (k.into_iter().map(f64::from_bits).collect::<Vec<_>>(), v))
            .collect();
        entries.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite inputs"));
        entries
    }
}

/// Regressor choice as it appears in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RegressorConfig {
    Memorizing,
    TreeEnsemble(TreeEnsembleConfig),
}

impl Default for RegressorConfig {
    fn default() -> Self {
        RegressorConfig::TreeEnsemble(TreeEnsembleConfig::default())
    }
}

impl RegressorConfig {
    pub fn validate(&self) -> crate::Result<()> {
        match self {
            RegressorConfig::Memorizing => Ok(()),
            RegressorConfig::TreeEnsemble(cfg) => cfg.validate(),
        }
    }
}

/// Any built-in regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "kebab-case")]
pub enum AnyRegressor {
    Memorizing(MemorizingRegressor),
    TreeEnsemble(TreeEnsemble),
}

impl Regressor for AnyRegressor {
    fn fit(&mut self, inputs: &[&[f64]], targets: &[f64]) -> Result<(), String> {
        match self {
            AnyRegressor::Memorizing(m) => m.fit(inputs, targets),
            AnyRegressor::TreeEnsemble(m) => m.fit(inputs, targets),
        }
    }

    fn predict(&self, x: &[f64]) -> f64 {
        match self {
            AnyRegressor::Memorizing(m) => m.predict(x),
            AnyRegressor::TreeEnsemble(m) => m.predict(x),
        }
    }
}

impl RegressorFactory for RegressorConfig {
    type Model = AnyRegressor;

    fn build(&self, seed: u64) -> AnyRegressor {
        match self {
            RegressorConfig::Memorizing => AnyRegressor::Memorizing(MemorizingRegressor::new()),
            RegressorConfig::TreeEnsemble(cfg) => AnyRegressor::TreeEnsemble(TreeEnsemble::new(cfg.clone(), seed)),
        }
    }
}
