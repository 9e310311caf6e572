//! Bagged randomized regression trees.
//!
//! Identical inputs are merged into weighted groups before growing, so a
//! dataset of 60k transitions over 500 states costs at most 500 rows per
//! tree. Bootstrap resampling draws multinomial weights over the groups.
//! Splits minimise the weighted squared error around group means; a group's
//! own spread does not depend on the split and is left out.

use std::collections::HashMap;

use rand::seq::index;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitted::regressor::Regressor;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeEnsembleConfig {
    pub n_trees: usize,
    /// Unlimited when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_depth: Option<usize>,
    /// Minimum (bootstrap) weight on each side of a split.
    pub min_samples_leaf: usize,
    /// Share of features tried at each split, rounded down, at least one.
    pub feature_fraction: f64,
    pub bootstrap: bool,
}

impl Default for TreeEnsembleConfig {
    fn default() -> Self {
        TreeEnsembleConfig { n_trees: 100, max_depth: None, min_samples_leaf: 2, feature_fraction: 1.0 / 3.0, bootstrap: true }
    }
}

impl TreeEnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::config("n_trees must be at least 1"));
        }
        if self.max_depth == Some(0) {
            return Err(Error::config("max_depth must be positive"));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::config("min_samples_leaf must be positive"));
        }
        if !(self.feature_fraction > 0.0 && self.feature_fraction <= 1.0) {
            return Err(Error::config(format!("feature_fraction {} outside (0, 1]", self.feature_fraction)));
        }
        Ok(())
    }

    fn features_per_split(&self, dim: usize) -> usize {
        ((self.feature_fraction * dim as f64).floor() as usize).clamp(1, dim)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Node {
    Leaf { value: f64 },
    /// `x[feature] <= threshold` goes left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub config: TreeEnsembleConfig,
    pub seed: u64,
    pub dim: Option<usize>,
    pub trees: Vec<Tree>,
}

/// Distinct training inputs with their multiplicity and mean target.
struct Groups {
    x: Vec<Vec<f64>>,
    weight: Vec<f64>,
    mean: Vec<f64>,
}

fn group(inputs: &[&[f64]], targets: &[f64]) -> Groups {
    let mut at: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut g = Groups { x: Vec::new(), weight: Vec::new(), mean: Vec::new() };
    let mut sums = Vec::new();
    for (x, &y) in inputs.iter().zip(targets) {
        let key: Vec<u64> = x.iter().map(|v| (v + 0.0).to_bits()).collect();
        let i = *at.entry(key).or_insert_with(|| {
            g.x.push(x.to_vec());
            g.weight.push(0.0);
            sums.push(0.0);
            g.x.len() - 1
        });
        g.weight[i] += 1.0;
        sums[i] += y;
    }
    // single-valued groups keep their target bit-exact
    let mut first = vec![None; g.x.len()];
    let mut constant = vec![true; g.x.len()];
    for (x, &y) in inputs.iter().zip(targets) {
        let key: Vec<u64> = x.iter().map(|v| (v + 0.0).to_bits()).collect();
        let i = at[&key];
        match first[i] {
            None => first[i] = Some(y),
            Some(f) => constant[i] &= f == y,
        }
    }
    g.mean = (0..g.x.len())
        .map(|i| if constant[i] { first[i].unwrap() } else { sums[i] / g.weight[i] })
        .collect();
    g
}

/// Multinomial(n, weight / total) drawn as a chain of binomials.
fn bootstrap_weights(weight: &[f64], rng: &mut rng::Rng) -> Vec<f64> {
    let total: f64 = weight.iter().sum();
    let mut left = total.round() as u64;
    let mut mass = total;
    let mut out = vec![0.0; weight.len()];
    for (o, &w) in out.iter_mut().zip(weight) {
        if left == 0 {
            break;
        }
        let p = (w / mass).min(1.0);
        let k = if p >= 1.0 { left } else { Binomial::new(left, p).expect("valid binomial").sample(rng) };
        *o = k as f64;
        left -= k;
        mass -= w;
    }
    out
}

struct Grower<'a> {
    cfg: &'a TreeEnsembleConfig,
    g: &'a Groups,
    w: Vec<f64>,
    dim: usize,
    m: usize,
    rng: rng::Rng,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
    at: usize,
}

impl Grower<'_> {
    fn leaf_value(&self, rows: &[usize]) -> f64 {
        let first = self.g.mean[rows[0]];
        if rows.iter().all(|&r| self.g.mean[r] == first) {
            return first;
        }
        let (sw, swy) = rows.iter().fold((0.0, 0.0), |(a, b), &r| (a + self.w[r], b + self.w[r] * self.g.mean[r]));
        swy / sw
    }

    fn grow(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: self.leaf_value(rows) });
        let weight: f64 = rows.iter().map(|&r| self.w[r]).sum();
        let min_leaf = self.cfg.min_samples_leaf as f64;
        let constant = rows.iter().all(|&r| self.g.mean[r] == self.g.mean[rows[0]]);
        if constant || rows.len() < 2 || weight < 2.0 * min_leaf || self.cfg.max_depth.is_some_and(|d| depth >= d) {
            return id;
        }
        let sampled = index::sample(&mut self.rng, self.dim, self.m).into_vec();
        let mut best = self.best_split(rows, &sampled);
        if best.is_none() && self.m < self.dim {
            let rest: Vec<usize> = (0..self.dim).filter(|f| !sampled.contains(f)).collect();
            best = self.best_split(rows, &rest);
        }
        let Some(split) = best else { return id };
        rows.sort_by(|&a, &b| self.g.x[a][split.feature].total_cmp(&self.g.x[b][split.feature]).then(a.cmp(&b)));
        let (l, r) = rows.split_at_mut(split.at);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split { feature: split.feature, threshold: split.threshold, left, right };
        id
    }

    fn best_split(&self, rows: &[usize], features: &[usize]) -> Option<BestSplit> {
        let min_leaf = self.cfg.min_samples_leaf as f64;
        let (tw, twy) = rows.iter().fold((0.0, 0.0), |(a, b), &r| (a + self.w[r], b + self.w[r] * self.g.mean[r]));
        let mut order = rows.to_vec();
        let mut best: Option<BestSplit> = None;
        for &f in features {
            order.sort_by(|&a, &b| self.g.x[a][f].total_cmp(&self.g.x[b][f]).then(a.cmp(&b)));
            let (mut lw, mut lwy) = (0.0, 0.0);
            for k in 0..order.len() - 1 {
                let r = order[k];
                lw += self.w[r];
                lwy += self.w[r] * self.g.mean[r];
                let (a, b) = (self.g.x[r][f], self.g.x[order[k + 1]][f]);
                if a == b || lw < min_leaf || tw - lw < min_leaf {
                    continue;
                }
                let rw = tw - lw;
                let rwy = twy - lwy;
                // between-child sum of squares, up to a constant
                let gain = lwy * lwy / lw + rwy * rwy / rw - twy * twy / tw;
                if best.as_ref().is_none_or(|s| gain > s.gain) {
                    let mid = a + (b - a) / 2.0;
                    let threshold = if mid < b { mid } else { a };
                    best = Some(BestSplit { feature: f, threshold, gain, at: k + 1 });
                }
            }
        }
        best.filter(|s| s.gain > 0.0)
    }
}

impl TreeEnsemble {
    pub fn new(config: TreeEnsembleConfig, seed: u64) -> Self {
        TreeEnsemble { config, seed, dim: None, trees: Vec::new() }
    }
}

impl Regressor for TreeEnsemble {
    fn fit(&mut self, inputs: &[&[f64]], targets: &[f64]) -> std::result::Result<(), String> {
        self.config.validate().map_err(|e| e.to_string())?;
        if inputs.is_empty() {
            return Err("empty training set".into());
        }
        if inputs.len() != targets.len() {
            return Err(format!("{} inputs for {} targets", inputs.len(), targets.len()));
        }
        let dim = inputs[0].len();
        if dim == 0 || inputs.iter().any(|x| x.len() != dim) {
            return Err("inputs must share one positive dimension".into());
        }
        if inputs.iter().any(|x| x.iter().any(|v| !v.is_finite())) || targets.iter().any(|y| !y.is_finite()) {
            return Err("non-finite training value".into());
        }
        let g = group(inputs, targets);
        let m = self.config.features_per_split(dim);
        self.trees = (0..self.config.n_trees)
            .map(|t| {
                let mut r = rng::stream(rng::mix(self.seed, t as u64));
                let w = if self.config.bootstrap { bootstrap_weights(&g.weight, &mut r) } else { g.weight.clone() };
                let mut rows: Vec<usize> = (0..g.x.len()).filter(|&i| w[i] > 0.0).collect();
                let mut grower = Grower { cfg: &self.config, g: &g, w, dim, m, rng: r, nodes: Vec::new() };
                grower.grow(&mut rows, 0);
                Tree { nodes: grower.nodes }
            })
            .collect();
        self.dim = Some(dim);
        Ok(())
    }

    fn predict(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(Some(x.len()), self.dim, "prediction before fit or at the wrong dimension");
        let first = self.trees[0].predict(x);
        let (mut sum, mut agree) = (first, true);
        for t in &self.trees[1..] {
            let v = t.predict(x);
            sum += v;
            agree &= v == first;
        }
        if agree {
            first
        } else {
            sum / self.trees.len() as f64
        }
    }
}
