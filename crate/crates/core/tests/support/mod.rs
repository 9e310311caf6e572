//! Helpers shared by the integration tests and the acceptance binary.

#![allow(dead_code)]

pub mod properties;

use hqi_core::env::{Environment, ModelEnv};
use hqi_core::hierarchy::{DagConfig, PredicateSpec, SubtaskConfig};
use hqi_core::mdp::{Dataset, Experience, TabularModel, Transition};
use hqi_core::rng;
use rand::Rng as _;

/// A random MDP with `n` states and `m` actions: one to three successors
/// per pair, rewards in [-1, 1], each pair ending the episode with
/// probability 0.1 at most.
pub fn random_mdp(n: usize, m: usize, gamma: f64, seed: u64) -> TabularModel {
    let mut r = rng::stream(seed);
    let rows = (0..n * m)
        .map(|_| {
            let k = r.random_range(1..=3);
            let mut probs: Vec<f64> = (0..k).map(|_| r.random_range(0.1..1.0)).collect();
            let total: f64 = probs.iter().sum();
            let stop: f64 = r.random_range(0.0..0.1);
            let mut row: Vec<Transition> = probs
                .iter_mut()
                .map(|p| Transition {
                    next: r.random_range(0..n),
                    prob: *p / total * (1.0 - stop),
                    reward: r.random_range(-1.0..1.0),
                })
                .collect();
            row.push(Transition { next: n, prob: stop, reward: r.random_range(-1.0..1.0) });
            Some(row)
        })
        .collect();
    let initial = vec![1.0 / n as f64; n];
    TabularModel::new(n, m, rows, initial, gamma).unwrap()
}

/// Every (s, a) sampled between one and `max_repeats` times.
pub fn exhaustive_dataset(env: &ModelEnv, max_repeats: usize, seed: u64) -> Dataset {
    let mut r = rng::stream(seed);
    let mut data = Dataset::new(env.states().clone(), env.actions().clone());
    for s in 0..env.states().len() {
        for a in 0..env.actions().len() {
            for _ in 0..r.random_range(1..=max_repeats) {
                let out = env.step(s, a, &mut r);
                data.push(Experience { s, a, r: out.reward, s_next: out.next, terminal: out.terminal }).unwrap();
            }
        }
    }
    data
}

/// A two-level hierarchy over a [`ModelEnv`]: a subtask over the first
/// half of the actions that ends in state `stop`, below a root that may
/// call it or any action.
pub fn two_level_dag(n_actions: usize, stop: usize) -> DagConfig {
    let names: Vec<String> = (0..n_actions).map(|a| format!("a{a}")).collect();
    let half = n_actions.div_ceil(2);
    let mut root_children = vec!["sub".to_string()];
    root_children.extend(names.iter().cloned());
    DagConfig {
        name: "two-level".into(),
        root: "root".into(),
        subtasks: vec![
            SubtaskConfig {
                name: "root".into(),
                children: root_children,
                termination: PredicateSpec::never(),
                abstraction: None,
            },
            SubtaskConfig {
                name: "sub".into(),
                children: names[..half].to_vec(),
                termination: PredicateSpec::new("var_equals", &["s", &stop.to_string()]),
                abstraction: None,
            },
        ],
    }
}
