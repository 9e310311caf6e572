use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::hierarchy::{Child, SubtaskId, TaskDag};
use crate::rng::{self, Rng};
use crate::tabular::{greedy_child, QFunction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    /// Σ γ^t r_t.
    pub discounted_return: f64,
    pub steps: usize,
    /// The step limit ended the episode.
    pub truncated: bool,
}

/// Greedy call-and-return execution from `start`.
///
/// The stack holds the active subtasks, root first. Each step descends from
/// the top by greedy child until a primitive is reached and executes it.
/// Then the shallowest stacked subtask whose termination holds at the new
/// state is popped together with everything above it. The episode ends when
/// the environment terminates, the root terminates, or after `max_steps`.
pub fn execute_hierarchical<Q: QFunction + ?Sized, E: Environment + ?Sized>(
    q: &Q,
    dag: &TaskDag,
    env: &E,
    start: usize,
    rng: &mut Rng,
    max_steps: usize,
    gamma: f64,
) -> Result<EpisodeResult> {
    if env.states() != dag.states() || env.actions() != dag.actions() {
        return Err(Error::schema("environment spaces differ from the hierarchy's spaces"));
    }
    if let Some(st) = dag.subtasks().iter().find(|st| !q.has(st.id)) {
        return Err(Error::Hierarchy(format!("policy has no value function for subtask `{}`", st.name)));
    }
    let depth = dag.depth();
    let mut stack: Vec<SubtaskId> = vec![dag.root()];
    let mut s = start;
    let mut ret = 0.0;
    let mut discount = 1.0;
    let mut steps = 0;
    if dag.subtask(dag.root()).is_terminal(s) {
        return Ok(EpisodeResult { discounted_return: 0.0, steps, truncated: false });
    }
    loop {
        if steps == max_steps {
            return Ok(EpisodeResult { discounted_return: ret, steps, truncated: true });
        }
        let action = loop {
            let top = *stack.last().expect("root stays on the stack");
            match dag.subtask(top).children[greedy_child(q, dag, top, s)] {
                Child::Primitive(a) => break a,
                Child::Subtask(id) => {
                    stack.push(id);
                    assert!(stack.len() <= depth, "execution stack deeper than the hierarchy");
                }
            }
        };
        let out = env.step(s, action, rng);
        ret += discount * out.reward;
        discount *= gamma;
        steps += 1;
        if out.terminal {
            return Ok(EpisodeResult { discounted_return: ret, steps, truncated: false });
        }
        s = out.next;
        if let Some(i) = stack.iter().position(|&id| dag.subtask(id).is_terminal(s)) {
            if i == 0 {
                return Ok(EpisodeResult { discounted_return: ret, steps, truncated: false });
            }
            stack.truncate(i);
        }
        debug_assert!(stack.iter().all(|&id| !dag.subtask(id).is_terminal(s)));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSpec {
    pub episodes: usize,
    pub max_steps: usize,
    pub gamma: f64,
    pub seed: u64,
}

impl Default for EvalSpec {
    fn default() -> Self {
        EvalSpec { episodes: 100, max_steps: 1000, gamma: 0.99, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub mean_return: f64,
    pub episodes: usize,
    pub truncations: usize,
    pub returns: Vec<f64>,
}

impl EvalSummary {
    /// Sample standard deviation of the episode returns.
    pub fn std_return(&self) -> f64 {
        sample_std(&self.returns)
    }
}

pub(crate) fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Mean discounted return over `spec.episodes` greedy episodes. Episode `i`
/// draws its initial state and its transitions from stream `i` of
/// `spec.seed`, so two policies evaluated with one seed face the same
/// starts and the same randomness.
pub fn evaluate<Q: QFunction + ?Sized, E: Environment + ?Sized>(
    q: &Q,
    dag: &TaskDag,
    env: &E,
    spec: &EvalSpec,
) -> Result<EvalSummary> {
    if spec.episodes == 0 || spec.max_steps == 0 {
        return Err(Error::config("episodes and max_steps must be positive"));
    }
    let mut returns = Vec::with_capacity(spec.episodes);
    let mut truncations = 0;
    for i in 0..spec.episodes {
        let mut r = rng::substream(spec.seed, i as u64);
        let start = env.initial_state(&mut r);
        let ep = execute_hierarchical(q, dag, env, start, &mut r, spec.max_steps, spec.gamma)?;
        truncations += ep.truncated as usize;
        returns.push(ep.discounted_return);
    }
    let mean_return = returns.iter().sum::<f64>() / returns.len() as f64;
    Ok(EvalSummary { mean_return, episodes: spec.episodes, truncations, returns })
}
