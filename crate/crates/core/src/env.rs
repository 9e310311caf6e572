//! Sampling environments over enumerable state spaces.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::mdp::{ActionSpace, StateSpace, TabularModel};
use crate::rng::Rng;

/// Result of one primitive step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub next: usize,
    pub reward: f64,
    pub terminal: bool,
}

/// An episodic environment with enumerable live states.
pub trait Environment {
    fn states(&self) -> &StateSpace;
    fn actions(&self) -> &ActionSpace;
    fn gamma(&self) -> f64;
    fn initial_state(&self, rng: &mut Rng) -> usize;
    /// One step from a live state. Never called after a terminal outcome;
    /// [`Episode`] enforces that.
    fn step(&self, s: usize, a: usize, rng: &mut Rng) -> Outcome;
}

/// A running episode. Stepping after the terminal outcome is a contract
/// violation.
#[derive(Debug, Clone)]
pub struct Episode {
    state: usize,
    done: bool,
    steps: usize,
}

impl Episode {
    pub fn start<E: Environment + ?Sized>(env: &E, rng: &mut Rng) -> Self {
        Episode { state: env.initial_state(rng), done: false, steps: 0 }
    }

    pub fn from_state(state: usize) -> Self {
        Episode { state, done: false, steps: 0 }
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step<E: Environment + ?Sized>(&mut self, env: &E, a: usize, rng: &mut Rng) -> Result<Outcome> {
        if self.done {
            return Err(Error::EpisodeFinished);
        }
        if a >= env.actions().len() {
            return Err(Error::domain(format!("action {a} outside 0..{}", env.actions().len())));
        }
        let out = env.step(self.state, a, rng);
        self.state = out.next;
        self.done = out.terminal;
        self.steps += 1;
        Ok(out)
    }
}

/// Environment that samples from a [`TabularModel`]. Unvisited rows are not
/// allowed. Transitions to the absorbing state end the episode; the reported
/// `next` is then the originating state.
#[derive(Debug, Clone)]
pub struct ModelEnv {
    model: TabularModel,
    states: StateSpace,
    actions: ActionSpace,
}

impl ModelEnv {
    pub fn new(model: TabularModel) -> Result<Self> {
        for s in 0..model.n_states() {
            for a in 0..model.n_actions() {
                if !model.is_visited(s, a) {
                    return Err(Error::InvalidModel(format!("row (s={s}, a={a}) is empty")));
                }
            }
        }
        let states = StateSpace::new([("s", model.n_states())])?;
        let actions = ActionSpace::anonymous(model.n_actions())?;
        Ok(ModelEnv { model, states, actions })
    }

    pub fn model(&self) -> &TabularModel {
        &self.model
    }
}

fn sample_index<I: IntoIterator<Item = f64>>(weights: I, rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.into_iter().enumerate() {
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

impl Environment for ModelEnv {
    fn states(&self) -> &StateSpace {
        &self.states
    }

    fn actions(&self) -> &ActionSpace {
        &self.actions
    }

    fn gamma(&self) -> f64 {
        self.model.gamma()
    }

    fn initial_state(&self, rng: &mut Rng) -> usize {
        sample_index(self.model.initial().iter().copied(), rng)
    }

    fn step(&self, s: usize, a: usize, rng: &mut Rng) -> Outcome {
        let row = self.model.row(s, a).expect("ModelEnv rows are all visited");
        let t = row[sample_index(row.iter().map(|t| t.prob), rng)];
        let terminal = t.next == self.model.absorbing();
        Outcome { next: if terminal { s } else { t.next }, reward: t.reward, terminal }
    }
}
