use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::mdp::{Dataset, Experience};
use crate::rng;

/// Uniform-random data collection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollectionSpec {
    pub n_samples: usize,
    /// Steps after which an unfinished episode is abandoned and restarted.
    pub episode_cap: usize,
    pub seed: u64,
}

impl Default for CollectionSpec {
    fn default() -> Self {
        CollectionSpec { n_samples: 60_000, episode_cap: 500, seed: 0 }
    }
}

impl CollectionSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::config("n_samples must be positive"));
        }
        if self.episode_cap == 0 {
            return Err(Error::config("episode_cap must be positive"));
        }
        Ok(())
    }
}

/// Exactly `n_samples` transitions of the uniform-random policy, restarting
/// from a fresh initial state on termination or at the cap.
pub fn collect<E: Environment + ?Sized>(env: &E, spec: &CollectionSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut r = rng::stream(spec.seed);
    let n_actions = env.actions().len();
    let mut records = Vec::with_capacity(spec.n_samples);
    let mut s = env.initial_state(&mut r);
    let mut steps = 0;
    while records.len() < spec.n_samples {
        let a = r.random_range(0..n_actions);
        let out = env.step(s, a, &mut r);
        records.push(Experience { s, a, r: out.reward, s_next: out.next, terminal: out.terminal });
        steps += 1;
        if out.terminal || steps == spec.episode_cap {
            s = env.initial_state(&mut r);
            steps = 0;
        } else {
            s = out.next;
        }
    }
    Dataset::from_records(env.states().clone(), env.actions().clone(), records)
}
