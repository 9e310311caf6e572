//! The stochastic Taxi domain.
//!
//! A taxi moves on a walled grid with four landmark cells (R, G, B, Y), picks
//! a passenger up at one landmark and drops them at a destination landmark.
//! State variables are `[dest, pass, x, y]`: `dest` in 0..4 is the destination
//! landmark, `pass` in 0..5 is the passenger's landmark or 4 when riding, and
//! `(x, y)` is the taxi cell with `y` growing northwards.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::env::{Environment, Outcome};
use crate::error::{Error, Result};
use crate::hierarchy::{BasicPredicates, PredicateRegistry, PredicateSpec, TerminationFn};
use crate::mdp::{ActionSpace, StateSpace, TabularModel, Transition};
use crate::rng::Rng;

pub const NORTH: usize = 0;
pub const SOUTH: usize = 1;
pub const EAST: usize = 2;
pub const WEST: usize = 3;
pub const PICKUP: usize = 4;
pub const PUTDOWN: usize = 5;
pub const ACTION_NAMES: [&str; 6] = ["north", "south", "east", "west", "pickup", "putdown"];

/// Passenger value meaning "in the taxi".
pub const IN_TAXI: usize = 4;
pub const LANDMARK_NAMES: [&str; 4] = ["R", "G", "B", "Y"];

const DIRS: [(i64, i64); 4] = [(0, 1), (0, -1), (1, 0), (-1, 0)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlipMode {
    /// The move is replaced by one of the three other directions.
    Uniform,
    /// The move is replaced by one of the two perpendicular directions.
    Perpendicular,
}

/// A wall between two edge-adjacent cells, blocking both directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Wall(pub [usize; 2], pub [usize; 2]);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaxiConfig {
    pub width: usize,
    pub height: usize,
    /// Cells `[x, y]` of R, G, B and Y, in that order.
    pub landmarks: [[usize; 2]; 4],
    pub walls: Vec<Wall>,
    pub slip: f64,
    pub slip_mode: SlipMode,
    pub step_reward: f64,
    pub illegal_reward: f64,
    pub success_reward: f64,
    pub gamma: f64,
    /// Steps per episode during data collection before a reset.
    pub episode_cap: usize,
}

impl Default for TaxiConfig {
    fn default() -> Self {
        TaxiConfig {
            width: 5,
            height: 5,
            landmarks: [[0, 4], [4, 4], [3, 0], [0, 0]],
            walls: vec![
                Wall([1, 4], [2, 4]),
                Wall([1, 3], [2, 3]),
                Wall([0, 1], [1, 1]),
                Wall([0, 0], [1, 0]),
                Wall([2, 1], [3, 1]),
                Wall([2, 0], [3, 0]),
            ],
            slip: 0.2,
            slip_mode: SlipMode::Uniform,
            step_reward: -1.0,
            illegal_reward: -10.0,
            success_reward: 20.0,
            gamma: 0.99,
            episode_cap: 500,
        }
    }
}

impl TaxiConfig {
    /// Deterministic moves on the standard map.
    pub fn deterministic() -> Self {
        TaxiConfig { slip: 0.0, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::config("taxi grid must be at least 1x1"));
        }
        let in_grid = |c: &[usize; 2]| c[0] < self.width && c[1] < self.height;
        for (i, l) in self.landmarks.iter().enumerate() {
            if !in_grid(l) {
                return Err(Error::config(format!("landmark {} at {l:?} is off the grid", LANDMARK_NAMES[i])));
            }
            // Grids smaller than four cells cannot hold distinct landmarks.
            if self.width * self.height >= 4 && self.landmarks[..i].contains(l) {
                return Err(Error::config(format!("landmark {} shares cell {l:?}", LANDMARK_NAMES[i])));
            }
        }
        for w in &self.walls {
            let (a, b) = (w.0, w.1);
            let adjacent = a[0].abs_diff(b[0]) + a[1].abs_diff(b[1]) == 1;
            if !in_grid(&a) || !in_grid(&b) || !adjacent {
                return Err(Error::config(format!("wall {a:?}|{b:?} is not between adjacent grid cells")));
            }
        }
        if !(0.0..1.0).contains(&self.slip) {
            return Err(Error::config(format!("slip {} outside [0, 1)", self.slip)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config(format!("gamma {} outside (0, 1]", self.gamma)));
        }
        if self.episode_cap == 0 {
            return Err(Error::config("episode cap must be positive"));
        }
        Ok(())
    }
}

/// Decoded Taxi state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TaxiState {
    pub dest: usize,
    pub pass: usize,
    pub x: usize,
    pub y: usize,
}

impl TaxiState {
    pub fn new(dest: usize, pass: usize, x: usize, y: usize) -> Self {
        TaxiState { dest, pass, x, y }
    }

    pub fn passenger_in_taxi(&self) -> bool {
        self.pass == IN_TAXI
    }
}

#[derive(Debug, Clone)]
pub struct Taxi {
    cfg: TaxiConfig,
    states: StateSpace,
    actions: ActionSpace,
}

impl Taxi {
    pub fn new(cfg: TaxiConfig) -> Result<Self> {
        cfg.validate()?;
        let states = StateSpace::new([("dest", 4), ("pass", 5), ("x", cfg.width), ("y", cfg.height)])?;
        let actions = ActionSpace::new(ACTION_NAMES)?;
        Ok(Taxi { cfg, states, actions })
    }

    pub fn standard() -> Self {
        Taxi::new(TaxiConfig::default()).expect("default taxi config is valid")
    }

    pub fn config(&self) -> &TaxiConfig {
        &self.cfg
    }

    pub fn encode(&self, t: TaxiState) -> usize {
        self.states.encode(&[t.dest, t.pass, t.x, t.y]).expect("taxi state in range")
    }

    pub fn decode(&self, s: usize) -> TaxiState {
        let v = self.states.decode(s).expect("taxi state index in range");
        TaxiState::new(v[0], v[1], v[2], v[3])
    }

    pub fn landmark(&self, id: usize) -> (usize, usize) {
        let [x, y] = self.cfg.landmarks[id];
        (x, y)
    }

    pub fn at_landmark(&self, t: &TaxiState, id: usize) -> bool {
        self.landmark(id) == (t.x, t.y)
    }

    fn blocked(&self, from: [usize; 2], to: [usize; 2]) -> bool {
        self.cfg.walls.iter().any(|w| (w.0 == from && w.1 == to) || (w.0 == to && w.1 == from))
    }

    /// Cell reached when moving `dir` from `(x, y)`; blocked motion stays put.
    pub fn move_cell(&self, x: usize, y: usize, dir: usize) -> (usize, usize) {
        let (dx, dy) = DIRS[dir];
        let nx = x as i64 + dx;
        let ny = y as i64 + dy;
        if nx < 0 || ny < 0 || nx >= self.cfg.width as i64 || ny >= self.cfg.height as i64 {
            return (x, y);
        }
        let (nx, ny) = (nx as usize, ny as usize);
        if self.blocked([x, y], [nx, ny]) {
            (x, y)
        } else {
            (nx, ny)
        }
    }

    /// Distribution of realised directions for an intended move.
    pub fn direction_distribution(&self, intended: usize) -> Vec<(usize, f64)> {
        let slip = self.cfg.slip;
        let others: Vec<usize> = match self.cfg.slip_mode {
            SlipMode::Uniform => (0..4).filter(|&d| d != intended).collect(),
            SlipMode::Perpendicular => perpendicular(intended).to_vec(),
        };
        let mut out = vec![(intended, 1.0 - slip)];
        if slip > 0.0 {
            out.extend(others.iter().map(|&d| (d, slip / others.len() as f64)));
        }
        out
    }

    fn sample_direction(&self, intended: usize, rng: &mut Rng) -> usize {
        if self.cfg.slip > 0.0 && rng.random::<f64>() < self.cfg.slip {
            match self.cfg.slip_mode {
                SlipMode::Uniform => {
                    let k = rng.random_range(0..3);
                    (0..4).filter(|&d| d != intended).nth(k).unwrap()
                }
                SlipMode::Perpendicular => perpendicular(intended)[rng.random_range(0..2)],
            }
        } else {
            intended
        }
    }

    /// Outcome of a non-move action, or `None` for moves.
    fn deterministic_outcome(&self, t: TaxiState, a: usize) -> Option<(TaxiState, f64, bool)> {
        match a {
            PICKUP => Some(if t.pass < IN_TAXI && self.at_landmark(&t, t.pass) {
                (TaxiState { pass: IN_TAXI, ..t }, self.cfg.step_reward, false)
            } else {
                (t, self.cfg.illegal_reward, false)
            }),
            PUTDOWN => Some(if t.pass == IN_TAXI && self.at_landmark(&t, t.dest) {
                (TaxiState { pass: t.dest, ..t }, self.cfg.success_reward, true)
            } else {
                (t, self.cfg.illegal_reward, false)
            }),
            _ => None,
        }
    }

    pub fn step_state(&self, t: TaxiState, a: usize, rng: &mut Rng) -> (TaxiState, f64, bool) {
        if let Some(out) = self.deterministic_outcome(t, a) {
            return out;
        }
        let dir = self.sample_direction(a, rng);
        let (x, y) = self.move_cell(t.x, t.y, dir);
        (TaxiState { x, y, ..t }, self.cfg.step_reward, false)
    }

    /// The exact model: 500 live states plus the absorbing delivered state.
    pub fn true_model(&self) -> TabularModel {
        let n = self.states.len();
        let mut rows = Vec::with_capacity(n * 6);
        for s in 0..n {
            let t = self.decode(s);
            for a in 0..6 {
                let row = match self.deterministic_outcome(t, a) {
                    Some((next, reward, terminal)) => vec![Transition {
                        next: if terminal { n } else { self.encode(next) },
                        prob: 1.0,
                        reward,
                    }],
                    None => self
                        .direction_distribution(a)
                        .into_iter()
                        .map(|(dir, prob)| {
                            let (x, y) = self.move_cell(t.x, t.y, dir);
                            Transition { next: self.encode(TaxiState { x, y, ..t }), prob, reward: self.cfg.step_reward }
                        })
                        .collect(),
                };
                rows.push(Some(row));
            }
        }
        let start = 1.0 / (16 * self.cfg.width * self.cfg.height) as f64;
        let initial = (0..n).map(|s| if self.decode(s).pass < IN_TAXI { start } else { 0.0 }).collect();
        TabularModel::new(n, 6, rows, initial, self.cfg.gamma).expect("taxi model is well formed")
    }

    pub fn predicates(&self) -> TaxiPredicates {
        TaxiPredicates { landmarks: self.cfg.landmarks }
    }
}

fn perpendicular(dir: usize) -> [usize; 2] {
    if dir == NORTH || dir == SOUTH {
        [EAST, WEST]
    } else {
        [NORTH, SOUTH]
    }
}

impl Environment for Taxi {
    fn states(&self) -> &StateSpace {
        &self.states
    }

    fn actions(&self) -> &ActionSpace {
        &self.actions
    }

    fn gamma(&self) -> f64 {
        self.cfg.gamma
    }

    fn initial_state(&self, rng: &mut Rng) -> usize {
        let t = TaxiState {
            dest: rng.random_range(0..4),
            pass: rng.random_range(0..4),
            x: rng.random_range(0..self.cfg.width),
            y: rng.random_range(0..self.cfg.height),
        };
        self.encode(t)
    }

    fn step(&self, s: usize, a: usize, rng: &mut Rng) -> Outcome {
        let (next, reward, terminal) = self.step_state(self.decode(s), a, rng);
        Outcome { next: self.encode(next), reward, terminal }
    }
}

/// Taxi termination predicates, on top of [`BasicPredicates`]:
///
/// - `passenger_in_taxi`, `passenger_not_in_taxi`
/// - `at_landmark(var)`: taxi stands on the landmark named by `dest` or
///   `pass`; true when that variable holds the in-taxi value.
/// - `at_target`: at the passenger's landmark while waiting, at the
///   destination while riding.
#[derive(Debug, Clone)]
pub struct TaxiPredicates {
    landmarks: [[usize; 2]; 4],
}

impl PredicateRegistry for TaxiPredicates {
    fn resolve(&self, spec: &PredicateSpec, space: &StateSpace) -> std::result::Result<TerminationFn, String> {
        let var = |name: &str| space.var_index(name).ok_or_else(|| format!("state variable `{name}` missing"));
        let landmarks = self.landmarks;
        let at = move |id: usize, x: usize, y: usize| id >= IN_TAXI || landmarks[id] == [x, y];
        match (spec.name.as_str(), spec.args.as_slice()) {
            ("passenger_in_taxi", []) => {
                let p = var("pass")?;
                Ok(Box::new(move |v: &[usize]| v[p] == IN_TAXI))
            }
            ("passenger_not_in_taxi", []) => {
                let p = var("pass")?;
                Ok(Box::new(move |v: &[usize]| v[p] != IN_TAXI))
            }
            ("at_landmark", [which]) if which == "dest" || which == "pass" => {
                let (w, x, y) = (var(which)?, var("x")?, var("y")?);
                Ok(Box::new(move |v: &[usize]| at(v[w], v[x], v[y])))
            }
            ("at_landmark", _) => Err(format!("at_landmark expects `dest` or `pass`, got {spec}")),
            ("at_target", []) => {
                let (d, p, x, y) = (var("dest")?, var("pass")?, var("x")?, var("y")?);
                Ok(Box::new(move |v: &[usize]| {
                    let id = if v[p] == IN_TAXI { v[d] } else { v[p] };
                    at(id, v[x], v[y])
                }))
            }
            _ => BasicPredicates.resolve(spec, space),
        }
    }
}
