//! Randomised invariant suites. Each returns the first counterexample as
//! text so both the test wrappers and the acceptance binary can run them.

use hqi_core::env::Environment;
use hqi_core::eval::{collect, evaluate, execute_hierarchical, CollectionSpec, EpisodeResult, EvalSpec, Policy};
use hqi_core::fitted::{fitted_hqi, FeatureEncoder, FittedConfig, RegressorConfig, TreeEnsembleConfig};
use hqi_core::hierarchy::{builtin, training_order, Child, SubtaskId, TaskDag, BUILTIN_NAMES};
use hqi_core::io::{format_dataset, policy_to_json};
use hqi_core::mdp::{all_columns, Experience, QTable, StateSpace};
use hqi_core::rng::{self, Rng};
use hqi_core::tabular::{greedy_policy, hqi, BackupContext, Continuation, HierarchicalQ, LearnerConfig, QFunction, TerminalCheck};
use hqi_core::taxi::Taxi;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::Rng as _;
use rand::seq::SliceRandom;

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() })
}

fn taxi_dag(taxi: &Taxi, name: &str, abstraction: bool) -> TaskDag {
    let cfg = builtin(name, taxi.actions()).unwrap();
    let cfg = if abstraction { cfg } else { cfg.without_abstraction() };
    TaskDag::build(cfg, taxi.states(), taxi.actions(), &taxi.predicates()).unwrap()
}

/// Random acyclic child lists: edges only go from earlier to later nodes of
/// a shuffled ranking.
fn random_dag(n: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut r = rng::stream(seed);
    let mut rank: Vec<usize> = (0..n).collect();
    rank.shuffle(&mut r);
    let mut children = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if r.random_bool(0.3) {
                children[rank[i]].push(rank[j]);
            }
        }
    }
    children
}

pub fn toposort(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(1usize..14, any::<u64>()), |(n, seed)| {
            let children = random_dag(n, seed);
            let order = training_order(&children).map_err(|c| TestCaseError::fail(format!("cycle at {c}")))?;
            let mut sorted = order.clone();
            sorted.sort_unstable();
            prop_assert_eq!(sorted, (0..n).collect::<Vec<_>>());
            let pos = |x: usize| order.iter().position(|&y| y == x).unwrap();
            for (p, kids) in children.iter().enumerate() {
                for &c in kids {
                    prop_assert!(pos(c) < pos(p), "child {} after parent {}", c, p);
                }
            }
            // closing any edge into a cycle must be rejected
            if let Some((p, c)) = children.iter().enumerate().find_map(|(p, k)| k.first().map(|&c| (p, c))) {
                let mut cyclic = children.clone();
                cyclic[c].push(p);
                prop_assert!(training_order(&cyclic).is_err());
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// `classify` keeps a sample exactly when s is active, the child may run at
/// s and the child's greedy primitive at s is a (the last condition waived
/// on the terminal branch under the literal check).
pub fn backup_skip(cases: u32) -> Result<(), String> {
    let taxi = Taxi::standard();
    let dag = taxi_dag(&taxi, "dag1", true);
    let data = collect(&taxi, &CollectionSpec { n_samples: 3000, episode_cap: 200, seed: 1 }).unwrap();
    let q = hqi(&dag, &data, &LearnerConfig::default()).unwrap().q;
    let contexts: Vec<(TerminalCheck, Vec<BackupContext>)> = [TerminalCheck::Consistent, TerminalCheck::Literal]
        .into_iter()
        .map(|check| {
            let ctx = dag.subtasks().iter().map(|st| BackupContext::new(&dag, st.id, &q, check).unwrap()).collect();
            (check, ctx)
        })
        .collect();
    runner(cases)
        .run(&(0usize..500, 0usize..6, any::<u64>()), |(s, a, seed)| {
            let out = taxi.step(s, a, &mut rng::stream(seed));
            let e = Experience { s, a, r: out.reward, s_next: out.next, terminal: out.terminal };
            for (check, ctxs) in &contexts {
                for (st, ctx) in dag.subtasks().iter().zip(ctxs) {
                    for (c, &u) in st.children.iter().enumerate() {
                        let runnable = match u {
                            Child::Primitive(_) => true,
                            Child::Subtask(id) => !dag.subtask(id).is_terminal(s),
                        };
                        let consistent = greedy_policy(&q, &dag, u, s).unwrap().action == a;
                        let ends = e.terminal || st.is_terminal(e.s_next);
                        let waived = ends && *check == TerminalCheck::Literal;
                        let kept = !st.is_terminal(s) && runnable && (consistent || waived);
                        let got = ctx.classify(&e, c);
                        prop_assert_eq!(got.is_some(), kept, "{} child {} at s={} a={}", st.name, c, s, a);
                        let Some(b) = got else { continue };
                        prop_assert_eq!(b.reward, e.r);
                        let expected = if ends {
                            Continuation::Terminal
                        } else if dag.child_terminates(u, e.s_next) {
                            Continuation::MaxOver { s_next: e.s_next, mask: dag.admissible_mask(st.id, e.s_next) }
                        } else {
                            Continuation::SameChild { s_next: e.s_next }
                        };
                        prop_assert_eq!(b.continuation, expected);
                    }
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// With rewards in [-10, 20] and discount 0.99 every learned entry lies in
/// [-1000, 2000].
pub fn q_bounds(cases: u32) -> Result<(), String> {
    let taxi = Taxi::standard();
    let dags: Vec<TaskDag> = BUILTIN_NAMES
        .iter()
        .flat_map(|name| [taxi_dag(&taxi, name, true), taxi_dag(&taxi, name, false)])
        .collect();
    runner(cases)
        .run(&(50usize..20_000, any::<u64>()), |(n, seed)| {
            let data = collect(&taxi, &CollectionSpec { n_samples: n, episode_cap: 500, seed }).unwrap();
            for dag in &dags {
                let q = hqi(dag, &data, &LearnerConfig::default()).map_err(|e| TestCaseError::fail(e.to_string()))?.q;
                for (id, t) in q.tables() {
                    let (lo, hi) = t.min_max();
                    prop_assert!(lo >= -1000.0 && hi <= 2000.0, "{} {}: [{}, {}]", dag.name(), id, lo, hi);
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn encode_decode(cases: u32) -> Result<(), String> {
    let taxi = Taxi::standard();
    for s in 0..500 {
        if taxi.encode(taxi.decode(s)) != s {
            return Err(format!("taxi state {s} does not round-trip"));
        }
    }
    runner(cases)
        .run(&proptest::collection::vec(1usize..7, 1..6), |cards| {
            let space = StateSpace::new(cards.iter().enumerate().map(|(i, &c)| (format!("v{i}"), c))).unwrap();
            prop_assert_eq!(space.len(), cards.iter().product::<usize>());
            for s in 0..space.len() {
                let values = space.decode(s).unwrap();
                prop_assert!(values.iter().zip(&cards).all(|(v, c)| v < c));
                prop_assert_eq!(space.encode(&values).unwrap(), s);
            }
            prop_assert!(space.decode(space.len()).is_err());
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn reproducibility(cases: u32) -> Result<(), String> {
    let taxi = Taxi::standard();
    let dag = taxi_dag(&taxi, "dag1", true);
    let plain = taxi_dag(&taxi, "dag1", false);
    let encoder = FeatureEncoder::taxi(taxi.states()).unwrap();
    let forest = RegressorConfig::TreeEnsemble(TreeEnsembleConfig { n_trees: 3, ..Default::default() });
    runner(cases)
        .run(&(200usize..3000, any::<u64>()), |(n, seed)| {
            let spec = CollectionSpec { n_samples: n, episode_cap: 500, seed };
            let d1 = collect(&taxi, &spec).unwrap();
            let d2 = collect(&taxi, &spec).unwrap();
            prop_assert_eq!(format_dataset(&d1).unwrap(), format_dataset(&d2).unwrap());

            let q1 = Policy::Tabular(hqi(&dag, &d1, &LearnerConfig::default()).unwrap().q);
            let q2 = Policy::Tabular(hqi(&dag, &d2, &LearnerConfig::default()).unwrap().q);
            prop_assert_eq!(policy_to_json(&q1, &dag).unwrap(), policy_to_json(&q2, &dag).unwrap());

            let eval = EvalSpec { episodes: 20, seed, ..Default::default() };
            prop_assert_eq!(evaluate(&q1, &dag, &taxi, &eval).unwrap(), evaluate(&q2, &dag, &taxi, &eval).unwrap());

            let cfg = FittedConfig { max_iter: 3, seed, ..Default::default() };
            let f1 = Policy::Fitted(fitted_hqi(&plain, &d1, &encoder, &forest, &cfg).unwrap().q);
            let f2 = Policy::Fitted(fitted_hqi(&plain, &d2, &encoder, &forest, &cfg).unwrap().q);
            prop_assert_eq!(policy_to_json(&f1, &plain).unwrap(), policy_to_json(&f2, &plain).unwrap());
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Q-tables with small integer values (so ties occur) and random visited
/// masks, some rows entirely unvisited.
fn random_tables(dag: &TaskDag, seed: u64) -> HierarchicalQ {
    let mut r = rng::stream(seed);
    let mut q = HierarchicalQ::new(dag);
    for st in dag.subtasks() {
        let cols = st.children.len();
        let mut t = QTable::for_abstraction(&st.abstraction, cols);
        for row in 0..t.rows() {
            for c in 0..cols {
                t.set(row, c, r.random_range(-3..=3) as f64);
            }
            let visited = if r.random_bool(0.2) { 0 } else { r.random::<u64>() & all_columns(cols) };
            t.set_visited(row, visited);
        }
        q.insert(dag, st.id, t).unwrap();
    }
    q
}

enum Flow {
    /// The subtask stacked at this level terminated.
    Finished(usize),
    EnvDone,
    Truncated,
    TooDeep,
}

/// Recursive call-and-return execution, written independently of the
/// library's stack machine.
struct Reference<'a> {
    q: &'a HierarchicalQ,
    dag: &'a TaskDag,
    taxi: &'a Taxi,
    rng: Rng,
    max_steps: usize,
    gamma: f64,
    s: usize,
    steps: usize,
    ret: f64,
    discount: f64,
}

impl Reference<'_> {
    fn choose(&self, id: SubtaskId) -> Child {
        let st = self.dag.subtask(id);
        let runnable: Vec<usize> = (0..st.children.len())
            .filter(|&c| match st.children[c] {
                Child::Primitive(_) => true,
                Child::Subtask(k) => !self.dag.subtask(k).is_terminal(self.s),
            })
            .collect();
        let candidates = if runnable.is_empty() { (0..st.children.len()).collect() } else { runnable };
        let visited = self.q.visited(id, self.s);
        let seen: Vec<usize> = candidates.iter().copied().filter(|&c| visited >> c & 1 == 1).collect();
        let pool = if seen.is_empty() { candidates } else { seen };
        let mut best = pool[0];
        for &c in &pool[1..] {
            if self.q.q(id, self.s, c) > self.q.q(id, self.s, best) {
                best = c;
            }
        }
        st.children[best]
    }

    fn run(&mut self, stack: &mut Vec<SubtaskId>) -> Flow {
        if stack.len() > self.dag.depth() {
            return Flow::TooDeep;
        }
        loop {
            if self.steps == self.max_steps {
                return Flow::Truncated;
            }
            match self.choose(*stack.last().unwrap()) {
                Child::Primitive(a) => {
                    let out = self.taxi.step(self.s, a, &mut self.rng);
                    self.ret += self.discount * out.reward;
                    self.discount *= self.gamma;
                    self.steps += 1;
                    if out.terminal {
                        return Flow::EnvDone;
                    }
                    self.s = out.next;
                    if let Some(i) = stack.iter().position(|&id| self.dag.subtask(id).is_terminal(self.s)) {
                        return Flow::Finished(i);
                    }
                }
                Child::Subtask(id) => {
                    stack.push(id);
                    let flow = self.run(stack);
                    stack.pop();
                    match flow {
                        Flow::Finished(i) if i == stack.len() => {}
                        other => return other,
                    }
                }
            }
        }
    }
}

fn reference_episode(q: &HierarchicalQ, dag: &TaskDag, taxi: &Taxi, start: usize, rng: Rng, max_steps: usize) -> Option<EpisodeResult> {
    let mut reference =
        Reference { q, dag, taxi, rng, max_steps, gamma: 0.99, s: start, steps: 0, ret: 0.0, discount: 1.0 };
    if dag.subtask(dag.root()).is_terminal(start) {
        return Some(EpisodeResult { discounted_return: 0.0, steps: 0, truncated: false });
    }
    let truncated = match reference.run(&mut vec![dag.root()]) {
        Flow::Finished(_) | Flow::EnvDone => false,
        Flow::Truncated => true,
        Flow::TooDeep => return None,
    };
    Some(EpisodeResult { discounted_return: reference.ret, steps: reference.steps, truncated })
}

pub fn executor(cases: u32) -> Result<(), String> {
    let taxi = Taxi::standard();
    let dags: Vec<TaskDag> = ["dag1", "dag2", "dag3"].iter().map(|n| taxi_dag(&taxi, n, true)).collect();
    runner(cases)
        .run(&(0usize..3, any::<u64>(), 0usize..500, any::<u64>(), 1usize..300), |(d, table_seed, start, seed, max_steps)| {
            let dag = &dags[d];
            let q = random_tables(dag, table_seed);
            let ours = execute_hierarchical(&q, dag, &taxi, start, &mut rng::stream(seed), max_steps, 0.99).unwrap();
            prop_assert!(ours.steps <= max_steps);
            if ours.truncated {
                prop_assert_eq!(ours.steps, max_steps);
            }
            let theirs = reference_episode(&q, dag, &taxi, start, rng::stream(seed), max_steps);
            prop_assert!(theirs.is_some(), "reference stack deeper than {}", dag.depth());
            let theirs = theirs.unwrap();
            prop_assert_eq!(ours.steps, theirs.steps);
            prop_assert_eq!(ours.truncated, theirs.truncated);
            prop_assert_eq!(ours.discounted_return.to_bits(), theirs.discounted_return.to_bits());
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Every suite with its default case count.
pub const SUITES: [(&str, fn(u32) -> Result<(), String>, u32); 6] = [
    ("toposort", toposort, 200),
    ("backup skip rule", backup_skip, 300),
    ("Q bounds", q_bounds, 8),
    ("encode/decode", encode_decode, 100),
    ("reproducibility", reproducibility, 4),
    ("executor", executor, 200),
];
