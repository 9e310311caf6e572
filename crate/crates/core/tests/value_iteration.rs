use hqi_core::mdp::{value_iteration, TabularModel, Transition};
use proptest::prelude::*;

fn random_model(n: usize, m: usize, seed: u64) -> TabularModel {
    use rand::{Rng, SeedableRng};
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n * m)
        .map(|_| {
            let k = r.random_range(1..=3);
            let mut weights: Vec<f64> = (0..k).map(|_| r.random_range(0.1..1.0)).collect();
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            Some(
                weights
                    .into_iter()
                    .map(|prob| Transition { next: r.random_range(0..=n), prob, reward: r.random_range(-2.0..2.0) })
                    .collect(),
            )
        })
        .collect();
    let mut initial = vec![0.0; n];
    initial[0] = 1.0;
    TabularModel::new(n, m, rows, initial, 0.9).unwrap()
}

/// Relabels live states by `perm` (old index -> new index).
fn permuted(model: &TabularModel, perm: &[usize]) -> TabularModel {
    let (n, m) = (model.n_states(), model.n_actions());
    let mut rows = vec![None; n * m];
    for s in 0..n {
        for a in 0..m {
            let row: Vec<Transition> = model
                .row(s, a)
                .unwrap()
                .iter()
                .map(|t| Transition { next: if t.next == n { n } else { perm[t.next] }, ..*t })
                .collect();
            rows[perm[s] * m + a] = Some(row);
        }
    }
    let mut initial = vec![0.0; n];
    for s in 0..n {
        initial[perm[s]] = model.initial()[s];
    }
    TabularModel::new(n, m, rows, initial, model.gamma()).unwrap()
}

fn case() -> impl Strategy<Value = (usize, usize, u64, Vec<usize>)> {
    (1usize..10, 1usize..5, any::<u64>())
        .prop_flat_map(|(n, m, seed)| (Just(n), Just(m), Just(seed), Just((0..n).collect::<Vec<_>>()).prop_shuffle()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]
    #[test]
    fn value_iteration_commutes_with_relabelling((n, m, seed, perm) in case()) {
        let model = random_model(n, m, seed);
        let q = value_iteration(&model, 1e-10, 10_000).unwrap();
        let qp = value_iteration(&permuted(&model, &perm), 1e-10, 10_000).unwrap();
        for s in 0..n {
            for a in 0..m {
                prop_assert!((q.get(s, a) - qp.get(perm[s], a)).abs() < 1e-8);
            }
        }
    }
}
