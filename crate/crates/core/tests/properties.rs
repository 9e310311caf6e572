mod support;

use support::properties;

#[test]
fn toposort_orders_children_first() {
    properties::toposort(200).unwrap();
}

#[test]
fn backup_skips_exactly_the_inconsistent_samples() {
    properties::backup_skip(300).unwrap();
}

#[test]
fn learned_values_stay_in_bounds() {
    properties::q_bounds(8).unwrap();
}

#[test]
fn state_encoding_is_a_bijection() {
    properties::encode_decode(100).unwrap();
}

#[test]
fn runs_are_bit_reproducible() {
    properties::reproducibility(4).unwrap();
}

#[test]
fn executor_matches_a_recursive_reference() {
    properties::executor(200).unwrap();
}
