mod common;

use std::collections::HashMap;

use bnlimits::dag::{enumerate_dags, equivalence_class_size, is_singleton_class, markov_equivalent, Dag};
use bnlimits::ensembles::{
    count_bounds_restricted, count_bounds_sparse, count_essential_brute, count_essential_recurrence, count_layered,
    Ensemble, EnsembleSpec,
};
use num_bigint::BigUint;

use common::{all_dags, independence_signature, is_layered, robinson};

fn dags(m: usize) -> Vec<Dag> {
    all_dags(m).into_iter().map(|p| Dag::new(m, p).unwrap()).collect()
}

#[test]
fn brute_dag_generator_matches_robinson() {
    for m in 0..=4 {
        assert_eq!(all_dags(m).len() as u128, robinson(m), "m = {m}");
    }
    assert_eq!(robinson(5), 29281);
}

#[test]
fn library_enumeration_matches_robinson() {
    for m in 1..=5 {
        assert_eq!(enumerate_dags(m, None).unwrap().count() as u128, robinson(m), "m = {m}");
    }
}

#[test]
fn equivalence_agrees_with_d_separation_on_four_nodes() {
    let all = dags(4);
    let sigs: Vec<Vec<bool>> = all.iter().map(independence_signature).collect();
    for (i, g) in all.iter().enumerate() {
        for (j, h) in all.iter().enumerate().skip(i) {
            assert_eq!(markov_equivalent(g, h).unwrap(), sigs[i] == sigs[j], "{g:?} vs {h:?}");
        }
    }
}

#[test]
fn class_sizes_agree_with_d_separation() {
    for m in 1..=4 {
        let all = dags(m);
        let mut classes: HashMap<Vec<bool>, u64> = HashMap::new();
        for g in &all {
            *classes.entry(independence_signature(g)).or_default() += 1;
        }
        for g in &all {
            let size = classes[&independence_signature(g)];
            assert_eq!(equivalence_class_size(g).unwrap(), size, "{g:?}");
            assert_eq!(is_singleton_class(g), size == 1, "{g:?}");
        }
    }
}

#[test]
fn singleton_classes_counted_by_d_separation() {
    let expected = [1u64, 1, 1, 4, 59, 2616];
    for (m, &want) in expected.iter().enumerate() {
        let mut classes: HashMap<Vec<bool>, u64> = HashMap::new();
        for g in dags(m) {
            *classes.entry(independence_signature(&g)).or_default() += 1;
        }
        let singletons = classes.values().filter(|&&c| c == 1).count() as u64;
        assert_eq!(singletons, want, "m = {m}");
        assert_eq!(count_essential_recurrence(m), BigUint::from(want));
        assert_eq!(count_essential_brute(m, None).unwrap(), BigUint::from(want));
    }
}

#[test]
fn sparse_singleton_counts_match_filtered_brute_force() {
    for (m, k) in [(3, 1), (4, 1), (4, 2), (5, 2), (5, 3)] {
        let want = dags(m)
            .into_iter()
            .filter(|g| g.max_in_degree() <= k && is_singleton_class(g))
            .count();
        assert_eq!(count_essential_brute(m, Some(k)).unwrap(), BigUint::from(want), "({m},{k})");
    }
}

#[test]
fn closed_form_bounds_sandwich_the_counts() {
    // m = 0 is outside the closed forms' domain (the lower form would give 2 > 1).
    assert!(count_bounds_restricted(0).is_err());
    for m in 1..=5 {
        let (lo, hi) = count_bounds_restricted(m).unwrap();
        let c = count_essential_brute(m, None).unwrap();
        assert!(lo <= c && c <= hi, "m = {m}: {lo} <= {c} <= {hi}");
    }
    for (m, k) in [(4, 2), (5, 2), (5, 3)] {
        let (lo, hi) = count_bounds_sparse(m, k).unwrap();
        let c = count_essential_brute(m, Some(k)).unwrap();
        assert!(lo <= c && c <= hi, "({m},{k}): {lo} <= {c} <= {hi}");
    }
}

#[test]
fn layered_counts_match_filtered_brute_force() {
    let specs: Vec<(Vec<usize>, Option<usize>)> = vec![
        (vec![1, 1], None),
        (vec![2, 1], None),
        (vec![1, 2], None),
        (vec![1, 1, 1], None),
        (vec![2, 2], None),
        (vec![3, 2], None),
        (vec![2, 1, 2], None),
        (vec![1, 3], Some(1)),
        (vec![2, 3], Some(2)),
        (vec![1, 2, 2], Some(1)),
    ];
    let by_m: HashMap<usize, Vec<Vec<u64>>> = (2..=5).map(|m| (m, all_dags(m))).collect();
    for (layers, k) in specs {
        let m: usize = layers.iter().sum();
        let want = by_m[&m].iter().filter(|ps| is_layered(ps, &layers, k)).count();
        let spec = match k {
            Some(k) => EnsembleSpec::layered_sparse(layers.clone(), k).unwrap(),
            None => EnsembleSpec::layered(layers.clone()).unwrap(),
        };
        assert_eq!(count_layered(&spec).unwrap(), BigUint::from(want), "{spec}");
        let ens = Ensemble::enumerate(&spec).unwrap();
        assert_eq!(ens.len(), want, "{spec}");
        assert!(ens.members().iter().all(|g| is_layered(g.parent_masks(), &layers, k)));
    }
}

#[test]
fn restricted_ensembles_hold_exactly_the_singletons() {
    let spec = EnsembleSpec::restricted(4).unwrap();
    let ens = Ensemble::enumerate(&spec).unwrap();
    let want: Vec<Dag> = dags(4).into_iter().filter(is_singleton_class).collect();
    assert_eq!(ens.len(), want.len());
    for g in &want {
        assert!(ens.index_of(g).is_some(), "{g:?}");
    }
}
