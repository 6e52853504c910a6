use itertools::Itertools;
use kphd_harness::clustering::{best_matching, clustering_accuracy, contingency};
use kphd_harness::metrics::{accuracy, macro_f1};
use proptest::prelude::*;

fn labelling(k: usize) -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    (1usize..80).prop_flat_map(move |n| (prop::collection::vec(0..k, n), prop::collection::vec(0..k, n)))
}

proptest! {
    #[test]
    fn ca_ignores_relabelling((pred, truth) in labelling(5), perm in Just((0..5).collect::<Vec<usize>>()).prop_shuffle()) {
        let relabelled: Vec<usize> = pred.iter().map(|&p| perm[p]).collect();
        prop_assert_eq!(clustering_accuracy(&pred, &truth, 5).unwrap(), clustering_accuracy(&relabelled, &truth, 5).unwrap());
    }

    #[test]
    fn matching_equals_brute_force((pred, truth) in labelling(4)) {
        let table = contingency(&pred, &truth, 4).unwrap();
        let brute = (0..4).permutations(4).map(|p| p.iter().enumerate().map(|(r, &c)| table[r][c]).sum::<u64>()).max().unwrap();
        prop_assert_eq!(best_matching(&table), brute);
    }

    #[test]
    fn rates_stay_in_unit_interval((pred, truth) in labelling(3)) {
        for v in [accuracy(&pred, &truth).unwrap(), macro_f1(&pred, &truth, 3).unwrap(), clustering_accuracy(&pred, &truth, 3).unwrap()] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!(clustering_accuracy(&pred, &truth, 3).unwrap() >= accuracy(&pred, &truth).unwrap());
    }
}
