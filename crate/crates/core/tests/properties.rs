//! Property tests over randomized configurations.

mod common;

use common::{case, check_partition, check_reproducible, check_trial};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn phi_star_trials_respect_structure(c in case()) {
        check_trial(&c)?;
    }

    #[test]
    fn partition_and_bad_sets_are_consistent(c in case()) {
        check_partition(&c)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn reruns_are_byte_identical(c in case()) {
        let dir = tempfile::tempdir().unwrap();
        check_reproducible(&c, dir.path())?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn bernoulli_kl_is_nonnegative_and_zero_only_on_the_diagonal(p in 0.01f64..0.99, q in 0.01f64..0.99) {
        let kl = precedence_bandit::populations::bernoulli_kl(p, q);
        prop_assert!(kl >= 0.0);
        if (p - q).abs() > 1e-6 {
            prop_assert!(kl > 0.0);
        }
    }
}
