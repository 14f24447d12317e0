mod common;

use proptest::prelude::*;
use stackamr_core::{smatch_exact, smatch_hill_climb, to_triples};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn identity_is_perfect(spec in common::graph_spec(8)) {
        let t = to_triples(&common::build(&spec));
        prop_assert_eq!(smatch_exact(&t, &t).unwrap().f1, 1.0);
        prop_assert_eq!(smatch_hill_climb(&t, &t, 4, 0).f1, 1.0);
    }

    #[test]
    fn bounded_symmetric_and_below_exact(a in common::graph_spec(6), b in common::graph_spec(6), seed in 0u64..100) {
        let (ta, tb) = (to_triples(&common::build(&a)), to_triples(&common::build(&b)));
        let ab = smatch_exact(&ta, &tb).unwrap();
        let ba = smatch_exact(&tb, &ta).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab.f1));
        prop_assert_eq!(ab.matched, ba.matched);
        prop_assert_eq!(ab.precision, ba.recall);
        prop_assert_eq!(ab.f1, ba.f1);
        let hc = smatch_hill_climb(&ta, &tb, 4, seed);
        prop_assert!(hc.matched <= ab.matched);
        let more = smatch_hill_climb(&ta, &tb, 8, seed);
        prop_assert!(more.matched >= hc.matched);
    }
}
