mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use stackamr_core::penman::serialize_penman_pretty;
use stackamr_core::{parse_penman, serialize_penman, to_triples, TripleSet};

fn named(t: &TripleSet) -> BTreeSet<(String, String, String)> {
    let v = |i: usize| t.vars[i].clone();
    let mut out = BTreeSet::new();
    for (s, c) in &t.instances {
        out.insert((v(*s), "instance".to_string(), c.clone()));
    }
    for (s, r, d) in &t.relations {
        out.insert((v(*s), r.clone(), v(*d)));
    }
    for (s, r, c) in &t.attributes {
        out.insert((v(*s), r.clone(), format!("\"{c}")));
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn serialize_then_parse_keeps_triples(spec in common::graph_spec(12)) {
        let g = common::build(&spec);
        prop_assert!(g.validate().is_ok());
        for text in [serialize_penman(&g), serialize_penman_pretty(&g)] {
            let back = parse_penman(&text).unwrap();
            prop_assert_eq!(named(&to_triples(&back)), named(&to_triples(&g)), "{}", text);
        }
    }

    #[test]
    fn triple_count(spec in common::graph_spec(12)) {
        let g = common::build(&spec);
        let t = to_triples(&g);
        let rels: BTreeSet<_> = g.normalized_relations().into_iter().collect();
        let attrs: BTreeSet<_> = g.attributes().collect();
        prop_assert_eq!(t.len(), g.len() + rels.len() + attrs.len() + 1);
    }
}
