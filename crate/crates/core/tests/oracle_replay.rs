mod common;

use proptest::prelude::*;
use stackamr_core::align::{AlignSource, AlignmentMap, Span};
use stackamr_core::oracle::oracle;
use stackamr_core::synth::{drop_alignments, synth_corpus};
use stackamr_core::transition::{replay, STEP_FACTOR};
use stackamr_core::{smatch_hill_climb, to_triples};

#[test]
fn synthetic_corpus_is_rebuilt_exactly() {
    for (i, s) in synth_corpus(300, 11).iter().enumerate() {
        let out = oracle(&s.tokens, &s.graph, &s.alignment).unwrap();
        let f1 = smatch_hill_climb(&to_triples(&out.graph), &to_triples(&s.graph), 8, 0).f1;
        assert_eq!(f1, 1.0, "sentence {i}: {:?}", s.tokens);
        assert_eq!(out.unbuilt_arcs, 0);
        assert_eq!(out.dropped_nodes, 0);
    }
}

#[test]
fn unaligned_nodes_lower_the_bound() {
    let mut corpus = synth_corpus(60, 5);
    drop_alignments(&mut corpus, 0.1, 1);
    let mut perfect = 0;
    for s in &corpus {
        let out = oracle(&s.tokens, &s.graph, &s.alignment).unwrap();
        if out.dropped_nodes == 0 {
            perfect += 1;
        }
        let again = replay(&s.tokens, &out.transitions).unwrap().output();
        assert_eq!(again.graph, out.graph);
    }
    assert!(perfect < corpus.len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn replay_is_sound_on_random_input(
        spec in common::graph_spec(10),
        n_tokens in 0usize..12,
        raw in proptest::collection::vec((any::<bool>(), 0usize..12, 0usize..3), 10),
    ) {
        let gold = common::build(&spec);
        let tokens: Vec<String> = (0..n_tokens).map(|i| format!("w{i}")).collect();
        let mut align = AlignmentMap::new();
        if n_tokens > 0 {
            for (node, &(keep, start, len)) in raw.iter().enumerate().take(gold.len()) {
                if keep {
                    let s = start % n_tokens;
                    align.insert(node, Span::new(s, (s + len).min(n_tokens - 1)), AlignSource::Sem);
                }
            }
        }
        let out = oracle(&tokens, &gold, &align).unwrap();
        prop_assert!(out.transitions.len() <= STEP_FACTOR * n_tokens.max(1));
        let state = replay(&tokens, &out.transitions).unwrap();
        prop_assert!(state.is_terminal());
        let again = state.output();
        prop_assert_eq!(&again.graph, &out.graph);
        prop_assert!(out.graph.validate().is_ok());
    }
}
