//! Parser inputs and oracle-annotated training examples.

use stackamr_core::align::{read_jamr_alignments, AlignError};
use stackamr_core::oracle::oracle;
use stackamr_core::synth::SynthSentence;
use stackamr_core::transition::Transition;
use stackamr_core::{AmrEntry, AmrGraph};

/// What the network sees of a sentence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SentenceInput {
    pub tokens: Vec<String>,
    /// Pooled contextual vector per token.
    pub contextual: Option<Vec<Vec<f64>>>,
    /// One tag sequence per configured channel; missing channels are empty.
    pub tags: Vec<Vec<String>>,
}

impl SentenceInput {
    pub fn new(tokens: Vec<String>) -> Self {
        SentenceInput { tokens, contextual: None, tags: Vec::new() }
    }
}

/// A training sentence with its gold graph and oracle run.
#[derive(Debug, Clone)]
pub struct Example {
    pub input: SentenceInput,
    pub gold: AmrGraph,
    pub transitions: Vec<Transition>,
    /// Graph the oracle transitions build.
    pub oracle_graph: AmrGraph,
}

impl Example {
    pub fn from_synth(s: &SynthSentence) -> Self {
        let out = oracle(&s.tokens, &s.graph, &s.alignment).expect("generated alignments are valid");
        Example {
            input: SentenceInput::new(s.tokens.clone()),
            gold: s.graph.clone(),
            transitions: out.transitions,
            oracle_graph: out.graph,
        }
    }

    /// Builds an example from a corpus entry with `::tok` and JAMR-style
    /// `::alignments` metadata (as written by `align-merge`).
    pub fn from_entry(entry: &AmrEntry) -> Result<Self, AlignError> {
        let tokens = entry.tokens();
        let align = read_jamr_alignments(entry.meta("alignments").unwrap_or(""), &entry.graph)?;
        let out = oracle(&tokens, &entry.graph, &align)?;
        Ok(Example {
            input: SentenceInput::new(tokens),
            gold: entry.graph.clone(),
            transitions: out.transitions,
            oracle_graph: out.graph,
        })
    }
}
