//! AMR graphs and the non-neural half of a Stack-LSTM transition parser:
//! PENMAN I/O, Smatch scoring, alignment merging, the transition system and
//! its training oracle, and the preprocessing used to build parser inputs.

pub mod align;
pub mod graph;
pub mod metrics;
pub mod oracle;
pub mod penman;
pub mod preprocess;
pub mod smatch;
pub mod synth;
pub mod transition;
pub mod triples;

pub use graph::{AmrGraph, Edge, GraphError, Node, NodeId, Target};
pub use penman::{parse_penman, read_corpus, serialize_penman, write_corpus, AmrEntry, PenmanError};
pub use smatch::{smatch_exact, smatch_hill_climb, MappingResult, SmatchError};
pub use triples::{to_triples, TripleSet};
