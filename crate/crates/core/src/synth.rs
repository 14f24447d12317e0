//! Small template grammar producing sentences with gold graphs and full
//! word alignments, for tests and desk-scale experiments.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::align::{node_paths, write_jamr_alignments, AlignSource, AlignmentMap, Span};
use crate::graph::{AmrGraph, NodeId};
use crate::penman::{parse_penman, serialize_penman, serialize_penman_pretty, AmrEntry};

const NOUNS: &[(&str, &str)] = &[
    ("boy", "boy"),
    ("girl", "girl"),
    ("dog", "dog"),
    ("cat", "cat"),
    ("apple", "apple"),
    ("book", "book"),
    ("city", "city"),
    ("song", "song"),
];
const ADJECTIVES: &[&str] = &["big", "small", "red", "happy", "old"];
const TRANSITIVE: &[(&str, &str, &str)] = &[
    ("sees", "see", "see-01"),
    ("likes", "like", "like-01"),
    ("eats", "eat", "eat-01"),
    ("reads", "read", "read-01"),
    ("wants", "want", "want-01"),
];
const INTRANSITIVE: &[(&str, &str)] = &[("sings", "sing-01"), ("sleeps", "sleep-01"), ("runs", "run-02")];
const NAMES: &[(&[&str], &str, &str)] = &[
    (&["John"], "person", "John_(saint)"),
    (&["Mary", "Smith"], "person", "Mary_Smith"),
    (&["Paris"], "city", "Paris"),
    (&["New", "York"], "city", "New_York_City"),
    (&["Anna"], "person", "-"),
];

/// One generated sentence.
#[derive(Debug, Clone)]
pub struct SynthSentence {
    pub tokens: Vec<String>,
    pub graph: AmrGraph,
    pub alignment: AlignmentMap,
}

impl SynthSentence {
    /// Corpus entry with `::tok` and JAMR-style `::alignments` metadata.
    pub fn to_entry(&self, id: &str) -> AmrEntry {
        let mut e = AmrEntry::new(self.graph.clone());
        e.text = serialize_penman_pretty(&self.graph);
        e.set_meta("id", id);
        e.set_meta("snt", &self.tokens.join(" "));
        e.set_meta("tok", &self.tokens.join(" "));
        e.set_meta("alignments", &write_jamr_alignments(&self.alignment, &self.graph));
        e
    }

    /// ISI-style line (`token-path`, 1-based paths) for the given nodes.
    pub fn isi_line(&self, nodes: &[NodeId]) -> String {
        let paths = node_paths(&self.graph, true);
        let mut items = Vec::new();
        for &n in nodes {
            if let (Some(span), Some(p)) = (self.alignment.span(n), &paths[n]) {
                for t in span.start..=span.end {
                    items.push((t, p.clone()));
                }
            }
        }
        items.sort();
        items.iter().map(|(t, p)| format!("{t}-{p}")).collect::<Vec<_>>().join(" ")
    }
}

struct Builder {
    tokens: Vec<String>,
    graph: AmrGraph,
    spans: Vec<(NodeId, Span)>,
}

impl Builder {
    fn word(&mut self, w: &str) -> usize {
        self.tokens.push(w.to_string());
        self.tokens.len() - 1
    }

    fn node(&mut self, concept: &str, span: Span) -> NodeId {
        let n = self.graph.add_fresh_node(concept);
        self.spans.push((n, span));
        n
    }

    fn noun_phrase(&mut self, rng: &mut ChaCha8Rng) -> NodeId {
        match rng.gen_range(0..10) {
            0..=1 => {
                let (words, ty, wiki) = NAMES.choose(rng).unwrap();
                let start = self.tokens.len();
                for w in words.iter() {
                    self.word(w);
                }
                let span = Span::new(start, self.tokens.len() - 1);
                let x = self.node(ty, span);
                let n = self.node("name", span);
                self.graph.add_relation(x, "name", n).unwrap();
                for (i, w) in words.iter().enumerate() {
                    self.graph.add_attribute(n, &format!("op{}", i + 1), w).unwrap();
                }
                if *wiki != "-" {
                    self.graph.add_attribute(x, "wiki", wiki).unwrap();
                }
                x
            }
            2 => {
                self.word("the");
                let t = self.word("teacher");
                let p = self.node("person", Span::single(t));
                let k = self.node("teach-01", Span::single(t));
                self.graph.add_relation(p, "ARG0-of", k).unwrap();
                p
            }
            _ => {
                self.word("the");
                let adj = rng.gen_bool(0.3).then(|| {
                    let a = *ADJECTIVES.choose(rng).unwrap();
                    (a, self.word(a))
                });
                let (w, c) = *NOUNS.choose(rng).unwrap();
                let i = self.word(w);
                let head = self.node(c, Span::single(i));
                if let Some((a, j)) = adj {
                    let m = self.node(a, Span::single(j));
                    self.graph.add_relation(head, "mod", m).unwrap();
                }
                head
            }
        }
    }

    fn sentence(&mut self, rng: &mut ChaCha8Rng) -> NodeId {
        match rng.gen_range(0..6) {
            0 => {
                let s = self.noun_phrase(rng);
                let (w, c) = *INTRANSITIVE.choose(rng).unwrap();
                let i = self.word(w);
                let v = self.node(c, Span::single(i));
                self.graph.add_relation(v, "ARG0", s).unwrap();
                v
            }
            1 => {
                let s = self.noun_phrase(rng);
                self.word("does");
                self.word("not");
                let (_, base, c) = *TRANSITIVE.choose(rng).unwrap();
                let i = self.word(base);
                let v = self.node(c, Span::single(i));
                let o = self.noun_phrase(rng);
                self.graph.add_relation(v, "ARG0", s).unwrap();
                self.graph.add_relation(v, "ARG1", o).unwrap();
                self.graph.add_attribute(v, "polarity", "-").unwrap();
                v
            }
            2 => {
                let s = self.noun_phrase(rng);
                let i = self.word("wants");
                let w = self.node("want-01", Span::single(i));
                self.word("to");
                let (_, base, c) = *TRANSITIVE[..4].choose(rng).unwrap();
                let j = self.word(base);
                let v = self.node(c, Span::single(j));
                let o = self.noun_phrase(rng);
                self.graph.add_relation(w, "ARG0", s).unwrap();
                self.graph.add_relation(w, "ARG1", v).unwrap();
                self.graph.add_relation(v, "ARG0", s).unwrap();
                self.graph.add_relation(v, "ARG1", o).unwrap();
                w
            }
            3 => {
                let a = self.noun_phrase(rng);
                let i = self.word("and");
                let and = self.node("and", Span::single(i));
                let b = self.noun_phrase(rng);
                let (w, c) = *INTRANSITIVE.choose(rng).unwrap();
                let j = self.word(w.strip_suffix('s').unwrap_or(w));
                let v = self.node(c, Span::single(j));
                self.graph.add_relation(and, "op1", a).unwrap();
                self.graph.add_relation(and, "op2", b).unwrap();
                self.graph.add_relation(v, "ARG0", and).unwrap();
                v
            }
            4 => {
                let s = self.noun_phrase(rng);
                let i = self.word("ate");
                let v = self.node("eat-01", Span::single(i));
                let q = rng.gen_range(2..6).to_string();
                self.word(&q);
                let j = self.word("apples");
                let o = self.node("apple", Span::single(j));
                self.graph.add_attribute(o, "quant", &q).unwrap();
                self.graph.add_relation(v, "ARG0", s).unwrap();
                self.graph.add_relation(v, "ARG1", o).unwrap();
                v
            }
            _ => {
                let s = self.noun_phrase(rng);
                let (w, _, c) = *TRANSITIVE.choose(rng).unwrap();
                let i = self.word(w);
                let v = self.node(c, Span::single(i));
                let o = self.noun_phrase(rng);
                self.graph.add_relation(v, "ARG0", s).unwrap();
                self.graph.add_relation(v, "ARG1", o).unwrap();
                v
            }
        }
    }
}

/// Generates one sentence. The graph is a PENMAN round trip of the built
/// graph, so its node order matches what a reader of the text would get.
pub fn synth_sentence(rng: &mut ChaCha8Rng) -> SynthSentence {
    let mut b = Builder { tokens: Vec::new(), graph: AmrGraph::new(), spans: Vec::new() };
    let root = b.sentence(rng);
    b.graph.set_root(root).unwrap();
    let graph = parse_penman(&serialize_penman(&b.graph)).expect("generated graphs serialize cleanly");
    let mut alignment = AlignmentMap::new();
    for (n, span) in b.spans {
        let id = graph.var_id(&b.graph.node(n).var).expect("variables survive the round trip");
        alignment.insert(id, span, AlignSource::Sem);
    }
    SynthSentence { tokens: b.tokens, graph, alignment }
}

pub fn synth_corpus(n: usize, seed: u64) -> Vec<SynthSentence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| synth_sentence(&mut rng)).collect()
}

/// Removes the alignments of `fraction` of all nodes in the corpus (rounded
/// up, at least one), chosen uniformly. Returns how many were removed.
pub fn drop_alignments(corpus: &mut [SynthSentence], fraction: f64, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all: Vec<(usize, NodeId)> =
        corpus.iter().enumerate().flat_map(|(i, s)| (0..s.graph.len()).map(move |n| (i, n))).collect();
    all.shuffle(&mut rng);
    let k = ((all.len() as f64 * fraction).ceil() as usize).clamp(1, all.len().max(1));
    for &(i, n) in all.iter().take(k) {
        corpus[i].alignment.remove(n);
    }
    k.min(all.len())
}

/// Splits the alignment of each sentence into an ISI part (roughly
/// `sem_share` of the nodes) and a JAMR part (everything), as the two
/// aligners would provide them.
pub fn split_alignments(corpus: &[SynthSentence], sem_share: f64, seed: u64) -> Vec<(String, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    corpus
        .iter()
        .map(|s| {
            let sem: Vec<NodeId> = (0..s.graph.len()).filter(|_| rng.gen_bool(sem_share)).collect();
            (s.isi_line(&sem), write_jamr_alignments(&s.alignment, &s.graph))
        })
        .collect()
}

/// Word frequencies of a corpus, handy for vocabulary checks.
pub fn word_counts(corpus: &[SynthSentence]) -> HashMap<String, usize> {
    let mut m = HashMap::new();
    for s in corpus {
        for t in &s.tokens {
            *m.entry(t.clone()).or_insert(0) += 1;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::{read_isi_alignments, read_jamr_alignments};

    #[test]
    fn deterministic() {
        let a: Vec<String> = synth_corpus(20, 7).iter().map(|s| serialize_penman(&s.graph)).collect();
        let b: Vec<String> = synth_corpus(20, 7).iter().map(|s| serialize_penman(&s.graph)).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn graphs_valid_and_fully_aligned() {
        for s in synth_corpus(200, 1) {
            s.graph.validate().unwrap();
            assert_eq!(s.alignment.len(), s.graph.len());
            s.alignment.validate(&s.graph, Some(s.tokens.len())).unwrap();
        }
    }

    #[test]
    fn alignment_formats_round_trip() {
        for s in synth_corpus(100, 2) {
            let jamr = read_jamr_alignments(&write_jamr_alignments(&s.alignment, &s.graph), &s.graph).unwrap();
            let spans: Vec<_> = jamr.iter().map(|(n, sp, _)| (n, sp)).collect();
            let want: Vec<_> = s.alignment.iter().map(|(n, sp, _)| (n, sp)).collect();
            assert_eq!(spans, want);
            let all: Vec<NodeId> = (0..s.graph.len()).collect();
            let isi = read_isi_alignments(&s.isi_line(&all), &s.graph).unwrap();
            let spans: Vec<_> = isi.iter().map(|(n, sp, _)| (n, sp)).collect();
            assert_eq!(spans, want);
        }
    }

    #[test]
    fn dropping_alignments() {
        let mut c = synth_corpus(50, 3);
        let total: usize = c.iter().map(|s| s.graph.len()).sum();
        let k = drop_alignments(&mut c, 0.1, 9);
        assert_eq!(k, (total as f64 * 0.1).ceil() as usize);
        let left: usize = c.iter().map(|s| s.alignment.len()).sum();
        assert_eq!(left, total - k);
    }
}
