//! Fine-grained evaluation: Smatch over transformed or restricted triple
//! sets, one column per aspect of the graph.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::ops::AddAssign;

use crate::graph::{strip_sense, AmrGraph};
use crate::smatch::{prf, smatch_hill_climb};
use crate::triples::{to_triples, TripleSet, TOP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Smatch,
    Unlabeled,
    NoWsd,
    NamedEntities,
    Wikification,
    Negations,
    Concepts,
    Reentrancies,
    Srl,
}

impl Metric {
    pub const ALL: [Metric; 9] = [
        Metric::Smatch,
        Metric::Unlabeled,
        Metric::NoWsd,
        Metric::NamedEntities,
        Metric::Wikification,
        Metric::Negations,
        Metric::Concepts,
        Metric::Reentrancies,
        Metric::Srl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Smatch => "Smatch",
            Metric::Unlabeled => "Unlabeled",
            Metric::NoWsd => "No WSD",
            Metric::NamedEntities => "Named Entities",
            Metric::Wikification => "Wikification",
            Metric::Negations => "Negations",
            Metric::Concepts => "Concepts",
            Metric::Reentrancies => "Reentrancies",
            Metric::Srl => "SRL",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Matched / predicted / gold triple counts; summing these over sentences
/// gives micro-averaged corpus scores.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counts {
    pub matched: usize,
    pub pred: usize,
    pub gold: usize,
}

impl Counts {
    /// F1, where two empty sides agree perfectly.
    pub fn f1(&self) -> f64 {
        if self.pred == 0 && self.gold == 0 {
            1.0
        } else {
            prf(self.matched, self.pred, self.gold).2
        }
    }

    pub fn precision(&self) -> f64 {
        prf(self.matched, self.pred, self.gold).0
    }

    pub fn recall(&self) -> f64 {
        prf(self.matched, self.pred, self.gold).1
    }
}

impl AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        self.matched += o.matched;
        self.pred += o.pred;
        self.gold += o.gold;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MetricCounts(pub [Counts; 9]);

impl MetricCounts {
    pub fn get(&self, m: Metric) -> Counts {
        self.0[m as usize]
    }

    pub fn suite(&self) -> MetricSuite {
        let f = |m: Metric| self.get(m).f1();
        MetricSuite {
            smatch: f(Metric::Smatch),
            unlabeled: f(Metric::Unlabeled),
            no_wsd: f(Metric::NoWsd),
            named_entities: f(Metric::NamedEntities),
            wikification: f(Metric::Wikification),
            negations: f(Metric::Negations),
            concepts: f(Metric::Concepts),
            reentrancies: f(Metric::Reentrancies),
            srl: f(Metric::Srl),
        }
    }
}

impl AddAssign for MetricCounts {
    fn add_assign(&mut self, o: MetricCounts) {
        for (a, b) in self.0.iter_mut().zip(o.0) {
            *a += b;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSuite {
    pub smatch: f64,
    pub unlabeled: f64,
    pub no_wsd: f64,
    pub named_entities: f64,
    pub wikification: f64,
    pub negations: f64,
    pub concepts: f64,
    pub reentrancies: f64,
    pub srl: f64,
}

impl MetricSuite {
    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::Smatch => self.smatch,
            Metric::Unlabeled => self.unlabeled,
            Metric::NoWsd => self.no_wsd,
            Metric::NamedEntities => self.named_entities,
            Metric::Wikification => self.wikification,
            Metric::Negations => self.negations,
            Metric::Concepts => self.concepts,
            Metric::Reentrancies => self.reentrancies,
            Metric::Srl => self.srl,
        }
    }
}

fn unlabeled(t: &TripleSet) -> TripleSet {
    let mut out = t.clone();
    for r in &mut out.relations {
        r.1 = "rel".to_string();
    }
    out.dedup();
    out
}

fn no_wsd(t: &TripleSet) -> TripleSet {
    let mut out = t.clone();
    for (_, c) in &mut out.instances {
        *c = strip_sense(c).to_string();
    }
    for (_, r, v) in &mut out.attributes {
        if r == TOP {
            *v = strip_sense(v).to_string();
        }
    }
    out
}

/// Keeps the listed relations and attributes plus the instance triples of
/// every variable they touch.
fn restrict(
    t: &TripleSet,
    keep_rel: impl Fn(&(usize, String, usize)) -> bool,
    keep_attr: impl Fn(&(usize, String, String)) -> bool,
) -> TripleSet {
    let relations: Vec<_> = t.relations.iter().filter(|r| keep_rel(r)).cloned().collect();
    let attributes: Vec<_> = t.attributes.iter().filter(|a| keep_attr(a)).cloned().collect();
    let mut touched = HashSet::new();
    for (a, _, b) in &relations {
        touched.insert(*a);
        touched.insert(*b);
    }
    for (v, _, _) in &attributes {
        touched.insert(*v);
    }
    TripleSet {
        vars: t.vars.clone(),
        instances: t.instances.iter().filter(|(v, _)| touched.contains(v)).cloned().collect(),
        relations,
        attributes,
    }
}

/// Entity nodes, their `:name` edge, the name node and its `:opN` strings.
fn named_entities(t: &TripleSet) -> TripleSet {
    let name_nodes: HashSet<usize> = t.relations.iter().filter(|r| r.1 == "name").map(|r| r.2).collect();
    restrict(t, |r| r.1 == "name", |a| name_nodes.contains(&a.0) && a.1.starts_with("op"))
}

fn wikification(t: &TripleSet) -> TripleSet {
    TripleSet {
        vars: t.vars.clone(),
        attributes: t.attributes.iter().filter(|a| a.1 == "wiki").cloned().collect(),
        ..Default::default()
    }
}

fn negations(t: &TripleSet) -> TripleSet {
    restrict(t, |_| false, |a| a.1 == "polarity")
}

fn reentrancies(t: &TripleSet) -> TripleSet {
    let mut indeg: HashMap<usize, usize> = HashMap::new();
    for (_, _, b) in &t.relations {
        *indeg.entry(*b).or_default() += 1;
    }
    restrict(t, |r| indeg[&r.2] > 1, |_| false)
}

pub fn is_core_role(role: &str) -> bool {
    role.strip_prefix("ARG").is_some_and(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()))
}

fn srl(t: &TripleSet) -> TripleSet {
    restrict(t, |r| is_core_role(&r.1), |_| false)
}

/// Multiset overlap of concepts; needs no variable mapping.
fn concept_counts(pred: &TripleSet, gold: &TripleSet) -> Counts {
    let mut bag: HashMap<&str, usize> = HashMap::new();
    for (_, c) in &gold.instances {
        *bag.entry(c.as_str()).or_default() += 1;
    }
    let mut matched = 0;
    for (_, c) in &pred.instances {
        if let Some(n) = bag.get_mut(c.as_str()) {
            if *n > 0 {
                *n -= 1;
                matched += 1;
            }
        }
    }
    Counts { matched, pred: pred.instances.len(), gold: gold.instances.len() }
}

fn smatch_counts(pred: &TripleSet, gold: &TripleSet, restarts: usize, seed: u64) -> Counts {
    if pred.is_empty() || gold.is_empty() {
        return Counts { matched: 0, pred: pred.len(), gold: gold.len() };
    }
    let r = smatch_hill_climb(pred, gold, restarts, seed);
    Counts { matched: r.matched, pred: r.pred_total, gold: r.gold_total }
}

/// Counts for all nine columns on one sentence pair.
pub fn metric_counts(pred: &AmrGraph, gold: &AmrGraph, restarts: usize, seed: u64) -> MetricCounts {
    let p = to_triples(pred);
    let g = to_triples(gold);
    let mut out = MetricCounts::default();
    let transforms: [(Metric, fn(&TripleSet) -> TripleSet); 8] = [
        (Metric::Smatch, |t| t.clone()),
        (Metric::Unlabeled, unlabeled),
        (Metric::NoWsd, no_wsd),
        (Metric::NamedEntities, named_entities),
        (Metric::Wikification, wikification),
        (Metric::Negations, negations),
        (Metric::Reentrancies, reentrancies),
        (Metric::Srl, srl),
    ];
    for (m, f) in transforms {
        out.0[m as usize] = smatch_counts(&f(&p), &f(&g), restarts, seed);
    }
    out.0[Metric::Concepts as usize] = concept_counts(&p, &g);
    out
}

/// All nine columns for one sentence pair.
pub fn metric_breakdown(pred: &AmrGraph, gold: &AmrGraph, restarts: usize, seed: u64) -> MetricSuite {
    metric_counts(pred, gold, restarts, seed).suite()
}

/// Micro-averaged Smatch counts over a corpus of (pred, gold) pairs.
pub fn corpus_smatch<'a>(
    pairs: impl IntoIterator<Item = (&'a AmrGraph, &'a AmrGraph)>,
    restarts: usize,
    seed: u64,
) -> Counts {
    let mut total = Counts::default();
    for (p, g) in pairs {
        total += smatch_counts(&to_triples(p), &to_triples(g), restarts, seed);
    }
    total
}
