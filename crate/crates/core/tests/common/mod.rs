#![allow(dead_code)]

use proptest::prelude::*;
use stackamr_core::AmrGraph;

const CONCEPTS: &[&str] = &["want-01", "boy", "girl", "eat-01", "apple", "and", "person", "name", "big"];
const ROLES: &[&str] = &["ARG0", "ARG1", "ARG2", "mod", "op1", "name", "consist-of"];
const VALUES: &[&str] = &["-", "5", "Obama", "New York", "x"];

#[derive(Debug, Clone)]
pub struct Spec {
    pub concepts: Vec<usize>,
    /// (parent, child, role, stored inverted)
    pub edges: Vec<(usize, usize, usize, bool)>,
    pub attrs: Vec<(usize, usize, usize)>,
}

/// Connected DAGs rooted at node 0 with `1..=max_nodes` nodes.
pub fn graph_spec(max_nodes: usize) -> impl Strategy<Value = Spec> {
    (1..=max_nodes).prop_flat_map(|n| {
        let concepts = proptest::collection::vec(0..CONCEPTS.len(), n);
        let spine = proptest::collection::vec((any::<prop::sample::Index>(), 0..ROLES.len(), any::<bool>()), n - 1);
        let extra = proptest::collection::vec(
            (any::<prop::sample::Index>(), any::<prop::sample::Index>(), 0..ROLES.len(), any::<bool>()),
            0..=n / 2,
        );
        let attrs = proptest::collection::vec((0..n, 0..2usize, 0..VALUES.len()), 0..=n / 2);
        (concepts, spine, extra, attrs).prop_map(move |(concepts, spine, extra, attrs)| {
            let mut edges = Vec::new();
            for (j, (p, r, inv)) in spine.into_iter().enumerate() {
                edges.push((p.index(j + 1), j + 1, r, inv));
            }
            if n > 1 {
                for (a, b, r, inv) in extra {
                    let (a, b) = (a.index(n), b.index(n));
                    if a < b {
                        edges.push((a, b, r, inv));
                    }
                }
            }
            Spec { concepts, edges, attrs }
        })
    })
}

pub fn build(spec: &Spec) -> AmrGraph {
    let mut g = AmrGraph::new();
    for (i, &c) in spec.concepts.iter().enumerate() {
        g.add_node(&format!("v{i}"), CONCEPTS[c]).unwrap();
    }
    for &(p, c, r, inv) in &spec.edges {
        if inv {
            g.add_relation(c, &format!("{}-of", ROLES[r]), p).unwrap();
        } else {
            g.add_relation(p, ROLES[r], c).unwrap();
        }
    }
    for &(n, r, v) in &spec.attrs {
        g.add_attribute(n, ["polarity", "quant"][r], VALUES[v]).unwrap();
    }
    g
}
