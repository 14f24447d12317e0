//! Canonical triple form of a graph, the input to Smatch.

use std::collections::BTreeSet;

use crate::graph::AmrGraph;

/// Role of the attribute triple that marks the root.
pub const TOP: &str = "TOP";

/// Variables are indices into `vars`; relations carry normalized roles.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TripleSet {
    pub vars: Vec<String>,
    pub instances: Vec<(usize, String)>,
    pub relations: Vec<(usize, String, usize)>,
    pub attributes: Vec<(usize, String, String)>,
}

impl TripleSet {
    pub fn len(&self) -> usize {
        self.instances.len() + self.relations.len() + self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops duplicate triples, keeping first occurrences.
    pub(crate) fn dedup(&mut self) {
        fn dedup_vec<T: Ord + Clone>(v: &mut Vec<T>) {
            let mut seen = BTreeSet::new();
            v.retain(|x| seen.insert(x.clone()));
        }
        dedup_vec(&mut self.instances);
        dedup_vec(&mut self.relations);
        dedup_vec(&mut self.attributes);
    }
}

/// Instance, relation and attribute triples of `graph` plus the
/// `(root, TOP, root-concept)` attribute. Inverse roles are normalized.
pub fn to_triples(graph: &AmrGraph) -> TripleSet {
    let mut t = TripleSet {
        vars: graph.nodes().iter().map(|n| n.var.clone()).collect(),
        instances: graph.nodes().iter().enumerate().map(|(i, n)| (i, n.concept.clone())).collect(),
        relations: graph.normalized_relations(),
        attributes: graph.attributes().map(|(s, r, v)| (s, r.to_string(), v.to_string())).collect(),
    };
    if !graph.is_empty() {
        let root = graph.root();
        t.attributes.push((root, TOP.to_string(), graph.node(root).concept.clone()));
    }
    t.dedup();
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::penman::parse_penman;

    #[test]
    fn want_boy() {
        let t = to_triples(&parse_penman("(w / want-01 :ARG0 (b / boy))").unwrap());
        assert_eq!(t.instances, vec![(0, "want-01".into()), (1, "boy".into())]);
        assert_eq!(t.relations, vec![(0, "ARG0".into(), 1)]);
        assert_eq!(t.attributes, vec![(0, TOP.into(), "want-01".into())]);
    }

    #[test]
    fn single_node() {
        let t = to_triples(&parse_penman("(a / apple)").unwrap());
        assert_eq!(t.instances, vec![(0, "apple".into())]);
        assert!(t.relations.is_empty());
        assert_eq!(t.attributes, vec![(0, TOP.into(), "apple".into())]);
    }

    #[test]
    fn polarity_attribute() {
        let t = to_triples(&parse_penman("(l / like-01 :polarity -)").unwrap());
        assert!(t.attributes.contains(&(0, "polarity".into(), "-".into())));
        assert_eq!(t.len(), 3);
    }

    #[test]
    fn inverse_roles_normalized() {
        let t = to_triples(&parse_penman("(b / boy :ARG0-of (w / want-01))").unwrap());
        assert_eq!(t.relations, vec![(1, "ARG0".into(), 0)]);
    }
}
