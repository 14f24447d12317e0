//! The AMR graph data model.
//!
//! A graph is a set of variables (each carrying one concept), a list of
//! outgoing items per variable, and a root. Relations and attributes share
//! one edge list so the surface order of a parsed PENMAN string survives;
//! alignment paths index children in that order.

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

/// Index of a node inside one [`AmrGraph`].
pub type NodeId = usize;

/// Roles ending in `-of` that are not inverse roles.
const NON_INVERSE_OF_ROLES: &[&str] = &["consist-of", "prep-out-of", "prep-on-behalf-of"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("node index {0} out of range")]
    UnknownNode(NodeId),
    #[error("graph has no nodes")]
    Empty,
    #[error("graph contains a directed cycle")]
    Cyclic,
    #[error("node `{0}` is not connected to the root")]
    Disconnected(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Node {
    pub var: String,
    pub concept: String,
}

/// What an edge points at: another variable or a constant.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Target {
    Node(NodeId),
    Const(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Edge {
    pub source: NodeId,
    /// Role label without the leading colon, e.g. `ARG0` or `ARG0-of`.
    pub role: String,
    pub target: Target,
}

impl Edge {
    pub fn is_attribute(&self) -> bool {
        matches!(self.target, Target::Const(_))
    }
}

/// Whether `role` is an inverse role (`ARG0-of`), excluding the few real
/// roles that happen to end in `-of`.
pub fn is_inverse_role(role: &str) -> bool {
    role.ends_with("-of") && !NON_INVERSE_OF_ROLES.contains(&role)
}

/// `ARG0` -> `ARG0-of`, `ARG0-of` -> `ARG0`.
pub fn invert_role(role: &str) -> String {
    if is_inverse_role(role) {
        role[..role.len() - 3].to_string()
    } else {
        format!("{role}-of")
    }
}

/// Rewrites `R-of(a, b)` as `R(b, a)`.
pub fn normalize_relation(source: NodeId, role: &str, target: NodeId) -> (NodeId, String, NodeId) {
    if is_inverse_role(role) {
        (target, invert_role(role), source)
    } else {
        (source, role.to_string(), target)
    }
}

/// Strips an OntoNotes sense suffix: `want-01` -> `want`.
pub fn strip_sense(concept: &str) -> &str {
    match concept.rfind('-') {
        Some(i) if i > 0 && i + 1 < concept.len() && concept[i + 1..].bytes().all(|b| b.is_ascii_digit()) => {
            &concept[..i]
        }
        _ => concept,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AmrGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    root: NodeId,
    var_index: HashMap<String, NodeId>,
}

impl AmrGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// A single-node graph.
    pub fn singleton(var: &str, concept: &str) -> Self {
        let mut g = Self::new();
        g.add_node(var, concept).expect("fresh graph");
        g
    }

    pub fn add_node(&mut self, var: &str, concept: &str) -> Result<NodeId, GraphError> {
        if self.var_index.contains_key(var) {
            return Err(GraphError::DuplicateVariable(var.to_string()));
        }
        let id = self.nodes.len();
        self.nodes.push(Node { var: var.to_string(), concept: concept.to_string() });
        self.var_index.insert(var.to_string(), id);
        Ok(id)
    }

    /// Adds a node under a fresh variable derived from the concept's first
    /// letter (`b`, `b2`, `b3`, ...).
    pub fn add_fresh_node(&mut self, concept: &str) -> NodeId {
        let var = self.fresh_var(concept);
        self.add_node(&var, concept).expect("fresh variable is unused")
    }

    pub fn fresh_var(&self, concept: &str) -> String {
        let letter = concept
            .chars()
            .find(|c| c.is_ascii_alphabetic())
            .map(|c| c.to_ascii_lowercase())
            .unwrap_or('x');
        let base = letter.to_string();
        if !self.var_index.contains_key(&base) {
            return base;
        }
        (2..)
            .map(|k| format!("{letter}{k}"))
            .find(|v| !self.var_index.contains_key(v))
            .expect("unbounded suffixes")
    }

    pub fn add_relation(&mut self, source: NodeId, role: &str, target: NodeId) -> Result<(), GraphError> {
        self.check(source)?;
        self.check(target)?;
        self.edges.push(Edge { source, role: role.to_string(), target: Target::Node(target) });
        Ok(())
    }

    pub fn add_attribute(&mut self, source: NodeId, role: &str, value: &str) -> Result<(), GraphError> {
        self.check(source)?;
        self.edges.push(Edge { source, role: role.to_string(), target: Target::Const(value.to_string()) });
        Ok(())
    }

    pub fn set_root(&mut self, root: NodeId) -> Result<(), GraphError> {
        self.check(root)?;
        self.root = root;
        Ok(())
    }

    /// Drops every edge for which `keep` returns false.
    pub fn retain_edges(&mut self, keep: impl FnMut(&Edge) -> bool) {
        self.edges.retain(keep);
    }

    fn check(&self, id: NodeId) -> Result<(), GraphError> {
        if id < self.nodes.len() {
            Ok(())
        } else {
            Err(GraphError::UnknownNode(id))
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn var_id(&self, var: &str) -> Option<NodeId> {
        self.var_index.get(var).copied()
    }

    /// All outgoing items, relations and attributes, in insertion order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn relations(&self) -> impl Iterator<Item = (NodeId, &str, NodeId)> + '_ {
        self.edges.iter().filter_map(|e| match e.target {
            Target::Node(t) => Some((e.source, e.role.as_str(), t)),
            Target::Const(_) => None,
        })
    }

    pub fn attributes(&self) -> impl Iterator<Item = (NodeId, &str, &str)> + '_ {
        self.edges.iter().filter_map(|e| match &e.target {
            Target::Const(v) => Some((e.source, e.role.as_str(), v.as_str())),
            Target::Node(_) => None,
        })
    }

    /// Outgoing items of `node` in insertion order.
    pub fn outgoing(&self, node: NodeId) -> impl Iterator<Item = &Edge> + '_ {
        self.edges.iter().filter(move |e| e.source == node)
    }

    /// Relations with inverse roles rewritten to their canonical direction.
    pub fn normalized_relations(&self) -> Vec<(NodeId, String, NodeId)> {
        self.relations().map(|(s, r, t)| normalize_relation(s, r, t)).collect()
    }

    /// Whether the normalized relation structure has a directed cycle.
    pub fn has_cycle(&self) -> bool {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for (s, _, t) in self.normalized_relations() {
            adj[s].push(t);
        }
        has_cycle(&adj)
    }

    /// Whether every node is connected to the root, ignoring direction.
    pub fn is_connected(&self) -> bool {
        self.unreachable_from_root().is_empty()
    }

    pub(crate) fn unreachable_from_root(&self) -> Vec<NodeId> {
        if self.nodes.is_empty() {
            return Vec::new();
        }
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for (s, _, t) in self.relations() {
            adj[s].push(t);
            adj[t].push(s);
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![self.root];
        seen[self.root] = true;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        (0..self.nodes.len()).filter(|&i| !seen[i]).collect()
    }

    /// Checks the structural invariants: nonempty, acyclic, connected.
    pub fn validate(&self) -> Result<(), GraphError> {
        if self.nodes.is_empty() {
            return Err(GraphError::Empty);
        }
        if self.has_cycle() {
            return Err(GraphError::Cyclic);
        }
        if let Some(&n) = self.unreachable_from_root().first() {
            return Err(GraphError::Disconnected(self.nodes[n].var.clone()));
        }
        Ok(())
    }

    /// Number of incoming normalized relations per node.
    pub fn in_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        let unique: HashSet<_> = self.normalized_relations().into_iter().collect();
        for (_, _, t) in unique {
            deg[t] += 1;
        }
        deg
    }

    /// Shortest directed distance (over stored edges) from the root;
    /// `usize::MAX` for nodes not reachable that way.
    pub fn depths(&self) -> Vec<usize> {
        let mut depth = vec![usize::MAX; self.nodes.len()];
        if self.nodes.is_empty() {
            return depth;
        }
        let mut queue = std::collections::VecDeque::new();
        depth[self.root] = 0;
        queue.push_back(self.root);
        while let Some(u) = queue.pop_front() {
            for (s, _, t) in self.relations() {
                if s == u && depth[t] == usize::MAX {
                    depth[t] = depth[u] + 1;
                    queue.push_back(t);
                }
            }
        }
        depth
    }
}

pub(crate) fn has_cycle(adj: &[Vec<NodeId>]) -> bool {
    find_back_edge(adj).is_some()
}

/// Returns some `(u, v)` closing a directed cycle, if any.
pub(crate) fn find_back_edge(adj: &[Vec<NodeId>]) -> Option<(NodeId, NodeId)> {
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut color = vec![0u8; adj.len()];
    for start in 0..adj.len() {
        if color[start] != 0 {
            continue;
        }
        let mut stack = vec![(start, 0usize)];
        color[start] = 1;
        while let Some(&mut (u, ref mut i)) = stack.last_mut() {
            if *i < adj[u].len() {
                let v = adj[u][*i];
                *i += 1;
                match color[v] {
                    0 => {
                        color[v] = 1;
                        stack.push((v, 0));
                    }
                    1 => return Some((u, v)),
                    _ => {}
                }
            } else {
                color[u] = 2;
                stack.pop();
            }
        }
    }
    None
}

impl fmt::Display for AmrGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::penman::serialize_penman(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_roles() {
        assert!(is_inverse_role("ARG0-of"));
        assert!(!is_inverse_role("consist-of"));
        assert_eq!(invert_role("ARG0-of"), "ARG0");
        assert_eq!(invert_role("ARG1"), "ARG1-of");
        assert_eq!(invert_role("consist-of"), "consist-of-of");
        assert_eq!(normalize_relation(1, "ARG0-of", 2), (2, "ARG0".to_string(), 1));
    }

    #[test]
    fn sense_stripping() {
        assert_eq!(strip_sense("want-01"), "want");
        assert_eq!(strip_sense("have-org-role-91"), "have-org-role");
        assert_eq!(strip_sense("boy"), "boy");
        assert_eq!(strip_sense("monetary-quantity"), "monetary-quantity");
    }

    #[test]
    fn fresh_variables() {
        let mut g = AmrGraph::new();
        assert_eq!(g.add_fresh_node("boy"), 0);
        g.add_fresh_node("bear");
        g.add_fresh_node("Bob");
        let vars: Vec<_> = g.nodes().iter().map(|n| n.var.as_str()).collect();
        assert_eq!(vars, ["b", "b2", "b3"]);
        assert_eq!(g.add_node("b", "x"), Err(GraphError::DuplicateVariable("b".into())));
    }

    #[test]
    fn validation() {
        let mut g = AmrGraph::new();
        assert_eq!(g.validate(), Err(GraphError::Empty));
        let a = g.add_fresh_node("a");
        let b = g.add_fresh_node("b");
        assert!(matches!(g.validate(), Err(GraphError::Disconnected(_))));
        g.add_relation(a, "mod", b).unwrap();
        assert_eq!(g.validate(), Ok(()));
        g.add_relation(b, "mod", a).unwrap();
        assert_eq!(g.validate(), Err(GraphError::Cyclic));
    }

    #[test]
    fn inverse_edges_are_not_cycles() {
        let mut g = AmrGraph::new();
        let a = g.add_fresh_node("a");
        let b = g.add_fresh_node("b");
        g.add_relation(a, "ARG0", b).unwrap();
        g.add_relation(b, "ARG1-of", a).unwrap();
        assert!(!g.has_cycle());
        assert_eq!(g.in_degrees(), vec![0, 2]);
    }
}
