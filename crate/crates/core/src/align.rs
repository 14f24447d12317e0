//! Word-to-node alignments: reading aligner output and merging it.
//!
//! The merge runs in three steps. Entries from the statistical aligner
//! come first. Unaligned nodes then inherit a child's span, bottom-up,
//! with the child picked by role preference. Whatever is still unaligned
//! is taken from the rule-based aligner, and the upward fill runs once
//! more.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::graph::{strip_sense, AmrGraph, NodeId, Target};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlignError {
    #[error("alignment references node {0}, which is not in the graph")]
    UnknownNode(NodeId),
    #[error("no node at path `{0}`")]
    BadPath(String),
    #[error("malformed span in `{0}`")]
    BadSpan(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {source}")]
pub struct AlignFileError {
    pub line: usize,
    #[source]
    pub source: AlignError,
}

/// Inclusive range of word indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        assert!(start <= end, "span start {start} after end {end}");
        Span { start, end }
    }

    pub fn single(i: usize) -> Self {
        Span { start: i, end: i }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, i: usize) -> bool {
        self.start <= i && i <= self.end
    }

    fn cover(self, other: Span) -> Span {
        Span { start: self.start.min(other.start), end: self.end.max(other.end) }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlignSource {
    Sem,
    Percolated,
    Jamr,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AlignmentMap {
    entries: BTreeMap<NodeId, (Span, AlignSource)>,
}

impl AlignmentMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an entry unless the node already has one; returns whether it
    /// was added.
    pub fn insert(&mut self, node: NodeId, span: Span, source: AlignSource) -> bool {
        if self.entries.contains_key(&node) {
            return false;
        }
        self.entries.insert(node, (span, source));
        true
    }

    pub fn remove(&mut self, node: NodeId) -> Option<(Span, AlignSource)> {
        self.entries.remove(&node)
    }

    pub fn get(&self, node: NodeId) -> Option<(Span, AlignSource)> {
        self.entries.get(&node).copied()
    }

    pub fn span(&self, node: NodeId) -> Option<Span> {
        self.entries.get(&node).map(|e| e.0)
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.entries.contains_key(&node)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, Span, AlignSource)> + '_ {
        self.entries.iter().map(|(&n, &(s, src))| (n, s, src))
    }

    /// Checks every node exists in `graph` and, when given, that spans fit
    /// a sentence of `n_tokens` words.
    pub fn validate(&self, graph: &AmrGraph, n_tokens: Option<usize>) -> Result<(), AlignError> {
        for (node, span, _) in self.iter() {
            if node >= graph.len() {
                return Err(AlignError::UnknownNode(node));
            }
            if let Some(n) = n_tokens {
                if span.end >= n {
                    return Err(AlignError::BadSpan(format!("{span} in a sentence of {n} tokens")));
                }
            }
        }
        Ok(())
    }
}

/// A child slot in the surface tree of a graph.
#[derive(Debug, Clone, Copy)]
enum Slot {
    Node { id: NodeId, defining: bool },
    Const { owner: NodeId },
}

/// Children of every node in stored order, with the first occurrence of a
/// node in a depth-first walk from the root marked as its defining slot.
fn surface_tree(graph: &AmrGraph) -> Vec<Vec<Slot>> {
    let mut children: Vec<Vec<Slot>> = vec![Vec::new(); graph.len()];
    if graph.is_empty() {
        return children;
    }
    let mut seen = vec![false; graph.len()];
    fn walk(u: NodeId, graph: &AmrGraph, seen: &mut [bool], children: &mut [Vec<Slot>]) {
        seen[u] = true;
        for e in graph.outgoing(u) {
            match e.target {
                Target::Node(v) => {
                    let defining = !seen[v];
                    children[u].push(Slot::Node { id: v, defining });
                    if defining {
                        walk(v, graph, seen, children);
                    }
                }
                Target::Const(_) => children[u].push(Slot::Const { owner: u }),
            }
        }
    }
    walk(graph.root(), graph, &mut seen, &mut children);
    children
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PathTarget {
    Node(NodeId),
    Const(NodeId),
}

fn resolve(tree: &[Vec<Slot>], root: NodeId, steps: &[usize]) -> Option<PathTarget> {
    let mut at = PathTarget::Node(root);
    let mut open = true;
    for &k in steps {
        let PathTarget::Node(u) = at else { return None };
        if !open {
            return None;
        }
        at = match *tree[u].get(k)? {
            Slot::Node { id, defining } => {
                open = defining;
                PathTarget::Node(id)
            }
            Slot::Const { owner } => PathTarget::Const(owner),
        };
    }
    Some(at)
}

/// Collects token spans per node; constants fall back to their owner.
#[derive(Default)]
struct Collector {
    direct: BTreeMap<NodeId, Span>,
    via_const: BTreeMap<NodeId, Span>,
}

impl Collector {
    fn add(&mut self, target: PathTarget, span: Span) {
        let (map, n) = match target {
            PathTarget::Node(n) => (&mut self.direct, n),
            PathTarget::Const(n) => (&mut self.via_const, n),
        };
        map.entry(n).and_modify(|s| *s = s.cover(span)).or_insert(span);
    }

    fn finish(self, source: AlignSource) -> AlignmentMap {
        let mut out = AlignmentMap::new();
        for (n, s) in self.direct {
            out.insert(n, s, source);
        }
        for (n, s) in self.via_const {
            out.insert(n, s, source);
        }
        out
    }
}

fn parse_path(path: &str, first: usize, one_based: bool, item: &str) -> Result<Vec<usize>, AlignError> {
    let bad = || AlignError::BadPath(item.to_string());
    let mut parts = path.split('.');
    let head: usize = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
    if head != first {
        return Err(bad());
    }
    parts
        .map(|p| {
            let k: usize = p.parse().map_err(|_| bad())?;
            if one_based {
                k.checked_sub(1).ok_or_else(bad)
            } else {
                Ok(k)
            }
        })
        .collect()
}

/// Reads one sentence of ISI aligner output: space-separated
/// `token-path` pairs, where paths are 1-based child indices from the
/// root (`1` is the root). Role alignments (`.r` suffix) are skipped.
pub fn read_isi_alignments(line: &str, graph: &AmrGraph) -> Result<AlignmentMap, AlignError> {
    let tree = surface_tree(graph);
    let mut collector = Collector::default();
    for item in line.split_whitespace() {
        let (tok, path) = item.split_once('-').ok_or_else(|| AlignError::BadSpan(item.to_string()))?;
        let tok: usize = tok.parse().map_err(|_| AlignError::BadSpan(item.to_string()))?;
        if path.ends_with(".r") {
            continue;
        }
        let steps = parse_path(path, 1, true, item)?;
        if graph.is_empty() {
            return Err(AlignError::BadPath(item.to_string()));
        }
        let target = resolve(&tree, graph.root(), &steps).ok_or_else(|| AlignError::BadPath(item.to_string()))?;
        collector.add(target, Span::single(tok));
    }
    Ok(collector.finish(AlignSource::Sem))
}

/// Reads a JAMR `# ::alignments` value: `start-end|path+path` items with an
/// exclusive end and 0-based paths (`0` is the root). The `# ::alignments`
/// prefix and trailing `::key value` annotations are ignored.
pub fn read_jamr_alignments(text: &str, graph: &AmrGraph) -> Result<AlignmentMap, AlignError> {
    let body = text.trim().trim_start_matches('#').trim();
    let body = body.strip_prefix("::alignments").unwrap_or(body);
    let body = body.split("::").next().unwrap_or("");
    let tree = surface_tree(graph);
    let mut collector = Collector::default();
    for item in body.split_whitespace() {
        let bad_span = || AlignError::BadSpan(item.to_string());
        let (span, paths) = item.split_once('|').ok_or_else(bad_span)?;
        let (s, e) = span.split_once('-').ok_or_else(bad_span)?;
        let s: usize = s.parse().map_err(|_| bad_span())?;
        let e: usize = e.parse().map_err(|_| bad_span())?;
        if e <= s {
            return Err(bad_span());
        }
        for path in paths.split('+') {
            let steps = parse_path(path, 0, false, item)?;
            if graph.is_empty() {
                return Err(AlignError::BadPath(item.to_string()));
            }
            let target =
                resolve(&tree, graph.root(), &steps).ok_or_else(|| AlignError::BadPath(item.to_string()))?;
            collector.add(target, Span::new(s, e - 1));
        }
    }
    Ok(collector.finish(AlignSource::Jamr))
}

/// Path of every node reachable from the root through its defining
/// position, in ISI (`one_based`, root `1`) or JAMR (root `0`) style.
pub fn node_paths(graph: &AmrGraph, one_based: bool) -> Vec<Option<String>> {
    let tree = surface_tree(graph);
    let mut paths: Vec<Option<String>> = vec![None; graph.len()];
    if graph.is_empty() {
        return paths;
    }
    let base = usize::from(one_based);
    let mut stack = vec![(graph.root(), base.to_string())];
    while let Some((u, p)) = stack.pop() {
        for (k, slot) in tree[u].iter().enumerate() {
            if let Slot::Node { id, defining: true } = *slot {
                stack.push((id, format!("{p}.{}", k + base)));
            }
        }
        paths[u] = Some(p);
    }
    paths
}

/// JAMR-style rendering (`start-end|path+path`, exclusive end, 0-based
/// paths) of an alignment map against the graph's surface order.
pub fn write_jamr_alignments(map: &AlignmentMap, graph: &AmrGraph) -> String {
    let paths = node_paths(graph, false);
    let mut by_span: BTreeMap<Span, Vec<String>> = BTreeMap::new();
    for (n, span, _) in map.iter() {
        if let Some(p) = &paths[n] {
            by_span.entry(span).or_default().push(p.clone());
        }
    }
    by_span
        .into_iter()
        .map(|(s, mut ps)| {
            ps.sort();
            format!("{}-{}|{}", s.start, s.end + 1, ps.join("+"))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Reads an ISI file with one line per graph.
pub fn read_isi_file(text: &str, graphs: &[&AmrGraph]) -> Result<Vec<AlignmentMap>, AlignFileError> {
    let lines: Vec<&str> = text.lines().collect();
    graphs
        .iter()
        .enumerate()
        .map(|(i, g)| {
            read_isi_alignments(lines.get(i).copied().unwrap_or(""), g)
                .map_err(|source| AlignFileError { line: i + 1, source })
        })
        .collect()
}

fn is_quantity(concept: &str) -> bool {
    concept.ends_with("-quantity")
}

fn prefers_arg2(concept: &str) -> bool {
    matches!(strip_sense(concept), "have-org-role" | "rate-entity")
}

/// Preference rank of a child role when filling `parent`; lower wins,
/// `None` means the role is never used.
fn role_rank(parent_concept: &str, role: &str) -> Option<u8> {
    match role {
        "name" => Some(0),
        "unit" if is_quantity(parent_concept) => Some(1),
        "ARG2" if prefers_arg2(parent_concept) => Some(2),
        "mod" => None,
        _ => Some(3),
    }
}

/// Children-first order over stored edges; nodes not reachable from the
/// root follow in index order.
fn children_first(graph: &AmrGraph) -> Vec<NodeId> {
    let mut order = Vec::with_capacity(graph.len());
    let mut seen = vec![false; graph.len()];
    fn post(u: NodeId, graph: &AmrGraph, seen: &mut [bool], order: &mut Vec<NodeId>) {
        seen[u] = true;
        for (s, _, t) in graph.relations() {
            if s == u && !seen[t] {
                post(t, graph, seen, order);
            }
        }
        order.push(u);
    }
    if !graph.is_empty() {
        post(graph.root(), graph, &mut seen, &mut order);
    }
    for u in 0..graph.len() {
        if !seen[u] {
            post(u, graph, &mut seen, &mut order);
        }
    }
    order
}

/// Fills unaligned nodes from their aligned children until nothing changes.
fn percolate(graph: &AmrGraph, map: &mut AlignmentMap) {
    let order = children_first(graph);
    loop {
        let mut changed = false;
        for &u in &order {
            if map.contains(u) {
                continue;
            }
            let concept = &graph.node(u).concept;
            let best = graph
                .relations()
                .filter(|&(s, _, _)| s == u)
                .filter_map(|(_, role, t)| {
                    let rank = role_rank(concept, role)?;
                    let span = map.span(t)?;
                    Some((rank, span, t))
                })
                .min();
            if let Some((_, span, _)) = best {
                map.insert(u, span, AlignSource::Percolated);
                changed = true;
            }
        }
        if !changed {
            return;
        }
    }
}

/// Aligned-node counts after each merge step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MergeReport {
    pub after_sem: usize,
    pub after_percolation: usize,
    pub after_jamr: usize,
    pub after_second_percolation: usize,
}

pub fn merge_alignments(graph: &AmrGraph, sem: &AlignmentMap, jamr: &AlignmentMap) -> Result<AlignmentMap, AlignError> {
    merge_alignments_with_report(graph, sem, jamr).map(|(m, _)| m)
}

pub fn merge_alignments_with_report(
    graph: &AmrGraph,
    sem: &AlignmentMap,
    jamr: &AlignmentMap,
) -> Result<(AlignmentMap, MergeReport), AlignError> {
    sem.validate(graph, None)?;
    jamr.validate(graph, None)?;
    let mut out = sem.clone();
    let after_sem = out.len();
    percolate(graph, &mut out);
    let after_percolation = out.len();
    for (n, span, _) in jamr.iter() {
        out.insert(n, span, AlignSource::Jamr);
    }
    let after_jamr = out.len();
    percolate(graph, &mut out);
    let report = MergeReport { after_sem, after_percolation, after_jamr, after_second_percolation: out.len() };
    Ok((out, report))
}
