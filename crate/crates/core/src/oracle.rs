//! Training oracle: turns an aligned (sentence, graph) pair into the
//! transition sequence that rebuilds as much of the graph as the system
//! can reach.
//!
//! Aligned nodes are grouped by token span (overlapping spans are fused).
//! The shallowest node of each group is created from the group's tokens,
//! by `ENTITY` when it carries a `:name` node whose `:opN` strings are
//! exactly those tokens, else by `CONFIRM`. The other nodes of the group
//! and the head's attributes become `DEPENDENT` leaves. Relations between
//! group heads become arcs, emitted as soon as both ends are adjacent on
//! the stack, smallest role first. Unaligned nodes are dropped.

use std::collections::{BTreeMap, HashMap, VecDeque};

use crate::align::{AlignError, AlignmentMap, Span};
use crate::graph::{invert_role, AmrGraph, NodeId};
use crate::metrics::corpus_smatch;
use crate::smatch::smatch_hill_climb;
use crate::triples::to_triples;
use crate::transition::{ActionKind, Label, Leaf, LeafValue, ParserState, Transition};

#[derive(Debug, Clone)]
pub struct OracleOutput {
    pub transitions: Vec<Transition>,
    /// Graph produced by replaying `transitions`.
    pub graph: AmrGraph,
    pub degenerate: bool,
    /// Gold nodes with no counterpart in `graph`.
    pub dropped_nodes: usize,
    /// Relations between created heads that were never built.
    pub unbuilt_arcs: usize,
}

#[derive(Debug)]
struct Segment {
    span: Span,
    head: NodeId,
    entity: bool,
    deps: VecDeque<Leaf>,
}

#[derive(Debug)]
struct Arc {
    a: usize,
    b: usize,
    source: usize,
    role: String,
    done: bool,
}

struct Plan {
    segments: Vec<Segment>,
    token_seg: Vec<Option<usize>>,
    arcs: Vec<Arc>,
    protected: usize,
    covered_nodes: usize,
}

fn entity_name(gold: &AmrGraph, head: NodeId, members: &[NodeId], words: &[String]) -> Option<NodeId> {
    gold.relations()
        .filter(|&(s, r, t)| s == head && r == "name" && gold.node(t).concept == "name" && members.contains(&t))
        .map(|(_, _, t)| t)
        .find(|&n| {
            let mut ops = BTreeMap::new();
            for e in gold.edges() {
                let touches = e.source == n || e.target == crate::graph::Target::Node(n);
                if !touches || (e.source == head && e.role == "name") {
                    continue;
                }
                let Some(k) = e.role.strip_prefix("op").and_then(|k| k.parse::<usize>().ok()) else {
                    return false;
                };
                match &e.target {
                    crate::graph::Target::Const(v) if e.source == n => {
                        ops.insert(k, v.clone());
                    }
                    _ => return false,
                }
            }
            ops.keys().copied().eq(1..=words.len()) && ops.values().eq(words.iter())
        })
}

fn plan(tokens: &[String], gold: &AmrGraph, align: &AlignmentMap) -> Plan {
    let depths = gold.depths();
    let mut spans: Vec<(Span, NodeId)> = align.iter().map(|(n, s, _)| (s, n)).collect();
    spans.sort();
    let mut groups: Vec<(Span, Vec<NodeId>)> = Vec::new();
    for (s, n) in spans {
        match groups.last_mut() {
            Some((g, members)) if s.start <= g.end => {
                g.end = g.end.max(s.end);
                members.push(n);
            }
            _ => groups.push((s, vec![n])),
        }
    }
    let mut token_seg = vec![None; tokens.len()];
    let mut head_seg = HashMap::new();
    let mut segments = Vec::new();
    let mut covered_nodes = 0;
    for (i, (span, members)) in groups.iter().enumerate() {
        let head = *members.iter().min_by_key(|&&n| (depths[n], n)).expect("nonempty group");
        let words = &tokens[span.start..=span.end];
        let name = entity_name(gold, head, members, words);
        let mut deps = Vec::new();
        covered_nodes += 1 + usize::from(name.is_some());
        for &m in members {
            if m == head || Some(m) == name {
                continue;
            }
            let role = gold.normalized_relations().into_iter().find_map(|(u, r, v)| {
                if u == head && v == m {
                    Some(r)
                } else if u == m && v == head {
                    Some(invert_role(&r))
                } else {
                    None
                }
            });
            if let Some(role) = role {
                deps.push(Leaf { role, value: LeafValue::Concept(gold.node(m).concept.clone()) });
                covered_nodes += 1;
            }
        }
        for (s, r, v) in gold.attributes() {
            if s == head {
                deps.push(Leaf { role: r.to_string(), value: LeafValue::Const(v.to_string()) });
            }
        }
        deps.sort();
        for t in span.start..=span.end {
            token_seg[t] = Some(i);
        }
        head_seg.insert(head, i);
        segments.push(Segment { span: *span, head, entity: name.is_some(), deps: deps.into() });
    }
    let mut arcs: Vec<Arc> = Vec::new();
    for (u, r, v) in gold.normalized_relations() {
        let (Some(&a), Some(&b)) = (head_seg.get(&u), head_seg.get(&v)) else { continue };
        if a == b || arcs.iter().any(|x| x.source == a && x.b == b && x.role == r) {
            continue;
        }
        arcs.push(Arc { a, b, source: a, role: r, done: false });
    }
    for x in &mut arcs {
        // store endpoints unordered for lookups, keep the direction in `source`
        if x.a > x.b {
            std::mem::swap(&mut x.a, &mut x.b);
        }
    }
    let protected = (0..segments.len()).min_by_key(|&i| (depths[segments[i].head], segments[i].head)).unwrap_or(0);
    Plan { segments, token_seg, arcs, protected, covered_nodes }
}

struct Run<'a> {
    plan: Plan,
    gold: &'a AmrGraph,
    node_seg: HashMap<NodeId, usize>,
}

impl Run<'_> {
    fn seg_of(&self, s: &ParserState, k: usize) -> Option<usize> {
        let item = s.stack_top(k)?;
        match item.node {
            Some(n) => self.node_seg.get(&n).copied(),
            None => self.plan.token_seg[item.start],
        }
    }

    fn pending(&self, seg: usize) -> impl Iterator<Item = (usize, &Arc)> + '_ {
        self.plan.arcs.iter().enumerate().filter(move |(_, x)| !x.done && (x.a == seg || x.b == seg))
    }

    fn is_done(&self, seg: usize) -> bool {
        self.plan.segments[seg].deps.is_empty() && self.pending(seg).next().is_none()
    }

    /// Stack depth (0 = top) of the node built for `seg`, if it is on the stack.
    fn depth_on_stack(&self, s: &ParserState, seg: usize) -> Option<usize> {
        s.stack().iter().rev().position(|i| i.node.and_then(|n| self.node_seg.get(&n)) == Some(&seg))
    }

    /// Next transition and, for arcs, the arc it builds.
    fn choose(&self, s: &ParserState) -> (Transition, Option<usize>) {
        let bare = |k| (Transition::bare(k), None);
        let Some(top) = s.stack_top(0) else { return bare(ActionKind::Shift) };
        if top.is_token() {
            let Some(g) = self.plan.token_seg[top.start] else { return bare(ActionKind::Reduce) };
            if s.stack_top(1).is_some_and(|i| i.is_token()) && self.seg_of(s, 1) == Some(g) {
                return bare(ActionKind::Merge);
            }
            let seg = &self.plan.segments[g];
            if top.start > seg.span.start || top.end < seg.span.end {
                return bare(ActionKind::Shift);
            }
            let concept = self.gold.node(seg.head).concept.clone();
            let kind = if seg.entity { ActionKind::Entity } else { ActionKind::Confirm };
            return (Transition::new(kind, Label::Concept(concept)), None);
        }
        let a = self.seg_of(s, 0);
        if let Some(a) = a {
            if let Some(leaf) = self.plan.segments[a].deps.front() {
                return (Transition::new(ActionKind::Dependent, Label::Leaf(leaf.clone())), None);
            }
            if let Some(b) = self.seg_of(s, 1).filter(|_| !s.stack_top(1).unwrap().is_token()) {
                let mut between: Vec<(usize, &Arc)> = self.pending(a).filter(|(_, x)| x.a == b || x.b == b).collect();
                between.sort_by(|(_, x), (_, y)| (&x.role, x.source != a).cmp(&(&y.role, y.source != a)));
                if let Some(&(idx, arc)) = between.first() {
                    let last = self.pending(a).count() == 1 && a != self.plan.protected;
                    let head_is_source = |head: usize| if arc.source == head { arc.role.clone() } else { invert_role(&arc.role) };
                    let t = if last {
                        Transition::new(ActionKind::RightArc, Label::Role(head_is_source(b)))
                    } else {
                        Transition::new(ActionKind::LeftArc, Label::Role(head_is_source(a)))
                    };
                    return (t, Some(idx));
                }
            }
            if self.is_done(a) && a != self.plan.protected {
                return bare(ActionKind::Reduce);
            }
            let waits_deeper = self.pending(a).any(|(_, x)| {
                let other = if x.a == a { x.b } else { x.a };
                self.depth_on_stack(s, other).is_some_and(|d| d >= 2)
            });
            if waits_deeper && s.is_legal(ActionKind::Swap) {
                return bare(ActionKind::Swap);
            }
        }
        if s.buffer_len() > 0 {
            return bare(ActionKind::Shift);
        }
        if let Some(b) = self.seg_of(s, 1) {
            if !self.is_done(b) && s.is_legal(ActionKind::Swap) {
                return bare(ActionKind::Swap);
            }
        }
        if a != Some(self.plan.protected) && s.stack().len() > 1 {
            return bare(ActionKind::Reduce);
        }
        bare(ActionKind::Finish)
    }
}

/// Oracle transitions for `tokens` and `gold` under `align`, with the graph
/// they rebuild.
pub fn oracle(tokens: &[String], gold: &AmrGraph, align: &AlignmentMap) -> Result<OracleOutput, AlignError> {
    align.validate(gold, Some(tokens.len()))?;
    let plan = plan(tokens, gold, align);
    let mut run = Run { plan, gold, node_seg: HashMap::new() };
    let mut state = ParserState::new(tokens);
    while !state.is_terminal() {
        let (mut t, mut arc) = run.choose(&state);
        if !state.is_legal(t.kind) {
            let kind = if state.buffer_len() > 0 { ActionKind::Shift } else { ActionKind::Finish };
            (t, arc) = (Transition::bare(kind), None);
        }
        let seg = run.seg_of(&state, 0);
        state.apply(&t).expect("oracle picks legal transitions");
        match t.kind {
            ActionKind::Confirm | ActionKind::Entity => {
                let node = state.stack_top(0).and_then(|i| i.node).expect("just created");
                run.node_seg.insert(node, seg.expect("token belongs to a segment"));
            }
            ActionKind::Dependent => {
                if let Some(g) = seg {
                    run.plan.segments[g].deps.pop_front();
                }
            }
            _ => {}
        }
        if let Some(i) = arc {
            run.plan.arcs[i].done = true;
        }
    }
    let out = state.output();
    Ok(OracleOutput {
        transitions: state.history().to_vec(),
        graph: out.graph,
        degenerate: out.degenerate,
        dropped_nodes: gold.len() - run.plan.covered_nodes,
        unbuilt_arcs: run.plan.arcs.iter().filter(|x| !x.done).count(),
    })
}

/// Reachability summary of an oracle run over a corpus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleReport {
    pub sentences: usize,
    /// Corpus (micro-averaged) Smatch of oracle graphs against gold.
    pub upper_bound: f64,
    /// Mean sentence-level Smatch of oracle graphs against gold.
    pub mean_f1: f64,
    pub dropped_nodes: usize,
    pub unbuilt_arcs: usize,
}

/// Scores oracle outputs against their gold graphs with hill-climbing
/// Smatch (`restarts`, seed 0).
pub fn oracle_report(outputs: &[OracleOutput], golds: &[&AmrGraph], restarts: usize) -> OracleReport {
    let corpus = corpus_smatch(outputs.iter().map(|o| &o.graph).zip(golds.iter().copied()), restarts, 0);
    let mean_f1 = if outputs.is_empty() {
        1.0
    } else {
        outputs
            .iter()
            .zip(golds)
            .map(|(o, g)| smatch_hill_climb(&to_triples(&o.graph), &to_triples(g), restarts, 0).f1)
            .sum::<f64>()
            / outputs.len() as f64
    };
    OracleReport {
        sentences: outputs.len(),
        upper_bound: corpus.f1(),
        mean_f1,
        dropped_nodes: outputs.iter().map(|o| o.dropped_nodes).sum(),
        unbuilt_arcs: outputs.iter().map(|o| o.unbuilt_arcs).sum(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::AlignSource;
    use crate::penman::{parse_penman, serialize_penman};
    use crate::smatch::smatch_exact;
    use crate::transition::replay;
    use crate::triples::to_triples;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn aligned(g: &AmrGraph, pairs: &[(&str, usize, usize)]) -> AlignmentMap {
        let mut m = AlignmentMap::new();
        for &(v, s, e) in pairs {
            m.insert(g.var_id(v).unwrap(), Span::new(s, e), AlignSource::Sem);
        }
        m
    }

    fn check(sentence: &str, amr: &str, pairs: &[(&str, usize, usize)]) -> (OracleOutput, f64) {
        let tokens = toks(sentence);
        let gold = parse_penman(amr).unwrap();
        let out = oracle(&tokens, &gold, &aligned(&gold, pairs)).unwrap();
        let replayed = replay(&tokens, &out.transitions).unwrap();
        assert!(replayed.is_terminal());
        assert_eq!(replayed.output().graph, out.graph);
        let f1 = smatch_exact(&to_triples(&out.graph), &to_triples(&gold)).unwrap().f1;
        (out, f1)
    }

    #[test]
    fn boy_wants() {
        let (out, f1) = check("the boy wants", "(w / want-01 :ARG0 (b / boy))", &[("b", 1, 1), ("w", 2, 2)]);
        assert_eq!(f1, 1.0);
        assert_eq!(serialize_penman(&out.graph), "(w / want-01 :ARG0 (b / boy))");
    }

    #[test]
    fn control_reentrancy() {
        let (out, f1) = check(
            "the boy wants to eat",
            "(w / want-01 :ARG0 (b / boy) :ARG1 (e / eat-01 :ARG0 b))",
            &[("b", 1, 1), ("w", 2, 2), ("e", 4, 4)],
        );
        assert_eq!(f1, 1.0, "{}", crate::transition::format_transitions(&out.transitions));
    }

    #[test]
    fn entity_with_dependents() {
        let (out, f1) = check(
            "Barack Obama did not teach",
            r#"(t / teach-01 :polarity - :ARG0 (p / person :wiki "Barack_Obama" :name (n / name :op1 "Barack" :op2 "Obama")))"#,
            &[("p", 0, 1), ("n", 0, 1), ("t", 2, 4)],
        );
        assert_eq!(f1, 1.0);
        assert!(out.transitions.iter().any(|t| t.kind == ActionKind::Entity));
    }

    #[test]
    fn teacher_is_one_token() {
        let (_, f1) = check(
            "the teacher sings",
            "(s / sing-01 :ARG0 (p / person :ARG0-of (t / teach-01)))",
            &[("p", 1, 1), ("t", 1, 1), ("s", 2, 2)],
        );
        assert_eq!(f1, 1.0);
    }

    #[test]
    fn crossing_arcs_need_swaps() {
        let (out, f1) = check(
            "a b c d",
            "(x / xa :ARG0 (z / zc) :ARG1 (y / yb :ARG0 (w / wd)))",
            &[("x", 0, 0), ("y", 1, 1), ("z", 2, 2), ("w", 3, 3)],
        );
        assert_eq!(f1, 1.0, "{}", crate::transition::format_transitions(&out.transitions));
    }

    #[test]
    fn root_in_the_middle() {
        let (_, f1) = check(
            "red apple fell down",
            "(f / fall-01 :ARG1 (a / apple :mod (r / red)) :direction (d / down))",
            &[("r", 0, 0), ("a", 1, 1), ("f", 2, 2), ("d", 3, 3)],
        );
        assert_eq!(f1, 1.0);
    }

    #[test]
    fn unaligned_node_is_dropped() {
        let (out, f1) = check(
            "the boy wants",
            "(w / want-01 :ARG0 (b / boy) :ARG1 (g / go-02))",
            &[("b", 1, 1), ("w", 2, 2)],
        );
        assert!(f1 < 1.0);
        assert_eq!(out.graph.len(), 2);
        assert_eq!(out.dropped_nodes, 1);
    }

    #[test]
    fn empty_sentence_is_degenerate() {
        let gold = parse_penman("(a / apple)").unwrap();
        let out = oracle(&[], &gold, &AlignmentMap::new()).unwrap();
        assert!(out.transitions.is_empty());
        assert!(out.degenerate);
        assert_eq!(out.graph.len(), 1);
    }

    #[test]
    fn span_past_sentence_is_rejected() {
        let gold = parse_penman("(a / apple)").unwrap();
        let m = aligned(&gold, &[("a", 3, 3)]);
        assert!(matches!(oracle(&toks("apple"), &gold, &m), Err(AlignError::BadSpan(_))));
    }
}
