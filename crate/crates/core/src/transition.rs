//! Stack/buffer transition system that builds a graph from a sentence.
//!
//! The parser predicts one of ten structural actions and, for five of them,
//! a separate label: a concept for `CONFIRM`, an entity type for `ENTITY`, a
//! leaf for `DEPENDENT` and a role for the two arc actions.
//!
//! `LEFT-ARC(r)` adds `s0 -r-> s1` and keeps both items, so a node can take
//! part in several arcs. `RIGHT-ARC(r)` adds `s1 -r-> s0` and pops `s0`.
//! Either arc can point the other way through an inverse role (`r-of`).
//!
//! Every run is capped at `10 * max(n, 1)` steps. Once the remaining budget
//! only covers shifting the buffer and finishing, those are the only legal
//! actions, so every action sequence terminates.

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::graph::{normalize_relation, AmrGraph, NodeId};

/// Steps allowed per token.
pub const STEP_FACTOR: usize = 10;

/// Concept of the placeholder node returned when nothing was built.
pub const EMPTY_CONCEPT: &str = "amr-empty";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ActionKind {
    Shift,
    Reduce,
    Confirm,
    Merge,
    Entity,
    Dependent,
    LeftArc,
    RightArc,
    Swap,
    Finish,
}

impl ActionKind {
    pub const COUNT: usize = 10;

    pub const ALL: [ActionKind; 10] = [
        ActionKind::Shift,
        ActionKind::Reduce,
        ActionKind::Confirm,
        ActionKind::Merge,
        ActionKind::Entity,
        ActionKind::Dependent,
        ActionKind::LeftArc,
        ActionKind::RightArc,
        ActionKind::Swap,
        ActionKind::Finish,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ActionKind::Shift => "SHIFT",
            ActionKind::Reduce => "REDUCE",
            ActionKind::Confirm => "CONFIRM",
            ActionKind::Merge => "MERGE",
            ActionKind::Entity => "ENTITY",
            ActionKind::Dependent => "DEPENDENT",
            ActionKind::LeftArc => "LEFT-ARC",
            ActionKind::RightArc => "RIGHT-ARC",
            ActionKind::Swap => "SWAP",
            ActionKind::Finish => "FINISH",
        }
    }

    /// The label category this action needs, if any.
    pub fn label_kind(self) -> Option<LabelKind> {
        match self {
            ActionKind::Confirm => Some(LabelKind::Concept),
            ActionKind::Entity => Some(LabelKind::EntityType),
            ActionKind::Dependent => Some(LabelKind::Leaf),
            ActionKind::LeftArc | ActionKind::RightArc => Some(LabelKind::Role),
            _ => None,
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LabelKind {
    Concept,
    EntityType,
    Leaf,
    Role,
}

/// What a `DEPENDENT` action hangs off the stack top.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LeafValue {
    Concept(String),
    Const(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Leaf {
    pub role: String,
    pub value: LeafValue,
}

impl fmt::Display for Leaf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.value {
            LeafValue::Concept(c) => write!(f, "{}/{}", self.role, c),
            LeafValue::Const(v) => write!(f, "{}={}", self.role, v),
        }
    }
}

impl FromStr for Leaf {
    type Err = TransitionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let cut = s.find(['/', '=']).ok_or_else(|| TransitionError::BadToken(s.to_string()))?;
        let (role, rest) = s.split_at(cut);
        if role.is_empty() || rest.len() < 2 {
            return Err(TransitionError::BadToken(s.to_string()));
        }
        let value = if rest.starts_with('/') {
            LeafValue::Concept(rest[1..].to_string())
        } else {
            LeafValue::Const(rest[1..].to_string())
        };
        Ok(Leaf { role: role.to_string(), value })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    None,
    Concept(String),
    Role(String),
    Leaf(Leaf),
}

impl Label {
    /// Payload text as it appears after `ACTION:`.
    pub fn payload(&self) -> Option<String> {
        match self {
            Label::None => None,
            Label::Concept(c) => Some(c.clone()),
            Label::Role(r) => Some(r.clone()),
            Label::Leaf(l) => Some(l.to_string()),
        }
    }

    fn fits(&self, kind: ActionKind) -> bool {
        matches!(
            (kind.label_kind(), self),
            (None, Label::None)
                | (Some(LabelKind::Concept | LabelKind::EntityType), Label::Concept(_))
                | (Some(LabelKind::Leaf), Label::Leaf(_))
                | (Some(LabelKind::Role), Label::Role(_))
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Transition {
    pub kind: ActionKind,
    pub label: Label,
}

impl Transition {
    pub fn new(kind: ActionKind, label: Label) -> Self {
        Transition { kind, label }
    }

    pub fn bare(kind: ActionKind) -> Self {
        Transition { kind, label: Label::None }
    }

    /// Builds a transition from an action and its payload text.
    pub fn with_payload(kind: ActionKind, payload: &str) -> Result<Self, TransitionError> {
        let label = match kind.label_kind() {
            None => return Err(TransitionError::BadToken(format!("{kind}:{payload}"))),
            Some(LabelKind::Concept | LabelKind::EntityType) => Label::Concept(payload.to_string()),
            Some(LabelKind::Role) => Label::Role(payload.to_string()),
            Some(LabelKind::Leaf) => Label::Leaf(payload.parse()?),
        };
        Ok(Transition { kind, label })
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if c == '%' || c.is_whitespace() {
            let mut buf = [0u8; 4];
            for b in c.encode_utf8(&mut buf).bytes() {
                out.push_str(&format!("%{b:02X}"));
            }
        } else {
            out.push(c);
        }
    }
    out
}

fn unescape(s: &str) -> Option<String> {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = s.get(i + 1..i + 3)?;
            out.push(u8::from_str_radix(hex, 16).ok()?);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).ok()
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.label.payload() {
            Some(p) => write!(f, "{}:{}", self.kind, escape(&p)),
            None => write!(f, "{}", self.kind),
        }
    }
}

impl FromStr for Transition {
    type Err = TransitionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || TransitionError::BadToken(s.to_string());
        let (name, payload) = match s.split_once(':') {
            Some((n, p)) => (n, Some(p)),
            None => (s, None),
        };
        let kind = ActionKind::ALL.into_iter().find(|k| k.name() == name).ok_or_else(bad)?;
        match payload {
            None if kind.label_kind().is_none() => Ok(Transition::bare(kind)),
            Some(p) if kind.label_kind().is_some() && !p.is_empty() => {
                Transition::with_payload(kind, &unescape(p).ok_or_else(bad)?)
            }
            _ => Err(bad()),
        }
    }
}

/// Parses a whitespace-separated action line.
pub fn parse_transitions(line: &str) -> Result<Vec<Transition>, TransitionError> {
    line.split_whitespace().map(str::parse).collect()
}

pub fn format_transitions(ts: &[Transition]) -> String {
    ts.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransitionError {
    #[error("{0} is not legal in this state")]
    IllegalAction(ActionKind),
    #[error("label {label:?} does not fit {kind}")]
    LabelMismatch { kind: ActionKind, label: Label },
    #[error("cannot read action `{0}`")]
    BadToken(String),
}

/// A stack or buffer entry: an unconfirmed token group or a graph node.
///
/// Ids are unique within a run. The initial buffer items carry the token
/// index as their id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Item {
    pub id: usize,
    pub node: Option<NodeId>,
    pub words: Vec<String>,
    pub start: usize,
    pub end: usize,
}

impl Item {
    pub fn is_token(&self) -> bool {
        self.node.is_none()
    }
}

/// Graph read off a parser state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseOutput {
    pub graph: AmrGraph,
    /// Set when nothing was built and the graph is a placeholder.
    pub degenerate: bool,
}

#[derive(Debug, Clone)]
pub struct ParserState {
    tokens: Vec<String>,
    stack: Vec<Item>,
    /// Front of the buffer is the last element.
    buffer: Vec<Item>,
    history: Vec<Transition>,
    graph: AmrGraph,
    swapped: HashSet<(usize, usize)>,
    next_id: usize,
    finished: bool,
    budget: usize,
}

impl ParserState {
    pub fn new(tokens: &[String]) -> Self {
        let buffer = tokens
            .iter()
            .enumerate()
            .rev()
            .map(|(i, w)| Item { id: i, node: None, words: vec![w.clone()], start: i, end: i })
            .collect();
        ParserState {
            tokens: tokens.to_vec(),
            stack: Vec::new(),
            buffer,
            history: Vec::new(),
            graph: AmrGraph::new(),
            swapped: HashSet::new(),
            next_id: tokens.len(),
            finished: false,
            budget: STEP_FACTOR * tokens.len().max(1),
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Stack items, bottom first.
    pub fn stack(&self) -> &[Item] {
        &self.stack
    }

    /// The `k`-th item from the top of the stack.
    pub fn stack_top(&self, k: usize) -> Option<&Item> {
        self.stack.len().checked_sub(k + 1).map(|i| &self.stack[i])
    }

    /// Buffer items, front first.
    pub fn buffer(&self) -> impl DoubleEndedIterator<Item = &Item> + ExactSizeIterator + '_ {
        self.buffer.iter().rev()
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    pub fn history(&self) -> &[Transition] {
        &self.history
    }

    /// The partial graph; it has no meaningful root until [`Self::output`].
    pub fn graph(&self) -> &AmrGraph {
        &self.graph
    }

    pub fn steps(&self) -> usize {
        self.history.len()
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn is_terminal(&self) -> bool {
        self.finished || (self.buffer.is_empty() && self.stack.is_empty())
    }

    /// Whether a non-closing action still leaves room to shift the buffer
    /// (possibly grown by one) and finish.
    fn has_slack(&self) -> bool {
        self.steps() + self.buffer.len() + 1 + 2 <= self.budget
    }

    fn top_is_token(&self, k: usize) -> bool {
        self.stack_top(k).is_some_and(Item::is_token)
    }

    fn top_is_node(&self, k: usize) -> bool {
        self.stack_top(k).is_some_and(|i| !i.is_token())
    }

    pub fn is_legal(&self, kind: ActionKind) -> bool {
        if self.is_terminal() {
            return false;
        }
        let closing = match kind {
            ActionKind::Shift => return !self.buffer.is_empty(),
            ActionKind::Finish => return self.buffer.is_empty() && !self.stack.is_empty(),
            _ => false,
        };
        if !closing && !self.has_slack() {
            return false;
        }
        match kind {
            ActionKind::Reduce => !self.stack.is_empty(),
            ActionKind::Confirm | ActionKind::Entity => self.top_is_token(0),
            ActionKind::Dependent => self.top_is_node(0),
            ActionKind::LeftArc | ActionKind::RightArc => self.top_is_node(0) && self.top_is_node(1),
            ActionKind::Merge => self.top_is_token(0) && self.top_is_token(1),
            ActionKind::Swap => {
                self.stack.len() >= 2 && {
                    let key = (self.stack_top(1).unwrap().id, self.stack_top(0).unwrap().id);
                    !self.swapped.contains(&key)
                }
            }
            ActionKind::Shift | ActionKind::Finish => unreachable!(),
        }
    }

    /// Legal actions in inventory order; empty exactly when terminal.
    pub fn legal_actions(&self) -> Vec<ActionKind> {
        ActionKind::ALL.into_iter().filter(|&k| self.is_legal(k)).collect()
    }

    fn fresh_id(&mut self) -> usize {
        self.next_id += 1;
        self.next_id - 1
    }

    pub fn apply(&mut self, t: &Transition) -> Result<(), TransitionError> {
        if !t.label.fits(t.kind) {
            return Err(TransitionError::LabelMismatch { kind: t.kind, label: t.label.clone() });
        }
        if !self.is_legal(t.kind) {
            return Err(TransitionError::IllegalAction(t.kind));
        }
        match (&t.kind, &t.label) {
            (ActionKind::Shift, _) => {
                let item = self.buffer.pop().expect("legal shift");
                self.stack.push(item);
            }
            (ActionKind::Reduce, _) => {
                self.stack.pop();
            }
            (ActionKind::Confirm, Label::Concept(c)) => {
                let node = self.graph.add_fresh_node(c);
                self.replace_top_with_node(node);
            }
            (ActionKind::Entity, Label::Concept(c)) => {
                let node = self.graph.add_fresh_node(c);
                let name = self.graph.add_fresh_node("name");
                self.graph.add_relation(node, "name", name).expect("fresh nodes");
                let words = self.stack.last().expect("legal entity").words.clone();
                for (i, w) in words.iter().enumerate() {
                    self.graph.add_attribute(name, &format!("op{}", i + 1), w).expect("fresh node");
                }
                self.replace_top_with_node(node);
            }
            (ActionKind::Dependent, Label::Leaf(leaf)) => {
                let top = self.stack.last().and_then(|i| i.node).expect("legal dependent");
                match &leaf.value {
                    LeafValue::Concept(c) => {
                        let child = self.graph.add_fresh_node(c);
                        self.graph.add_relation(top, &leaf.role, child).expect("known nodes");
                    }
                    LeafValue::Const(v) => self.graph.add_attribute(top, &leaf.role, v).expect("known node"),
                }
            }
            (ActionKind::LeftArc | ActionKind::RightArc, Label::Role(role)) => {
                let s0 = self.stack_top(0).and_then(|i| i.node).expect("legal arc");
                let s1 = self.stack_top(1).and_then(|i| i.node).expect("legal arc");
                let (head, dep) = if t.kind == ActionKind::LeftArc { (s0, s1) } else { (s1, s0) };
                if self.arc_is_new_and_acyclic(head, role, dep) {
                    self.graph.add_relation(head, role, dep).expect("known nodes");
                }
                if t.kind == ActionKind::RightArc {
                    self.stack.pop();
                }
            }
            (ActionKind::Merge, _) => {
                let s0 = self.stack.pop().expect("legal merge");
                let s1 = self.stack.pop().expect("legal merge");
                let mut words = s1.words;
                words.extend(s0.words);
                let id = self.fresh_id();
                self.stack.push(Item {
                    id,
                    node: None,
                    words,
                    start: s1.start.min(s0.start),
                    end: s1.end.max(s0.end),
                });
            }
            (ActionKind::Swap, _) => {
                let s0 = self.stack.pop().expect("legal swap");
                let s1 = self.stack.pop().expect("legal swap");
                self.swapped.insert((s1.id, s0.id));
                self.stack.push(s0);
                self.buffer.push(s1);
            }
            (ActionKind::Finish, _) => self.finished = true,
            _ => unreachable!("label checked above"),
        }
        self.history.push(t.clone());
        Ok(())
    }

    /// Functional form of [`Self::apply`].
    pub fn applied(&self, t: &Transition) -> Result<Self, TransitionError> {
        let mut next = self.clone();
        next.apply(t)?;
        Ok(next)
    }

    fn replace_top_with_node(&mut self, node: NodeId) {
        let old = self.stack.pop().expect("nonempty stack");
        let id = self.fresh_id();
        self.stack.push(Item { id, node: Some(node), ..old });
    }

    fn arc_is_new_and_acyclic(&self, head: NodeId, role: &str, dep: NodeId) -> bool {
        let (u, r, v) = normalize_relation(head, role, dep);
        let rels = self.graph.normalized_relations();
        if rels.iter().any(|(a, b, c)| *a == u && *b == r && *c == v) {
            return false;
        }
        // adding u -> v closes a cycle iff v already reaches u
        let mut adj = vec![Vec::new(); self.graph.len()];
        for (a, _, c) in &rels {
            adj[*a].push(*c);
        }
        let mut seen = vec![false; self.graph.len()];
        let mut stack = vec![v];
        while let Some(x) = stack.pop() {
            if x == u {
                return false;
            }
            if !std::mem::replace(&mut seen[x], true) {
                stack.extend(adj[x].iter().copied());
            }
        }
        true
    }

    /// The graph built so far, rooted and connected.
    ///
    /// The root is the topmost node item on the stack. Without one, it is
    /// the node without incoming edges that reaches the most nodes. Parts
    /// not connected to the root are attached to it with `:mod`.
    pub fn output(&self) -> ParseOutput {
        let mut graph = self.graph.clone();
        if graph.is_empty() {
            return ParseOutput { graph: AmrGraph::singleton("a", EMPTY_CONCEPT), degenerate: true };
        }
        let n = graph.len();
        let mut adj = vec![Vec::new(); n];
        let mut indeg = vec![0usize; n];
        for (s, _, t) in graph.normalized_relations() {
            adj[s].push(t);
            indeg[t] += 1;
        }
        let reach = |from: NodeId| {
            let mut seen = vec![false; n];
            let mut q = VecDeque::from([from]);
            seen[from] = true;
            while let Some(u) = q.pop_front() {
                for &v in &adj[u] {
                    if !std::mem::replace(&mut seen[v], true) {
                        q.push_back(v);
                    }
                }
            }
            seen.iter().filter(|&&b| b).count()
        };
        let root = self.stack.iter().rev().find_map(|i| i.node).unwrap_or_else(|| {
            (0..n)
                .filter(|&u| indeg[u] == 0)
                .max_by_key(|&u| (reach(u), std::cmp::Reverse(u)))
                .unwrap_or(0)
        });
        graph.set_root(root).expect("node exists");
        loop {
            let stray = graph.unreachable_from_root();
            let Some(&first) = stray.first() else { break };
            let rep = stray.iter().copied().find(|&u| indeg[u] == 0).unwrap_or(first);
            graph.add_relation(root, "mod", rep).expect("nodes exist");
            adj[root].push(rep);
            indeg[rep] += 1;
        }
        ParseOutput { graph, degenerate: false }
    }
}

/// Runs `transitions` from the initial state for `tokens`.
pub fn replay(tokens: &[String], transitions: &[Transition]) -> Result<ParserState, TransitionError> {
    let mut s = ParserState::new(tokens);
    for t in transitions {
        s.apply(t)?;
    }
    Ok(s)
}
