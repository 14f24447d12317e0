//! PENMAN reading and writing, plus blank-line-separated corpus files with
//! `# ::key value` metadata.

use std::collections::HashMap;

use thiserror::Error;

use crate::graph::{invert_role, AmrGraph, GraphError, NodeId, Target};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PenmanError {
    #[error("unbalanced parentheses at byte {offset}")]
    UnbalancedParens { offset: usize },
    #[error("duplicate variable `{var}` at byte {offset}")]
    DuplicateVariable { var: String, offset: usize },
    #[error("reference to undefined variable `{var}` at byte {offset}")]
    DanglingReference { var: String, offset: usize },
    #[error("directed cycle through the edge at byte {offset}")]
    CyclicGraph { offset: usize },
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
}

impl PenmanError {
    pub fn offset(&self) -> usize {
        match self {
            PenmanError::UnbalancedParens { offset }
            | PenmanError::DuplicateVariable { offset, .. }
            | PenmanError::DanglingReference { offset, .. }
            | PenmanError::CyclicGraph { offset }
            | PenmanError::Syntax { offset, .. } => *offset,
        }
    }
}

/// Whether an unquoted symbol has the shape of a variable (`b`, `p2`).
pub fn looks_like_var(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase()) && chars.all(|c| c.is_ascii_digit())
}

enum Value {
    Node(NodeId),
    Quoted(String),
    Symbol(String, usize),
}

struct PendingEdge {
    source: NodeId,
    role: String,
    value: Value,
    offset: usize,
}

struct Parser<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
    graph: AmrGraph,
    pending: Vec<PendingEdge>,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn syntax(&self, message: &str) -> PenmanError {
        PenmanError::Syntax { offset: self.pos, message: message.to_string() }
    }

    fn symbol(&mut self) -> &'a str {
        let start = self.pos;
        while let Some(b) = self.peek() {
            if b.is_ascii_whitespace() || b == b'(' || b == b')' || b == b'"' {
                break;
            }
            self.pos += 1;
        }
        &self.text[start..self.pos]
    }

    fn quoted(&mut self) -> Result<String, PenmanError> {
        let start = self.pos;
        self.pos += 1;
        let mut out = String::new();
        loop {
            match self.peek() {
                None => {
                    return Err(PenmanError::Syntax {
                        offset: start,
                        message: "unterminated string".into(),
                    })
                }
                Some(b'"') => {
                    self.pos += 1;
                    return Ok(out);
                }
                Some(b'\\') if self.pos + 1 < self.bytes.len() => {
                    let c = self.text[self.pos + 1..].chars().next().unwrap();
                    out.push(c);
                    self.pos += 1 + c.len_utf8();
                }
                Some(_) => {
                    let c = self.text[self.pos..].chars().next().unwrap();
                    out.push(c);
                    self.pos += c.len_utf8();
                }
            }
        }
    }

    /// Parses `( var / concept items* )` with the cursor on the `(`.
    fn node(&mut self) -> Result<NodeId, PenmanError> {
        let open = self.pos;
        self.pos += 1;
        self.skip_ws();
        let var_offset = self.pos;
        let var = self.symbol();
        if var.is_empty() {
            return Err(match self.peek() {
                None => PenmanError::UnbalancedParens { offset: open },
                _ => self.syntax("expected a variable"),
            });
        }
        self.skip_ws();
        if self.peek() != Some(b'/') {
            return Err(match self.peek() {
                None => PenmanError::UnbalancedParens { offset: open },
                _ => self.syntax("expected `/` after the variable"),
            });
        }
        self.pos += 1;
        self.skip_ws();
        let concept = match self.peek() {
            Some(b'"') => self.quoted()?,
            None => return Err(PenmanError::UnbalancedParens { offset: open }),
            _ => self.symbol().to_string(),
        };
        if concept.is_empty() {
            return Err(self.syntax("expected a concept"));
        }
        let id = self.graph.add_node(var, &concept).map_err(|e| match e {
            GraphError::DuplicateVariable(var) => PenmanError::DuplicateVariable { var, offset: var_offset },
            other => PenmanError::Syntax { offset: var_offset, message: other.to_string() },
        })?;

        loop {
            self.skip_ws();
            match self.peek() {
                None => return Err(PenmanError::UnbalancedParens { offset: open }),
                Some(b')') => {
                    self.pos += 1;
                    return Ok(id);
                }
                Some(b':') => {
                    let role_offset = self.pos;
                    self.pos += 1;
                    let role = self.symbol().to_string();
                    if role.is_empty() {
                        return Err(self.syntax("empty role"));
                    }
                    self.skip_ws();
                    let value = match self.peek() {
                        None => return Err(PenmanError::UnbalancedParens { offset: open }),
                        Some(b'(') => Value::Node(self.node()?),
                        Some(b'"') => Value::Quoted(self.quoted()?),
                        Some(b')') | Some(b':') => return Err(self.syntax("role without a value")),
                        Some(_) => {
                            let at = self.pos;
                            Value::Symbol(self.symbol().to_string(), at)
                        }
                    };
                    self.pending.push(PendingEdge { source: id, role, value, offset: role_offset });
                }
                Some(_) => return Err(self.syntax("expected a role or `)`")),
            }
        }
    }
}

/// Parses a single PENMAN s-expression.
pub fn parse_penman(text: &str) -> Result<AmrGraph, PenmanError> {
    let mut p = Parser { text, bytes: text.as_bytes(), pos: 0, graph: AmrGraph::new(), pending: Vec::new() };
    p.skip_ws();
    match p.peek() {
        Some(b'(') => {}
        Some(b')') => return Err(PenmanError::UnbalancedParens { offset: p.pos }),
        _ => return Err(p.syntax("expected `(`")),
    }
    let root = p.node()?;
    p.skip_ws();
    if let Some(b) = p.peek() {
        return Err(if b == b')' {
            PenmanError::UnbalancedParens { offset: p.pos }
        } else {
            p.syntax("trailing text after the graph")
        });
    }

    let mut graph = p.graph;
    let mut offsets = Vec::with_capacity(p.pending.len());
    for edge in p.pending {
        match edge.value {
            Value::Node(t) => graph.add_relation(edge.source, &edge.role, t),
            Value::Quoted(v) => graph.add_attribute(edge.source, &edge.role, &v),
            Value::Symbol(s, at) => match graph.var_id(&s) {
                Some(t) => graph.add_relation(edge.source, &edge.role, t),
                None if looks_like_var(&s) => {
                    return Err(PenmanError::DanglingReference { var: s, offset: at })
                }
                None => graph.add_attribute(edge.source, &edge.role, &s),
            },
        }
        .expect("endpoints were created by the parser");
        offsets.push(edge.offset);
    }
    graph.set_root(root).expect("root exists");

    let mut adj = vec![Vec::new(); graph.len()];
    let mut edge_at = HashMap::new();
    for (i, e) in graph.edges().iter().enumerate() {
        if let Target::Node(t) = e.target {
            let (s, _, t) = crate::graph::normalize_relation(e.source, &e.role, t);
            adj[s].push(t);
            edge_at.entry((s, t)).or_insert(offsets[i]);
        }
    }
    if let Some(back) = crate::graph::find_back_edge(&adj) {
        return Err(PenmanError::CyclicGraph { offset: edge_at[&back] });
    }
    Ok(graph)
}

fn is_plain_number(v: &str) -> bool {
    let digits = v.trim_start_matches(['-', '+']);
    !digits.is_empty()
        && digits.bytes().any(|b| b.is_ascii_digit())
        && digits.bytes().all(|b| b.is_ascii_digit() || b == b'.')
        && digits.bytes().filter(|&b| b == b'.').count() <= 1
}

fn needs_quotes(value: &str, graph: &AmrGraph) -> bool {
    if value == "-" || value == "+" || is_plain_number(value) {
        return false;
    }
    value.is_empty()
        || !value.chars().all(|c| c.is_alphanumeric())
        || looks_like_var(value)
        || graph.var_id(value).is_some()
}

fn quote(value: &str) -> String {
    let mut out = String::with_capacity(value.len() + 2);
    out.push('"');
    for c in value.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn format_concept(concept: &str) -> String {
    if concept.is_empty() || concept.chars().any(|c| c.is_whitespace() || c == '(' || c == ')' || c == '"') {
        quote(concept)
    } else {
        concept.to_string()
    }
}

/// One item printed under a node.
struct Item {
    role: String,
    target: Target,
    /// Whether this occurrence introduces the target node.
    defines: bool,
}

/// Decides for every node where it is introduced and in which order items
/// are printed. Nodes reachable from the root are introduced at their first
/// occurrence in a depth-first walk over outgoing items sorted by role and
/// target variable; anything else is hung under a neighbour through an
/// inverted role.
fn layout(graph: &AmrGraph) -> Vec<Vec<Item>> {
    let n = graph.len();
    let mut items: Vec<Vec<Item>> = (0..n).map(|_| Vec::new()).collect();
    let mut inverted = vec![false; graph.edges().len()];
    let mut placed = vec![false; n];

    let sort_key = |g: &AmrGraph, role: &str, t: &Target| -> (String, String) {
        let t = match t {
            Target::Node(id) => g.node(*id).var.clone(),
            Target::Const(v) => v.clone(),
        };
        (role.to_string(), t)
    };

    // outgoing edge indices per node, sorted
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, e) in graph.edges().iter().enumerate() {
        out[e.source].push(i);
    }
    for list in &mut out {
        list.sort_by_key(|&i| {
            let e = &graph.edges()[i];
            sort_key(graph, &e.role, &e.target)
        });
    }

    fn place(u: NodeId, graph: &AmrGraph, out: &[Vec<usize>], placed: &mut [bool], defining: &mut Vec<Option<usize>>) {
        placed[u] = true;
        for &i in &out[u] {
            if let Target::Node(v) = graph.edges()[i].target {
                if !placed[v] {
                    defining[v] = Some(i);
                    place(v, graph, out, placed, defining);
                }
            }
        }
    }

    let mut defining: Vec<Option<usize>> = vec![None; n];
    if n == 0 {
        return items;
    }
    place(graph.root(), graph, &out, &mut placed, &mut defining);
    loop {
        // hang an unplaced node under a placed neighbour it points to
        let next = graph.edges().iter().enumerate().find_map(|(i, e)| match e.target {
            Target::Node(t) if !placed[e.source] && placed[t] => Some((i, e.source)),
            _ => None,
        });
        let Some((i, v)) = next else { break };
        inverted[i] = true;
        defining[v] = Some(i);
        place(v, graph, &out, &mut placed, &mut defining);
    }

    for (i, e) in graph.edges().iter().enumerate() {
        if !placed[e.source] {
            continue;
        }
        match e.target {
            Target::Node(t) if inverted[i] => items[t].push(Item {
                role: invert_role(&e.role),
                target: Target::Node(e.source),
                defines: true,
            }),
            Target::Node(t) => items[e.source].push(Item {
                role: e.role.clone(),
                target: Target::Node(t),
                defines: defining[t] == Some(i),
            }),
            Target::Const(ref v) => items[e.source].push(Item {
                role: e.role.clone(),
                target: Target::Const(v.clone()),
                defines: false,
            }),
        }
    }
    for list in &mut items {
        list.sort_by_key(|it| sort_key(graph, &it.role, &it.target));
    }
    items
}

fn write_node(graph: &AmrGraph, items: &[Vec<Item>], id: NodeId, indent: Option<usize>, out: &mut String) {
    let node = graph.node(id);
    out.push('(');
    out.push_str(&node.var);
    out.push_str(" / ");
    out.push_str(&format_concept(&node.concept));
    for item in &items[id] {
        match indent {
            Some(depth) => {
                out.push('\n');
                out.push_str(&" ".repeat(6 * (depth + 1)));
            }
            None => out.push(' '),
        }
        out.push(':');
        out.push_str(&item.role);
        out.push(' ');
        match &item.target {
            Target::Node(t) if item.defines => write_node(graph, items, *t, indent.map(|d| d + 1), out),
            Target::Node(t) => out.push_str(&graph.node(*t).var),
            Target::Const(v) if needs_quotes(v, graph) => out.push_str(&quote(v)),
            Target::Const(v) => out.push_str(v),
        }
    }
    out.push(')');
}

/// Single-line PENMAN rendering.
pub fn serialize_penman(graph: &AmrGraph) -> String {
    let mut out = String::new();
    if !graph.is_empty() {
        let items = layout(graph);
        write_node(graph, &items, graph.root(), None, &mut out);
    }
    out
}

/// Indented PENMAN rendering in the style of the LDC releases.
pub fn serialize_penman_pretty(graph: &AmrGraph) -> String {
    let mut out = String::new();
    if !graph.is_empty() {
        let items = layout(graph);
        write_node(graph, &items, graph.root(), Some(0), &mut out);
    }
    out
}

/// One block of a corpus file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AmrEntry {
    /// `# ::key value` pairs in file order.
    pub metadata: Vec<(String, String)>,
    /// Comment lines that carry no `::` metadata, verbatim.
    pub comments: Vec<String>,
    /// The graph text exactly as it appeared in the file.
    pub text: String,
    pub graph: AmrGraph,
}

impl AmrEntry {
    pub fn new(graph: AmrGraph) -> Self {
        let text = serialize_penman_pretty(&graph);
        AmrEntry { metadata: Vec::new(), comments: Vec::new(), text, graph }
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Replaces the first `key` entry, or appends one.
    pub fn set_meta(&mut self, key: &str, value: &str) {
        match self.metadata.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value.to_string(),
            None => self.metadata.push((key.to_string(), value.to_string())),
        }
    }

    /// Tokens from `# ::tok`, falling back to whitespace-split `# ::snt`.
    pub fn tokens(&self) -> Vec<String> {
        self.meta("tok")
            .or_else(|| self.meta("snt"))
            .map(|s| s.split_whitespace().map(str::to_string).collect())
            .unwrap_or_default()
    }

    /// Sets the graph and re-renders its text.
    pub fn set_graph(&mut self, graph: AmrGraph) {
        self.text = serialize_penman_pretty(&graph);
        self.graph = graph;
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {source}")]
pub struct CorpusError {
    pub line: usize,
    #[source]
    pub source: PenmanError,
}

/// Splits `# ::id x ::snt y` into key/value pairs.
fn parse_metadata(line: &str) -> Vec<(String, String)> {
    let body = line.trim_start_matches('#').trim();
    let mut out = Vec::new();
    for chunk in body.split("::").skip(1) {
        let chunk = chunk.trim();
        if chunk.is_empty() {
            continue;
        }
        let (key, value) = match chunk.split_once(char::is_whitespace) {
            Some((k, v)) => (k, v.trim()),
            None => (chunk, ""),
        };
        out.push((key.to_string(), value.to_string()));
    }
    out
}

/// Reads a corpus of blank-line-separated PENMAN blocks. Errors carry the
/// 1-based line number on which the offending byte sits.
pub fn read_corpus(text: &str) -> Result<Vec<AmrEntry>, CorpusError> {
    let mut entries = Vec::new();
    let mut metadata = Vec::new();
    let mut comments = Vec::new();
    let mut body = String::new();
    let mut body_start = 0;

    let mut flush = |metadata: &mut Vec<(String, String)>,
                     comments: &mut Vec<String>,
                     body: &mut String,
                     body_start: usize|
     -> Result<(), CorpusError> {
        if body.trim().is_empty() {
            metadata.clear();
            comments.clear();
            body.clear();
            return Ok(());
        }
        let graph = parse_penman(body).map_err(|e| {
            let line = body_start + body[..e.offset().min(body.len())].matches('\n').count();
            CorpusError { line, source: e }
        })?;
        entries.push(AmrEntry {
            metadata: std::mem::take(metadata),
            comments: std::mem::take(comments),
            text: body.trim_end().to_string(),
            graph,
        });
        body.clear();
        Ok(())
    };

    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            flush(&mut metadata, &mut comments, &mut body, body_start)?;
        } else if trimmed.starts_with('#') && body.is_empty() {
            if trimmed.contains("::") {
                metadata.extend(parse_metadata(trimmed));
            } else {
                comments.push(line.to_string());
            }
        } else {
            if body.is_empty() {
                body_start = lineno;
            }
            body.push_str(line);
            body.push('\n');
        }
    }
    flush(&mut metadata, &mut comments, &mut body, body_start)?;
    Ok(entries)
}

/// Writes entries back out, one block per entry, preserving each entry's
/// graph text.
pub fn write_corpus(entries: &[AmrEntry]) -> String {
    let mut out = String::new();
    for entry in entries {
        for c in &entry.comments {
            out.push_str(c);
            out.push('\n');
        }
        for (k, v) in &entry.metadata {
            out.push_str("# ::");
            out.push_str(k);
            if !v.is_empty() {
                out.push(' ');
                out.push_str(v);
            }
            out.push('\n');
        }
        out.push_str(&entry.text);
        out.push_str("\n\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_simple_graph() {
        let g = parse_penman("(w / want-01 :ARG0 (b / boy))").unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.node(g.root()).var, "w");
        let rels: Vec<_> = g.relations().collect();
        assert_eq!(rels, vec![(0, "ARG0", 1)]);
    }

    #[test]
    fn reentrancy_is_a_second_edge() {
        let g = parse_penman("(a / and :op1 (b / boy) :op2 b)").unwrap();
        assert_eq!(g.len(), 2);
        let rels: Vec<_> = g.relations().collect();
        assert_eq!(rels, vec![(0, "op1", 1), (0, "op2", 1)]);
    }

    #[test]
    fn forward_reference_resolves() {
        let g = parse_penman("(a / and :op1 b :op2 (b / boy))").unwrap();
        assert_eq!(g.relations().count(), 2);
    }

    #[test]
    fn cycle_is_rejected() {
        let err = parse_penman("(a / x :mod (b / y :mod a))").unwrap_err();
        assert!(matches!(err, PenmanError::CyclicGraph { .. }), "{err:?}");
    }

    #[test]
    fn errors_carry_offsets() {
        assert_eq!(
            parse_penman("(a / x :mod (b / y)").unwrap_err(),
            PenmanError::UnbalancedParens { offset: 0 }
        );
        assert_eq!(
            parse_penman("(a / x))").unwrap_err(),
            PenmanError::UnbalancedParens { offset: 7 }
        );
        assert_eq!(
            parse_penman("(a / x :mod (a / y))").unwrap_err(),
            PenmanError::DuplicateVariable { var: "a".into(), offset: 13 }
        );
        assert_eq!(
            parse_penman("(a / x :ARG0 b2)").unwrap_err(),
            PenmanError::DanglingReference { var: "b2".into(), offset: 13 }
        );
    }

    #[test]
    fn constants() {
        let g = parse_penman(
            r#"(l / like-01 :polarity - :mode imperative :ARG0 (p / person :name (n / name :op1 "Barack" :op2 "Obama")) :quant 5)"#,
        )
        .unwrap();
        let attrs: Vec<_> = g.attributes().collect();
        assert_eq!(
            attrs,
            vec![
                (0, "polarity", "-"),
                (0, "mode", "imperative"),
                (2, "op1", "Barack"),
                (2, "op2", "Obama"),
                (0, "quant", "5"),
            ]
        );
    }

    #[test]
    fn serializes_single_node() {
        let g = parse_penman("(a / apple)").unwrap();
        assert_eq!(serialize_penman(&g), "(a / apple)");
    }

    #[test]
    fn reentrant_node_written_once() {
        let g = parse_penman("(a / and :op1 (b / boy) :op2 b)").unwrap();
        let s = serialize_penman(&g);
        assert_eq!(s.matches("(b / boy)").count(), 1);
        assert_eq!(s, "(a / and :op1 (b / boy) :op2 b)");
    }

    #[test]
    fn quoting_rules() {
        let mut g = AmrGraph::new();
        let n = g.add_fresh_node("name");
        g.add_attribute(n, "op1", "Obama").unwrap();
        g.add_attribute(n, "op2", "U.S.").unwrap();
        g.add_attribute(n, "op3", "b").unwrap();
        g.add_attribute(n, "polarity", "-").unwrap();
        g.add_attribute(n, "quant", "2.5").unwrap();
        g.add_attribute(n, "value", "n").unwrap();
        let s = serialize_penman(&g);
        assert_eq!(s, r#"(n / name :op1 Obama :op2 "U.S." :op3 "b" :polarity - :quant 2.5 :value "n")"#);
        let back = parse_penman(&s).unwrap();
        assert_eq!(back.attributes().count(), 6);
    }

    #[test]
    fn unreachable_nodes_hang_off_inverted_roles() {
        let mut g = AmrGraph::new();
        let w = g.add_fresh_node("want-01");
        let b = g.add_fresh_node("boy");
        g.add_relation(b, "ARG0", w).unwrap();
        g.set_root(w).unwrap();
        let s = serialize_penman(&g);
        assert_eq!(s, "(w / want-01 :ARG0-of (b / boy))");
        let back = parse_penman(&s).unwrap();
        assert_eq!(back.normalized_relations(), g.normalized_relations());
    }

    #[test]
    fn corpus_round_trip() {
        let text = "# a comment\n# ::id s1 ::date today\n# ::snt The boy wants\n(w / want-01\n      :ARG0 (b / boy))\n\n\n# ::id s2\n(a / apple)\n";
        let entries = read_corpus(text).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].meta("id"), Some("s1"));
        assert_eq!(entries[0].meta("date"), Some("today"));
        assert_eq!(entries[0].tokens(), vec!["The", "boy", "wants"]);
        assert_eq!(entries[0].comments, vec!["# a comment"]);
        let again = read_corpus(&write_corpus(&entries)).unwrap();
        assert_eq!(again, entries);
    }

    #[test]
    fn corpus_error_line_numbers() {
        let text = "(a / apple)\n\n# ::id s2\n(b / x\n   :mod (c / y :mod b))\n";
        let err = read_corpus(text).unwrap_err();
        assert_eq!(err.line, 5);
        assert!(matches!(err.source, PenmanError::CyclicGraph { .. }));
    }
}
