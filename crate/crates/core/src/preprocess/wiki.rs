//! Dictionary wikification of named entities.

use std::collections::{BTreeMap, HashMap};

use crate::graph::{AmrGraph, NodeId, Target};

/// Link used when nothing is known about a name.
pub const NO_LINK: &str = "-";

/// The `:opN` strings of `node`'s `:name` child, in `N` order, joined by
/// single spaces.
pub fn name_string(graph: &AmrGraph, node: NodeId) -> Option<String> {
    let name = graph.outgoing(node).find_map(|e| match e.target {
        Target::Node(t) if e.role == "name" => Some(t),
        _ => None,
    })?;
    let mut ops: Vec<(usize, &str)> = graph
        .attributes()
        .filter(|&(s, _, _)| s == name)
        .filter_map(|(_, r, v)| Some((r.strip_prefix("op")?.parse().ok()?, v)))
        .collect();
    if ops.is_empty() {
        return None;
    }
    ops.sort();
    Some(ops.iter().map(|(_, v)| *v).collect::<Vec<_>>().join(" "))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WikiDictionary {
    counts: BTreeMap<String, BTreeMap<String, usize>>,
}

impl WikiDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Counts every (name, `:wiki`) pair in the graphs.
    pub fn from_graphs<'a>(graphs: impl IntoIterator<Item = &'a AmrGraph>) -> Self {
        let mut d = Self::new();
        for g in graphs {
            for (s, r, v) in g.attributes() {
                if r == "wiki" {
                    if let Some(name) = name_string(g, s) {
                        d.add(&name, v, 1);
                    }
                }
            }
        }
        d
    }

    pub fn add(&mut self, name: &str, link: &str, count: usize) {
        *self.counts.entry(name.to_string()).or_default().entry(link.to_string()).or_insert(0) += count;
    }

    /// Most frequent link for `name`; ties go to the lexicographically
    /// smallest.
    pub fn lookup(&self, name: &str) -> Option<&str> {
        let links = self.counts.get(name)?;
        // BTreeMap iterates in ascending key order, so keeping the first
        // maximum breaks ties lexicographically
        let mut best: Option<(&String, usize)> = None;
        for (l, &c) in links {
            if best.is_none_or(|(_, bc)| c > bc) {
                best = Some((l, c));
            }
        }
        best.map(|(l, _)| l.as_str())
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// `name<TAB>link<TAB>count` lines for every candidate.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (n, links) in &self.counts {
            for (l, c) in links {
                out.push_str(&format!("{n}\t{l}\t{c}\n"));
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, usize> {
        let mut d = Self::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            let [n, l, c] = parts[..] else { return Err(i + 1) };
            d.add(n, l, c.parse().map_err(|_| i + 1)?);
        }
        Ok(d)
    }
}

/// Removes every `:wiki` attribute.
pub fn strip_wiki(graph: &AmrGraph) -> AmrGraph {
    let mut g = graph.clone();
    g.retain_edges(|e| !(e.role == "wiki" && e.is_attribute()));
    g
}

/// Gives every node with a `:name` and no `:wiki` a link: from the
/// dictionary if it knows the name, else from the linker output, else `-`.
pub fn wikify(graph: &AmrGraph, dict: &WikiDictionary, linker: Option<&HashMap<String, String>>) -> AmrGraph {
    let mut g = graph.clone();
    for node in 0..graph.len() {
        let has_name = graph.relations().any(|(s, r, _)| s == node && r == "name");
        let has_wiki = graph.attributes().any(|(s, r, _)| s == node && r == "wiki");
        if !has_name || has_wiki {
            continue;
        }
        let name = name_string(graph, node);
        let link = name
            .as_deref()
            .and_then(|n| dict.lookup(n).or_else(|| linker.and_then(|m| m.get(n)).map(String::as_str)))
            .unwrap_or(NO_LINK)
            .to_string();
        g.add_attribute(node, "wiki", &link).expect("node exists");
    }
    g
}

/// Reads linker output: `name<TAB>link` lines.
pub fn read_linker_output(text: &str) -> Result<HashMap<String, String>, usize> {
    let mut m = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (n, l) = line.split_once('\t').ok_or(i + 1)?;
        m.insert(n.to_string(), l.to_string());
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::penman::parse_penman;

    fn wiki_of(g: &AmrGraph) -> Vec<String> {
        g.attributes().filter(|(_, r, _)| *r == "wiki").map(|(_, _, v)| v.to_string()).collect()
    }

    #[test]
    fn precedence() {
        let g = |n: &str| parse_penman(&format!(r#"(p / person :name (n / name :op1 "{n}"))"#)).unwrap();
        let mut dict = WikiDictionary::new();
        dict.add("Obama", "Barack_Obama", 3);
        let linker: HashMap<String, String> =
            [("Obama", "Obama_(band)"), ("Merkel", "Angela_Merkel")].iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        assert_eq!(wiki_of(&wikify(&g("Obama"), &dict, Some(&linker))), ["Barack_Obama"]);
        assert_eq!(wiki_of(&wikify(&g("Merkel"), &dict, Some(&linker))), ["Angela_Merkel"]);
        assert_eq!(wiki_of(&wikify(&g("Nobody"), &dict, Some(&linker))), ["-"]);
    }

    #[test]
    fn most_frequent_then_lexicographic() {
        let mut d = WikiDictionary::new();
        d.add("Paris", "Paris_Hilton", 1);
        d.add("Paris", "Paris", 2);
        assert_eq!(d.lookup("Paris"), Some("Paris"));
        d.add("Paris", "Paris_Hilton", 1);
        assert_eq!(d.lookup("Paris"), Some("Paris"));
        d.add("Paris", "Paris_Hilton", 1);
        assert_eq!(d.lookup("Paris"), Some("Paris_Hilton"));
        assert_eq!(WikiDictionary::from_text(&d.to_text()).unwrap(), d);
    }

    #[test]
    fn built_from_graphs() {
        let g = parse_penman(
            r#"(a / and :op1 (p / person :wiki "Barack_Obama" :name (n / name :op1 "Barack" :op2 "Obama")) :op2 (c / city :wiki "Paris" :name (m / name :op1 "Paris")))"#,
        )
        .unwrap();
        let d = WikiDictionary::from_graphs([&g]);
        assert_eq!(d.lookup("Barack Obama"), Some("Barack_Obama"));
        assert_eq!(d.lookup("Paris"), Some("Paris"));
        let stripped = strip_wiki(&g);
        assert!(wiki_of(&stripped).is_empty());
        assert_eq!(wiki_of(&wikify(&stripped, &d, None)), ["Barack_Obama", "Paris"]);
    }
}
