//! String vocabularies for inputs and output labels.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use stackamr_core::transition::{ActionKind, Label, LabelKind, Transition};

pub const UNK: &str = "<unk>";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    items: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(items: Vec<String>) -> Self {
        let index = items.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Vocab { items, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.items
    }
}

impl Vocab {
    /// Entries seen at least `min_count` times, sorted, optionally after
    /// a leading unknown entry.
    pub fn build<'a>(words: impl IntoIterator<Item = &'a str>, min_count: usize, with_unk: bool) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for w in words {
            *counts.entry(w).or_insert(0) += 1;
        }
        let mut items: Vec<String> =
            counts.into_iter().filter(|&(w, c)| c >= min_count && w != UNK).map(|(w, _)| w.to_string()).collect();
        items.sort();
        if with_unk {
            items.insert(0, UNK.to_string());
        }
        items.into()
    }

    pub fn get(&self, s: &str) -> Option<usize> {
        self.index.get(s).copied()
    }

    /// Index of `s`, or of the unknown entry (0).
    pub fn get_or_unk(&self, s: &str) -> usize {
        self.get(s).unwrap_or(0)
    }

    pub fn item(&self, i: usize) -> &str {
        &self.items[i]
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    /// One entry per line.
    pub fn to_text(&self) -> String {
        self.items.iter().map(|s| format!("{s}\n")).collect()
    }
}

/// All vocabularies a model needs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabs {
    pub words: Vocab,
    pub tags: Vec<Vocab>,
    pub concepts: Vocab,
    pub entities: Vocab,
    pub leaves: Vocab,
    pub roles: Vocab,
}

impl Vocabs {
    pub fn labels(&self, kind: LabelKind) -> &Vocab {
        match kind {
            LabelKind::Concept => &self.concepts,
            LabelKind::EntityType => &self.entities,
            LabelKind::Leaf => &self.leaves,
            LabelKind::Role => &self.roles,
        }
    }

    /// Vocabulary index of a transition's label.
    pub fn label_index(&self, t: &Transition) -> Option<usize> {
        let kind = t.kind.label_kind()?;
        self.labels(kind).get(&t.label.payload()?)
    }

    /// The transition for action `kind` with label number `index`.
    pub fn transition(&self, kind: ActionKind, index: Option<usize>) -> Transition {
        match (kind.label_kind(), index) {
            (Some(k), Some(i)) => {
                Transition::with_payload(kind, self.labels(k).item(i)).expect("vocabulary labels are well formed")
            }
            _ => Transition::new(kind, Label::None),
        }
    }

    /// Builds label vocabularies from oracle sequences.
    pub fn add_labels<'a>(&mut self, sequences: impl IntoIterator<Item = &'a [Transition]>) {
        let mut per: [Vec<String>; 4] = Default::default();
        for seq in sequences {
            for t in seq {
                if let (Some(k), Some(p)) = (t.kind.label_kind(), t.label.payload()) {
                    per[k as usize].push(p);
                }
            }
        }
        let build = |v: &Vec<String>| Vocab::build(v.iter().map(String::as_str), 1, false);
        self.concepts = build(&per[LabelKind::Concept as usize]);
        self.entities = build(&per[LabelKind::EntityType as usize]);
        self.leaves = build(&per[LabelKind::Leaf as usize]);
        self.roles = build(&per[LabelKind::Role as usize]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds_and_unknown() {
        let v = Vocab::build(["a", "b", "a", "c", "a", "b"], 2, true);
        assert_eq!(v.items(), [UNK, "a", "b"]);
        assert_eq!(v.get_or_unk("c"), 0);
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(serde_json::from_str::<Vocab>(&json).unwrap(), v);
    }

    #[test]
    fn label_lookup() {
        let seq: Vec<Transition> =
            ["SHIFT", "CONFIRM:boy", "DEPENDENT:polarity=-", "LEFT-ARC:ARG0"].iter().map(|s| s.parse().unwrap()).collect();
        let mut v = Vocabs::default();
        v.add_labels([seq.as_slice()]);
        assert_eq!(v.label_index(&seq[1]), Some(0));
        assert_eq!(v.label_index(&seq[0]), None);
        assert_eq!(v.transition(ActionKind::Dependent, Some(0)), seq[2]);
    }
}
