//! Smatch: triple-overlap F1 under the best variable mapping.
//!
//! [`smatch_hill_climb`] is the scorer used everywhere; [`smatch_exact`]
//! enumerates every partial injection and exists to check it.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::triples::TripleSet;

/// Largest side [`smatch_exact`] will enumerate.
pub const EXACT_LIMIT: usize = 8;

/// Default restart count for hill climbing.
pub const DEFAULT_RESTARTS: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SmatchError {
    #[error("exact search needs one side with at most {EXACT_LIMIT} variables, got {pred} and {gold}")]
    TooLarge { pred: usize, gold: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MappingResult {
    /// `mapping[p]` is the gold variable matched to predicted variable `p`.
    pub mapping: Vec<Option<usize>>,
    pub matched: usize,
    pub pred_total: usize,
    pub gold_total: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1 from raw counts. F1 is 0 when P + R = 0.
pub fn prf(matched: usize, pred_total: usize, gold_total: usize) -> (f64, f64, f64) {
    let p = if pred_total == 0 { 0.0 } else { matched as f64 / pred_total as f64 };
    let r = if gold_total == 0 { 0.0 } else { matched as f64 / gold_total as f64 };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

impl MappingResult {
    fn new(mapping: Vec<Option<usize>>, matched: usize, pred_total: usize, gold_total: usize) -> Self {
        let (precision, recall, f1) = prf(matched, pred_total, gold_total);
        MappingResult { mapping, matched, pred_total, gold_total, precision, recall, f1 }
    }
}

/// Integer-coded weights for fast rescoring of candidate mappings.
struct Weights {
    /// `node_gain[p][g]`: instance and attribute triples matched by p -> g.
    node_gain: Vec<Vec<u32>>,
    /// Predicted relations as (p1, role id, p2).
    pred_rel: Vec<(usize, u32, usize)>,
    gold_rel: HashSet<(usize, u32, usize)>,
    /// Predicted relation indices incident to each predicted variable.
    incident: Vec<Vec<usize>>,
    /// Gold variables each predicted variable could match something with:
    /// a shared concept or attribute, or a relation with the same role in
    /// the same position. Ascending.
    candidates: Vec<Vec<usize>>,
    n_gold: usize,
}

impl Weights {
    fn new(pred: &TripleSet, gold: &TripleSet) -> Self {
        let n_pred = pred.vars.len();
        let n_gold = gold.vars.len();
        let mut node_gain = vec![vec![0u32; n_gold]; n_pred];

        let mut by_concept: HashMap<&str, Vec<usize>> = HashMap::new();
        for (g, c) in &gold.instances {
            by_concept.entry(c.as_str()).or_default().push(*g);
        }
        for (p, c) in &pred.instances {
            for &g in by_concept.get(c.as_str()).into_iter().flatten() {
                node_gain[*p][g] += 1;
            }
        }
        let mut by_attr: HashMap<(&str, &str), Vec<usize>> = HashMap::new();
        for (g, r, v) in &gold.attributes {
            by_attr.entry((r.as_str(), v.as_str())).or_default().push(*g);
        }
        for (p, r, v) in &pred.attributes {
            for &g in by_attr.get(&(r.as_str(), v.as_str())).into_iter().flatten() {
                node_gain[*p][g] += 1;
            }
        }

        let mut roles: HashMap<String, u32> = HashMap::new();
        let mut role_id = |r: &str| -> u32 {
            let next = roles.len() as u32;
            *roles.entry(r.to_string()).or_insert(next)
        };
        let gold_rel = gold.relations.iter().map(|(a, r, b)| (*a, role_id(r), *b)).collect();
        let pred_rel: Vec<_> = pred.relations.iter().map(|(a, r, b)| (*a, role_id(r), *b)).collect();

        let mut incident = vec![Vec::new(); n_pred];
        for (i, &(a, _, b)) in pred_rel.iter().enumerate() {
            incident[a].push(i);
            if b != a {
                incident[b].push(i);
            }
        }
        let mut cand: Vec<HashSet<usize>> =
            node_gain.iter().map(|row| (0..n_gold).filter(|&g| row[g] > 0).collect()).collect();
        let mut gold_by_role: HashMap<u32, Vec<(usize, usize)>> = HashMap::new();
        for &(a, r, b) in &gold_rel {
            gold_by_role.entry(r).or_default().push((a, b));
        }
        for &(a, r, b) in &pred_rel {
            for &(ga, gb) in gold_by_role.get(&r).into_iter().flatten() {
                cand[a].insert(ga);
                cand[b].insert(gb);
            }
        }
        let candidates = cand
            .into_iter()
            .map(|c| {
                let mut v: Vec<usize> = c.into_iter().collect();
                v.sort_unstable();
                v
            })
            .collect();
        Weights { node_gain, pred_rel, gold_rel, incident, candidates, n_gold }
    }

    fn rel_match(&self, i: usize, mapping: &[Option<usize>]) -> u32 {
        let (a, r, b) = self.pred_rel[i];
        match (mapping[a], mapping[b]) {
            (Some(ga), Some(gb)) => self.gold_rel.contains(&(ga, r, gb)) as u32,
            _ => 0,
        }
    }

    fn node_term(&self, p: usize, mapping: &[Option<usize>]) -> u32 {
        mapping[p].map_or(0, |g| self.node_gain[p][g])
    }

    fn score(&self, mapping: &[Option<usize>]) -> u32 {
        let nodes: u32 = (0..mapping.len()).map(|p| self.node_term(p, mapping)).sum();
        let rels: u32 = (0..self.pred_rel.len()).map(|i| self.rel_match(i, mapping)).sum();
        nodes + rels
    }

    /// Score contribution of everything touching the variables in `vars`.
    fn local(&self, vars: &[usize], mapping: &[Option<usize>]) -> u32 {
        let mut total: u32 = vars.iter().map(|&p| self.node_term(p, mapping)).sum();
        let mut seen: Vec<usize> = Vec::new();
        for &p in vars {
            for &i in &self.incident[p] {
                if !seen.contains(&i) {
                    seen.push(i);
                    total += self.rel_match(i, mapping);
                }
            }
        }
        total
    }
}

/// Best-gain hill climbing from `mapping` until no move improves the score.
/// Moves are: remap one variable to an unused gold variable (or to nothing),
/// or swap the targets of two variables. Ties go to the lowest predicted
/// variable index.
fn climb(w: &Weights, mapping: &mut [Option<usize>]) -> u32 {
    let n = mapping.len();
    let mut score = w.score(mapping);
    loop {
        let mut used = vec![false; w.n_gold];
        for g in mapping.iter().flatten() {
            used[*g] = true;
        }
        let mut best_gain = 0i64;
        let mut best_move: Option<(usize, usize, Option<usize>)> = None; // (p, q or usize::MAX, target)
        for p in 0..n {
            let before = w.local(&[p], mapping) as i64;
            let current = mapping[p];
            let targets = (0..w.n_gold).filter(|&g| !used[g]).map(Some).chain(std::iter::once(None));
            for t in targets {
                if t == current {
                    continue;
                }
                mapping[p] = t;
                let gain = w.local(&[p], mapping) as i64 - before;
                if gain > best_gain {
                    best_gain = gain;
                    best_move = Some((p, usize::MAX, t));
                }
            }
            mapping[p] = current;
            for q in p + 1..n {
                if mapping[p] == mapping[q] {
                    continue;
                }
                let before = w.local(&[p, q], mapping) as i64;
                mapping.swap(p, q);
                let gain = w.local(&[p, q], mapping) as i64 - before;
                mapping.swap(p, q);
                if gain > best_gain {
                    best_gain = gain;
                    best_move = Some((p, q, None));
                }
            }
        }
        match best_move {
            None => return score,
            Some((p, usize::MAX, t)) => mapping[p] = t,
            Some((p, q, _)) => mapping.swap(p, q),
        }
        score += best_gain as u32;
    }
}

fn greedy_init(w: &Weights, n_pred: usize) -> Vec<Option<usize>> {
    let mut used = vec![false; w.n_gold];
    let mut mapping = vec![None; n_pred];
    for (p, slot) in mapping.iter_mut().enumerate() {
        let mut best: Option<(u32, usize)> = None;
        for g in (0..w.n_gold).filter(|&g| !used[g]) {
            let gain = w.node_gain[p][g];
            if gain > 0 && best.is_none_or(|(b, _)| gain > b) {
                best = Some((gain, g));
            }
        }
        if let Some((_, g)) = best {
            used[g] = true;
            *slot = Some(g);
        }
    }
    // Variables without a concept match take their first free candidate.
    for (p, slot) in mapping.iter_mut().enumerate() {
        if slot.is_none() {
            if let Some(&g) = w.candidates[p].iter().find(|&&g| !used[g]) {
                used[g] = true;
                *slot = Some(g);
            }
        }
    }
    mapping
}

fn random_init(w: &Weights, n_pred: usize, rng: &mut impl Rng) -> Vec<Option<usize>> {
    let mut used = vec![false; w.n_gold];
    let mut mapping = vec![None; n_pred];
    let mut order: Vec<usize> = (0..n_pred).collect();
    order.shuffle(rng);
    for p in order {
        let candidates: Vec<usize> = w.candidates[p].iter().copied().filter(|&g| !used[g]).collect();
        if let Some(&g) = candidates.choose(rng) {
            used[g] = true;
            mapping[p] = Some(g);
        }
    }
    mapping
}

/// Smatch by random-restart hill climbing. The first restart starts from a
/// greedy concept match, the rest from random candidate matches drawn from
/// one seeded stream, so more restarts never lower the result.
///
/// # Panics
/// If `restarts` is zero.
pub fn smatch_hill_climb(pred: &TripleSet, gold: &TripleSet, restarts: usize, seed: u64) -> MappingResult {
    assert!(restarts >= 1, "at least one restart is required");
    let w = Weights::new(pred, gold);
    let n = pred.vars.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_map = vec![None; n];
    let mut best = 0u32;
    for r in 0..restarts {
        let mut mapping = if r == 0 { greedy_init(&w, n) } else { random_init(&w, n, &mut rng) };
        let score = climb(&w, &mut mapping);
        if r == 0 || score > best {
            best = score;
            best_map = mapping;
        }
    }
    MappingResult::new(best_map, best as usize, pred.len(), gold.len())
}

/// Direct triple-by-triple matcher used by the exhaustive search.
struct DirectMatcher<'a> {
    small: &'a TripleSet,
    gold_instances: HashSet<(usize, &'a str)>,
    gold_relations: HashSet<(usize, &'a str, usize)>,
    gold_attributes: HashSet<(usize, &'a str, &'a str)>,
    /// Triples of `small` grouped by the highest variable they mention.
    instances_at: Vec<Vec<usize>>,
    relations_at: Vec<Vec<usize>>,
    attributes_at: Vec<Vec<usize>>,
    /// Number of triples determined after assigning vars 0..=k.
    remaining_after: Vec<usize>,
}

impl<'a> DirectMatcher<'a> {
    fn new(small: &'a TripleSet, large: &'a TripleSet) -> Self {
        let n = small.vars.len();
        let mut instances_at = vec![Vec::new(); n];
        for (i, (v, _)) in small.instances.iter().enumerate() {
            instances_at[*v].push(i);
        }
        let mut relations_at = vec![Vec::new(); n];
        for (i, (a, _, b)) in small.relations.iter().enumerate() {
            relations_at[(*a).max(*b)].push(i);
        }
        let mut attributes_at = vec![Vec::new(); n];
        for (i, (v, _, _)) in small.attributes.iter().enumerate() {
            attributes_at[*v].push(i);
        }
        let mut remaining_after = vec![0; n + 1];
        for k in (0..n).rev() {
            remaining_after[k] = remaining_after[k + 1]
                + instances_at[k].len()
                + relations_at[k].len()
                + attributes_at[k].len();
        }
        DirectMatcher {
            small,
            gold_instances: large.instances.iter().map(|(v, c)| (*v, c.as_str())).collect(),
            gold_relations: large.relations.iter().map(|(a, r, b)| (*a, r.as_str(), *b)).collect(),
            gold_attributes: large.attributes.iter().map(|(v, r, x)| (*v, r.as_str(), x.as_str())).collect(),
            instances_at,
            relations_at,
            attributes_at,
            remaining_after,
        }
    }

    /// Matches among the triples that become fully determined once var `k`
    /// is assigned.
    fn matches_at(&self, k: usize, mapping: &[Option<usize>]) -> usize {
        let Some(gk) = mapping[k] else { return 0 };
        let mut count = 0;
        for &i in &self.instances_at[k] {
            count += self.gold_instances.contains(&(gk, self.small.instances[i].1.as_str())) as usize;
        }
        for &i in &self.attributes_at[k] {
            let (_, r, x) = &self.small.attributes[i];
            count += self.gold_attributes.contains(&(gk, r.as_str(), x.as_str())) as usize;
        }
        for &i in &self.relations_at[k] {
            let (a, r, b) = &self.small.relations[i];
            if let (Some(ga), Some(gb)) = (mapping[*a], mapping[*b]) {
                count += self.gold_relations.contains(&(ga, r.as_str(), gb)) as usize;
            }
        }
        count
    }

    fn search(
        &self,
        k: usize,
        mapping: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        so_far: usize,
        best: &mut (usize, Vec<Option<usize>>),
    ) {
        if k == mapping.len() {
            if so_far > best.0 {
                *best = (so_far, mapping.clone());
            }
            return;
        }
        if so_far + self.remaining_after[k] <= best.0 {
            return;
        }
        for g in 0..used.len() {
            if used[g] {
                continue;
            }
            used[g] = true;
            mapping[k] = Some(g);
            let gained = self.matches_at(k, mapping);
            self.search(k + 1, mapping, used, so_far + gained, best);
            used[g] = false;
        }
        mapping[k] = None;
        self.search(k + 1, mapping, used, so_far, best);
    }
}

/// Globally optimal Smatch by enumerating every partial injection from the
/// smaller variable set into the larger one.
pub fn smatch_exact(pred: &TripleSet, gold: &TripleSet) -> Result<MappingResult, SmatchError> {
    let (np, ng) = (pred.vars.len(), gold.vars.len());
    if np.min(ng) > EXACT_LIMIT {
        return Err(SmatchError::TooLarge { pred: np, gold: ng });
    }
    let swapped = np > ng;
    let (small, large) = if swapped { (gold, pred) } else { (pred, gold) };
    let matcher = DirectMatcher::new(small, large);
    let mut mapping = vec![None; small.vars.len()];
    let mut used = vec![false; large.vars.len()];
    let mut best = (0usize, vec![None; small.vars.len()]);
    matcher.search(0, &mut mapping, &mut used, 0, &mut best);
    let (matched, small_map) = best;
    let mapping = if swapped {
        let mut inverse = vec![None; np];
        for (g, p) in small_map.iter().enumerate() {
            if let Some(p) = p {
                inverse[*p] = Some(g);
            }
        }
        inverse
    } else {
        small_map
    };
    Ok(MappingResult::new(mapping, matched, pred.len(), gold.len()))
}
