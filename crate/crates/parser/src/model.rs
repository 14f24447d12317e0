//! The parser network: token encoding, Stack-LSTM state, attention fusion
//! and the action and label heads.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use stackamr_autodiff::{AdError, CheckpointError, Init, Lstm, ParamId, ParamStore, StackLstm, StackLstmRun, Tape, Var};
use stackamr_core::transition::{ActionKind, LabelKind, ParserState, Transition};

use crate::config::ModelConfig;
use crate::data::SentenceInput;
use crate::vocab::Vocabs;

const CHECKPOINT_MAGIC: &str = "stackamr-checkpoint 1";

const LABEL_KINDS: [LabelKind; 4] = [LabelKind::Concept, LabelKind::EntityType, LabelKind::Leaf, LabelKind::Role];

#[derive(Debug, Clone, Copy)]
struct Affine {
    w: ParamId,
    b: ParamId,
}

impl Affine {
    fn new(store: &mut ParamStore, name: &str, out: usize, input: usize, rng: &mut ChaCha8Rng) -> Self {
        let w = store.add(&format!("{name}.w"), &[out, input], Init::Glorot, rng);
        let b = store.add(&format!("{name}.b"), &[out], Init::Zeros, rng);
        Affine { w, b }
    }

    fn apply(&self, tape: &mut Tape, x: Var) -> Result<Var, AdError> {
        tape.affine(self.w, self.b, x)
    }
}

/// Attention and fusion weights. None of them carry a bias.
#[derive(Debug, Clone, Copy)]
pub struct AttentionParams {
    pub w_a: ParamId,
    pub w1_dec: ParamId,
    pub w1_att: ParamId,
    pub w2_dec: ParamId,
    pub w2_att: ParamId,
}

#[derive(Debug, Clone)]
struct Params {
    word_emb: ParamId,
    tag_emb: Vec<ParamId>,
    input: Affine,
    encoder: Option<(Lstm, Lstm)>,
    stack: StackLstm,
    buffer: StackLstm,
    history: StackLstm,
    action_emb: ParamId,
    /// Row 0 stands for "no label"; the four label vocabularies follow.
    label_emb: ParamId,
    node: Affine,
    merge: Affine,
    arc: Affine,
    dep: Affine,
    attention: Option<AttentionParams>,
    state: Affine,
    action_out: Affine,
    label_out: [Option<Affine>; 4],
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Ad(#[from] AdError),
    #[error("no item representation for item {0}")]
    MissingItem(usize),
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a parser checkpoint")]
    Magic,
    #[error("bad checkpoint header: {0}")]
    Header(#[from] serde_json::Error),
    #[error(transparent)]
    Params(#[from] CheckpointError),
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    vocabs: Vocabs,
}

/// Parameters plus the vocabularies and dimensions they were built for.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub vocabs: Vocabs,
    pub store: ParamStore,
    p: Params,
}

impl Model {
    pub fn new(config: ModelConfig, vocabs: Vocabs, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let c = &config;
        let emb = Init::Uniform(0.1);
        let word_emb = store.add("word_emb", &[vocabs.words.len().max(1), c.word_dim], emb, &mut rng);
        let tag_emb = c
            .tag_channels
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let rows = vocabs.tags.get(i).map_or(1, |v| v.len().max(1));
                store.add(&format!("tag_emb.{name}"), &[rows, c.tag_dim], emb, &mut rng)
            })
            .collect();
        let in_width = c.word_dim + c.contextual_dim.unwrap_or(0) + c.tag_channels.len() * c.tag_dim;
        let input = Affine::new(&mut store, "input", c.input_dim, in_width, &mut rng);
        let h = c.hidden_dim;
        let encoder = c.attention.then(|| {
            (
                Lstm::new(&mut store, "encoder.fwd", c.input_dim, h, &mut rng),
                Lstm::new(&mut store, "encoder.bwd", c.input_dim, h, &mut rng),
            )
        });
        let stack = StackLstm::new(&mut store, "stack", c.input_dim, h, &mut rng);
        let buffer = StackLstm::new(&mut store, "buffer", c.input_dim, h, &mut rng);
        let history = StackLstm::new(&mut store, "history", c.action_dim + c.label_dim, h, &mut rng);
        let action_emb = store.add("action_emb", &[ActionKind::COUNT, c.action_dim], emb, &mut rng);
        let n_labels = 1 + LABEL_KINDS.iter().map(|&k| vocabs.labels(k).len()).sum::<usize>();
        let label_emb = store.add("label_emb", &[n_labels, c.label_dim], emb, &mut rng);
        let node = Affine::new(&mut store, "node", c.input_dim, c.input_dim + c.label_dim, &mut rng);
        let merge = Affine::new(&mut store, "merge", c.input_dim, 2 * c.input_dim, &mut rng);
        let arc = Affine::new(&mut store, "arc", c.input_dim, 2 * c.input_dim + c.label_dim, &mut rng);
        let dep = Affine::new(&mut store, "dep", c.input_dim, c.input_dim + c.label_dim, &mut rng);
        let attention = c.attention.then(|| {
            let mut m = |name: &str| store.add(name, &[h, 2 * h], Init::Glorot, &mut rng);
            AttentionParams {
                w_a: m("att.w_a"),
                w1_dec: m("att.w1_dec"),
                w1_att: m("att.w1_att"),
                w2_dec: m("att.w2_dec"),
                w2_att: m("att.w2_att"),
            }
        });
        let state_in = if c.attention { 4 * h } else { 3 * h };
        let state = Affine::new(&mut store, "state", h, state_in, &mut rng);
        let action_out = Affine::new(&mut store, "out.action", ActionKind::COUNT, h, &mut rng);
        let label_out = LABEL_KINDS.map(|k| {
            let n = vocabs.labels(k).len();
            (n > 0).then(|| Affine::new(&mut store, &format!("out.{}", label_kind_name(k)), n, h, &mut rng))
        });
        let p = Params {
            word_emb,
            tag_emb,
            input,
            encoder,
            stack,
            buffer,
            history,
            action_emb,
            label_emb,
            node,
            merge,
            arc,
            dep,
            attention,
            state,
            action_out,
            label_out,
        };
        Model { config, vocabs, store, p }
    }

    pub fn attention_params(&self) -> Option<AttentionParams> {
        self.p.attention
    }

    /// `(W, d)` of the state layer.
    pub fn state_params(&self) -> (ParamId, ParamId) {
        (self.p.state.w, self.p.state.b)
    }

    /// Whether action `kind` can be predicted at all (labelled actions need
    /// a non-empty label vocabulary).
    pub fn can_predict(&self, kind: ActionKind) -> bool {
        kind.label_kind().is_none_or(|k| !self.vocabs.labels(k).is_empty())
    }

    /// Legal, predictable actions as a mask over [`ActionKind::ALL`].
    pub fn action_mask(&self, state: &ParserState) -> [bool; ActionKind::COUNT] {
        ActionKind::ALL.map(|k| state.is_legal(k) && self.can_predict(k))
    }

    fn label_row(&self, t: &Transition) -> usize {
        let Some(kind) = t.kind.label_kind() else { return 0 };
        let Some(i) = self.vocabs.label_index(t) else { return 0 };
        1 + LABEL_KINDS.iter().take_while(|&&k| k != kind).map(|&k| self.vocabs.labels(k).len()).sum::<usize>() + i
    }

    /// Writes header and parameters. Reloading gives bit-identical weights.
    pub fn save(&self, mut w: impl Write) -> std::io::Result<()> {
        let header = Header { config: self.config.clone(), vocabs: self.vocabs.clone() };
        writeln!(w, "{CHECKPOINT_MAGIC}")?;
        writeln!(w, "{}", serde_json::to_string(&header).expect("header serializes"))?;
        w.write_all(self.store.to_text().as_bytes())
    }

    pub fn load(r: impl BufRead) -> Result<Self, LoadError> {
        let mut lines = r.lines();
        if lines.next().transpose()?.as_deref() != Some(CHECKPOINT_MAGIC) {
            return Err(LoadError::Magic);
        }
        let header: Header = serde_json::from_str(&lines.next().transpose()?.unwrap_or_default())?;
        let rest = lines.collect::<Result<Vec<_>, _>>()?.join("\n");
        let mut model = Model::new(header.config, header.vocabs, 0);
        model.store.load_text(&rest, 3)?;
        Ok(model)
    }
}

fn label_kind_name(k: LabelKind) -> &'static str {
    match k {
        LabelKind::Concept => "concept",
        LabelKind::EntityType => "entity",
        LabelKind::Leaf => "leaf",
        LabelKind::Role => "role",
    }
}

/// Attention over encoder outputs: `e_i = qᵀ W_a h_i`, `α = softmax(e)`,
/// `c = Σ α_i h_i`. Returns `(α, c)`.
pub fn attend(tape: &mut Tape, w_a: ParamId, query: Var, encoded: &[Var]) -> Result<(Var, Var), AdError> {
    let keys = encoded.iter().map(|&h| tape.matvec(w_a, h)).collect::<Result<Vec<_>, _>>()?;
    attend_keys(tape, query, &keys, encoded)
}

fn attend_keys(tape: &mut Tape, query: Var, keys: &[Var], encoded: &[Var]) -> Result<(Var, Var), AdError> {
    let scores = keys.iter().map(|&k| tape.dot(query, k)).collect::<Result<Vec<_>, _>>()?;
    let e = tape.concat(&scores);
    let alpha = tape.softmax(e);
    let c = tape.weighted_sum(alpha, encoded)?;
    Ok((alpha, c))
}

/// Intermediate vectors of one state computation.
#[derive(Debug, Clone, Copy)]
pub struct StateParts {
    pub stack: Var,
    pub buffer: Var,
    pub history: Var,
    pub alpha: Option<Var>,
    pub context: Option<Var>,
    pub fused: Option<Var>,
    pub state: Var,
}

/// One sentence being parsed: token vectors, the three Stack-LSTM runs and
/// the current vector of every stack or buffer item.
#[derive(Debug, Clone)]
pub struct Session<'m> {
    model: &'m Model,
    encoded: Vec<Var>,
    keys: Vec<Var>,
    stack: StackLstmRun,
    buffer: StackLstmRun,
    history: StackLstmRun,
    reps: HashMap<usize, Var>,
}

impl<'m> Session<'m> {
    /// Encodes `input` and loads the buffer for a fresh `state`.
    pub fn new(model: &'m Model, tape: &mut Tape, input: &SentenceInput, state: &ParserState) -> Result<Self, ModelError> {
        let c = &model.config;
        let p = &model.p;
        let mut tokens = Vec::with_capacity(input.tokens.len());
        for (i, w) in input.tokens.iter().enumerate() {
            let mut parts = vec![tape.lookup(p.word_emb, model.vocabs.words.get_or_unk(w))?];
            if let Some(dim) = c.contextual_dim {
                let v = input.contextual.as_ref().and_then(|vs| vs.get(i)).filter(|v| v.len() == dim);
                parts.push(tape.input(v.cloned().unwrap_or_else(|| vec![0.0; dim])));
            }
            for (ch, &emb) in p.tag_emb.iter().enumerate() {
                let row = match (input.tags.get(ch).and_then(|t| t.get(i)), model.vocabs.tags.get(ch)) {
                    (Some(tag), Some(v)) => v.get_or_unk(tag),
                    _ => 0,
                };
                parts.push(tape.lookup(emb, row)?);
            }
            let x = tape.concat(&parts);
            let x = p.input.apply(tape, x)?;
            tokens.push(tape.relu(x));
        }

        let (mut encoded, mut keys) = (Vec::new(), Vec::new());
        if let (Some((fwd, bwd)), Some(att)) = (p.encoder, p.attention) {
            if !tokens.is_empty() {
                let s = fwd.zero_state(tape);
                let f = fwd.run(tape, &tokens, s)?;
                let rev: Vec<Var> = tokens.iter().rev().copied().collect();
                let s = bwd.zero_state(tape);
                let mut b = bwd.run(tape, &rev, s)?;
                b.reverse();
                for (hf, hb) in f.into_iter().zip(b) {
                    let h = tape.concat(&[hf, hb]);
                    keys.push(tape.matvec(att.w_a, h)?);
                    encoded.push(h);
                }
            }
        }

        let mut session = Session {
            model,
            encoded,
            keys,
            stack: p.stack.start(tape),
            buffer: p.buffer.start(tape),
            history: p.history.start(tape),
            reps: HashMap::new(),
        };
        for item in state.buffer().rev() {
            let x = tokens[item.start];
            session.reps.insert(item.id, x);
            session.buffer.push(tape, x)?;
        }
        for item in state.stack() {
            let x = tokens[item.start];
            session.reps.insert(item.id, x);
            session.stack.push(tape, x)?;
        }
        Ok(session)
    }

    pub fn model(&self) -> &'m Model {
        self.model
    }

    pub fn encoded(&self) -> &[Var] {
        &self.encoded
    }

    /// Computes the state vector `s_t` and everything that feeds it.
    pub fn state_parts(&self, tape: &mut Tape) -> Result<StateParts, ModelError> {
        let p = &self.model.p;
        let st = self.stack.summary();
        let b = self.buffer.summary();
        let a = self.history.summary();
        let (mut alpha, mut context, mut fused) = (None, None, None);
        let x = match p.attention {
            Some(att) => {
                let c = if self.encoded.is_empty() {
                    tape.input(vec![0.0; 2 * self.model.config.hidden_dim])
                } else {
                    let (al, c) = attend_keys(tape, a, &self.keys, &self.encoded)?;
                    alpha = Some(al);
                    c
                };
                let d = tape.concat(&[a, st]);
                let g1 = tape.matvec(att.w1_dec, d)?;
                let g2 = tape.matvec(att.w1_att, c)?;
                let g = tape.add(g1, g2)?;
                let g = tape.tanh(g);
                let u1 = tape.matvec(att.w2_dec, d)?;
                let u2 = tape.matvec(att.w2_att, c)?;
                let u = tape.sum(&[g, u1, u2])?;
                let u = tape.tanh(u);
                context = Some(c);
                fused = Some(u);
                tape.concat(&[st, b, a, u])
            }
            None => tape.concat(&[st, b, a]),
        };
        let s = p.state.apply(tape, x)?;
        let state = tape.relu(s);
        Ok(StateParts { stack: st, buffer: b, history: a, alpha, context, fused, state })
    }

    pub fn state_vector(&self, tape: &mut Tape) -> Result<Var, ModelError> {
        Ok(self.state_parts(tape)?.state)
    }

    /// Unnormalised action scores over [`ActionKind::ALL`].
    pub fn action_logits(&self, tape: &mut Tape, s: Var) -> Result<Var, ModelError> {
        Ok(self.model.p.action_out.apply(tape, s)?)
    }

    /// Unnormalised scores over the label vocabulary of action `kind`, or
    /// `None` for actions without a label.
    pub fn label_logits(&self, tape: &mut Tape, s: Var, kind: ActionKind) -> Result<Option<Var>, ModelError> {
        let Some(k) = kind.label_kind() else { return Ok(None) };
        match self.model.p.label_out[k as usize] {
            Some(head) => Ok(Some(head.apply(tape, s)?)),
            None => Ok(None),
        }
    }

    /// Negative log-likelihood of `t` in the state behind `s`.
    pub fn transition_nll(
        &self,
        tape: &mut Tape,
        s: Var,
        state: &ParserState,
        t: &Transition,
    ) -> Result<Var, ModelError> {
        let logits = self.action_logits(tape, s)?;
        let mask = self.model.action_mask(state);
        let mut nll = tape.masked_nll(logits, &mask, t.kind.index())?;
        if let (Some(ll), Some(i)) = (self.label_logits(tape, s, t.kind)?, self.model.vocabs.label_index(t)) {
            let lmask = vec![true; tape.value(ll).len()];
            let lnll = tape.masked_nll(ll, &lmask, i)?;
            nll = tape.add(nll, lnll)?;
        }
        Ok(nll)
    }

    fn rep(&self, id: usize) -> Result<Var, ModelError> {
        self.reps.get(&id).copied().ok_or(ModelError::MissingItem(id))
    }

    /// Updates the network state for `t`, which took `before` to `after`.
    pub fn advance(
        &mut self,
        tape: &mut Tape,
        before: &ParserState,
        after: &ParserState,
        t: &Transition,
    ) -> Result<(), ModelError> {
        let p = &self.model.p;
        let top = |s: &ParserState, k: usize| s.stack_top(k).map(|i| i.id).ok_or(ModelError::Ad(AdError::EmptyStack));
        let label = tape.lookup(p.label_emb, self.model.label_row(t))?;
        match t.kind {
            ActionKind::Shift => {
                self.buffer.pop()?;
                let x = self.rep(top(after, 0)?)?;
                self.stack.push(tape, x)?;
            }
            ActionKind::Reduce => self.stack.pop()?,
            ActionKind::Confirm | ActionKind::Entity => {
                let x = self.rep(top(before, 0)?)?;
                let v = tape.concat(&[x, label]);
                let v = p.node.apply(tape, v)?;
                self.replace_top(tape, top(after, 0)?, v)?;
            }
            ActionKind::Dependent => {
                let x = self.rep(top(before, 0)?)?;
                let v = tape.concat(&[x, label]);
                let v = p.dep.apply(tape, v)?;
                self.replace_top(tape, top(after, 0)?, v)?;
            }
            ActionKind::Merge => {
                let (s0, s1) = (self.rep(top(before, 0)?)?, self.rep(top(before, 1)?)?);
                let v = tape.concat(&[s1, s0]);
                let v = p.merge.apply(tape, v)?;
                self.stack.pop()?;
                self.replace_top(tape, top(after, 0)?, v)?;
            }
            ActionKind::LeftArc => {
                let (s0, s1) = (self.rep(top(before, 0)?)?, self.rep(top(before, 1)?)?);
                let v = tape.concat(&[s0, s1, label]);
                let v = p.arc.apply(tape, v)?;
                self.replace_top(tape, top(after, 0)?, v)?;
            }
            ActionKind::RightArc => {
                let (s0, s1) = (self.rep(top(before, 0)?)?, self.rep(top(before, 1)?)?);
                let v = tape.concat(&[s1, s0, label]);
                let v = p.arc.apply(tape, v)?;
                self.stack.pop()?;
                self.replace_top(tape, top(after, 0)?, v)?;
            }
            ActionKind::Swap => {
                let (s0, s1) = (self.rep(top(before, 0)?)?, self.rep(top(before, 1)?)?);
                self.stack.pop()?;
                self.stack.pop()?;
                self.stack.push(tape, s0)?;
                self.buffer.push(tape, s1)?;
            }
            ActionKind::Finish => {}
        }
        let action = tape.lookup(p.action_emb, t.kind.index())?;
        let h = tape.concat(&[action, label]);
        self.history.push(tape, h)?;
        Ok(())
    }

    fn replace_top(&mut self, tape: &mut Tape, id: usize, v: Var) -> Result<(), ModelError> {
        let v = tape.tanh(v);
        self.stack.pop()?;
        self.stack.push(tape, v)?;
        self.reps.insert(id, v);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::Vocab;

    fn tiny(attention: bool) -> Model {
        let config = ModelConfig {
            word_dim: 4,
            input_dim: 4,
            hidden_dim: 3,
            action_dim: 2,
            label_dim: 2,
            tag_dim: 2,
            attention,
            tag_channels: vec!["pos".into()],
            ..ModelConfig::default()
        };
        let mut vocabs = Vocabs {
            words: Vocab::build(["the", "boy", "left"], 1, true),
            tags: vec![Vocab::build(["DT", "NN"], 1, true)],
            ..Vocabs::default()
        };
        let seq: Vec<Transition> = ["CONFIRM:boy", "CONFIRM:leave-11", "LEFT-ARC:ARG0"].iter().map(|s| s.parse().unwrap()).collect();
        vocabs.add_labels([seq.as_slice()]);
        Model::new(config, vocabs, 3)
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let m = tiny(true);
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        let back = Model::load(buf.as_slice()).unwrap();
        assert_eq!(back.config, m.config);
        assert_eq!(back.vocabs, m.vocabs);
        for id in m.store.ids() {
            let (a, b) = (&m.store.get(id).values, &back.store.get(id).values);
            assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()), "{}", m.store.name(id));
        }
        assert!(matches!(Model::load(&b"junk\n"[..]), Err(LoadError::Magic)));
    }

    #[test]
    fn oracle_sequence_runs_through_network() {
        let m = tiny(true);
        let tokens: Vec<String> = ["the", "boy", "left"].iter().map(|s| s.to_string()).collect();
        let seq: Vec<Transition> = ["SHIFT", "REDUCE", "SHIFT", "CONFIRM:boy", "SHIFT", "CONFIRM:leave-11", "LEFT-ARC:ARG0", "FINISH"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        let mut tape = Tape::new(&m.store);
        let mut state = ParserState::new(&tokens);
        let mut sess = Session::new(&m, &mut tape, &SentenceInput::new(tokens.clone()), &state).unwrap();
        for t in &seq {
            let s = sess.state_vector(&mut tape).unwrap();
            let nll = sess.transition_nll(&mut tape, s, &state, t).unwrap();
            assert!(tape.scalar(nll) >= 0.0);
            let after = state.applied(t).unwrap();
            sess.advance(&mut tape, &state, &after, t).unwrap();
            state = after;
        }
        assert!(state.is_terminal());
        assert_eq!(sess.stack.len(), state.stack().len());
    }

    #[test]
    fn unpredictable_actions_are_masked() {
        let m = tiny(false);
        assert!(!m.can_predict(ActionKind::Entity));
        assert!(m.can_predict(ActionKind::Confirm));
        assert!(m.can_predict(ActionKind::Shift));
    }
}
