//! Greedy, sampled and beam decoding.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use stackamr_autodiff::{masked_log_softmax, Tape, Var};
use stackamr_core::transition::{ActionKind, ParserState, Transition};
use stackamr_core::AmrGraph;

use crate::data::SentenceInput;
use crate::model::{Model, ModelError, Session};

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub transitions: Vec<Transition>,
    pub graph: AmrGraph,
    /// The placeholder graph was returned.
    pub degenerate: bool,
    /// Model log-probability of the sequence (never flattened).
    pub log_prob: f64,
    /// Sampling used the flattened distribution.
    pub flattened: bool,
}

fn finish(state: &ParserState, log_prob: f64, flattened: bool) -> Decoded {
    let out = state.output();
    Decoded { transitions: state.history().to_vec(), graph: out.graph, degenerate: out.degenerate, log_prob, flattened }
}

/// Square-roots and renormalises a distribution. Zeros stay zero.
pub fn flatten(p: &[f64]) -> Vec<f64> {
    let r: Vec<f64> = p.iter().map(|v| v.max(0.0).sqrt()).collect();
    let z: f64 = r.iter().sum();
    r.into_iter().map(|v| v / z).collect()
}

/// Log-probabilities for one state: actions (masked, `-inf` where illegal)
/// and, lazily, labels.
struct Scores {
    state: Var,
    action: Vec<f64>,
}

fn scores(sess: &Session, tape: &mut Tape, state: &ParserState) -> Result<Scores, ModelError> {
    let s = sess.state_vector(tape)?;
    let logits = sess.action_logits(tape, s)?;
    let mask = sess.model().action_mask(state);
    let action = if mask.iter().any(|&m| m) {
        masked_log_softmax(tape.value(logits), &mask)
    } else {
        vec![f64::NEG_INFINITY; ActionKind::COUNT]
    };
    Ok(Scores { state: s, action })
}

fn label_scores(sess: &Session, tape: &mut Tape, s: Var, kind: ActionKind) -> Result<Option<Vec<f64>>, ModelError> {
    Ok(sess.label_logits(tape, s, kind)?.map(|l| {
        let v = tape.value(l);
        masked_log_softmax(v, &vec![true; v.len()])
    }))
}

/// Index of the largest entry; the first one on ties.
fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn step(
    sess: &mut Session,
    tape: &mut Tape,
    state: &mut ParserState,
    t: Transition,
) -> Result<(), ModelError> {
    let after = state.applied(&t).expect("only legal transitions are chosen");
    sess.advance(tape, state, &after, &t)?;
    *state = after;
    Ok(())
}

/// Picks the action and label with the highest joint log-probability at
/// every step.
pub fn greedy(model: &Model, input: &SentenceInput) -> Result<Decoded, ModelError> {
    let mut tape = Tape::new(&model.store);
    let mut state = ParserState::new(&input.tokens);
    let mut sess = Session::new(model, &mut tape, input, &state)?;
    let mut total = 0.0;
    while !state.is_terminal() {
        let sc = scores(&sess, &mut tape, &state)?;
        let mut best: Option<(f64, Transition)> = None;
        for kind in ActionKind::ALL {
            let la = sc.action[kind.index()];
            if la == f64::NEG_INFINITY {
                continue;
            }
            let (score, label) = match label_scores(&sess, &mut tape, sc.state, kind)? {
                Some(ls) => {
                    let i = argmax(&ls);
                    (la + ls[i], Some(i))
                }
                None => (la, None),
            };
            if best.as_ref().is_none_or(|(b, _)| score > *b) {
                best = Some((score, model.vocabs.transition(kind, label)));
            }
        }
        let Some((score, t)) = best else { break };
        total += score;
        step(&mut sess, &mut tape, &mut state, t)?;
    }
    Ok(finish(&state, total, false))
}

fn draw(p: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &x) in p.iter().enumerate() {
        if x > 0.0 {
            acc += x;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Samples one sequence. With probability `epsilon` the whole decode draws
/// from square-root flattened distributions. The returned `Var` is the
/// negative log-likelihood of the sample under the unflattened model.
pub fn sample_on_tape(
    model: &Model,
    tape: &mut Tape,
    input: &SentenceInput,
    rng: &mut ChaCha8Rng,
    epsilon: f64,
) -> Result<(Decoded, Option<Var>), ModelError> {
    let flattened = rng.gen_bool(epsilon.clamp(0.0, 1.0));
    let mut state = ParserState::new(&input.tokens);
    let mut sess = Session::new(model, tape, input, &state)?;
    let mut total = 0.0;
    let mut nlls = Vec::new();
    while !state.is_terminal() {
        let sc = scores(&sess, tape, &state)?;
        if sc.action.iter().all(|&x| x == f64::NEG_INFINITY) {
            break;
        }
        let mut p: Vec<f64> = sc.action.iter().map(|x| x.exp()).collect();
        if flattened {
            p = flatten(&p);
        }
        let kind = ActionKind::ALL[draw(&p, rng)];
        total += sc.action[kind.index()];
        let label = match label_scores(&sess, tape, sc.state, kind)? {
            Some(ls) => {
                let mut q: Vec<f64> = ls.iter().map(|x| x.exp()).collect();
                if flattened {
                    q = flatten(&q);
                }
                let i = draw(&q, rng);
                total += ls[i];
                Some(i)
            }
            None => None,
        };
        let t = model.vocabs.transition(kind, label);
        nlls.push(sess.transition_nll(tape, sc.state, &state, &t)?);
        step(&mut sess, tape, &mut state, t)?;
    }
    let nll = if nlls.is_empty() { None } else { Some(tape.sum(&nlls)?) };
    Ok((finish(&state, total, flattened), nll))
}

pub fn sample(model: &Model, input: &SentenceInput, rng: &mut ChaCha8Rng, epsilon: f64) -> Result<Decoded, ModelError> {
    let mut tape = Tape::new(&model.store);
    Ok(sample_on_tape(model, &mut tape, input, rng, epsilon)?.0)
}

#[derive(Clone)]
struct Hyp<'m> {
    state: ParserState,
    sess: Session<'m>,
    score: f64,
}

/// Plain beam search. Returns every finished hypothesis, best first.
pub fn beam_pool(model: &Model, input: &SentenceInput, width: usize) -> Result<Vec<Decoded>, ModelError> {
    let width = width.max(1);
    let mut tape = Tape::new(&model.store);
    let state = ParserState::new(&input.tokens);
    let sess = Session::new(model, &mut tape, input, &state)?;
    let mut active = vec![Hyp { state, sess, score: 0.0 }];
    let mut pool: Vec<Decoded> = Vec::new();
    while !active.is_empty() {
        // (total, step score, parent, transition)
        let mut cands: Vec<(f64, f64, usize, Transition)> = Vec::new();
        for (h, hyp) in active.iter().enumerate() {
            let sc = scores(&hyp.sess, &mut tape, &hyp.state)?;
            for kind in ActionKind::ALL {
                let la = sc.action[kind.index()];
                if la == f64::NEG_INFINITY {
                    continue;
                }
                match label_scores(&hyp.sess, &mut tape, sc.state, kind)? {
                    Some(ls) => {
                        let mut order: Vec<usize> = (0..ls.len()).collect();
                        order.sort_by(|&a, &b| ls[b].total_cmp(&ls[a]));
                        for &i in order.iter().take(width) {
                            cands.push((hyp.score + (la + ls[i]), la + ls[i], h, model.vocabs.transition(kind, Some(i))));
                        }
                    }
                    None => cands.push((hyp.score + la, la, h, model.vocabs.transition(kind, None))),
                }
            }
            if cands.iter().all(|c| c.2 != h) {
                pool.push(finish(&hyp.state, hyp.score, false));
            }
        }
        cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));
        let mut next = Vec::new();
        for (score, _, h, t) in cands.into_iter().take(width) {
            let mut hyp = active[h].clone();
            step(&mut hyp.sess, &mut tape, &mut hyp.state, t)?;
            hyp.score = score;
            if hyp.state.is_terminal() {
                pool.push(finish(&hyp.state, score, false));
            } else {
                next.push(hyp);
            }
        }
        active = next;
        pool.sort_by(|a, b| b.log_prob.total_cmp(&a.log_prob));
        let best_active = active.iter().map(|h| h.score).fold(f64::NEG_INFINITY, f64::max);
        if pool.len() >= width && pool[0].log_prob >= best_active {
            break;
        }
    }
    Ok(pool)
}

/// Beam search of the given width. The greedy sequence is kept as a
/// fallback, so the result never scores below greedy decoding.
pub fn beam_search(model: &Model, input: &SentenceInput, width: usize) -> Result<Decoded, ModelError> {
    let g = greedy(model, input)?;
    if width <= 1 {
        return Ok(g);
    }
    let pool = beam_pool(model, input, width)?;
    Ok(match pool.into_iter().next() {
        Some(b) if b.log_prob > g.log_prob => b,
        _ => g,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flatten_example() {
        let f = flatten(&[0.81, 0.19]);
        assert!((f[0] - 0.6737).abs() < 1e-4 && (f[1] - 0.3263).abs() < 1e-4, "{f:?}");
        assert_eq!(flatten(&[0.0, 1.0]), vec![0.0, 1.0]);
    }

    #[test]
    fn draw_respects_zeros() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            assert_ne!(draw(&[0.5, 0.0, 0.5], &mut rng), 1);
        }
    }
}
