//! Training loops: maximum likelihood on oracle sequences (optionally
//! weighted by the oracle's Smatch) and self-critical policy gradient.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use stackamr_autodiff::{Gradients, Optimizer, ParamStore, Tape};
use stackamr_core::metrics::corpus_smatch;
use stackamr_core::transition::ParserState;
use stackamr_core::{smatch_hill_climb, to_triples, AmrGraph};

use crate::config::{ModelConfig, Objective, TrainConfig};
use crate::data::Example;
use crate::decode::{beam_search, greedy, sample_on_tape, Decoded};
use crate::model::{Model, ModelError, Session};
use crate::vocab::{Vocab, Vocabs};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("no training sentences")]
    Empty,
    #[error("reinforcement training needs an initial model")]
    MissingInit,
}

/// Per-epoch record, one CSV row each.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub seed: u64,
    pub epoch: usize,
    pub loss: f64,
    /// Mean sampled reward (RL only, otherwise NaN).
    pub reward: f64,
    pub dev_smatch: f64,
    pub seconds: f64,
}

impl EpochStats {
    pub const CSV_HEADER: &'static str = "seed,epoch,loss,reward,dev_smatch,seconds";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{:.6},{:.6},{:.6},{:.3}",
            self.seed, self.epoch, self.loss, self.reward, self.dev_smatch, self.seconds
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    /// 0 means the starting weights were never beaten.
    pub best_epoch: usize,
    pub best_dev: f64,
}

/// Input vocabularies from the training inputs and label vocabularies from
/// the oracle sequences.
pub fn build_vocabs(examples: &[Example], config: &ModelConfig) -> Vocabs {
    let words = Vocab::build(
        examples.iter().flat_map(|e| e.input.tokens.iter().map(String::as_str)),
        config.min_word_count,
        true,
    );
    let tags = (0..config.tag_channels.len())
        .map(|ch| {
            Vocab::build(
                examples.iter().filter_map(|e| e.input.tags.get(ch)).flatten().map(String::as_str),
                1,
                true,
            )
        })
        .collect();
    let mut v = Vocabs { words, tags, ..Vocabs::default() };
    v.add_labels(examples.iter().map(|e| e.transitions.as_slice()));
    v
}

/// Deterministic per-sentence stream, independent of thread scheduling.
pub fn sentence_rng(seed: u64, epoch: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((epoch as u64) << 32) | index as u64);
    rng
}

pub fn smatch_f1(pred: &AmrGraph, gold: &AmrGraph, restarts: usize, seed: u64) -> f64 {
    smatch_hill_climb(&to_triples(pred), &to_triples(gold), restarts, seed).f1
}

/// Loss and gradient of `weight · Σ_t -log p(a_t, l_t)` over the oracle
/// sequence of `ex`.
pub fn mle_gradient(model: &Model, ex: &Example, weight: f64) -> Result<(f64, Gradients), ModelError> {
    let mut tape = Tape::new(&model.store);
    let mut state = ParserState::new(&ex.input.tokens);
    let mut sess = Session::new(model, &mut tape, &ex.input, &state)?;
    let mut nlls = Vec::with_capacity(ex.transitions.len());
    for t in &ex.transitions {
        let s = sess.state_vector(&mut tape)?;
        nlls.push(sess.transition_nll(&mut tape, s, &state, t)?);
        let after = state.applied(t).expect("oracle sequences are legal");
        sess.advance(&mut tape, &state, &after, t)?;
        state = after;
    }
    let mut grads = Gradients::new();
    if nlls.is_empty() {
        return Ok((0.0, grads));
    }
    let total = tape.sum(&nlls).map_err(ModelError::from)?;
    let loss = tape.scale(total, weight);
    tape.backward(loss, &mut grads);
    Ok((tape.scalar(loss), grads))
}

/// One self-critical sample.
#[derive(Debug, Clone)]
pub struct RlSample {
    pub greedy_reward: f64,
    pub sample_reward: f64,
    /// `sample_reward - greedy_reward`.
    pub advantage: f64,
    pub sample: Decoded,
    /// Gradient of `-(r_s - r_greedy) · log p(sample)`.
    pub grads: Gradients,
}

/// Self-critical policy-gradient step for one sentence: the greedy parse
/// is the baseline for one sampled parse.
pub fn rl_gradient(
    model: &Model,
    ex: &Example,
    rng: &mut ChaCha8Rng,
    epsilon: f64,
    restarts: usize,
    smatch_seed: u64,
) -> Result<RlSample, ModelError> {
    let base = greedy(model, &ex.input)?;
    let greedy_reward = smatch_f1(&base.graph, &ex.gold, restarts, smatch_seed);
    let mut tape = Tape::new(&model.store);
    let (sample, nll) = sample_on_tape(model, &mut tape, &ex.input, rng, epsilon)?;
    let sample_reward = smatch_f1(&sample.graph, &ex.gold, restarts, smatch_seed);
    let advantage = sample_reward - greedy_reward;
    let mut grads = Gradients::new();
    if let Some(nll) = nll {
        let loss = tape.scale(nll, advantage);
        tape.backward(loss, &mut grads);
    }
    Ok(RlSample { greedy_reward, sample_reward, advantage, sample, grads })
}

/// Decodes every input with beam `width` (1 is greedy), in parallel.
pub fn decode_all(model: &Model, examples: &[Example], width: usize) -> Result<Vec<Decoded>, ModelError> {
    examples.par_iter().map(|e| beam_search(model, &e.input, width)).collect()
}

/// Micro-averaged Smatch F1 of the model's parses.
pub fn evaluate(model: &Model, examples: &[Example], width: usize, restarts: usize) -> Result<f64, ModelError> {
    let parsed = decode_all(model, examples, width)?;
    Ok(corpus_smatch(parsed.iter().map(|d| &d.graph).zip(examples.iter().map(|e| &e.gold)), restarts, 0).f1())
}

/// Trains `model` in place and leaves it holding the weights that scored
/// best on `dev` (on the training set when `dev` is empty).
pub fn train(
    model: &mut Model,
    train_set: &[Example],
    dev: &[Example],
    cfg: &TrainConfig,
    mut log: impl FnMut(&EpochStats),
) -> Result<TrainReport, TrainError> {
    if train_set.is_empty() {
        return Err(TrainError::Empty);
    }
    let dev = if dev.is_empty() { train_set } else { dev };
    let weights: Vec<f64> = match cfg.objective {
        Objective::MleSmatch => train_set
            .par_iter()
            .map(|e| smatch_f1(&e.oracle_graph, &e.gold, cfg.smatch_restarts, 0))
            .collect(),
        _ => vec![1.0; train_set.len()],
    };
    let batch = match cfg.objective {
        Objective::Rl => cfg.rl_batch_size,
        _ => cfg.batch_size,
    }
    .max(1);
    let mut opt = Optimizer::new(cfg.optimizer_kind(), cfg.clip);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut shuffle = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut best_dev = evaluate(model, dev, cfg.eval_beam, cfg.smatch_restarts)?;
    let mut best_store: ParamStore = model.store.clone();
    let mut report = TrainReport { epochs: Vec::new(), best_epoch: 0, best_dev };

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        opt.set_epoch(epoch - 1);
        order.shuffle(&mut shuffle);
        let (mut loss, mut reward) = (0.0, 0.0);
        for chunk in order.chunks(batch) {
            let results: Vec<(f64, f64, Gradients)> = chunk
                .par_iter()
                .map(|&i| -> Result<_, ModelError> {
                    let ex = &train_set[i];
                    match cfg.objective {
                        Objective::Rl => {
                            let mut rng = sentence_rng(cfg.seed, epoch, i);
                            let r = rl_gradient(model, ex, &mut rng, cfg.epsilon, cfg.smatch_restarts, i as u64)?;
                            Ok((-r.advantage, r.sample_reward, r.grads))
                        }
                        _ => {
                            let (l, g) = mle_gradient(model, ex, weights[i])?;
                            Ok((l, f64::NAN, g))
                        }
                    }
                })
                .collect::<Result<_, _>>()?;
            let mut grads = Gradients::new();
            for (l, r, g) in &results {
                loss += l;
                reward += r;
                grads.add(g);
            }
            grads.scale(1.0 / chunk.len() as f64);
            opt.step(&mut model.store, &grads);
        }
        let dev_smatch = evaluate(model, dev, cfg.eval_beam, cfg.smatch_restarts)?;
        let stats = EpochStats {
            seed: cfg.seed,
            epoch,
            loss: loss / train_set.len() as f64,
            reward: reward / train_set.len() as f64,
            dev_smatch,
            seconds: started.elapsed().as_secs_f64(),
        };
        log(&stats);
        if dev_smatch > best_dev {
            best_dev = dev_smatch;
            best_store = model.store.clone();
            report.best_epoch = epoch;
            report.best_dev = dev_smatch;
        }
        report.epochs.push(stats);
    }
    model.store = best_store;
    Ok(report)
}

/// Trains one fresh model per seed and keeps the one with the best dev
/// score. Returns it with every run's report.
pub fn train_best_of_seeds(
    config: &crate::config::Config,
    train_set: &[Example],
    dev: &[Example],
    seeds: &[u64],
    mut log: impl FnMut(&EpochStats),
) -> Result<(Model, Vec<TrainReport>), TrainError> {
    let vocabs = build_vocabs(train_set, &config.model);
    let mut best: Option<(f64, Model)> = None;
    let mut reports = Vec::new();
    for &seed in seeds {
        let mut model = Model::new(config.model.clone(), vocabs.clone(), seed);
        let cfg = TrainConfig { seed, ..config.train.clone() };
        let r = train(&mut model, train_set, dev, &cfg, &mut log)?;
        if best.as_ref().is_none_or(|(b, _)| r.best_dev > *b) {
            best = Some((r.best_dev, model));
        }
        reports.push(r);
    }
    let (_, model) = best.ok_or(TrainError::Empty)?;
    Ok((model, reports))
}

/// Self-critical training from an existing (normally MLE-trained) model.
pub fn train_rl(
    init: Option<Model>,
    train_set: &[Example],
    dev: &[Example],
    cfg: &TrainConfig,
    log: impl FnMut(&EpochStats),
) -> Result<(Model, TrainReport), TrainError> {
    let mut model = init.ok_or(TrainError::MissingInit)?;
    let cfg = TrainConfig { objective: Objective::Rl, ..cfg.clone() };
    let report = train(&mut model, train_set, dev, &cfg, log)?;
    Ok((model, report))
}
