mod common;

use stackamr_autodiff::{Optimizer, OptimizerKind};
use stackamr_parser::config::{Config, TrainConfig};
use stackamr_parser::train::{
    build_vocabs, mle_gradient, rl_gradient, sentence_rng, train, train_best_of_seeds, train_rl, EpochStats,
    TrainError,
};
use stackamr_parser::{Example, Model};

#[test]
fn smatch_weight_scales_the_gradient_linearly() {
    let ex = common::examples(4, 41);
    let config = common::small_config();
    let model = Model::new(config.clone(), build_vocabs(&ex, &config), 3);
    for e in &ex {
        let (l1, g1) = mle_gradient(&model, e, 1.0).unwrap();
        let (lh, gh) = mle_gradient(&model, e, 0.5).unwrap();
        assert_eq!(lh, 0.5 * l1);
        for ((ia, a), (ib, b)) in g1.iter().zip(gh.iter()) {
            assert_eq!(ia, ib);
            assert!(a.iter().zip(b).all(|(x, y)| 0.5 * x == *y));
        }
        assert_eq!(gh.norm(), 0.5 * g1.norm());
    }
}

#[test]
fn zero_advantage_contributes_exactly_zero_gradient() {
    let ex = common::examples(16, 42);
    let model = common::trained(&ex, 8);
    let (mut zero, mut nonzero) = (0, 0);
    for round in 0..6 {
        for (i, e) in ex.iter().enumerate() {
            let mut rng = sentence_rng(9, round, i);
            let r = rl_gradient(&model, e, &mut rng, 0.5, 4, i as u64).unwrap();
            assert_eq!(r.advantage, r.sample_reward - r.greedy_reward);
            if r.advantage == 0.0 {
                assert!(r.grads.is_zero());
                zero += 1;
            } else {
                assert!(!r.grads.is_zero());
                nonzero += 1;
            }
        }
    }
    assert!(zero > 0 && nonzero > 0, "zero {zero}, nonzero {nonzero}");
}

/// Log-probability of a fixed sequence, via the MLE loss.
fn log_prob(model: &Model, e: &Example, transitions: &[stackamr_core::transition::Transition]) -> f64 {
    let forced = Example { transitions: transitions.to_vec(), ..e.clone() };
    -mle_gradient(model, &forced, 1.0).unwrap().0
}

#[test]
fn update_direction_follows_advantage_sign() {
    let ex = common::examples(16, 43);
    let model = common::trained(&ex, 4);
    let (mut up, mut down) = (0, 0);
    for round in 0..4 {
        for (i, e) in ex.iter().enumerate() {
            let mut rng = sentence_rng(3, round, i);
            let r = rl_gradient(&model, e, &mut rng, 0.5, 4, i as u64).unwrap();
            if r.advantage == 0.0 {
                continue;
            }
            let before = log_prob(&model, e, &r.sample.transitions);
            let mut stepped = model.clone();
            let mut opt = Optimizer::new(OptimizerKind::Sgd { lr: 1e-3, decay: 0.0 }, None);
            opt.step(&mut stepped.store, &r.grads);
            let after = log_prob(&stepped, e, &r.sample.transitions);
            if r.advantage > 0.0 {
                assert!(after > before, "advantage {} but log p {before} -> {after}", r.advantage);
                up += 1;
            } else {
                assert!(after < before, "advantage {} but log p {before} -> {after}", r.advantage);
                down += 1;
            }
        }
    }
    assert!(up + down > 0);
}

fn variance(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64
}

/// Only holds once greedy and sampled rewards are correlated, i.e. on
/// sentences the policy has learned. An undertrained model can make the
/// advantage noisier than the raw reward.
#[test]
fn greedy_baseline_reduces_variance_on_learned_sentences() {
    let ex = common::examples(12, 44);
    let model = common::trained(&ex, 40);
    let (mut rewards, mut advantages) = (Vec::new(), Vec::new());
    for round in 0..5 {
        for (i, e) in ex.iter().enumerate() {
            let mut rng = sentence_rng(5, round, i);
            let r = rl_gradient(&model, e, &mut rng, 0.05, 4, i as u64).unwrap();
            rewards.push(r.sample_reward);
            advantages.push(r.advantage);
        }
    }
    assert!(variance(&advantages) < variance(&rewards), "{} vs {}", variance(&advantages), variance(&rewards));
}

#[test]
fn reinforcement_needs_an_initial_model() {
    let ex = common::examples(3, 45);
    let err = train_rl(None, &ex, &[], &TrainConfig::default(), |_| {}).unwrap_err();
    assert!(matches!(err, TrainError::MissingInit));
}

#[test]
fn best_of_seeds_keeps_the_best_dev_run() {
    let ex = common::examples(12, 46);
    let mut config = Config { model: common::small_config(), ..Config::default() };
    config.train.epochs = 2;
    let mut rows = Vec::new();
    let (model, reports) = train_best_of_seeds(&config, &ex[..8], &ex[8..], &[1, 2, 3], |s| rows.push(s.clone())).unwrap();
    assert_eq!(reports.len(), 3);
    assert_eq!(rows.len(), 6);
    assert_eq!(rows.iter().map(|r| r.seed).collect::<Vec<_>>(), [1, 1, 2, 2, 3, 3]);
    let best = reports.iter().map(|r| r.best_dev).fold(f64::NEG_INFINITY, f64::max);
    let got = stackamr_parser::train::evaluate(&model, &ex[8..], 1, 4).unwrap();
    assert!((got - best).abs() < 1e-12, "{got} vs {best}");
    assert_eq!(EpochStats::CSV_HEADER.split(',').count(), rows[0].to_csv().split(',').count());
}

fn train_with_threads(threads: usize, ex: &[Example], cfg: &TrainConfig) -> Model {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let config = common::small_config();
        let mut model = Model::new(config.clone(), build_vocabs(ex, &config), 11);
        train(&mut model, ex, &[], cfg, |_| {}).unwrap();
        model
    })
}

#[test]
fn training_is_reproducible_across_thread_counts() {
    let ex = common::examples(10, 47);
    for cfg in [
        TrainConfig { epochs: 2, batch_size: 4, ..TrainConfig::default() },
        TrainConfig { epochs: 2, objective: stackamr_parser::Objective::Rl, rl_batch_size: 5, ..TrainConfig::default() },
    ] {
        let a = train_with_threads(1, &ex, &cfg);
        let b = train_with_threads(4, &ex, &cfg);
        for id in a.store.ids() {
            let (x, y) = (&a.store.get(id).values, &b.store.get(id).values);
            assert!(x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits()), "{}", a.store.name(id));
        }
    }
}
