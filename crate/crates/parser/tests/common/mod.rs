#![allow(dead_code)]

use stackamr_core::synth::synth_corpus;
use stackamr_parser::config::{ModelConfig, TrainConfig};
use stackamr_parser::train::{build_vocabs, train};
use stackamr_parser::{Example, Model};

pub fn examples(n: usize, seed: u64) -> Vec<Example> {
    synth_corpus(n, seed).iter().map(Example::from_synth).collect()
}

pub fn tiny_config(attention: bool) -> ModelConfig {
    ModelConfig {
        word_dim: 4,
        input_dim: 4,
        hidden_dim: 3,
        action_dim: 2,
        label_dim: 2,
        tag_dim: 2,
        attention,
        ..ModelConfig::default()
    }
}

pub fn small_config() -> ModelConfig {
    ModelConfig { word_dim: 24, input_dim: 24, hidden_dim: 24, action_dim: 8, label_dim: 8, ..ModelConfig::default() }
}

/// A small model trained for a few epochs on `train_set`.
pub fn trained(train_set: &[Example], epochs: usize) -> Model {
    let config = small_config();
    let mut model = Model::new(config.clone(), build_vocabs(train_set, &config), 5);
    let cfg = TrainConfig { epochs, ..TrainConfig::default() };
    train(&mut model, train_set, &[], &cfg, |_| {}).unwrap();
    model
}
