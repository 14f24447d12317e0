//! Model and training settings, read from TOML.

use serde::{Deserialize, Serialize};
use stackamr_autodiff::OptimizerKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub word_dim: usize,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub action_dim: usize,
    pub label_dim: usize,
    pub tag_dim: usize,
    /// Bidirectional encoder plus attention fusion. Off gives the plain
    /// `ReLU(W[st; b; a] + d)` state.
    pub attention: bool,
    /// Width of precomputed contextual word vectors, when used.
    pub contextual_dim: Option<usize>,
    /// Names of the tag channels fed as embeddings (POS, NER, concept...).
    pub tag_channels: Vec<String>,
    /// Words seen fewer times than this map to the unknown word.
    pub min_word_count: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            word_dim: 100,
            input_dim: 100,
            hidden_dim: 100,
            action_dim: 20,
            label_dim: 20,
            tag_dim: 20,
            attention: true,
            contextual_dim: None,
            tag_channels: Vec::new(),
            min_word_count: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    Mle,
    MleSmatch,
    Rl,
}

impl std::str::FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mle" => Ok(Objective::Mle),
            "mle-smatch" => Ok(Objective::MleSmatch),
            "rl" => Ok(Objective::Rl),
            _ => Err(format!("unknown objective `{s}` (mle, mle-smatch, rl)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerName {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub objective: Objective,
    pub epochs: usize,
    /// Sentences per update. RL uses `rl_batch_size`.
    pub batch_size: usize,
    pub rl_batch_size: usize,
    pub optimizer: OptimizerName,
    pub learning_rate: f64,
    /// Learning rate for self-critical fine-tuning.
    pub rl_learning_rate: f64,
    pub decay: f64,
    pub clip: Option<f64>,
    pub seed: u64,
    /// Probability of flattening the sampling distribution of a decode.
    pub epsilon: f64,
    /// Beam width used when scoring the dev set after each epoch.
    pub eval_beam: usize,
    /// Hill-climbing restarts for rewards and dev scoring.
    pub smatch_restarts: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            objective: Objective::Mle,
            epochs: 30,
            batch_size: 1,
            rl_batch_size: 40,
            optimizer: OptimizerName::Sgd,
            learning_rate: 0.1,
            rl_learning_rate: 0.005,
            decay: 0.05,
            clip: Some(5.0),
            seed: 1,
            epsilon: 0.05,
            eval_beam: 1,
            smatch_restarts: 4,
        }
    }
}

impl TrainConfig {
    pub fn optimizer_kind(&self) -> OptimizerKind {
        let lr = if self.objective == Objective::Rl { self.rl_learning_rate } else { self.learning_rate };
        match self.optimizer {
            OptimizerName::Sgd => OptimizerKind::Sgd { lr, decay: self.decay },
            OptimizerName::Adam => OptimizerKind::Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
