//! Stack-LSTM transition parser: network, decoding and training loops.

pub mod config;
pub mod data;
pub mod decode;
pub mod model;
pub mod train;
pub mod vocab;

pub use config::{Config, ModelConfig, Objective, TrainConfig};
pub use data::{Example, SentenceInput};
pub use decode::{beam_search, flatten, greedy, sample, Decoded};
pub use model::{Model, Session};
pub use train::{train, TrainError, TrainReport};
pub use vocab::{Vocab, Vocabs};
