//! Parser input preparation: contextual vectors, the linear tagger and its
//! jackknifed application, tag files, and dictionary wikification.

pub mod tagger;
pub mod tags;
pub mod vectors;
pub mod wiki;

pub use tagger::{jackknife_tags, train_linear_tagger, JackknifeError, LinearTagger, TaggerConfig, TaggerError, NONE};
pub use tags::{read_tag_file, write_tag_file, TagFileError};
pub use vectors::{pool_vectors, read_vectors, write_vectors, SentenceVectors, VectorError};
pub use wiki::{name_string, read_linker_output, strip_wiki, wikify, WikiDictionary, NO_LINK};
