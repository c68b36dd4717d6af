//! Joint tracking of dialogue domains and open-domain topics.
//!
//! The pipeline has two halves. Offline, every utterance is matched to its
//! best TF-IDF articles ([`tfidf`]) and those articles are embedded with
//! PV-DM paragraph vectors ([`doc2vec`]); the mean embedding of the top
//! matches becomes the utterance's regression target. Online, a recurrent
//! convolutional network ([`models`]) reads a sliding window of utterances
//! and predicts both a domain distribution and a point in the topic space,
//! which [`eval`] resolves to the nearest article.

pub mod corpus;
pub mod doc2vec;
pub mod eval;
pub mod fsutil;
pub mod models;
pub mod numcore;
pub mod seed;
pub mod tfidf;

mod error;

pub use corpus::{
    ArticleCorpus, ContextWindow, DialogueCorpus, Slot, Speaker, Utterance, UtteranceSeq,
    Vocabulary,
};
pub use doc2vec::{Metric, PvdmConfig, TopicEmbeddingSpace};
pub use error::{Error, ErrorClass, Result};
pub use eval::{ConfusionMatrix, EvalReport, Metrics};
pub use models::{ModelKind, Regime, Tracker, TrainingConfig};
pub use numcore::Matrix;
pub use tfidf::{TargetAssignment, TfIdfIndex};
