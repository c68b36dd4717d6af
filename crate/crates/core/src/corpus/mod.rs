//! Dialogue and article data model, ingestion, vocabulary and windowing.

mod io;
mod split;
pub mod synth;
mod tokenize;
mod vocab;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use io::{load_articles, load_dialogues, parse_articles, parse_dialogues, write_articles, write_dialogues};
pub use split::{concat, concat_and_split, make_windows, split, ContextWindow, Splits};
pub use tokenize::tokenize;
pub use vocab::{build_vocab, encode, Vocabulary, NULL_ID, UNK_ID};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Speaker {
    Guide,
    Tourist,
    Other,
}

impl Speaker {
    pub fn as_str(&self) -> &'static str {
        match self {
            Speaker::Guide => "GUIDE",
            Speaker::Tourist => "TOURIST",
            Speaker::Other => "OTHER",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub session_id: String,
    pub index_in_session: usize,
    pub speaker: Speaker,
    pub text: String,
    pub domain: String,
    /// Vocabulary indices; empty until the corpus is encoded.
    pub token_ids: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub id: String,
    pub utterances: Vec<Utterance>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DialogueCorpus {
    pub sessions: Vec<Session>,
    pub domain_set: Vec<String>,
}

impl DialogueCorpus {
    pub fn utterances(&self) -> impl Iterator<Item = &Utterance> {
        self.sessions.iter().flat_map(|s| s.utterances.iter())
    }

    pub fn len(&self) -> usize {
        self.sessions.iter().map(|s| s.utterances.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn domain_index(&self, domain: &str) -> Option<usize> {
        self.domain_set.iter().position(|d| d == domain)
    }

    /// Fills `token_ids` of every utterance from `vocab`.
    pub fn encode_with(&mut self, vocab: &Vocabulary) {
        for session in &mut self.sessions {
            for utt in &mut session.utterances {
                utt.token_ids = encode(vocab, &utt.text);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Article {
    pub title: String,
    pub text: String,
    pub word_count: usize,
}

impl Article {
    pub fn new(title: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let word_count = tokenize(&text).len();
        Article {
            title: title.into(),
            text,
            word_count,
        }
    }

    /// Tokens seen by retrieval and embedding: title followed by body.
    pub fn indexed_tokens(&self) -> Vec<String> {
        let mut tokens = tokenize(&self.title);
        tokens.extend(tokenize(&self.text));
        tokens
    }
}

/// Articles keyed by id; iteration order is ascending id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ArticleCorpus {
    pub articles: BTreeMap<String, Article>,
    /// Number of records dropped by the minimum-length filter.
    pub dropped_short: usize,
}

impl ArticleCorpus {
    pub fn len(&self) -> usize {
        self.articles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }

    pub fn title(&self, id: &str) -> Option<&str> {
        self.articles.get(id).map(|a| a.title.as_str())
    }
}

/// One position of a concatenated utterance sequence.
#[derive(Debug, Clone, PartialEq)]
pub enum Slot {
    /// Session-boundary padding; never supervised.
    Null,
    Utt(Utterance),
}

impl Slot {
    pub fn utterance(&self) -> Option<&Utterance> {
        match self {
            Slot::Null => None,
            Slot::Utt(u) => Some(u),
        }
    }
}

/// A contiguous run of the concatenated corpus. `start` is the global
/// position of `slots[0]`, which keys target assignments.
#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceSeq {
    pub start: usize,
    pub slots: Vec<Slot>,
}

impl UtteranceSeq {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Iterates `(global position, utterance)` over the non-NULL slots.
    pub fn real(&self) -> impl Iterator<Item = (usize, &Utterance)> {
        self.slots
            .iter()
            .enumerate()
            .filter_map(move |(i, s)| s.utterance().map(|u| (self.start + i, u)))
    }
}
