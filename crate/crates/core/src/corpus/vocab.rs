use std::collections::HashMap;

use crate::error::{Error, Result};

use super::{tokenize, DialogueCorpus};

/// Padding token used for NULL session-boundary utterances. Its embedding row
/// stays at zero.
pub const NULL_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
const FIRST_TOKEN_ID: u32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<usize>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Builds a vocabulary from `(token, count)` pairs already in index order.
    pub fn from_ordered(entries: Vec<(String, usize)>) -> Result<Self> {
        let mut index = HashMap::with_capacity(entries.len());
        let mut tokens = Vec::with_capacity(entries.len());
        let mut counts = Vec::with_capacity(entries.len());
        for (token, count) in entries {
            let id = FIRST_TOKEN_ID + tokens.len() as u32;
            if index.insert(token.clone(), id).is_some() {
                return Err(Error::Format(format!("duplicate vocabulary token `{token}`")));
            }
            tokens.push(token);
            counts.push(count);
        }
        Ok(Vocabulary {
            tokens,
            counts,
            index,
        })
    }

    /// Total table size including the reserved NULL and UNK rows.
    pub fn len(&self) -> usize {
        self.tokens.len() + FIRST_TOKEN_ID as usize
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Number of non-reserved tokens.
    pub fn content_len(&self) -> usize {
        self.tokens.len()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        match id {
            NULL_ID => Some("<null>"),
            UNK_ID => Some("<unk>"),
            _ => self
                .tokens
                .get((id - FIRST_TOKEN_ID) as usize)
                .map(String::as_str),
        }
    }

    pub fn decode(&self, ids: &[u32]) -> Vec<&str> {
        ids.iter().filter_map(|&id| self.token(id)).collect()
    }

    /// Content tokens with their ids, in index order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, &str)> {
        self.tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (i as u32 + FIRST_TOKEN_ID, t.as_str()))
    }

    /// One `token<TAB>count` line per content token, in index order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (token, count) in self.tokens.iter().zip(&self.counts) {
            out.push_str(token);
            out.push('\t');
            out.push_str(&count.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let (token, count) = line.split_once('\t').ok_or_else(|| Error::Parse {
                line: n + 1,
                msg: "expected `token<TAB>count`".into(),
            })?;
            let count = count.parse().map_err(|e| Error::Parse {
                line: n + 1,
                msg: format!("bad count: {e}"),
            })?;
            entries.push((token.to_string(), count));
        }
        Self::from_ordered(entries)
    }
}

/// Tokens with frequency `>= min_count`, most frequent first, ties broken
/// lexicographically.
pub fn build_vocab(corpus: &DialogueCorpus, min_count: usize) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus("no utterances to build a vocabulary from".into()));
    }
    let mut freq: HashMap<String, usize> = HashMap::new();
    for utt in corpus.utterances() {
        for token in tokenize(&utt.text) {
            *freq.entry(token).or_default() += 1;
        }
    }
    let mut entries: Vec<(String, usize)> = freq
        .into_iter()
        .filter(|&(_, c)| c >= min_count.max(1))
        .collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Vocabulary::from_ordered(entries)
}

/// Maps text to token ids. Unknown words become UNK and empty text becomes a
/// single UNK so every utterance has at least one row.
pub fn encode(vocab: &Vocabulary, text: &str) -> Vec<u32> {
    let ids: Vec<u32> = tokenize(text)
        .iter()
        .map(|t| vocab.id(t).unwrap_or(UNK_ID))
        .collect();
    if ids.is_empty() {
        vec![UNK_ID]
    } else {
        ids
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Session, Speaker, Utterance};
    use proptest::prelude::*;

    fn corpus_of(texts: &[&str]) -> DialogueCorpus {
        let utterances = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Utterance {
                session_id: "s".into(),
                index_in_session: i,
                speaker: Speaker::Guide,
                text: t.to_string(),
                domain: "A".into(),
                token_ids: vec![],
            })
            .collect();
        DialogueCorpus {
            sessions: vec![Session {
                id: "s".into(),
                utterances,
            }],
            domain_set: vec!["A".into(), "B".into()],
        }
    }

    #[test]
    fn frequency_order_and_cutoff() {
        let corpus = corpus_of(&["a a b"]);
        let vocab = build_vocab(&corpus, 1).unwrap();
        assert_eq!(vocab.len(), 4);
        assert!(vocab.id("a").unwrap() < vocab.id("b").unwrap());
        assert_ne!(UNK_ID, NULL_ID);

        let vocab = build_vocab(&corpus, 2).unwrap();
        assert_eq!(vocab.content_len(), 1);
        assert!(vocab.id("b").is_none());
    }

    #[test]
    fn ties_are_lexicographic() {
        let vocab = build_vocab(&corpus_of(&["zeta alpha mid"]), 1).unwrap();
        let order: Vec<&str> = vocab.iter().map(|(_, t)| t).collect();
        assert_eq!(order, ["alpha", "mid", "zeta"]);
    }

    #[test]
    fn encode_examples() {
        let vocab = Vocabulary::from_ordered(vec![("hello".into(), 2), ("world".into(), 1)]).unwrap();
        assert_eq!(vocab.id("hello"), Some(2));
        assert_eq!(vocab.id("world"), Some(3));
        assert_eq!(encode(&vocab, "hello world"), [2, 3]);
        assert_eq!(encode(&vocab, "hello mars"), [2, UNK_ID]);
        assert_eq!(encode(&vocab, ""), [UNK_ID]);
    }

    #[test]
    fn empty_corpus_rejected() {
        let mut corpus = corpus_of(&[]);
        corpus.sessions.clear();
        assert!(matches!(build_vocab(&corpus, 1), Err(Error::EmptyCorpus(_))));
    }

    #[test]
    fn text_round_trip() {
        let vocab = build_vocab(&corpus_of(&["the cat sat on the mat"]), 1).unwrap();
        assert_eq!(Vocabulary::from_text(&vocab.to_text()).unwrap(), vocab);
    }

    proptest! {
        #[test]
        fn decode_inverts_encode(words in prop::collection::vec("[a-z]{1,6}", 1..20)) {
            let text = words.join(" ");
            let vocab = build_vocab(&corpus_of(&[&text]), 1).unwrap();
            let ids = encode(&vocab, &text);
            prop_assert!(ids.iter().all(|&id| (id as usize) < vocab.len() && id != UNK_ID));
            prop_assert_eq!(vocab.decode(&ids), words.iter().map(String::as_str).collect::<Vec<_>>());
        }
    }
}
