//! Inverted-index TF-IDF retrieval of articles for utterances.

mod targets;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::ArticleCorpus;
use crate::error::{Error, Result};
use crate::fsutil;

pub use targets::{
    assign_targets, dump_targets, load_targets, targets_from_jsonl, targets_to_jsonl, Target, TargetAssignment, TARGETS_VERSION,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TfScheme {
    /// Raw count in the article.
    #[default]
    Raw,
    /// `1 + ln(count)`.
    Log,
    /// 1 if present.
    Binary,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdfScheme {
    /// `ln(N / df)`.
    #[default]
    Plain,
    /// `ln((1 + N) / (1 + df)) + 1`.
    Smooth,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TfIdfVariant {
    pub tf: TfScheme,
    pub idf: IdfScheme,
    /// Count each distinct query term once.
    pub dedupe_query: bool,
}

impl TfIdfVariant {
    pub fn tf_weight(&self, count: u32) -> f64 {
        match self.tf {
            TfScheme::Raw => count as f64,
            TfScheme::Log => 1.0 + (count as f64).ln(),
            TfScheme::Binary => 1.0,
        }
    }

    pub fn idf(&self, num_articles: usize, doc_freq: usize) -> f64 {
        let n = num_articles as f64;
        let df = doc_freq as f64;
        match self.idf {
            IdfScheme::Plain => (n / df).ln(),
            IdfScheme::Smooth => ((1.0 + n) / (1.0 + df)).ln() + 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    /// Position of the article in [`TfIdfIndex::article_ids`].
    pub article: u32,
    pub tf: u32,
}

/// Immutable inverted index over an article corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfIdfIndex {
    article_ids: Vec<String>,
    doc_lengths: Vec<usize>,
    /// Postings sorted by article position.
    postings: BTreeMap<String, Vec<Posting>>,
    variant: TfIdfVariant,
}

impl TfIdfIndex {
    /// Indexes title and body of every article.
    pub fn build(articles: &ArticleCorpus, variant: TfIdfVariant) -> Result<Self> {
        if articles.is_empty() {
            return Err(Error::Index("cannot index an empty article corpus".into()));
        }
        let mut article_ids = Vec::with_capacity(articles.len());
        let mut doc_lengths = Vec::with_capacity(articles.len());
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        for (pos, (id, article)) in articles.articles.iter().enumerate() {
            let tokens = article.indexed_tokens();
            let mut counts: HashMap<String, u32> = HashMap::new();
            for t in &tokens {
                *counts.entry(t.clone()).or_default() += 1;
            }
            for (term, tf) in counts {
                postings.entry(term).or_default().push(Posting {
                    article: pos as u32,
                    tf,
                });
            }
            article_ids.push(id.clone());
            doc_lengths.push(tokens.len());
        }
        Ok(TfIdfIndex {
            article_ids,
            doc_lengths,
            postings,
            variant,
        })
    }

    pub fn num_articles(&self) -> usize {
        self.article_ids.len()
    }

    pub fn article_ids(&self) -> &[String] {
        &self.article_ids
    }

    pub fn doc_length(&self, article: &str) -> Option<usize> {
        let pos = self.article_ids.binary_search_by(|a| a.as_str().cmp(article)).ok()?;
        Some(self.doc_lengths[pos])
    }

    pub fn variant(&self) -> TfIdfVariant {
        self.variant
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map_or(&[], Vec::as_slice)
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        match self.doc_freq(term) {
            0 => None,
            df => Some(self.variant.idf(self.num_articles(), df)),
        }
    }

    /// Articles with positive score, best first; ties go to the smaller id.
    ///
    /// Each article's score is accumulated over the query terms in ascending
    /// order, repeated terms contributing once per occurrence unless the
    /// variant dedupes them.
    pub fn score_utterance<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<(&str, f64)> {
        let mut terms: Vec<&str> = tokens.iter().map(AsRef::as_ref).collect();
        terms.sort_unstable();
        if self.variant.dedupe_query {
            terms.dedup();
        }
        let mut acc: HashMap<u32, f64> = HashMap::new();
        for term in terms {
            let Some(list) = self.postings.get(term) else {
                continue;
            };
            let idf = self.variant.idf(self.num_articles(), list.len());
            for p in list {
                *acc.entry(p.article).or_insert(0.0) += self.variant.tf_weight(p.tf) * idf;
            }
        }
        let mut ranked: Vec<(u32, f64)> = acc.into_iter().filter(|&(_, s)| s > 0.0).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked
            .into_iter()
            .map(|(a, s)| (self.article_ids[a as usize].as_str(), s))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("index serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let index: TfIdfIndex =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("index: {e}")))?;
        let n = index.article_ids.len() as u32;
        if index.doc_lengths.len() != index.article_ids.len()
            || index.postings.values().flatten().any(|p| p.article >= n)
        {
            return Err(Error::Format("index postings reference unknown articles".into()));
        }
        Ok(index)
    }

    pub fn content_hash(&self) -> String {
        fsutil::sha256_hex(self.to_json().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Article;
    use proptest::prelude::*;

    fn corpus(docs: &[(&str, &str)]) -> ArticleCorpus {
        ArticleCorpus {
            articles: docs
                .iter()
                .map(|(id, text)| (id.to_string(), Article::new("", *text)))
                .collect(),
            dropped_short: 0,
        }
    }

    fn fruit() -> TfIdfIndex {
        let c = corpus(&[("d1", "apple banana"), ("d2", "apple apple"), ("d3", "cherry")]);
        TfIdfIndex::build(&c, TfIdfVariant::default()).unwrap()
    }

    #[test]
    fn doc_freq_matches_hand_count() {
        let index = fruit();
        assert_eq!(index.num_articles(), 3);
        assert_eq!(index.doc_freq("apple"), 2);
        assert_eq!(index.doc_freq("banana"), 1);
        assert_eq!(index.doc_freq("cherry"), 1);
        assert_eq!(index.doc_freq("durian"), 0);
        assert_eq!(index.doc_length("d2"), Some(2));
    }

    #[test]
    fn ranking_examples() {
        let index = fruit();
        let banana = index.score_utterance(&["banana"]);
        assert_eq!(banana.len(), 1);
        assert_eq!(banana[0].0, "d1");
        assert!((banana[0].1 - 3f64.ln()).abs() < 1e-15);
        assert!((banana[0].1 - 1.0986).abs() < 1e-4);

        let apple = index.score_utterance(&["apple"]);
        assert_eq!(apple.iter().map(|r| r.0).collect::<Vec<_>>(), ["d2", "d1"]);
        assert_eq!(apple[0].1, 2.0 * 1.5f64.ln());

        assert!(index.score_utterance(&["durian"]).is_empty());
        assert!(index.score_utterance::<&str>(&[]).is_empty());
    }

    #[test]
    fn single_document_scores_zero() {
        let index = TfIdfIndex::build(&corpus(&[("only", "a b c")]), TfIdfVariant::default()).unwrap();
        assert_eq!(index.idf("a"), Some(0.0));
        assert!(index.score_utterance(&["a", "b"]).is_empty());
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(matches!(
            TfIdfIndex::build(&ArticleCorpus::default(), TfIdfVariant::default()),
            Err(Error::Index(_))
        ));
    }

    #[test]
    fn rebuild_is_identical_and_json_round_trips() {
        let a = fruit();
        assert_eq!(a, fruit());
        assert_eq!(TfIdfIndex::from_json(&a.to_json()).unwrap(), a);
        assert_eq!(a.content_hash(), fruit().content_hash());
    }

    #[test]
    fn title_is_indexed() {
        let mut c = corpus(&[("x", "plain body"), ("y", "other body")]);
        c.articles.get_mut("x").unwrap().title = "Merlion".into();
        let index = TfIdfIndex::build(&c, TfIdfVariant::default()).unwrap();
        assert_eq!(index.score_utterance(&["merlion"])[0].0, "x");
    }

    #[test]
    fn ties_prefer_smaller_id() {
        let index = TfIdfIndex::build(&corpus(&[("b", "x y"), ("a", "x z"), ("c", "q")]), TfIdfVariant::default()).unwrap();
        let ranked = index.score_utterance(&["x"]);
        assert_eq!(ranked.iter().map(|r| r.0).collect::<Vec<_>>(), ["a", "b"]);
    }

    #[test]
    fn dedupe_knob() {
        let c = corpus(&[("d1", "apple banana"), ("d2", "cherry")]);
        let plain = TfIdfIndex::build(&c, TfIdfVariant::default()).unwrap();
        let dedupe = TfIdfIndex::build(&c, TfIdfVariant { dedupe_query: true, ..Default::default() }).unwrap();
        let q = ["apple", "apple"];
        assert_eq!(plain.score_utterance(&q)[0].1, 2.0 * 2f64.ln());
        assert_eq!(dedupe.score_utterance(&q)[0].1, 2f64.ln());
    }

    #[test]
    fn idf_non_increasing_in_df() {
        for variant in [
            TfIdfVariant::default(),
            TfIdfVariant { idf: IdfScheme::Smooth, ..Default::default() },
        ] {
            for df in 1..50 {
                assert!(variant.idf(50, df + 1) <= variant.idf(50, df));
            }
        }
        for tf in [TfScheme::Raw, TfScheme::Log, TfScheme::Binary] {
            let v = TfIdfVariant { tf, ..Default::default() };
            for c in 1..30 {
                assert!(v.tf_weight(c + 1) >= v.tf_weight(c));
            }
        }
    }

    fn words() -> impl Strategy<Value = Vec<String>> {
        prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "e", "f"]).prop_map(String::from), 1..12)
    }

    proptest! {
        #[test]
        fn ranking_is_bag_of_words(docs in prop::collection::vec(words(), 2..8), query in words(), seed in any::<u64>()) {
            let texts: Vec<(String, String)> = docs.iter().enumerate().map(|(i, d)| (format!("d{i}"), d.join(" "))).collect();
            let c = corpus(&texts.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect::<Vec<_>>());
            let index = TfIdfIndex::build(&c, TfIdfVariant::default()).unwrap();
            let mut shuffled = query.clone();
            use rand::{seq::SliceRandom, SeedableRng};
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(index.score_utterance(&query), index.score_utterance(&shuffled));
        }

        #[test]
        fn disjoint_article_never_ranks(docs in prop::collection::vec(words(), 2..8), query in words()) {
            let mut texts: Vec<(String, String)> = docs.iter().enumerate().map(|(i, d)| (format!("d{i}"), d.join(" "))).collect();
            let before = TfIdfIndex::build(&corpus(&texts.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect::<Vec<_>>()), TfIdfVariant::default()).unwrap();
            texts.push(("zz".into(), "unrelated words only".into()));
            let after = TfIdfIndex::build(&corpus(&texts.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect::<Vec<_>>()), TfIdfVariant::default()).unwrap();
            let ids_before: Vec<&str> = before.score_utterance(&query).into_iter().map(|r| r.0).collect();
            let ids_after: Vec<&str> = after.score_utterance(&query).into_iter().map(|r| r.0).collect();
            prop_assert!(!ids_after.contains(&"zz"));
            // A larger N only raises idf, so every previously ranked article stays ranked.
            prop_assert!(ids_before.iter().all(|id| ids_after.contains(id)));
        }
    }
}
