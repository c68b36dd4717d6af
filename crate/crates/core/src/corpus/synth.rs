//! Synthetic dialogue and article corpora.
//!
//! Each domain owns a disjoint pool of words, and each article owns a
//! disjoint set of keywords inside its domain's pool, so TF-IDF resolves a
//! content utterance to the article it was sampled from. Optional follow-up
//! utterances consist only of filler words and inherit the domain and topic
//! of the utterance two turns earlier, which only a model with dialogue
//! history can recover.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::{Article, ArticleCorpus, DialogueCorpus, Session, Speaker, Utterance};

/// Domain label mix of the TourSG transcripts, in percent.
pub const TOURSG_DOMAINS: [(&str, f64); 9] = [
    ("ATTRACTION", 39.2),
    ("TRANSPORTATION", 13.0),
    ("OTHER", 12.7),
    ("FOOD", 12.4),
    ("ACCOMMODATION", 11.3),
    ("SHOPPING", 5.7),
    ("ITINERARY", 2.3),
    ("CLOSING", 1.7),
    ("OPENING", 1.6),
];

const FILLER: [&str; 12] = [
    "okay", "yes", "yah", "right", "so", "the", "and", "uh", "um", "is", "a", "to",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Domain labels with relative proportions (normalized internally).
    pub domains: Vec<(String, f64)>,
    /// Articles are assigned to domains round-robin.
    pub articles: usize,
    pub keywords_per_article: usize,
    pub domain_words: usize,
    pub article_len: usize,
    pub sessions: usize,
    pub utterances_per_session: usize,
    pub utterance_len: (usize, usize),
    /// Share of content-utterance tokens drawn from the topic's keywords;
    /// the rest split between domain words and filler.
    pub keyword_share: f64,
    /// Share of article tokens drawn from the article's own keywords.
    pub article_purity: f64,
    /// Probability that an utterance is a filler-only follow-up of the
    /// utterance two turns back.
    pub followup_rate: f64,
    /// Length range of same-domain runs.
    pub run_len: (usize, usize),
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            domains: TOURSG_DOMAINS
                .iter()
                .map(|&(d, p)| (d.to_string(), p))
                .collect(),
            articles: 27,
            keywords_per_article: 8,
            domain_words: 6,
            article_len: 80,
            sessions: 4,
            utterances_per_session: 100,
            utterance_len: (3, 9),
            keyword_share: 0.5,
            article_purity: 0.6,
            followup_rate: 0.0,
            run_len: (3, 12),
        }
    }
}

impl SynthConfig {
    /// `n` domains named `D0..`, equal proportions.
    pub fn uniform_domains(n: usize) -> Vec<(String, f64)> {
        (0..n).map(|i| (format!("D{i}"), 1.0)).collect()
    }

    fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("synthetic corpus: {m}")));
        if self.domains.is_empty() {
            return fail("at least one domain required");
        }
        if self.domains.iter().any(|(_, p)| !(p.is_finite() && *p >= 0.0))
            || self.domains.iter().map(|(_, p)| p).sum::<f64>() <= 0.0
        {
            return fail("domain proportions must be non-negative with a positive sum");
        }
        if self.articles < self.domains.len() {
            return fail("need at least one article per domain");
        }
        if self.keywords_per_article == 0 || self.article_len == 0 {
            return fail("articles need keywords and a positive length");
        }
        if self.sessions == 0 || self.utterances_per_session == 0 {
            return fail("need at least one non-empty session");
        }
        if self.utterance_len.0 == 0 || self.utterance_len.0 > self.utterance_len.1 {
            return fail("utterance length range must be 1 <= min <= max");
        }
        if self.run_len.0 == 0 || self.run_len.0 > self.run_len.1 {
            return fail("run length range must be 1 <= min <= max");
        }
        for p in [self.keyword_share, self.article_purity, self.followup_rate] {
            if !(0.0..=1.0).contains(&p) {
                return fail("shares and rates must lie in [0, 1]");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub dialogues: DialogueCorpus,
    pub articles: ArticleCorpus,
    /// Generating article of each utterance, in corpus order.
    pub topics: Vec<String>,
}

struct Vocab {
    domain_words: Vec<Vec<String>>,
    keywords: Vec<Vec<String>>,
    article_domain: Vec<usize>,
}

fn stem(label: &str, index: usize) -> String {
    let s: String = label
        .chars()
        .filter(|c| c.is_alphanumeric())
        .take(4)
        .collect::<String>()
        .to_lowercase();
    format!("{s}{index}")
}

fn article_id(a: usize) -> String {
    format!("art{a:03}")
}

/// Exact label counts by largest remainder.
fn label_counts(props: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = props.iter().sum();
    let quotas: Vec<f64> = props.iter().map(|p| p / sum * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..props.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let assigned: usize = counts.iter().sum();
    for &i in order.iter().take(total - assigned) {
        counts[i] += 1;
    }
    counts
}

pub fn generate_synthetic(cfg: &SynthConfig, seed: u64) -> Result<SyntheticData> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_domains = cfg.domains.len();

    let vocab = Vocab {
        domain_words: (0..n_domains)
            .map(|d| {
                (0..cfg.domain_words)
                    .map(|j| format!("{}w{j}", stem(&cfg.domains[d].0, d)))
                    .collect()
            })
            .collect(),
        keywords: (0..cfg.articles)
            .map(|a| {
                let d = a % n_domains;
                (0..cfg.keywords_per_article)
                    .map(|j| format!("{}a{a}k{j}", stem(&cfg.domains[d].0, d)))
                    .collect()
            })
            .collect(),
        article_domain: (0..cfg.articles).map(|a| a % n_domains).collect(),
    };

    let mut articles = ArticleCorpus::default();
    for a in 0..cfg.articles {
        let d = vocab.article_domain[a];
        let words: Vec<&str> = (0..cfg.article_len)
            .map(|_| {
                if rng.gen_bool(cfg.article_purity) {
                    vocab.keywords[a].choose(&mut rng).unwrap().as_str()
                } else if !vocab.domain_words[d].is_empty() && rng.gen_bool(0.5) {
                    vocab.domain_words[d].choose(&mut rng).unwrap().as_str()
                } else {
                    *FILLER.choose(&mut rng).unwrap()
                }
            })
            .collect();
        let title = format!("{} article {a}", cfg.domains[d].0.to_lowercase());
        articles
            .articles
            .insert(article_id(a), Article::new(title, words.join(" ")));
    }

    let total = cfg.sessions * cfg.utterances_per_session;
    let props: Vec<f64> = cfg.domains.iter().map(|(_, p)| *p).collect();
    let mut runs: Vec<Vec<usize>> = Vec::new();
    for (d, count) in label_counts(&props, total).into_iter().enumerate() {
        let mut left = count;
        while left > 0 {
            let len = rng.gen_range(cfg.run_len.0..=cfg.run_len.1).min(left);
            runs.push(vec![d; len]);
            left -= len;
        }
    }
    runs.shuffle(&mut rng);
    let labels: Vec<usize> = runs.into_iter().flatten().collect();

    let articles_of: Vec<Vec<usize>> = (0..n_domains)
        .map(|d| (0..cfg.articles).filter(|&a| vocab.article_domain[a] == d).collect())
        .collect();

    let mut sessions = Vec::with_capacity(cfg.sessions);
    let mut topics = Vec::with_capacity(total);
    for s in 0..cfg.sessions {
        let session_id = format!("session{s:03}");
        // (domain, article, is_followup) per turn.
        let mut turns: Vec<(usize, usize, bool)> = Vec::with_capacity(cfg.utterances_per_session);
        let mut utterances = Vec::with_capacity(cfg.utterances_per_session);
        for i in 0..cfg.utterances_per_session {
            let followup = cfg.followup_rate > 0.0
                && i >= 2
                && !turns[i - 2].2
                && rng.gen_bool(cfg.followup_rate);
            let (domain, article) = if followup {
                (turns[i - 2].0, turns[i - 2].1)
            } else {
                let d = labels[s * cfg.utterances_per_session + i];
                (d, *articles_of[d].choose(&mut rng).unwrap())
            };
            turns.push((domain, article, followup));

            let len = rng.gen_range(cfg.utterance_len.0..=cfg.utterance_len.1);
            let mut words: Vec<&str> = Vec::with_capacity(len);
            if followup {
                words.extend((0..len).map(|_| *FILLER.choose(&mut rng).unwrap()));
            } else {
                // At least one keyword, so retrieval can identify the topic.
                words.push(vocab.keywords[article].choose(&mut rng).unwrap());
                for _ in 1..len {
                    let w = if rng.gen_bool(cfg.keyword_share) {
                        vocab.keywords[article].choose(&mut rng).unwrap().as_str()
                    } else if !vocab.domain_words[domain].is_empty() && rng.gen_bool(0.5) {
                        vocab.domain_words[domain].choose(&mut rng).unwrap().as_str()
                    } else {
                        FILLER.choose(&mut rng).unwrap()
                    };
                    words.push(w);
                }
                words.shuffle(&mut rng);
            }
            let speaker = if rng.gen_bool(0.5) {
                Speaker::Guide
            } else {
                Speaker::Tourist
            };
            utterances.push(Utterance {
                session_id: session_id.clone(),
                index_in_session: i,
                speaker,
                text: words.join(" "),
                domain: cfg.domains[domain].0.clone(),
                token_ids: Vec::new(),
            });
            topics.push(article_id(article));
        }
        sessions.push(Session {
            id: session_id,
            utterances,
        });
    }

    Ok(SyntheticData {
        dialogues: DialogueCorpus {
            sessions,
            domain_set: cfg.domains.iter().map(|(d, _)| d.clone()).collect(),
        },
        articles,
        topics,
    })
}
