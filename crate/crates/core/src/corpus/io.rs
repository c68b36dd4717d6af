use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;

use super::{Article, ArticleCorpus, DialogueCorpus, Session, Speaker, Utterance};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UtteranceRecord {
    session: String,
    turn: usize,
    speaker: Speaker,
    text: String,
    domain: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainHeader {
    domains: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct ArticleRecord {
    id: String,
    title: String,
    text: String,
}

pub fn load_dialogues(path: &Path) -> Result<DialogueCorpus> {
    parse_dialogues(&fsutil::read_to_string(path)?)
}

/// Parses dialogue JSONL. Blank lines are skipped; line numbers in errors are
/// 1-based.
pub fn parse_dialogues(text: &str) -> Result<DialogueCorpus> {
    let mut declared: Option<Vec<String>> = None;
    let mut sessions: Vec<Session> = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    let mut seen_record = false;

    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        if !seen_record {
            seen_record = true;
            if let Ok(header) = serde_json::from_str::<DomainHeader>(line) {
                let unique: BTreeSet<&String> = header.domains.iter().collect();
                if unique.len() != header.domains.len() {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: "duplicate label in domain header".into(),
                    });
                }
                declared = Some(header.domains);
                continue;
            }
        }
        let record: UtteranceRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        if let Some(domains) = &declared {
            if !domains.contains(&record.domain) {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("domain `{}` not in declared label set", record.domain),
                });
            }
        }
        let idx = *by_id.entry(record.session.clone()).or_insert_with(|| {
            sessions.push(Session {
                id: record.session.clone(),
                utterances: Vec::new(),
            });
            sessions.len() - 1
        });
        sessions[idx].utterances.push(Utterance {
            session_id: record.session,
            index_in_session: record.turn,
            speaker: record.speaker,
            text: record.text,
            domain: record.domain,
            token_ids: Vec::new(),
        });
    }

    if sessions.is_empty() {
        return Err(Error::EmptyCorpus("dialogue file has no utterances".into()));
    }
    let domain_set = match declared {
        Some(d) => d,
        None => sessions
            .iter()
            .flat_map(|s| s.utterances.iter().map(|u| u.domain.clone()))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
    };
    if domain_set.len() < 2 {
        return Err(Error::Consistency(format!(
            "need at least 2 domains, found {}",
            domain_set.len()
        )));
    }
    Ok(DialogueCorpus {
        sessions,
        domain_set,
    })
}

/// Serializes a corpus as dialogue JSONL, header record first.
pub fn write_dialogues(corpus: &DialogueCorpus) -> String {
    let mut out = serde_json::json!({ "domains": corpus.domain_set }).to_string();
    out.push('\n');
    for utt in corpus.utterances() {
        let record = UtteranceRecord {
            session: utt.session_id.clone(),
            turn: utt.index_in_session,
            speaker: utt.speaker,
            text: utt.text.clone(),
            domain: utt.domain.clone(),
        };
        out.push_str(&serde_json::to_string(&record).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn load_articles(path: &Path, min_words: usize) -> Result<ArticleCorpus> {
    let corpus = parse_articles(&fsutil::read_to_string(path)?, min_words)?;
    log::info!(
        "{}: kept {} articles, dropped {} shorter than {min_words} words",
        path.display(),
        corpus.len(),
        corpus.dropped_short
    );
    Ok(corpus)
}

/// Parses article JSONL, keeping articles with at least `min_words` body
/// tokens.
pub fn parse_articles(text: &str, min_words: usize) -> Result<ArticleCorpus> {
    let mut articles = BTreeMap::new();
    let mut seen = BTreeSet::new();
    let mut dropped_short = 0;
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: ArticleRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: n + 1,
            msg: e.to_string(),
        })?;
        if record.id.is_empty() || record.id.chars().any(char::is_whitespace) {
            return Err(Error::Parse {
                line: n + 1,
                msg: format!("article id `{}` must be non-empty without whitespace", record.id),
            });
        }
        if !seen.insert(record.id.clone()) {
            return Err(Error::DuplicateArticle(record.id));
        }
        let article = Article::new(record.title, record.text);
        if article.word_count < min_words {
            dropped_short += 1;
            continue;
        }
        articles.insert(record.id, article);
    }
    Ok(ArticleCorpus {
        articles,
        dropped_short,
    })
}

pub fn write_articles(corpus: &ArticleCorpus) -> String {
    let mut out = String::new();
    for (id, article) in &corpus.articles {
        let record = ArticleRecord {
            id: id.clone(),
            title: article.title.clone(),
            text: article.text.clone(),
        };
        out.push_str(&serde_json::to_string(&record).expect("record serializes"));
        out.push('\n');
    }
    out
}
