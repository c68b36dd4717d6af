use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::UtteranceSeq;
use crate::doc2vec::TopicEmbeddingSpace;
use crate::error::{Error, Result};
use crate::fsutil;

use super::{TfIdfIndex, TfIdfVariant};

pub const TARGETS_VERSION: u32 = 1;
const TARGETS_FORMAT: &str = "dialtrack-targets";

/// Regression target of one utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    /// Top-ranked articles, best first.
    pub articles: Vec<String>,
    pub scores: Vec<f64>,
    /// Mean of the articles' embeddings.
    pub embedding: Vec<f64>,
}

/// Targets keyed by global sequence position. Positions without an entry are
/// untargeted and contribute no regression loss.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetAssignment {
    pub dim: usize,
    pub k: usize,
    pub variant: TfIdfVariant,
    pub index_hash: String,
    pub space_hash: String,
    pub targets: BTreeMap<usize, Target>,
}

impl TargetAssignment {
    pub fn get(&self, pos: usize) -> Option<&Target> {
        self.targets.get(&pos)
    }

    pub fn gold_article(&self, pos: usize) -> Option<&str> {
        self.get(pos).and_then(|t| t.articles.first()).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Merges several assignments over disjoint positions (e.g. the three splits).
    pub fn merged(parts: &[&TargetAssignment]) -> Result<TargetAssignment> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Consistency("nothing to merge".into()))?;
        let mut out = TargetAssignment {
            targets: BTreeMap::new(),
            ..(*first).clone()
        };
        for p in parts {
            if p.dim != first.dim || p.k != first.k {
                return Err(Error::Consistency("target assignments disagree in shape".into()));
            }
            out.targets.extend(p.targets.iter().map(|(k, v)| (*k, v.clone())));
        }
        Ok(out)
    }

    /// One article per position taken directly as the target (k = 1).
    pub fn from_articles(space: &TopicEmbeddingSpace, gold: &BTreeMap<usize, String>) -> Result<Self> {
        let mut targets = BTreeMap::new();
        for (&pos, id) in gold {
            let e = space
                .embedding(id)
                .ok_or_else(|| Error::Consistency(format!("article {id} has no embedding")))?;
            targets.insert(
                pos,
                Target {
                    articles: vec![id.clone()],
                    scores: vec![1.0],
                    embedding: e.to_vec(),
                },
            );
        }
        Ok(TargetAssignment {
            dim: space.dim(),
            k: 1,
            variant: TfIdfVariant::default(),
            index_hash: String::new(),
            space_hash: space.content_hash(),
            targets,
        })
    }
}

/// Ranks every real utterance of `seq` and averages the embeddings of its
/// top `k` articles.
pub fn assign_targets(
    index: &TfIdfIndex,
    space: &TopicEmbeddingSpace,
    seq: &UtteranceSeq,
    k: usize,
) -> Result<TargetAssignment> {
    if k == 0 {
        return Err(Error::Config("top-k must be at least 1".into()));
    }
    let dim = space.dim();
    let mut targets = BTreeMap::new();
    for (pos, utt) in seq.real() {
        let tokens = crate::corpus::tokenize(&utt.text);
        let ranked = index.score_utterance(&tokens);
        if ranked.is_empty() {
            continue;
        }
        let top = &ranked[..ranked.len().min(k)];
        let mut mean = vec![0.0; dim];
        for (id, _) in top {
            let e = space
                .embedding(id)
                .ok_or_else(|| Error::Consistency(format!("article {id} is indexed but has no embedding")))?;
            mean.iter_mut().zip(e).for_each(|(m, x)| *m += x);
        }
        if top.len() > 1 {
            let n = top.len() as f64;
            mean.iter_mut().for_each(|m| *m /= n);
        }
        targets.insert(
            pos,
            Target {
                articles: top.iter().map(|(id, _)| id.to_string()).collect(),
                scores: top.iter().map(|&(_, s)| s).collect(),
                embedding: mean,
            },
        );
    }
    Ok(TargetAssignment {
        dim,
        k,
        variant: index.variant(),
        index_hash: index.content_hash(),
        space_hash: space.content_hash(),
        targets,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    #[serde(rename = "K")]
    dim: usize,
    k: usize,
    variant: TfIdfVariant,
    index_hash: String,
    space_hash: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    pos: usize,
    articles: Vec<String>,
    scores: Vec<f64>,
    target: Vec<f64>,
}

pub fn targets_to_jsonl(ta: &TargetAssignment) -> String {
    let header = Header {
        format: TARGETS_FORMAT.into(),
        version: TARGETS_VERSION,
        dim: ta.dim,
        k: ta.k,
        variant: ta.variant,
        index_hash: ta.index_hash.clone(),
        space_hash: ta.space_hash.clone(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for (&pos, t) in &ta.targets {
        let rec = Record {
            pos,
            articles: t.articles.clone(),
            scores: t.scores.clone(),
            target: t.embedding.clone(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
        out.push('\n');
    }
    out
}

/// Parses a target file. With a space, every referenced article must exist
/// in it and the widths must agree.
pub fn targets_from_jsonl(text: &str, space: Option<&TopicEmbeddingSpace>) -> Result<TargetAssignment> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines
        .next()
        .ok_or_else(|| Error::Format("target file is empty".into()))?;
    let header: Header =
        serde_json::from_str(first).map_err(|e| Error::Format(format!("target header: {e}")))?;
    if header.format != TARGETS_FORMAT || header.version != TARGETS_VERSION {
        return Err(Error::Format(format!(
            "unsupported target file {} v{} (expected {TARGETS_FORMAT} v{TARGETS_VERSION})",
            header.format, header.version
        )));
    }
    if let Some(space) = space {
        if space.dim() != header.dim {
            return Err(Error::Consistency(format!(
                "targets have width {} but the space has {}",
                header.dim,
                space.dim()
            )));
        }
    }
    let mut targets = BTreeMap::new();
    for (i, line) in lines {
        let rec: Record = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        if rec.target.len() != header.dim
            || rec.articles.len() != rec.scores.len()
            || rec.articles.is_empty()
            || rec.articles.len() > header.k
        {
            return Err(Error::Parse {
                line: i + 1,
                msg: "target record shape disagrees with header".into(),
            });
        }
        if let Some(space) = space {
            if let Some(missing) = rec.articles.iter().find(|a| space.embedding(a).is_none()) {
                return Err(Error::Consistency(format!("target references unknown article {missing}")));
            }
        }
        targets.insert(
            rec.pos,
            Target {
                articles: rec.articles,
                scores: rec.scores,
                embedding: rec.target,
            },
        );
    }
    Ok(TargetAssignment {
        dim: header.dim,
        k: header.k,
        variant: header.variant,
        index_hash: header.index_hash,
        space_hash: header.space_hash,
        targets,
    })
}

pub fn dump_targets(ta: &TargetAssignment, path: &Path) -> Result<()> {
    fsutil::write_atomic(path, targets_to_jsonl(ta).as_bytes())
}

pub fn load_targets(path: &Path, space: Option<&TopicEmbeddingSpace>) -> Result<TargetAssignment> {
    targets_from_jsonl(&fsutil::read_to_string(path)?, space)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Article, ArticleCorpus, Slot, Speaker, Utterance};
    use crate::numcore::Matrix;

    fn space(vectors: &[(&str, Vec<f64>)]) -> TopicEmbeddingSpace {
        let ids = vectors.iter().map(|(id, _)| id.to_string()).collect();
        let titles = vectors.iter().map(|(id, _)| format!("title {id}")).collect();
        let rows: Vec<Vec<f64>> = vectors.iter().map(|(_, v)| v.clone()).collect();
        TopicEmbeddingSpace::from_vectors(ids, titles, Matrix::from_rows(&rows).unwrap()).unwrap()
    }

    fn seq(texts: &[&str]) -> UtteranceSeq {
        UtteranceSeq {
            start: 0,
            slots: texts
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    Slot::Utt(Utterance {
                        session_id: "s".into(),
                        index_in_session: i,
                        speaker: Speaker::Guide,
                        text: t.to_string(),
                        domain: "A".into(),
                        token_ids: Vec::new(),
                    })
                })
                .collect(),
        }
    }

    fn fixture() -> (TfIdfIndex, TopicEmbeddingSpace) {
        let articles = ArticleCorpus {
            articles: [("a", "apple banana"), ("b", "apple apple cherry"), ("c", "durian")]
                .iter()
                .map(|(id, t)| (id.to_string(), Article::new("", *t)))
                .collect(),
            dropped_short: 0,
        };
        let index = TfIdfIndex::build(&articles, TfIdfVariant::default()).unwrap();
        let sp = space(&[("a", vec![0.0, 0.0]), ("b", vec![2.0, 4.0]), ("c", vec![9.0, 9.0])]);
        (index, sp)
    }

    #[test]
    fn top1_is_the_embedding_and_top2_the_mean() {
        let (index, sp) = fixture();
        let s = seq(&["apple", "zzz"]);
        let t1 = assign_targets(&index, &sp, &s, 1).unwrap();
        assert_eq!(t1.get(0).unwrap().articles, vec!["b"]);
        assert_eq!(t1.get(0).unwrap().embedding, vec![2.0, 4.0]);
        assert!(t1.get(1).is_none(), "all-OOV utterance is untargeted");

        let t2 = assign_targets(&index, &sp, &s, 2).unwrap();
        let t = t2.get(0).unwrap();
        assert_eq!(t.articles, vec!["b", "a"]);
        assert_eq!(t.embedding, vec![1.0, 2.0]);
        assert!(t.scores[0] >= t.scores[1]);
    }

    #[test]
    fn missing_embedding_is_a_consistency_error() {
        let (index, _) = fixture();
        let sp = space(&[("a", vec![0.0, 0.0])]);
        let r = assign_targets(&index, &sp, &seq(&["apple"]), 1);
        assert!(matches!(r, Err(Error::Consistency(_))));
    }

    #[test]
    fn round_trip() {
        let (index, sp) = fixture();
        let ta = assign_targets(&index, &sp, &seq(&["apple banana", "durian", "q"]), 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("targets.jsonl");
        dump_targets(&ta, &p).unwrap();
        assert_eq!(load_targets(&p, Some(&sp)).unwrap(), ta);

        let empty = assign_targets(&index, &sp, &seq(&["zz"]), 1).unwrap();
        assert!(empty.is_empty());
        assert_eq!(targets_from_jsonl(&targets_to_jsonl(&empty), None).unwrap(), empty);
    }

    #[test]
    fn load_checks_articles_and_version() {
        let (index, sp) = fixture();
        let ta = assign_targets(&index, &sp, &seq(&["durian"]), 1).unwrap();
        let text = targets_to_jsonl(&ta);
        let small = space(&[("a", vec![0.0, 0.0])]);
        assert!(matches!(targets_from_jsonl(&text, Some(&small)), Err(Error::Consistency(_))));
        let bumped = text.replacen("\"version\":1", "\"version\":2", 1);
        assert!(matches!(targets_from_jsonl(&bumped, None), Err(Error::Format(_))));
    }
}
