use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{make_windows, UtteranceSeq};
use crate::doc2vec::{Metric, TopicEmbeddingSpace};
use crate::error::{Error, Result};
use crate::eval::UtterancePrediction;
use crate::seed;

use super::{ModelKind, Tracker, WindowInput};

/// Rolling history of one live dialogue.
#[derive(Debug, Clone)]
pub struct SessionState {
    history: VecDeque<WindowInput>,
    capacity: usize,
    rng: ChaCha8Rng,
    master: u64,
}

impl SessionState {
    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    /// Forgets the history and restarts the random stream.
    pub fn reset(&mut self) {
        self.history.clear();
        self.rng = seed::rng(self.master, "random-baseline");
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamPrediction {
    pub domain: String,
    pub article: String,
    pub title: String,
    pub distance: f64,
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Article positions to search, or all of them.
fn candidate_positions(space: &TopicEmbeddingSpace, candidates: Option<&[String]>) -> Result<Vec<usize>> {
    match candidates {
        None => Ok((0..space.len()).collect()),
        Some(ids) => {
            let mut pos = ids
                .iter()
                .map(|id| {
                    space
                        .position(id)
                        .ok_or_else(|| Error::Consistency(format!("candidate {id} is not in the space")))
                })
                .collect::<Result<Vec<_>>>()?;
            pos.sort_unstable();
            pos.dedup();
            Ok(pos)
        }
    }
}

impl Tracker {
    pub fn new_session(&self) -> SessionState {
        SessionState {
            history: VecDeque::new(),
            capacity: self.config.window.saturating_sub(1),
            rng: seed::rng(self.seed, "random-baseline"),
            master: self.seed,
        }
    }

    /// One uniform draw of a domain index and an article.
    pub fn random_predict<R: Rng>(&self, rng: &mut R) -> (usize, &str) {
        let d = rng.gen_range(0..self.domains.len());
        let a = rng.gen_range(0..self.random_articles.len());
        (d, self.random_articles[a].as_str())
    }

    fn resolve(&self, topic: &[f64], space: &TopicEmbeddingSpace, cands: &[usize]) -> Result<(String, f64)> {
        space
            .nearest_among(topic, Metric::Euclidean, cands.iter().copied())
            .map(|(id, d)| (id.to_string(), d))
            .ok_or_else(|| Error::EmptyCorpus("no candidate articles".into()))
    }

    /// Labels the next utterance of a live session and appends it to the
    /// history.
    pub fn predict_stream(
        &self,
        state: &mut SessionState,
        text: &str,
        space: &TopicEmbeddingSpace,
    ) -> Result<StreamPrediction> {
        let (domain, article, distance) = if self.kind == ModelKind::Random {
            let (d, a) = self.random_predict(&mut state.rng);
            (d, a.to_string(), 0.0)
        } else {
            let current = self.encode_text(text);
            let pad = state.capacity - state.history.len();
            let window: Vec<Option<&WindowInput>> = std::iter::repeat_n(None, pad)
                .chain(state.history.iter().map(Some))
                .chain(std::iter::once(Some(&current)))
                .collect();
            let out = self.forward_window(&window)?;
            let cands: Vec<usize> = (0..space.len()).collect();
            let (article, distance) = self.resolve(&out.topic, space, &cands)?;
            if state.capacity > 0 {
                if state.history.len() == state.capacity {
                    state.history.pop_front();
                }
                state.history.push_back(current);
            }
            (argmax(&out.domain_probs), article, distance)
        };
        Ok(StreamPrediction {
            domain: self.domains[domain].clone(),
            title: space.title(&article).unwrap_or_default().to_string(),
            article,
            distance,
        })
    }

    /// Predictions for every real utterance of `seq` from left-padded
    /// windows within the sequence.
    pub fn predict_sequence(
        &self,
        seq: &UtteranceSeq,
        space: &TopicEmbeddingSpace,
        candidates: Option<&[String]>,
    ) -> Result<Vec<UtterancePrediction>> {
        if self.kind == ModelKind::Random {
            let mut rng = seed::rng(self.seed, "random-baseline");
            return Ok(seq
                .real()
                .map(|(pos, _)| {
                    let (domain, article) = self.random_predict(&mut rng);
                    UtterancePrediction {
                        pos,
                        domain,
                        article: article.to_string(),
                        distance: 0.0,
                    }
                })
                .collect());
        }
        let cands = candidate_positions(space, candidates)?;
        let inputs = self.encode_seq(seq);
        let mut out = Vec::new();
        for w in make_windows(seq, self.config.window) {
            let window = Self::window_inputs(&inputs, &w.slots);
            let o = self.forward_window(&window)?;
            let (article, distance) = self.resolve(&o.topic, space, &cands)?;
            out.push(UtterancePrediction {
                pos: seq.start + w.target,
                domain: argmax(&o.domain_probs),
                article,
                distance,
            });
        }
        Ok(out)
    }

    /// Encodes every slot of `seq`; NULL slots stay `None`.
    pub(crate) fn encode_seq(&self, seq: &UtteranceSeq) -> Vec<Option<WindowInput>> {
        seq.slots
            .iter()
            .map(|s| s.utterance().map(|u| self.encode_text(&u.text)))
            .collect()
    }

    pub(crate) fn window_inputs<'a>(inputs: &'a [Option<WindowInput>], slots: &[Option<usize>]) -> Vec<Option<&'a WindowInput>> {
        slots
            .iter()
            .map(|s| s.and_then(|i| inputs[i].as_ref()))
            .collect()
    }
}
