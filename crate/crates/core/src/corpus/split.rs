use crate::error::{Error, Result};

use super::{DialogueCorpus, Slot, UtteranceSeq};

/// A window of `slots.len()` consecutive positions ending at `target`.
/// Entries index into the owning [`UtteranceSeq`]; `None` is left padding
/// before the start of the sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextWindow {
    pub slots: Vec<Option<usize>>,
    pub target: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: UtteranceSeq,
    pub val: UtteranceSeq,
    pub test: UtteranceSeq,
}

/// Concatenates sessions in order. With `pad`, `window_len - 1` NULL slots
/// separate consecutive sessions.
pub fn concat(corpus: &DialogueCorpus, pad: bool, window_len: usize) -> UtteranceSeq {
    let mut slots = Vec::with_capacity(corpus.len());
    for (i, session) in corpus.sessions.iter().enumerate() {
        if pad && i > 0 {
            slots.extend(std::iter::repeat_n(Slot::Null, window_len.saturating_sub(1)));
        }
        slots.extend(session.utterances.iter().cloned().map(Slot::Utt));
    }
    UtteranceSeq { start: 0, slots }
}

/// Cuts `seq` at `floor(n * r_train)` and `floor(n * (r_train + r_val))`.
pub fn split(seq: &UtteranceSeq, ratios: [f64; 3]) -> Result<[UtteranceSeq; 3]> {
    if ratios.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::Config(format!("split ratios must be positive: {ratios:?}")));
    }
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split ratios sum to {sum}, expected 1")));
    }
    let n = seq.len();
    let cut = |r: f64| (((n as f64) * r + 1e-9).floor() as usize).min(n);
    let b1 = cut(ratios[0]);
    let b2 = cut(ratios[0] + ratios[1]).max(b1);
    let part = |lo: usize, hi: usize| UtteranceSeq {
        start: seq.start + lo,
        slots: seq.slots[lo..hi].to_vec(),
    };
    Ok([part(0, b1), part(b1, b2), part(b2, n)])
}

pub fn concat_and_split(
    corpus: &DialogueCorpus,
    ratios: [f64; 3],
    pad: bool,
    window_len: usize,
) -> Result<Splits> {
    let [train, val, test] = split(&concat(corpus, pad, window_len), ratios)?;
    Ok(Splits { train, val, test })
}

/// One stride-1 window per non-NULL position, in position order.
///
/// Panics if `window_len` is zero.
pub fn make_windows(seq: &UtteranceSeq, window_len: usize) -> Vec<ContextWindow> {
    assert!(window_len >= 1, "window length must be at least 1");
    seq.slots
        .iter()
        .enumerate()
        .filter(|(_, s)| !matches!(s, Slot::Null))
        .map(|(t, _)| ContextWindow {
            slots: (0..window_len)
                .map(|j| (t + j + 1).checked_sub(window_len))
                .collect(),
            target: t,
        })
        .collect()
}
