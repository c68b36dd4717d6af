use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label-by-label counts, rows indexed by truth and columns by prediction.
/// Stored sparsely so large label sets (one per article) stay cheap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "CmRepr", try_from = "CmRepr")]
pub struct ConfusionMatrix {
    labels: Vec<String>,
    counts: BTreeMap<(usize, usize), u64>,
    total: u64,
}

#[derive(Serialize, Deserialize)]
struct CmRepr {
    labels: Vec<String>,
    /// `[truth, predicted, count]` triples.
    entries: Vec<[u64; 3]>,
}

impl From<ConfusionMatrix> for CmRepr {
    fn from(cm: ConfusionMatrix) -> Self {
        CmRepr {
            entries: cm
                .counts
                .iter()
                .map(|(&(t, p), &c)| [t as u64, p as u64, c])
                .collect(),
            labels: cm.labels,
        }
    }
}

impl TryFrom<CmRepr> for ConfusionMatrix {
    type Error = Error;

    fn try_from(r: CmRepr) -> Result<Self> {
        let mut cm = ConfusionMatrix::new(r.labels);
        let n = cm.labels.len() as u64;
        for [t, p, c] in r.entries {
            if t >= n || p >= n {
                return Err(Error::Format("confusion entry outside the label set".into()));
            }
            cm.add_count(t as usize, p as usize, c);
        }
        Ok(cm)
    }
}

/// Per-class one-vs-rest counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClassCounts {
    pub true_positive: u64,
    /// Row sum: how often the class is the truth.
    pub support: u64,
    /// Column sum: how often the class is predicted.
    pub predicted: u64,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>) -> Self {
        ConfusionMatrix {
            labels,
            counts: BTreeMap::new(),
            total: 0,
        }
    }

    /// Dense constructor; `rows[t][p]` counts truth `t` predicted as `p`.
    pub fn from_dense(labels: Vec<String>, rows: &[Vec<u64>]) -> Result<Self> {
        let n = labels.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("confusion matrix must be square over its labels".into()));
        }
        let mut cm = ConfusionMatrix::new(labels);
        for (t, row) in rows.iter().enumerate() {
            for (p, &c) in row.iter().enumerate() {
                cm.add_count(t, p, c);
            }
        }
        Ok(cm)
    }

    /// Builds the label set from the sorted union of both columns.
    pub fn from_pairs<'a, I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let pairs: Vec<(&str, &str)> = pairs.into_iter().collect();
        let mut labels: Vec<String> = pairs
            .iter()
            .flat_map(|&(t, p)| [t, p])
            .map(str::to_string)
            .collect();
        labels.sort();
        labels.dedup();
        let mut cm = ConfusionMatrix::new(labels);
        for (t, p) in pairs {
            let ti = cm.index(t).expect("label collected");
            let pi = cm.index(p).expect("label collected");
            cm.add(ti, pi);
        }
        cm
    }

    pub fn add(&mut self, truth: usize, predicted: usize) {
        self.add_count(truth, predicted, 1);
    }

    fn add_count(&mut self, truth: usize, predicted: usize, count: u64) {
        assert!(truth < self.labels.len() && predicted < self.labels.len());
        if count > 0 {
            *self.counts.entry((truth, predicted)).or_default() += count;
            self.total += count;
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index(&self, label: &str) -> Option<usize> {
        self.labels.binary_search_by(|l| l.as_str().cmp(label)).ok().or_else(|| {
            // Domain label sets keep declaration order and need not be sorted.
            self.labels.iter().position(|l| l == label)
        })
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts.get(&(truth, predicted)).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn correct(&self) -> u64 {
        self.counts
            .iter()
            .filter(|((t, p), _)| t == p)
            .map(|(_, c)| c)
            .sum()
    }

    /// Non-zero cells in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.counts.iter().map(|(&(t, p), &c)| (t, p, c))
    }

    pub fn class_counts(&self) -> Vec<ClassCounts> {
        let mut out = vec![ClassCounts::default(); self.labels.len()];
        for (&(t, p), &c) in &self.counts {
            out[t].support += c;
            out[p].predicted += c;
            if t == p {
                out[t].true_positive += c;
            }
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<u64>> {
        let n = self.labels.len();
        let mut rows = vec![vec![0; n]; n];
        for (&(t, p), &c) in &self.counts {
            rows[t][p] = c;
        }
        rows
    }
}
