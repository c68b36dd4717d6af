use serde::{Deserialize, Serialize};

use super::confusion::{ClassCounts, ConfusionMatrix};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    Micro,
    Macro,
    #[default]
    Weighted,
}

/// Accuracy, F1, precision and recall as fractions in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub(crate) fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub(crate) fn class_prf(c: &ClassCounts) -> (f64, f64, f64) {
    let p = ratio(c.true_positive, c.predicted);
    let r = ratio(c.true_positive, c.support);
    (p, r, f1(p, r))
}

/// Multi-class metrics.
///
/// Micro averaging pools counts, so precision, recall and F1 all equal
/// accuracy. Macro averaging is the unweighted mean over every class that
/// occurs as truth or prediction. Weighted averaging weights classes by
/// support; its recall is the pooled `Σ tp / N`, which is accuracy.
/// Precision with nothing predicted is 0, as is F1 when `P + R = 0`.
pub fn metrics(cm: &ConfusionMatrix, averaging: Averaging) -> Metrics {
    let n = cm.total();
    let correct = cm.correct();
    let accuracy = ratio(correct, n);
    let classes = cm.class_counts();
    match averaging {
        Averaging::Micro => Metrics {
            accuracy,
            f1: accuracy,
            precision: accuracy,
            recall: accuracy,
        },
        Averaging::Macro => {
            let active: Vec<&ClassCounts> = classes.iter().filter(|c| c.support + c.predicted > 0).collect();
            let k = active.len().max(1) as f64;
            let (mut p, mut r, mut f) = (0.0, 0.0, 0.0);
            for c in active {
                let (cp, cr, cf) = class_prf(c);
                p += cp;
                r += cr;
                f += cf;
            }
            Metrics {
                accuracy,
                f1: f / k,
                precision: p / k,
                recall: r / k,
            }
        }
        Averaging::Weighted => {
            let (mut p, mut f) = (0.0, 0.0);
            for c in classes.iter().filter(|c| c.support > 0) {
                let (cp, _, cf) = class_prf(c);
                p += c.support as f64 * cp;
                f += c.support as f64 * cf;
            }
            let total = n.max(1) as f64;
            Metrics {
                accuracy,
                f1: f / total,
                precision: p / total,
                recall: accuracy,
            }
        }
    }
}

/// All three averagings of one confusion matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub micro: Metrics,
    #[serde(rename = "macro")]
    pub macro_avg: Metrics,
    pub weighted: Metrics,
}

impl TaskMetrics {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Self {
        TaskMetrics {
            micro: metrics(cm, Averaging::Micro),
            macro_avg: metrics(cm, Averaging::Macro),
            weighted: metrics(cm, Averaging::Weighted),
        }
    }

    pub fn get(&self, averaging: Averaging) -> &Metrics {
        match averaging {
            Averaging::Micro => &self.micro,
            Averaging::Macro => &self.macro_avg,
            Averaging::Weighted => &self.weighted,
        }
    }
}

/// One-vs-rest row for one domain. All fields are `None` when the class
/// never occurs as truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownRow {
    pub label: String,
    pub support: u64,
    /// Class recall.
    pub accuracy: Option<f64>,
    pub f1: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

pub fn per_domain_breakdown(cm: &ConfusionMatrix) -> Vec<BreakdownRow> {
    cm.class_counts()
        .iter()
        .zip(cm.labels())
        .map(|(c, label)| {
            let present = c.support > 0;
            let (p, r, f) = class_prf(c);
            let some = |v: f64| present.then_some(v);
            BreakdownRow {
                label: label.clone(),
                support: c.support,
                accuracy: some(r),
                f1: some(f),
                precision: some(p),
                recall: some(r),
            }
        })
        .collect()
}
