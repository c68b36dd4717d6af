//! Nearest-neighbour topic resolution, multi-class metrics and reports.

mod confusion;
mod metrics;
mod render;

use serde::{Deserialize, Serialize};

use crate::corpus::UtteranceSeq;
use crate::doc2vec::{Metric, TopicEmbeddingSpace};
use crate::error::{Error, Result};
use crate::models::Tracker;
use crate::tfidf::TargetAssignment;

pub use confusion::{ClassCounts, ConfusionMatrix};
pub use metrics::{metrics, per_domain_breakdown, Averaging, BreakdownRow, Metrics, TaskMetrics};
pub use render::{render_comparison, render_predictions, render_report, ReportFormat};

pub const REPORT_VERSION: u32 = 1;

/// Nearest article to a predicted embedding by Euclidean distance.
pub fn topic_label<'a>(prediction: &[f64], space: &'a TopicEmbeddingSpace) -> Option<(&'a str, f64)> {
    space.nearest(prediction, Metric::Euclidean)
}

/// What a model said about one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct UtterancePrediction {
    pub pos: usize,
    pub domain: usize,
    pub article: String,
    pub distance: f64,
}

/// One line of the per-utterance dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub pos: usize,
    pub session: String,
    pub speaker: String,
    pub text: String,
    pub actual_domain: String,
    pub predicted_domain: String,
    pub actual_topic: Option<String>,
    pub actual_title: Option<String>,
    pub predicted_topic: String,
    pub predicted_title: Option<String>,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub version: u32,
    pub model: String,
    /// Averaging shown in summary tables; all three are always stored.
    pub averaging: Averaging,
    pub utterances: usize,
    pub targeted: usize,
    pub domain: TaskMetrics,
    pub topic: Option<TaskMetrics>,
    pub domain_confusion: ConfusionMatrix,
    pub topic_confusion: Option<ConfusionMatrix>,
    pub breakdown: Vec<BreakdownRow>,
    pub predictions: Vec<PredictionRow>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: EvalReport = serde_json::from_str(text).map_err(|e| Error::Format(format!("report: {e}")))?;
        if r.version != REPORT_VERSION {
            return Err(Error::Format(format!("report version {} is not {REPORT_VERSION}", r.version)));
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    pub averaging: Averaging,
    /// Resolve topics among these articles only instead of the whole space.
    pub candidates: Option<Vec<String>>,
}

/// Scores `preds` against gold domains and targets. Untargeted utterances
/// count toward domain metrics only.
pub fn evaluate_predictions(
    model: &str,
    domains: &[String],
    seq: &UtteranceSeq,
    targets: &TargetAssignment,
    space: Option<&TopicEmbeddingSpace>,
    preds: &[UtterancePrediction],
    averaging: Averaging,
) -> Result<EvalReport> {
    if preds.is_empty() {
        return Err(Error::EmptyCorpus("nothing to evaluate".into()));
    }
    let by_pos: std::collections::HashMap<usize, &crate::corpus::Utterance> = seq.real().collect();
    let mut domain_cm = ConfusionMatrix::new(domains.to_vec());
    let mut topic_pairs: Vec<(&str, &str)> = Vec::new();
    let mut rows = Vec::with_capacity(preds.len());
    let title = |id: &str| space.and_then(|s| s.title(id)).map(str::to_string);
    for p in preds {
        let utt = by_pos
            .get(&p.pos)
            .ok_or_else(|| Error::Consistency(format!("prediction for position {} has no utterance", p.pos)))?;
        let truth = domains
            .iter()
            .position(|d| *d == utt.domain)
            .ok_or_else(|| Error::Consistency(format!("unknown domain {}", utt.domain)))?;
        if p.domain >= domains.len() {
            return Err(Error::Consistency(format!("predicted domain index {} out of range", p.domain)));
        }
        domain_cm.add(truth, p.domain);
        let gold = targets.gold_article(p.pos);
        if let Some(g) = gold {
            topic_pairs.push((g, p.article.as_str()));
        }
        rows.push(PredictionRow {
            pos: p.pos,
            session: utt.session_id.clone(),
            speaker: utt.speaker.as_str().to_string(),
            text: utt.text.clone(),
            actual_domain: utt.domain.clone(),
            predicted_domain: domains[p.domain].clone(),
            actual_topic: gold.map(str::to_string),
            actual_title: gold.and_then(&title),
            predicted_topic: p.article.clone(),
            predicted_title: title(&p.article),
            distance: p.distance,
        });
    }
    let targeted = topic_pairs.len();
    let topic_cm = (!topic_pairs.is_empty()).then(|| ConfusionMatrix::from_pairs(topic_pairs));
    Ok(EvalReport {
        version: REPORT_VERSION,
        model: model.to_string(),
        averaging,
        utterances: preds.len(),
        targeted,
        domain: TaskMetrics::from_confusion(&domain_cm),
        topic: topic_cm.as_ref().map(TaskMetrics::from_confusion),
        breakdown: per_domain_breakdown(&domain_cm),
        domain_confusion: domain_cm,
        topic_confusion: topic_cm,
        predictions: rows,
    })
}

/// Runs `tracker` over `seq` and scores it.
pub fn evaluate(
    tracker: &Tracker,
    seq: &UtteranceSeq,
    targets: &TargetAssignment,
    space: &TopicEmbeddingSpace,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let preds = tracker.predict_sequence(seq, space, opts.candidates.as_deref())?;
    evaluate_predictions(
        &tracker.name(),
        tracker.domains(),
        seq,
        targets,
        Some(space),
        &preds,
        opts.averaging,
    )
}
