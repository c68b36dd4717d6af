use serde::{Deserialize, Serialize};

use super::{EvalReport, Metrics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Text,
}

fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    let mut out = line(header.to_vec());
    out += &line(rule.iter().map(String::as_str).collect());
    for r in rows {
        out += &line(r.iter().map(String::as_str).collect());
    }
    out
}

fn pct(v: f64) -> String {
    format!("{:.2}", 100.0 * v)
}

fn opt_pct(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), pct)
}

fn metric_cells(m: Option<&Metrics>) -> [String; 4] {
    match m {
        Some(m) => [pct(m.accuracy), pct(m.f1), pct(m.precision), pct(m.recall)],
        None => std::array::from_fn(|_| "n/a".to_string()),
    }
}

/// Model rows with A/F/P/R for domains then topics, each report under its
/// own averaging.
pub fn render_comparison(reports: &[&EvalReport]) -> String {
    let header = [
        "Model", "Domain A", "Domain F", "Domain P", "Domain R", "Topic A", "Topic F", "Topic P", "Topic R",
    ];
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let mut row = vec![r.model.clone()];
            row.extend(metric_cells(Some(r.domain.get(r.averaging))));
            row.extend(metric_cells(r.topic.as_ref().map(|t| t.get(r.averaging))));
            row
        })
        .collect();
    table(&header, &rows)
}

fn render_breakdown(report: &EvalReport) -> String {
    let rows: Vec<Vec<String>> = report
        .breakdown
        .iter()
        .map(|b| {
            vec![
                b.label.clone(),
                b.support.to_string(),
                opt_pct(b.accuracy),
                opt_pct(b.f1),
                opt_pct(b.precision),
                opt_pct(b.recall),
            ]
        })
        .collect();
    table(&["Domain", "N", "A", "F", "P", "R"], &rows)
}

/// Per-utterance dump. Article titles are shown when known, ids otherwise.
pub fn render_predictions(report: &EvalReport) -> String {
    let rows: Vec<Vec<String>> = report
        .predictions
        .iter()
        .map(|p| {
            let actual = p
                .actual_title
                .clone()
                .or_else(|| p.actual_topic.clone())
                .unwrap_or_else(|| "-".to_string());
            let predicted = p.predicted_title.clone().unwrap_or_else(|| p.predicted_topic.clone());
            vec![
                p.text.clone(),
                p.speaker.clone(),
                p.actual_domain.clone(),
                p.predicted_domain.clone(),
                actual,
                predicted,
            ]
        })
        .collect();
    table(
        &["Utterance", "Speaker", "Actual domain", "Predicted domain", "Actual topic", "Predicted topic"],
        &rows,
    )
}

pub fn render_report(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => report.to_json(),
        ReportFormat::Text => {
            let avg = serde_json::to_value(report.averaging).expect("enum serializes");
            format!(
                "{} averaging, {} utterances ({} with topic targets)\n\n{}\n{}",
                avg.as_str().unwrap_or_default(),
                report.utterances,
                report.targeted,
                render_comparison(&[report]),
                render_breakdown(report)
            )
        }
    }
}
