/// Outcome of comparing an analytic gradient with central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Max over compared coordinates of `|a - n| / max(|a|, |n|, 1e-8)`.
    pub max_rel_error: f64,
    pub worst_index: Option<usize>,
    pub checked: usize,
    /// Coordinates where the one-sided slopes disagree, i.e. the step
    /// straddles a kink (ReLU at zero, a max-pool argmax switch).
    pub excluded: Vec<usize>,
}

const KINK_TOLERANCE: f64 = 1e-2;

/// Central-difference check of `analytic` against `loss` around `params`.
pub fn grad_check<F>(mut loss: F, params: &[f64], analytic: &[f64], h: f64) -> GradCheckReport
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(params.len(), analytic.len(), "gradient length mismatch");
    let mut theta = params.to_vec();
    let f0 = loss(&theta);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: None,
        checked: 0,
        excluded: Vec::new(),
    };
    for i in 0..theta.len() {
        let orig = theta[i];
        theta[i] = orig + h;
        let plus = loss(&theta);
        theta[i] = orig - h;
        let minus = loss(&theta);
        theta[i] = orig;

        let forward = (plus - f0) / h;
        let backward = (f0 - minus) / h;
        if (forward - backward).abs() > KINK_TOLERANCE * forward.abs().max(backward.abs()).max(1.0) {
            report.excluded.push(i);
            continue;
        }
        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        report.checked += 1;
        if report.worst_index.is_none() || rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_index = Some(i);
        }
    }
    report
}
