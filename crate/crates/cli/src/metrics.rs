use serde::{Deserialize, Serialize};

use crate::generate::Truth;
use crate::run::RunSummary;
use crate::{CliError, Result};

/// Support recovery of the Fréchet-mean estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionMetrics {
    /// Fraction of true zeros estimated as non-zero.
    pub fpr: f64,
    /// Fraction of true non-zeros estimated as zero.
    pub fnr: f64,
    pub n_selected: usize,
    pub n_true: usize,
}

/// Compares two supports of equal length. A rate with an empty reference
/// class is 0.
pub fn selection_rates(estimate: &[bool], truth: &[bool]) -> Result<SelectionMetrics> {
    if estimate.len() != truth.len() {
        return Err(CliError::Data(format!("estimated support has length {} but the truth has {}", estimate.len(), truth.len())));
    }
    let (mut fp, mut fneg, mut zeros, mut nonzeros) = (0usize, 0usize, 0usize, 0usize);
    for (&e, &t) in estimate.iter().zip(truth) {
        if t {
            nonzeros += 1;
            fneg += usize::from(!e);
        } else {
            zeros += 1;
            fp += usize::from(e);
        }
    }
    let rate = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    Ok(SelectionMetrics {
        fpr: rate(fp, zeros),
        fnr: rate(fneg, nonzeros),
        n_selected: estimate.iter().filter(|&&e| e).count(),
        n_true: nonzeros,
    })
}

/// FPR and FNR of the summary's Fréchet-mean support against the generator's truth.
pub fn compute_selection_metrics(summary: &RunSummary, truth: &Truth) -> Result<SelectionMetrics> {
    if summary.model != truth.model {
        return Err(CliError::Data(format!("summary is for {} but the truth is for {}", summary.model, truth.model)));
    }
    let support = truth
        .support
        .as_deref()
        .ok_or_else(|| CliError::Data(format!("the {} truth has no support to compare against", truth.model)))?;
    selection_rates(&summary.selection_support, support)
}

/// `(name, value)` rows for `metrics.csv`.
pub fn metric_rows(summary: &RunSummary, truth: &Truth, coverage: Option<f64>) -> Result<Vec<(String, f64)>> {
    let mut rows = Vec::new();
    if truth.support.is_some() {
        let m = compute_selection_metrics(summary, truth)?;
        rows.push(("fpr".into(), m.fpr));
        rows.push(("fnr".into(), m.fnr));
        rows.push(("n_selected".into(), m.n_selected as f64));
    }
    rows.push(("cardinality_mode".into(), summary.cardinality_mode as f64));
    rows.push(("true_cardinality".into(), truth.cardinality as f64));
    if let Some(c) = coverage {
        rows.push(("coverage_95".into(), c));
    }
    Ok(rows)
}

/// Renders rows as a two-column CSV with header `metric,value`.
pub fn render_metrics_csv(rows: &[(String, f64)]) -> String {
    let mut out = String::from("metric,value\n");
    for (name, value) in rows {
        out.push_str(&format!("{name},{value:?}\n"));
    }
    out
}
