//! Per-fold scoring of raw and smoothed series and cross-fold summaries.

use std::io::Write;

use log::warn;
use serde::{Deserialize, Serialize};

use super::folds::FoldPlan;
use super::metrics::{
    auc_pr, auc_roc, best_f1_threshold, confusion, f1_precision_recall, ConfusionCounts,
};
use super::EvalError;

/// Metrics of one score series against the labels. Ranking metrics are
/// `None` when the labels hold a single class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMetrics {
    pub auc_roc: Option<f64>,
    pub auc_pr: Option<f64>,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub confusion: ConfusionCounts,
    pub best_threshold: f64,
    pub best_f1: f64,
}

fn undefined_as_none(r: Result<f64, EvalError>, what: &str) -> Result<Option<f64>, EvalError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(EvalError::SingleClass(_)) => {
            warn!("{what} undefined: labels hold a single class");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

pub fn evaluate_series(
    scores: &[f64],
    truth: &[u8],
    threshold: f64,
) -> Result<SeriesMetrics, EvalError> {
    let pred: Vec<u8> = scores.iter().map(|&s| u8::from(s > threshold)).collect();
    let c = confusion(&pred, truth)?;
    let (f1, precision, recall) = f1_precision_recall(&c);
    let (best_threshold, best_f1) = best_f1_threshold(scores, truth)?;
    Ok(SeriesMetrics {
        auc_roc: undefined_as_none(auc_roc(scores, truth), "AUC-ROC")?,
        auc_pr: undefined_as_none(auc_pr(scores, truth), "AUC-PR")?,
        f1,
        precision,
        recall,
        confusion: c,
        best_threshold,
        best_f1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub test_patients: Vec<String>,
    pub blocks: usize,
    pub positives: usize,
    pub raw: SeriesMetrics,
    pub smoothed: SeriesMetrics,
}

/// Scores the classifier output and the smoothed marginals of one fold's
/// pooled test blocks.
pub fn evaluate_fold(
    fold: usize,
    test_patients: &[String],
    raw: &[f64],
    smoothed: &[f64],
    truth: &[u8],
    threshold: f64,
) -> Result<FoldResult, EvalError> {
    if raw.len() != smoothed.len() {
        return Err(EvalError::Length {
            left: raw.len(),
            right: smoothed.len(),
        });
    }
    Ok(FoldResult {
        fold,
        test_patients: test_patients.to_vec(),
        blocks: truth.len(),
        positives: truth.iter().filter(|&&t| t != 0).count(),
        raw: evaluate_series(raw, truth, threshold)?,
        smoothed: evaluate_series(smoothed, truth, threshold)?,
    })
}

/// Mean and sample standard deviation over folds, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub folds: usize,
}

impl MeanStd {
    fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(MeanStd {
            mean: 100.0 * mean,
            std: 100.0 * std,
            folds: values.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub auc_roc: Option<MeanStd>,
    pub auc_pr: Option<MeanStd>,
    pub f1: Option<MeanStd>,
    pub precision: Option<MeanStd>,
    pub recall: Option<MeanStd>,
}

fn summarize_series<'a>(series: impl Iterator<Item = &'a SeriesMetrics> + Clone) -> SeriesSummary {
    let col = |f: fn(&SeriesMetrics) -> Option<f64>| {
        MeanStd::of(&series.clone().filter_map(f).collect::<Vec<_>>())
    };
    SeriesSummary {
        auc_roc: col(|m| m.auc_roc),
        auc_pr: col(|m| m.auc_pr),
        f1: col(|m| Some(m.f1)),
        precision: col(|m| Some(m.precision)),
        recall: col(|m| Some(m.recall)),
    }
}

/// `(raw, smoothed)` summaries; folds with an undefined metric are left out
/// of that metric's statistics.
pub fn summarize(folds: &[FoldResult]) -> (SeriesSummary, SeriesSummary) {
    (
        summarize_series(folds.iter().map(|f| &f.raw)),
        summarize_series(folds.iter().map(|f| &f.smoothed)),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlopRow {
    pub model: String,
    pub source: String,
    pub mflops: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tool_version: String,
    pub config_hash: String,
    pub threshold: f64,
    pub plan: FoldPlan,
    pub folds: Vec<FoldResult>,
    pub raw: SeriesSummary,
    pub smoothed: SeriesSummary,
    pub flops: Vec<FlopRow>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per fold and series.
pub fn write_fold_csv<W: Write>(writer: W, folds: &[FoldResult]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "fold",
        "series",
        "test_patients",
        "blocks",
        "positives",
        "auc_roc",
        "auc_pr",
        "f1",
        "precision",
        "recall",
        "tp",
        "fp",
        "tn",
        "fn",
        "best_threshold",
        "best_f1",
    ])?;
    for f in folds {
        for (name, m) in [("raw", &f.raw), ("smoothed", &f.smoothed)] {
            let c = m.confusion;
            w.write_record([
                f.fold.to_string(),
                name.to_string(),
                f.test_patients.join(" "),
                f.blocks.to_string(),
                f.positives.to_string(),
                opt(m.auc_roc),
                opt(m.auc_pr),
                m.f1.to_string(),
                m.precision.to_string(),
                m.recall.to_string(),
                c.tp.to_string(),
                c.fp.to_string(),
                c.tn.to_string(),
                c.fn_.to_string(),
                m.best_threshold.to_string(),
                m.best_f1.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One fold's curve for one series: `(fold, series, points)`.
pub type Curve<'a> = (usize, &'a str, Vec<(f64, f64)>);

/// Curve points as `fold,series,<x>,<y>` rows.
pub fn write_curve_csv<W: Write>(
    writer: W,
    x_name: &str,
    y_name: &str,
    curves: &[Curve<'_>],
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["fold", "series", x_name, y_name])?;
    for (fold, series, points) in curves {
        for (x, y) in points {
            w.write_record([
                fold.to_string(),
                series.to_string(),
                x.to_string(),
                y.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_fold_scores_one() {
        let truth = [0, 0, 1, 1, 0, 1];
        let scores = [0.1, 0.2, 0.9, 0.8, 0.05, 0.7];
        let r = evaluate_fold(0, &["a".into()], &scores, &scores, &truth, 0.5).unwrap();
        for m in [&r.raw, &r.smoothed] {
            assert_eq!(m.auc_roc, Some(1.0));
            assert_eq!(m.auc_pr, Some(1.0));
            assert_eq!((m.f1, m.precision, m.recall), (1.0, 1.0, 1.0));
        }
        let (raw, _) = summarize(&[r]);
        assert_eq!(
            raw.f1.unwrap(),
            MeanStd {
                mean: 100.0,
                std: 0.0,
                folds: 1
            }
        );
    }

    #[test]
    fn single_class_fold_gives_null_ranking_metrics() {
        let m = evaluate_series(&[0.2, 0.7], &[0, 0], 0.5).unwrap();
        assert_eq!((m.auc_roc, m.auc_pr), (None, None));
        assert_eq!(m.confusion.fp, 1);
    }

    #[test]
    fn sample_std() {
        let s = MeanStd::of(&[0.5, 0.7]).unwrap();
        assert!((s.mean - 60.0).abs() < 1e-12);
        assert!((s.std - 100.0 * 0.02f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn fold_csv_has_two_rows_per_fold() {
        let truth = [0, 1];
        let r = evaluate_fold(3, &["a".into()], &[0.1, 0.9], &[0.2, 0.8], &truth, 0.5).unwrap();
        let mut buf = Vec::new();
        write_fold_csv(&mut buf, &[r]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text
            .lines()
            .nth(2)
            .unwrap()
            .starts_with("3,smoothed,a,2,1,1,1,"));
    }
}
