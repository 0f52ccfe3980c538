//! Threshold and ranking metrics for binary block labels.

use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

fn check_lengths(a: usize, b: usize) -> Result<(), EvalError> {
    if a != b {
        return Err(EvalError::Length { left: a, right: b });
    }
    if a == 0 {
        return Err(EvalError::Empty);
    }
    Ok(())
}

pub fn confusion(pred: &[u8], truth: &[u8]) -> Result<ConfusionCounts, EvalError> {
    check_lengths(pred.len(), truth.len())?;
    let mut c = ConfusionCounts::default();
    for (&p, &t) in pred.iter().zip(truth) {
        match (p != 0, t != 0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `(f1, precision, recall)`, with every `0/0` taken as 0.
pub fn f1_precision_recall(c: &ConfusionCounts) -> (f64, f64, f64) {
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (f1, precision, recall)
}

/// `(score, tp, fp)` points, then the positive and negative totals.
type Sweep = (Vec<(f64, u64, u64)>, u64, u64);

/// Cumulative `(tp, fp)` after admitting each distinct score, highest first.
fn sweep(scores: &[f64], truth: &[u8]) -> Result<Sweep, EvalError> {
    check_lengths(scores.len(), truth.len())?;
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(EvalError::Invalid(format!("score {i} is NaN")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let positives = truth.iter().filter(|&&t| t != 0).count() as u64;
    let negatives = truth.len() as u64 - positives;
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut points = Vec::new();
    for (k, &i) in order.iter().enumerate() {
        if truth[i] != 0 {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_tie = order.get(k + 1).is_none_or(|&j| scores[j] != scores[i]);
        if last_of_tie {
            points.push((scores[i], tp, fp));
        }
    }
    Ok((points, positives, negatives))
}

/// ROC polyline `(fpr, tpr)` from `(0, 0)` to `(1, 1)`, one vertex per
/// distinct score.
pub fn roc_curve(scores: &[f64], truth: &[u8]) -> Result<Vec<(f64, f64)>, EvalError> {
    let (points, pos, neg) = sweep(scores, truth)?;
    if pos == 0 || neg == 0 {
        return Err(EvalError::SingleClass("ROC"));
    }
    let mut out = vec![(0.0, 0.0)];
    out.extend(
        points
            .iter()
            .map(|&(_, tp, fp)| (fp as f64 / neg as f64, tp as f64 / pos as f64)),
    );
    Ok(out)
}

/// Area under the ROC curve by trapezoids over the threshold sweep; equal
/// to `P(score_pos > score_neg) + P(tie) / 2`.
pub fn auc_roc(scores: &[f64], truth: &[u8]) -> Result<f64, EvalError> {
    let (points, pos, neg) = sweep(scores, truth)?;
    if pos == 0 || neg == 0 {
        return Err(EvalError::SingleClass("AUC-ROC"));
    }
    // Twice the area in units of one positive-negative pair, in integers.
    let mut twice_area: u128 = 0;
    let (mut tp0, mut fp0) = (0u64, 0u64);
    for &(_, tp, fp) in &points {
        twice_area += (fp - fp0) as u128 * (tp + tp0) as u128;
        tp0 = tp;
        fp0 = fp;
    }
    Ok(twice_area as f64 / (2.0 * pos as f64 * neg as f64))
}

/// Precision-recall points `(recall, precision)`, one per distinct score.
pub fn pr_curve(scores: &[f64], truth: &[u8]) -> Result<Vec<(f64, f64)>, EvalError> {
    let (points, pos, _) = sweep(scores, truth)?;
    if pos == 0 {
        return Err(EvalError::SingleClass("precision-recall"));
    }
    Ok(points
        .iter()
        .map(|&(_, tp, fp)| (tp as f64 / pos as f64, tp as f64 / (tp + fp) as f64))
        .collect())
}

/// Step-wise area under the precision-recall curve,
/// `sum_k (R_k - R_{k-1}) P_k` over descending thresholds (average precision).
pub fn auc_pr(scores: &[f64], truth: &[u8]) -> Result<f64, EvalError> {
    let curve = pr_curve(scores, truth)?;
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    for (recall, precision) in curve {
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(area)
}

/// Threshold (from the distinct scores and 0) whose strict `score > t`
/// decision maximizes F1; ties go to the higher threshold.
pub fn best_f1_threshold(scores: &[f64], truth: &[u8]) -> Result<(f64, f64), EvalError> {
    let (points, pos, neg) = sweep(scores, truth)?;
    // Predicting positive for `score > t` where t is the k-th distinct score
    // admits exactly the scores above it: points[k - 1].
    let mut best = (f64::NAN, -1.0);
    let mut candidates: Vec<(f64, u64, u64)> = Vec::with_capacity(points.len() + 1);
    for (k, &(s, _, _)) in points.iter().enumerate() {
        let (tp, fp) = if k == 0 {
            (0, 0)
        } else {
            (points[k - 1].1, points[k - 1].2)
        };
        candidates.push((s, tp, fp));
    }
    if points.last().is_some_and(|p| p.0 > 0.0) {
        candidates.push((0.0, pos, neg));
    }
    for (t, tp, fp) in candidates {
        let c = ConfusionCounts {
            tp,
            fp,
            tn: neg - fp,
            fn_: pos - tp,
        };
        let f1 = f1_precision_recall(&c).0;
        if f1 > best.1 {
            best = (t, f1);
        }
    }
    Ok(best)
}
