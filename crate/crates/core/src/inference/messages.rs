use super::{DetectorConfig, Evidence, InferenceError, TransitionModel};
use crate::likelihood::{evidence_from_probability, ProbabilitySeries};

/// FLOPs per block for one forward and one backward message on a binary
/// first-order chain: 2 x (4 multiplications + 2 additions).
pub const FG_FLOPS_PER_BLOCK: u64 = 12;

/// A normalized message over the two states plus the accumulated log of
/// the normalizers divided out so far.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MessageVector {
    pub values: [f64; 2],
    pub log_scale: f64,
}

impl MessageVector {
    fn normalized(raw: [f64; 2], prior_log_scale: f64) -> Self {
        let z = raw[0] + raw[1];
        MessageVector {
            values: [raw[0] / z, raw[1] / z],
            log_scale: prior_log_scale + z.ln(),
        }
    }
}

/// Smoothed posteriors `P(s_k = 1 | y_1..y_N)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MarginalSeries {
    pub values: Vec<f64>,
}

impl MarginalSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_all(evidence: &[Evidence]) -> Result<(), InferenceError> {
    if evidence.is_empty() {
        return Err(InferenceError::Empty);
    }
    evidence
        .iter()
        .enumerate()
        .try_for_each(|(i, e)| e.check(i))
}

/// One forward step: `alpha(s) = e(s) * sum_{s'} P(s | s') alpha_prev(s')`.
#[inline]
pub(crate) fn forward_step(prev: &MessageVector, e: &Evidence, m: &[[f64; 2]; 2]) -> MessageVector {
    let [a0, a1] = prev.values;
    let [e0, e1] = e.pair();
    let raw = [
        e0 * (m[0][0] * a0 + m[1][0] * a1),
        e1 * (m[0][1] * a0 + m[1][1] * a1),
    ];
    MessageVector::normalized(raw, prev.log_scale)
}

/// One backward step: `beta(s) = sum_{s'} P(s' | s) e_next(s') beta_next(s')`.
#[inline]
pub(crate) fn backward_step(
    next: &MessageVector,
    e_next: &Evidence,
    m: &[[f64; 2]; 2],
) -> MessageVector {
    let [e0, e1] = e_next.pair();
    let w = [e0 * next.values[0], e1 * next.values[1]];
    let raw = [
        m[0][0] * w[0] + m[0][1] * w[1],
        m[1][0] * w[0] + m[1][1] * w[1],
    ];
    MessageVector::normalized(raw, next.log_scale)
}

pub(crate) fn first_forward(e: &Evidence, t: &TransitionModel) -> MessageVector {
    let pi = t.initial();
    let [e0, e1] = e.pair();
    MessageVector::normalized([pi[0] * e0, pi[1] * e1], 0.0)
}

pub(crate) fn last_backward() -> MessageVector {
    MessageVector::normalized([1.0, 1.0], 0.0)
}

/// Forward messages `alpha_1..alpha_N`; the final `log_scale` is
/// `log P(y_1..y_N)`.
pub fn forward_messages(
    evidence: &[Evidence],
    t: &TransitionModel,
) -> Result<Vec<MessageVector>, InferenceError> {
    check_all(evidence)?;
    let m = t.matrix();
    let mut out = Vec::with_capacity(evidence.len());
    let mut alpha = first_forward(&evidence[0], t);
    if !(alpha.values[0] + alpha.values[1]).is_finite() {
        return Err(InferenceError::DegenerateEvidence {
            index: 0,
            detail: "evidence is incompatible with the initial distribution".into(),
        });
    }
    out.push(alpha);
    for e in &evidence[1..] {
        alpha = forward_step(&alpha, e, &m);
        out.push(alpha);
    }
    Ok(out)
}

/// Backward messages `beta_1..beta_N`, with `beta_N = (1, 1)` normalized.
pub fn backward_messages(
    evidence: &[Evidence],
    t: &TransitionModel,
) -> Result<Vec<MessageVector>, InferenceError> {
    check_all(evidence)?;
    let m = t.matrix();
    let n = evidence.len();
    let mut out = vec![last_backward(); n];
    for i in (0..n - 1).rev() {
        out[i] = backward_step(&out[i + 1], &evidence[i + 1], &m);
    }
    Ok(out)
}

/// Seizure marginal from a forward and backward message at the same block.
#[inline]
pub(crate) fn combine(alpha: &MessageVector, beta: &MessageVector) -> f64 {
    let p0 = alpha.values[0] * beta.values[0];
    let p1 = alpha.values[1] * beta.values[1];
    p1 / (p0 + p1)
}

/// Smoothed seizure marginals for an evidence sequence.
pub fn smooth_evidence(
    evidence: &[Evidence],
    t: &TransitionModel,
) -> Result<Vec<f64>, InferenceError> {
    let (alphas, betas) = rayon::join(
        || forward_messages(evidence, t),
        || backward_messages(evidence, t),
    );
    let (alphas, betas) = (alphas?, betas?);
    alphas
        .iter()
        .zip(&betas)
        .enumerate()
        .map(|(k, (a, b))| {
            let m = combine(a, b);
            if m.is_finite() {
                Ok(m)
            } else {
                Err(InferenceError::DegenerateEvidence {
                    index: k,
                    detail: "posterior has zero mass (evidence contradicts the chain)".into(),
                })
            }
        })
        .collect()
}

/// Smooths a probability series using the classifier outputs as evidence.
pub fn smooth(
    probs: &ProbabilitySeries,
    t: &TransitionModel,
) -> Result<MarginalSeries, InferenceError> {
    let evidence: Vec<Evidence> = probs
        .rows
        .iter()
        .map(|r| evidence_from_probability(r.probability))
        .collect();
    Ok(MarginalSeries {
        values: smooth_evidence(&evidence, t)?,
    })
}

/// `1` where the marginal strictly exceeds the threshold.
pub fn detect(marginals: &MarginalSeries, cfg: &DetectorConfig) -> Vec<u8> {
    marginals
        .values
        .iter()
        .map(|&m| u8::from(m > cfg.threshold()))
        .collect()
}

/// FLOPs of smoothing `n` blocks.
pub fn fg_flop_count(n: u64) -> Result<u64, InferenceError> {
    if n < 1 {
        return Err(InferenceError::Domain(
            "block count must be at least 1".into(),
        ));
    }
    n.checked_mul(FG_FLOPS_PER_BLOCK)
        .ok_or_else(|| InferenceError::Domain(format!("{n} blocks overflow the FLOP counter")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(qs: &[f64]) -> Vec<Evidence> {
        qs.iter().map(|&q| evidence_from_probability(q)).collect()
    }

    #[test]
    fn single_uninformative_block_keeps_prior() {
        let t = TransitionModel::new(0.1, 0.2, [0.5, 0.5]).unwrap();
        let a = forward_messages(&ev(&[0.5]), &t).unwrap();
        assert_eq!(a[0].values, [0.5, 0.5]);
    }

    #[test]
    fn stationary_prior_is_preserved() {
        let t = TransitionModel::default();
        let a = forward_messages(&ev(&[0.5, 0.5]), &t).unwrap();
        let pi = t.stationary_distribution();
        assert!((a[1].values[0] - pi[0]).abs() < 1e-12);
        assert!((a[1].values[1] - pi[1]).abs() < 1e-12);
    }

    #[test]
    fn backward_boundary_and_uninformative_step() {
        let t = TransitionModel::default();
        let b = backward_messages(&ev(&[0.5, 0.5]), &t).unwrap();
        assert_eq!(b[1].values, [0.5, 0.5]);
        assert!((b[0].values[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_evidence_is_rejected() {
        let t = TransitionModel::default();
        let e = vec![Evidence::new(0.5, 0.5), Evidence::new(0.0, 0.0)];
        assert_eq!(
            forward_messages(&e, &t).unwrap_err(),
            InferenceError::DegenerateEvidence {
                index: 1,
                detail: "both components are zero".into()
            }
        );
        assert!(backward_messages(&e, &t).is_err());
        assert_eq!(smooth_evidence(&[], &t), Err(InferenceError::Empty));
    }

    #[test]
    fn certain_evidence_saturates() {
        let t = TransitionModel::default();
        let m = smooth_evidence(&ev(&[1.0, 1.0, 1.0]), &t).unwrap();
        assert!(m.iter().all(|&v| v >= 1.0 - 1e-6));
    }

    #[test]
    fn detect_is_strict() {
        let cfg = DetectorConfig::new(0.5).unwrap();
        let m = MarginalSeries {
            values: vec![0.6, 0.5, 0.4],
        };
        assert_eq!(detect(&m, &cfg), vec![1, 0, 0]);
        let zero = DetectorConfig::new(0.0).unwrap();
        assert_eq!(detect(&m, &zero), vec![1, 1, 1]);
    }

    #[test]
    fn flop_count() {
        assert_eq!(fg_flop_count(1), Ok(12));
        assert_eq!(fg_flop_count(100), Ok(1200));
        assert!(matches!(fg_flop_count(0), Err(InferenceError::Domain(_))));
    }

    #[test]
    fn forward_scale_is_log_evidence() {
        // Two blocks, hand-summed joint over the four state paths.
        let t = TransitionModel::new(0.2, 0.3, [0.6, 0.4]).unwrap();
        let e = [Evidence::new(0.7, 0.2), Evidence::new(0.1, 0.5)];
        let m = t.matrix();
        let mut total = 0.0;
        for s1 in 0..2 {
            for s2 in 0..2 {
                total += t.initial()[s1] * e[0].pair()[s1] * m[s1][s2] * e[1].pair()[s2];
            }
        }
        let a = forward_messages(&e, &t).unwrap();
        assert!((a[1].log_scale - total.ln()).abs() < 1e-14);
    }
}
