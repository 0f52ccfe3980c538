use std::collections::VecDeque;

use super::messages::{backward_step, combine, first_forward, forward_step, last_backward};
use super::{Evidence, InferenceError, MessageVector, TransitionModel};

/// Fixed-lag smoother for online use.
///
/// The marginal of block `k` is released once block `k + lag` has arrived
/// and conditions on evidence up to that block only, so it approximates the
/// offline marginal (which sees the whole recording). [`flush`] releases
/// the trailing blocks exactly. With `lag >= N - 1` the output equals
/// offline smoothing; with `lag == 0` it is the causal filter.
///
/// [`flush`]: FixedLagSmoother::flush
#[derive(Debug, Clone)]
pub struct FixedLagSmoother {
    transition: TransitionModel,
    matrix: [[f64; 2]; 2],
    lag: usize,
    newest: Option<MessageVector>,
    /// Filtered messages and evidence of blocks not yet released.
    pending: VecDeque<(MessageVector, Evidence)>,
    seen: usize,
    released: usize,
}

impl FixedLagSmoother {
    pub fn new(transition: TransitionModel, lag: usize) -> Self {
        FixedLagSmoother {
            matrix: transition.matrix(),
            transition,
            lag,
            newest: None,
            pending: VecDeque::with_capacity(lag + 1),
            seen: 0,
            released: 0,
        }
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    /// Adds the next block's evidence; returns `(index, marginal)` of the
    /// block that becomes final, if any.
    pub fn push(&mut self, evidence: Evidence) -> Result<Option<(usize, f64)>, InferenceError> {
        evidence.check(self.seen)?;
        let alpha = match &self.newest {
            Some(prev) => forward_step(prev, &evidence, &self.matrix),
            None => first_forward(&evidence, &self.transition),
        };
        self.newest = Some(alpha);
        self.pending.push_back((alpha, evidence));
        self.seen += 1;
        if self.pending.len() <= self.lag {
            return Ok(None);
        }
        let m = self.marginals(1)[0];
        self.pending.pop_front();
        let index = self.released;
        self.released += 1;
        Ok(Some((index, m)))
    }

    /// Marginals of the oldest `count` pending blocks given all buffered
    /// evidence.
    fn marginals(&self, count: usize) -> Vec<f64> {
        let n = self.pending.len();
        if n == 0 {
            return Vec::new();
        }
        let mut betas = vec![last_backward(); n];
        for i in (0..n - 1).rev() {
            betas[i] = backward_step(&betas[i + 1], &self.pending[i + 1].1, &self.matrix);
        }
        (0..count.min(n))
            .map(|i| combine(&self.pending[i].0, &betas[i]))
            .collect()
    }

    /// Releases every pending block, conditioning on all evidence seen.
    pub fn flush(&mut self) -> Vec<(usize, f64)> {
        let out: Vec<(usize, f64)> = self
            .marginals(self.pending.len())
            .into_iter()
            .enumerate()
            .map(|(i, m)| (self.released + i, m))
            .collect();
        self.released += out.len();
        self.pending.clear();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::smooth_evidence;
    use crate::likelihood::evidence_from_probability;

    fn run(qs: &[f64], lag: usize) -> Vec<f64> {
        let mut s = FixedLagSmoother::new(TransitionModel::default(), lag);
        let mut out = Vec::new();
        for &q in qs {
            if let Some((i, m)) = s.push(evidence_from_probability(q)).unwrap() {
                assert_eq!(i, out.len());
                out.push(m);
            }
        }
        for (i, m) in s.flush() {
            assert_eq!(i, out.len());
            out.push(m);
        }
        out
    }

    const QS: [f64; 9] = [0.1, 0.2, 0.9, 0.8, 0.3, 0.95, 0.1, 0.05, 0.6];

    #[test]
    fn long_lag_equals_offline() {
        let ev: Vec<_> = QS.iter().map(|&q| evidence_from_probability(q)).collect();
        let offline = smooth_evidence(&ev, &TransitionModel::default()).unwrap();
        for lag in [8, 9, 50] {
            let online = run(&QS, lag);
            for (a, b) in online.iter().zip(&offline) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_lag_is_causal_filter() {
        let t = TransitionModel::default();
        let ev: Vec<_> = QS.iter().map(|&q| evidence_from_probability(q)).collect();
        let alphas = crate::inference::forward_messages(&ev, &t).unwrap();
        let online = run(&QS, 0);
        for (a, m) in alphas.iter().zip(&online) {
            assert!((a.values[1] - m).abs() < 1e-12);
        }
    }

    #[test]
    fn error_shrinks_with_lag() {
        let ev: Vec<_> = QS.iter().map(|&q| evidence_from_probability(q)).collect();
        let offline = smooth_evidence(&ev, &TransitionModel::default()).unwrap();
        let err = |lag| {
            run(&QS, lag)
                .iter()
                .zip(&offline)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        assert!(err(0) > err(2));
        assert!(err(2) >= err(5));
    }
}
