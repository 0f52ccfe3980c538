use serde::{Deserialize, Serialize};

use super::InferenceError;

/// Default probability of entering a seizure from the non-seizure state.
pub const DEFAULT_P01: f64 = 0.1046;
/// Default probability of leaving a seizure.
pub const DEFAULT_P10: f64 = 0.179;

/// Transition probabilities of the two-state chain (0 = non-seizure,
/// 1 = seizure) and the distribution of the first state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionModel {
    p01: f64,
    p10: f64,
    initial: [f64; 2],
}

impl Default for TransitionModel {
    fn default() -> Self {
        TransitionModel::stationary(DEFAULT_P01, DEFAULT_P10).expect("defaults are valid")
    }
}

impl TransitionModel {
    /// A chain started from `initial = (pi0, pi1)`.
    pub fn new(p01: f64, p10: f64, initial: [f64; 2]) -> Result<Self, InferenceError> {
        for (name, p) in [("p01", p01), ("p10", p10)] {
            if !(p > 0.0 && p < 1.0) {
                return Err(InferenceError::InvalidParameter(format!(
                    "{name} = {p} must lie in (0, 1)"
                )));
            }
        }
        if initial.iter().any(|p| !(0.0..=1.0).contains(p))
            || (initial[0] + initial[1] - 1.0).abs() > 1e-9
        {
            return Err(InferenceError::InvalidParameter(format!(
                "initial distribution {initial:?} must be nonnegative and sum to 1"
            )));
        }
        Ok(TransitionModel { p01, p10, initial })
    }

    /// A chain started from its stationary distribution.
    pub fn stationary(p01: f64, p10: f64) -> Result<Self, InferenceError> {
        let probe = TransitionModel::new(p01, p10, [1.0, 0.0])?;
        let pi = probe.stationary_distribution();
        TransitionModel::new(p01, p10, pi)
    }

    pub fn p01(&self) -> f64 {
        self.p01
    }

    pub fn p10(&self) -> f64 {
        self.p10
    }

    pub fn initial(&self) -> [f64; 2] {
        self.initial
    }

    /// `matrix()[from][to] = P(s_i = to | s_{i-1} = from)`.
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [[1.0 - self.p01, self.p01], [self.p10, 1.0 - self.p10]]
    }

    /// The distribution `pi` with `pi = pi P`: `pi1 = p01 / (p01 + p10)`.
    pub fn stationary_distribution(&self) -> [f64; 2] {
        let pi1 = self.p01 / (self.p01 + self.p10);
        [1.0 - pi1, pi1]
    }

    /// The chain with state labels exchanged.
    pub fn swapped(&self) -> Self {
        TransitionModel {
            p01: self.p10,
            p10: self.p01,
            initial: [self.initial[1], self.initial[0]],
        }
    }
}

/// Likelihood pair `(P(y | s = 0), P(y | s = 1))` for one block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evidence([f64; 2]);

impl Evidence {
    pub fn new(given_normal: f64, given_seizure: f64) -> Self {
        Evidence([given_normal, given_seizure])
    }

    pub fn pair(&self) -> [f64; 2] {
        self.0
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Evidence([self.0[0] * factor, self.0[1] * factor])
    }

    pub(crate) fn check(&self, index: usize) -> Result<(), InferenceError> {
        let [a, b] = self.0;
        if !(a.is_finite() && b.is_finite() && a >= 0.0 && b >= 0.0) {
            return Err(InferenceError::DegenerateEvidence {
                index,
                detail: format!("({a}, {b}) must be finite and nonnegative"),
            });
        }
        if a == 0.0 && b == 0.0 {
            return Err(InferenceError::DegenerateEvidence {
                index,
                detail: "both components are zero".into(),
            });
        }
        Ok(())
    }
}

/// Threshold detector: a block is flagged when its seizure marginal
/// strictly exceeds `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    threshold: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig { threshold: 0.5 }
    }
}

impl DetectorConfig {
    pub fn new(threshold: f64) -> Result<Self, InferenceError> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(InferenceError::InvalidParameter(format!(
                "threshold {threshold} must lie in [0, 1]"
            )));
        }
        Ok(DetectorConfig { threshold })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}
