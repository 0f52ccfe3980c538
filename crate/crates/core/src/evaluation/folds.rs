//! Leave-patients-out cross-validation plans.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;

pub const FOLD_COUNT: usize = 6;
pub const TEST_PATIENTS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub test_patients: Vec<String>,
    pub train_patients: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub seed: u64,
    pub folds: Vec<Fold>,
}

impl FoldPlan {
    /// Index of the fold whose test set holds `patient`.
    pub fn fold_of(&self, patient: &str) -> Option<usize> {
        self.folds
            .iter()
            .position(|f| f.test_patients.iter().any(|p| p == patient))
    }
}

/// Six folds of four test patients each over exactly 24 patients.
pub fn make_folds<S: AsRef<str>>(patients: &[S], seed: u64) -> Result<FoldPlan, EvalError> {
    make_folds_with(patients, FOLD_COUNT, TEST_PATIENTS, seed)
}

/// `folds` groups of `test_size` patients; the patient count must equal
/// `folds * test_size`. The sorted ids are shuffled with a seeded ChaCha8
/// generator and cut into consecutive groups.
pub fn make_folds_with<S: AsRef<str>>(
    patients: &[S],
    folds: usize,
    test_size: usize,
    seed: u64,
) -> Result<FoldPlan, EvalError> {
    if folds == 0 || test_size == 0 {
        return Err(EvalError::Plan(
            "fold count and test size must be positive".into(),
        ));
    }
    let unique: BTreeSet<&str> = patients.iter().map(|p| p.as_ref()).collect();
    if unique.len() != patients.len() {
        return Err(EvalError::Plan("patient ids are not distinct".into()));
    }
    if patients.len() != folds * test_size {
        return Err(EvalError::Plan(format!(
            "{} patients cannot form {folds} folds of {test_size}",
            patients.len()
        )));
    }
    let mut ids: Vec<String> = unique.into_iter().map(str::to_owned).collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let folds = ids
        .chunks(test_size)
        .map(|test| {
            let mut test_patients = test.to_vec();
            test_patients.sort();
            let mut train_patients: Vec<String> =
                ids.iter().filter(|p| !test.contains(p)).cloned().collect();
            train_patients.sort();
            Fold {
                test_patients,
                train_patients,
            }
        })
        .collect();
    Ok(FoldPlan { seed, folds })
}
