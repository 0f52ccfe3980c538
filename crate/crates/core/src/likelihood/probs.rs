//! Per-block probability series and their CSV interchange form
//! (`patient_id,file_id,start_s,probability`).

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::LikelihoodError;
use crate::inference::Evidence;
use crate::preprocess::{BlockKey, ManifestRow};

/// Evidence values are kept at least this far from 0 and 1.
pub const EVIDENCE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityRow {
    pub patient_id: String,
    pub file_id: String,
    pub start_s: f64,
    pub probability: f64,
}

impl ProbabilityRow {
    pub fn key(&self) -> BlockKey {
        BlockKey::new(&self.file_id, self.start_s)
    }
}

/// Seizure probabilities for a sequence of blocks, in manifest order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProbabilitySeries {
    pub rows: Vec<ProbabilityRow>,
}

impl ProbabilitySeries {
    pub fn from_values(values: &[f64]) -> Result<Self, LikelihoodError> {
        let rows = values
            .iter()
            .enumerate()
            .map(|(i, &probability)| {
                check_range(probability, i + 1)?;
                Ok(ProbabilityRow {
                    patient_id: String::new(),
                    file_id: String::new(),
                    start_s: i as f64,
                    probability,
                })
            })
            .collect::<Result<_, LikelihoodError>>()?;
        Ok(ProbabilitySeries { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.probability).collect()
    }
}

fn check_range(p: f64, row: usize) -> Result<(), LikelihoodError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(LikelihoodError::Range { row, value: p })
    }
}

/// Reads a probability CSV, checking every value lies in `[0, 1]`.
/// Row numbers in errors count data rows from 1.
pub fn read_probability_csv(
    path: impl AsRef<Path>,
) -> Result<Vec<ProbabilityRow>, LikelihoodError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| LikelihoodError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut rows = Vec::new();
    for (i, rec) in csv::Reader::from_reader(file).deserialize().enumerate() {
        let row: ProbabilityRow = rec?;
        check_range(row.probability, i + 1)?;
        rows.push(row);
    }
    Ok(rows)
}

/// Loads a probability CSV and aligns it to `manifest` by
/// `(file_id, start_s)`. Every manifest block must appear exactly once and
/// no other blocks may appear.
pub fn load_probabilities(
    path: impl AsRef<Path>,
    manifest: &[ManifestRow],
) -> Result<ProbabilitySeries, LikelihoodError> {
    align(read_probability_csv(path)?, manifest)
}

pub fn align(
    rows: Vec<ProbabilityRow>,
    manifest: &[ManifestRow],
) -> Result<ProbabilitySeries, LikelihoodError> {
    let mut by_key: HashMap<BlockKey, ProbabilityRow> = HashMap::with_capacity(rows.len());
    for row in rows {
        let key = row.key();
        if by_key.insert(key.clone(), row).is_some() {
            return Err(LikelihoodError::Duplicate(key.to_string()));
        }
    }
    let mut out = Vec::with_capacity(manifest.len());
    for m in manifest {
        let key = m.key();
        match by_key.remove(&key) {
            Some(mut row) => {
                row.patient_id = m.patient_id.clone();
                out.push(row);
            }
            None => return Err(LikelihoodError::Missing(key.to_string())),
        }
    }
    if let Some(extra) = by_key.keys().min() {
        return Err(LikelihoodError::Unexpected(extra.to_string()));
    }
    Ok(ProbabilitySeries { rows: out })
}

pub fn write_probabilities<W: Write>(
    writer: W,
    rows: &[ProbabilityRow],
) -> Result<(), LikelihoodError> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|source| LikelihoodError::Io {
        path: "<probabilities>".into(),
        source,
    })
}

/// Uses a classifier output directly as the evidence pair
/// `(P(y | s = 0), P(y | s = 1)) = (1 - q, q)`, clamped to
/// `[EVIDENCE_EPS, 1 - EVIDENCE_EPS]` so no message can become exactly zero.
pub fn evidence_from_probability(q: f64) -> Evidence {
    let q = q.clamp(0.0, 1.0);
    let clamp = |v: f64| v.clamp(EVIDENCE_EPS, 1.0 - EVIDENCE_EPS);
    Evidence::new(clamp(1.0 - q), clamp(q))
}
