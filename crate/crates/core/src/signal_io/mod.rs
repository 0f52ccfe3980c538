//! Recording I/O: plain EDF files, CHB-MIT style seizure summaries, and
//! selection of the 18-channel bipolar montage.

mod annotations;
mod edf;
mod montage;

pub use annotations::{
    parse_annotations, parse_summary, parse_summary_str, AnnotationError, FileSummary,
    SeizureAnnotation,
};
pub use edf::{read_edf, read_edf_raw, write_edf, Calibration, EdfError, EdfRaw, EdfSignalHeader};
pub use montage::{apply_montage, MontageError, MontageSpec, MONTAGE_SIZE};

/// One named signal of a [`Recording`], in physical units (µV).
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub label: String,
    pub samples: Vec<f64>,
    /// Calibration the samples were decoded with, if they came from an EDF file.
    /// The writer reuses it so digital values survive a round trip unchanged.
    pub calibration: Option<Calibration>,
}

impl Channel {
    pub fn new(label: impl Into<String>, samples: Vec<f64>) -> Self {
        Channel {
            label: label.into(),
            samples,
            calibration: None,
        }
    }
}

/// A multichannel EEG recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub patient_id: String,
    pub file_id: String,
    pub sample_rate: u32,
    pub channels: Vec<Channel>,
}

impl Recording {
    /// Samples per channel (0 for a recording without channels).
    pub fn num_samples(&self) -> usize {
        self.channels.first().map_or(0, |c| c.samples.len())
    }

    pub fn duration_s(&self) -> f64 {
        if self.sample_rate == 0 {
            return 0.0;
        }
        self.num_samples() as f64 / self.sample_rate as f64
    }

    /// Checks the structural invariants: positive rate and equal channel lengths.
    pub fn validate(&self) -> Result<(), String> {
        if self.sample_rate == 0 {
            return Err("sample rate must be positive".into());
        }
        let n = self.num_samples();
        if let Some(c) = self.channels.iter().find(|c| c.samples.len() != n) {
            return Err(format!(
                "channel {:?} has {} samples, expected {}",
                c.label,
                c.samples.len(),
                n
            ));
        }
        Ok(())
    }

    pub fn channel(&self, label: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.label == label)
    }

    /// Copies samples `[start, end)` of every channel into a new recording.
    pub fn slice_samples(&self, start: usize, end: usize) -> Recording {
        Recording {
            patient_id: self.patient_id.clone(),
            file_id: self.file_id.clone(),
            sample_rate: self.sample_rate,
            channels: self
                .channels
                .iter()
                .map(|c| Channel {
                    label: c.label.clone(),
                    samples: c.samples[start..end].to_vec(),
                    calibration: c.calibration,
                })
                .collect(),
        }
    }
}
