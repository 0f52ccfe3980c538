use super::PreprocessError;
use crate::signal_io::{Recording, SeizureAnnotation};

/// Samples per block along the time axis.
pub const BLOCK_LEN: usize = 1024;
/// Channels per block (the bipolar montage).
pub const BLOCK_CHANNELS: usize = 18;
/// Sampling rate blocks are defined at.
pub const BLOCK_RATE: u32 = 256;
pub const WINDOW_S: f64 = 4.0;
pub const STRIDE_S: f64 = 1.0;

/// Seconds of context kept on each side of a seizure, as a multiple of its
/// duration.
const CONTEXT_FACTOR: f64 = 3.0;
/// Minimum seizure overlap, in seconds, for a block to be labelled ictal.
const LABEL_OVERLAP_S: f64 = 2.0;
const TIME_EPS: f64 = 1e-9;

/// A 1024 x 18 window, stored time-major: `samples[t * 18 + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EegBlock {
    pub samples: Vec<f32>,
    pub start_s: f64,
    pub label: u8,
}

impl EegBlock {
    pub fn new(samples: Vec<f32>, start_s: f64, label: u8) -> Result<Self, PreprocessError> {
        if samples.len() != BLOCK_LEN * BLOCK_CHANNELS {
            return Err(PreprocessError::Shape(format!(
                "block has {} values, expected {BLOCK_LEN}x{BLOCK_CHANNELS}",
                samples.len()
            )));
        }
        if label > 1 {
            return Err(PreprocessError::Shape(format!(
                "label {label} is not binary"
            )));
        }
        Ok(EegBlock {
            samples,
            start_s,
            label,
        })
    }

    pub fn at(&self, t: usize, c: usize) -> f32 {
        self.samples[t * BLOCK_CHANNELS + c]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSequence {
    pub patient_id: String,
    pub file_id: String,
    pub stride_s: f64,
    pub blocks: Vec<EegBlock>,
}

impl BlockSequence {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.blocks.iter().map(|b| b.label).collect()
    }

    /// Re-expresses block start times relative to an enclosing recording.
    pub fn offset_by(mut self, offset_s: f64) -> Self {
        for b in &mut self.blocks {
            b.start_s += offset_s;
        }
        self
    }
}

/// A stretch of a recording kept around one or more seizures.
#[derive(Debug, Clone, PartialEq)]
pub struct TrimmedSegment {
    pub recording: Recording,
    /// Segment start within the source recording.
    pub offset_s: f64,
    /// Seizures inside the segment, in segment-local time.
    pub annotations: Vec<SeizureAnnotation>,
}

fn check_annotation(a: &SeizureAnnotation, recording: &Recording) -> Result<(), PreprocessError> {
    let duration = recording.duration_s();
    if a.file_id != recording.file_id {
        return Err(PreprocessError::Validation(format!(
            "annotation for {:?} applied to recording {:?}",
            a.file_id, recording.file_id
        )));
    }
    if !(a.start_s >= 0.0 && a.end_s > a.start_s && a.end_s <= duration + TIME_EPS) {
        return Err(PreprocessError::Validation(format!(
            "{}: seizure [{}, {}] s lies outside the {duration} s recording",
            a.file_id, a.start_s, a.end_s
        )));
    }
    Ok(())
}

/// Keeps `3d` seconds before and after each seizure of duration `d`.
///
/// Windows are clipped to the recording and windows that overlap are merged,
/// so the result is a list of disjoint segments in time order.
pub fn trim_around_seizures(
    recording: &Recording,
    annotations: &[SeizureAnnotation],
) -> Result<Vec<TrimmedSegment>, PreprocessError> {
    if annotations.is_empty() {
        return Err(PreprocessError::Empty("no seizures to trim around".into()));
    }
    recording.validate().map_err(PreprocessError::Shape)?;
    for a in annotations {
        check_annotation(a, recording)?;
    }
    let duration = recording.duration_s();
    let mut sorted: Vec<&SeizureAnnotation> = annotations.iter().collect();
    sorted.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));

    // (window start, window end, member seizures)
    let mut windows: Vec<(f64, f64, Vec<&SeizureAnnotation>)> = Vec::new();
    for a in sorted {
        let d = a.duration_s();
        let lo = (a.start_s - CONTEXT_FACTOR * d).max(0.0);
        let hi = (a.end_s + CONTEXT_FACTOR * d).min(duration);
        match windows.last_mut() {
            Some(w) if lo <= w.1 => {
                w.1 = w.1.max(hi);
                w.2.push(a);
            }
            _ => windows.push((lo, hi, vec![a])),
        }
    }

    let rate = recording.sample_rate as f64;
    let n = recording.num_samples();
    Ok(windows
        .into_iter()
        .map(|(lo, hi, members)| {
            let first = ((lo * rate).round() as usize).min(n);
            let last = ((hi * rate).round() as usize).min(n);
            let offset_s = first as f64 / rate;
            TrimmedSegment {
                recording: recording.slice_samples(first, last),
                offset_s,
                annotations: members
                    .into_iter()
                    .map(|a| SeizureAnnotation {
                        file_id: a.file_id.clone(),
                        start_s: a.start_s - offset_s,
                        end_s: a.end_s - offset_s,
                    })
                    .collect(),
            }
        })
        .collect())
}

/// Label of the block covering `[start_s, end_s)`: 1 when at least two
/// seconds of it fall inside the union of the seizure intervals.
pub fn label_block(start_s: f64, end_s: f64, annotations: &[SeizureAnnotation]) -> u8 {
    let mut intervals: Vec<(f64, f64)> = annotations
        .iter()
        .filter(|a| a.end_s > start_s && a.start_s < end_s)
        .map(|a| (a.start_s.max(start_s), a.end_s.min(end_s)))
        .collect();
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut covered = 0.0;
    let mut current: Option<(f64, f64)> = None;
    for (lo, hi) in intervals {
        match current.as_mut() {
            Some(cur) if lo <= cur.1 => cur.1 = cur.1.max(hi),
            _ => {
                if let Some((a, b)) = current {
                    covered += b - a;
                }
                current = Some((lo, hi));
            }
        }
    }
    if let Some((a, b)) = current {
        covered += b - a;
    }
    u8::from(covered >= LABEL_OVERLAP_S - TIME_EPS)
}

/// Number of whole windows of `window` samples, `stride` samples apart,
/// that fit in `num_samples`.
pub fn block_count(num_samples: usize, window: usize, stride: usize) -> usize {
    assert!(stride > 0, "stride must be positive");
    if num_samples < window {
        0
    } else {
        (num_samples - window) / stride + 1
    }
}

/// Cuts a montage recording into overlapping labelled blocks.
///
/// Blocks start at `0, stride, 2 * stride, ...` for as long as the whole
/// window fits; a trailing partial window is dropped.
pub fn segment(
    recording: &Recording,
    annotations: &[SeizureAnnotation],
    window_s: f64,
    stride_s: f64,
) -> Result<BlockSequence, PreprocessError> {
    recording.validate().map_err(PreprocessError::Shape)?;
    if recording.channels.len() != BLOCK_CHANNELS {
        return Err(PreprocessError::Shape(format!(
            "{}: {} channels, expected {BLOCK_CHANNELS}",
            recording.file_id,
            recording.channels.len()
        )));
    }
    if recording.sample_rate != BLOCK_RATE {
        return Err(PreprocessError::Shape(format!(
            "{}: sampled at {} Hz, expected {BLOCK_RATE} Hz",
            recording.file_id, recording.sample_rate
        )));
    }
    let rate = recording.sample_rate as f64;
    if (window_s * rate - BLOCK_LEN as f64).abs() > TIME_EPS {
        return Err(PreprocessError::Shape(format!(
            "a {window_s} s window is not {BLOCK_LEN} samples"
        )));
    }
    let stride = (stride_s * rate).round() as usize;
    if stride == 0 || (stride as f64 - stride_s * rate).abs() > TIME_EPS {
        return Err(PreprocessError::Shape(format!(
            "stride {stride_s} s is not a positive whole number of samples"
        )));
    }
    let n = recording.num_samples();
    if n < BLOCK_LEN {
        return Err(PreprocessError::Empty(format!(
            "{}: {} s is shorter than one {window_s} s window",
            recording.file_id,
            recording.duration_s()
        )));
    }

    let count = block_count(n, BLOCK_LEN, stride);
    let blocks = (0..count)
        .map(|k| {
            let first = k * stride;
            let mut samples = Vec::with_capacity(BLOCK_LEN * BLOCK_CHANNELS);
            for t in first..first + BLOCK_LEN {
                samples.extend(recording.channels.iter().map(|c| c.samples[t] as f32));
            }
            let start_s = first as f64 / rate;
            EegBlock {
                samples,
                start_s,
                label: label_block(start_s, start_s + window_s, annotations),
            }
        })
        .collect();
    Ok(BlockSequence {
        patient_id: recording.patient_id.clone(),
        file_id: recording.file_id.clone(),
        stride_s,
        blocks,
    })
}
