use thiserror::Error;

use super::{Channel, Recording};

/// Number of bipolar derivations in the montage.
pub const MONTAGE_SIZE: usize = 18;

const STANDARD_PAIRS: [&str; MONTAGE_SIZE] = [
    "FP1-F7", "F7-T7", "T7-P7", "P7-O1", "FP1-F3", "F3-T3", "T3-P3", "P3-O1", "FP2-F4", "F4-C4",
    "C4-P4", "P4-O2", "FP2-F8", "F8-T8", "T8-P8", "P8-O2", "FZ-CZ", "CZ-PZ",
];

/// The double-banana montage as actually labelled in CHB-MIT files, where
/// the left parasagittal chain runs through C3.
const CHB_MIT_PAIRS: [&str; MONTAGE_SIZE] = [
    "FP1-F7", "F7-T7", "T7-P7", "P7-O1", "FP1-F3", "F3-C3", "C3-P3", "P3-O1", "FP2-F4", "F4-C4",
    "C4-P4", "P4-O2", "FP2-F8", "F8-T8", "T8-P8", "P8-O2", "FZ-CZ", "CZ-PZ",
];

#[derive(Debug, Error, PartialEq)]
pub enum MontageError {
    #[error("montage must list exactly {MONTAGE_SIZE} unique channels: {0}")]
    InvalidSpec(String),
    #[error("missing channel {0:?}: not present and not derivable from referential channels")]
    Missing(String),
    #[error("channel {0:?} appears more than once with different samples")]
    Ambiguous(String),
    #[error("recording is malformed: {0}")]
    Recording(String),
}

/// Ordered list of the 18 bipolar derivations to extract.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MontageSpec {
    pairs: Vec<String>,
}

impl Default for MontageSpec {
    fn default() -> Self {
        MontageSpec::standard()
    }
}

impl MontageSpec {
    pub fn new<S: AsRef<str>>(pairs: &[S]) -> Result<Self, MontageError> {
        if pairs.len() != MONTAGE_SIZE {
            return Err(MontageError::InvalidSpec(format!(
                "got {} entries",
                pairs.len()
            )));
        }
        let pairs: Vec<String> = pairs
            .iter()
            .map(|p| p.as_ref().trim().to_string())
            .collect();
        for (i, p) in pairs.iter().enumerate() {
            if p.is_empty() {
                return Err(MontageError::InvalidSpec(format!("entry {i} is empty")));
            }
            if pairs[..i].iter().any(|q| normalize(q) == normalize(p)) {
                return Err(MontageError::InvalidSpec(format!("duplicate entry {p:?}")));
            }
        }
        Ok(MontageSpec { pairs })
    }

    /// Default derivation list.
    pub fn standard() -> Self {
        MontageSpec::new(&STANDARD_PAIRS).expect("built-in montage is valid")
    }

    /// The same montage with the C3 labels found in CHB-MIT recordings.
    pub fn chb_mit() -> Self {
        MontageSpec::new(&CHB_MIT_PAIRS).expect("built-in montage is valid")
    }

    pub fn pairs(&self) -> &[String] {
        &self.pairs
    }
}

fn normalize(label: &str) -> String {
    label
        .split_whitespace()
        .collect::<String>()
        .to_ascii_uppercase()
}

/// Looks up a channel by normalized label. Duplicates resolve to the first
/// occurrence when their samples agree.
fn find<'a>(recording: &'a Recording, label: &str) -> Result<Option<&'a Channel>, MontageError> {
    let want = normalize(label);
    let mut hits = recording
        .channels
        .iter()
        .filter(|c| normalize(&c.label) == want);
    let Some(first) = hits.next() else {
        return Ok(None);
    };
    for dup in hits {
        if dup.samples != first.samples {
            return Err(MontageError::Ambiguous(label.to_string()));
        }
        log::warn!(
            "{}: duplicate channel {:?} with identical samples; using the first",
            recording.file_id,
            label
        );
    }
    Ok(Some(first))
}

fn find_referential<'a>(
    recording: &'a Recording,
    electrode: &str,
) -> Result<Option<&'a Channel>, MontageError> {
    if let Some(c) = find(recording, electrode)? {
        return Ok(Some(c));
    }
    find(recording, &format!("{electrode}-REF"))
}

/// Selects the montage channels, in montage order.
///
/// A bipolar label present in the recording is copied; otherwise it is
/// derived as `left - right` from referential channels named by its parts.
pub fn apply_montage(recording: &Recording, spec: &MontageSpec) -> Result<Recording, MontageError> {
    recording.validate().map_err(MontageError::Recording)?;
    let mut channels = Vec::with_capacity(MONTAGE_SIZE);
    for pair in spec.pairs() {
        if let Some(c) = find(recording, pair)? {
            channels.push(Channel {
                label: pair.clone(),
                samples: c.samples.clone(),
                calibration: c.calibration,
            });
            continue;
        }
        let norm = normalize(pair);
        let derived = match norm.split_once('-') {
            Some((l, r)) if !l.is_empty() && !r.is_empty() && !r.contains('-') => {
                match (
                    find_referential(recording, l)?,
                    find_referential(recording, r)?,
                ) {
                    (Some(left), Some(right)) => Some(
                        left.samples
                            .iter()
                            .zip(&right.samples)
                            .map(|(a, b)| a - b)
                            .collect::<Vec<f64>>(),
                    ),
                    _ => None,
                }
            }
            _ => None,
        };
        match derived {
            Some(samples) => channels.push(Channel::new(pair.clone(), samples)),
            None => return Err(MontageError::Missing(pair.clone())),
        }
    }
    Ok(Recording {
        patient_id: recording.patient_id.clone(),
        file_id: recording.file_id.clone(),
        sample_rate: recording.sample_rate,
        channels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(channels: Vec<Channel>) -> Recording {
        Recording {
            patient_id: "chb01".into(),
            file_id: "chb01_03.edf".into(),
            sample_rate: 256,
            channels,
        }
    }

    fn full_bipolar(spec: &MontageSpec) -> Vec<Channel> {
        spec.pairs()
            .iter()
            .enumerate()
            .map(|(i, p)| Channel::new(p.clone(), vec![i as f64; 8]))
            .collect()
    }

    #[test]
    fn default_is_the_standard_list() {
        let spec = MontageSpec::default();
        assert_eq!(spec.pairs().len(), 18);
        assert_eq!(spec.pairs()[0], "FP1-F7");
        assert_eq!(spec.pairs()[5], "F3-T3");
        assert_eq!(spec.pairs()[17], "CZ-PZ");
    }

    #[test]
    fn spec_rejects_duplicates_and_wrong_length() {
        let mut pairs: Vec<&str> = STANDARD_PAIRS.to_vec();
        pairs[1] = "fp1-f7 ";
        assert!(MontageSpec::new(&pairs).is_err());
        assert!(MontageSpec::new(&STANDARD_PAIRS[..17]).is_err());
    }

    #[test]
    fn verbatim_channels_are_reordered() {
        let spec = MontageSpec::standard();
        let mut chans = full_bipolar(&spec);
        chans.reverse();
        chans.push(Channel::new("ECG", vec![99.0; 8]));
        let out = apply_montage(&rec(chans), &spec).unwrap();
        assert_eq!(out.channels.len(), 18);
        for (i, c) in out.channels.iter().enumerate() {
            assert_eq!(c.label, spec.pairs()[i]);
            assert_eq!(c.samples, vec![i as f64; 8]);
        }
    }

    #[test]
    fn labels_match_case_and_space_insensitively() {
        let spec = MontageSpec::standard();
        let mut chans = full_bipolar(&spec);
        chans[0].label = " fp1 - f7".into();
        let out = apply_montage(&rec(chans), &spec).unwrap();
        assert_eq!(out.channels[0].samples, vec![0.0; 8]);
    }

    #[test]
    fn bipolar_derived_from_referential() {
        let spec = MontageSpec::standard();
        let mut chans: Vec<Channel> = full_bipolar(&spec).into_iter().skip(1).collect();
        chans.push(Channel::new(
            "FP1",
            vec![5.0, 6.0, 7.0, 8.0, 1.0, 1.0, 1.0, 1.0],
        ));
        chans.push(Channel::new(
            "F7",
            vec![1.0, 1.0, 1.0, 1.0, 2.0, 3.0, 4.0, 5.0],
        ));
        let out = apply_montage(&rec(chans), &spec).unwrap();
        assert_eq!(
            out.channels[0].samples,
            vec![4.0, 5.0, 6.0, 7.0, -1.0, -2.0, -3.0, -4.0]
        );
    }

    #[test]
    fn missing_channel_is_named() {
        let spec = MontageSpec::standard();
        let chans: Vec<Channel> = full_bipolar(&spec)
            .into_iter()
            .filter(|c| c.label != "T8-P8")
            .collect();
        assert_eq!(
            apply_montage(&rec(chans), &spec),
            Err(MontageError::Missing("T8-P8".into()))
        );
    }

    #[test]
    fn identical_duplicates_take_first_differing_duplicates_fail() {
        let spec = MontageSpec::standard();
        let mut chans = full_bipolar(&spec);
        chans.push(Channel::new("T8-P8", vec![14.0; 8]));
        assert!(apply_montage(&rec(chans.clone()), &spec).is_ok());
        chans.last_mut().unwrap().samples[3] = 0.0;
        assert_eq!(
            apply_montage(&rec(chans), &spec),
            Err(MontageError::Ambiguous("T8-P8".into()))
        );
    }
}
