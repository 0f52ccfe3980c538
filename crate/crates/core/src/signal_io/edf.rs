//! Plain EDF (European Data Format) reader and writer.
//!
//! Layout: a 256-byte fixed header, then 256 bytes of per-signal header
//! fields stored column-wise (all labels, then all transducer fields, ...),
//! then `num_records` data records. Each record holds `samples_per_record`
//! 16-bit little-endian two's-complement samples for every signal in turn.
//! All header fields are space-padded ASCII.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{Channel, Recording};

const FIXED_HEADER_LEN: usize = 256;
const SIGNAL_HEADER_LEN: usize = 256;

/// Column widths of the per-signal header, in on-disk order.
const SIGNAL_FIELDS: [(&str, usize); 10] = [
    ("label", 16),
    ("transducer", 80),
    ("physical_dimension", 8),
    ("physical_min", 8),
    ("physical_max", 8),
    ("digital_min", 8),
    ("digital_max", 8),
    ("prefiltering", 80),
    ("samples_per_record", 8),
    ("reserved", 32),
];

#[derive(Debug, Error)]
pub enum EdfError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed EDF header field `{field}`: {detail}")]
    Header { field: String, detail: String },
    #[error("signal {label:?}: digital_min == digital_max ({value}), cannot scale")]
    Scaling { label: String, value: i32 },
    #[error(
        "truncated data record at byte offset {offset}: need {needed} bytes, {available} available"
    )]
    Truncated {
        offset: u64,
        needed: usize,
        available: usize,
    },
    #[error("channel {channel:?} sample {index} = {value} is outside the 16-bit digital range")]
    Range {
        channel: String,
        index: usize,
        value: f64,
    },
    #[error("invalid recording for EDF output: {0}")]
    Format(String),
}

fn header_err(field: &str, detail: impl Into<String>) -> EdfError {
    EdfError::Header {
        field: field.to_string(),
        detail: detail.into(),
    }
}

/// Affine map between digital (stored) and physical sample values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub physical_min: f64,
    pub physical_max: f64,
    pub digital_min: i32,
    pub digital_max: i32,
}

impl Calibration {
    pub fn gain(&self) -> f64 {
        (self.physical_max - self.physical_min) / (self.digital_max - self.digital_min) as f64
    }

    pub fn to_physical(&self, digital: i16) -> f64 {
        self.physical_min + (digital as i32 - self.digital_min) as f64 * self.gain()
    }

    /// Nearest digital value for a physical sample; `None` when it falls
    /// outside `[digital_min, digital_max]`.
    pub fn to_digital(&self, physical: f64) -> Option<i16> {
        if !physical.is_finite() {
            return None;
        }
        let d = ((physical - self.physical_min) / self.gain() + self.digital_min as f64).round();
        if d < self.digital_min as f64 || d > self.digital_max as f64 {
            return None;
        }
        Some(d as i16)
    }
}

/// Per-signal header, as stored.
#[derive(Debug, Clone, PartialEq)]
pub struct EdfSignalHeader {
    pub label: String,
    pub transducer: String,
    pub physical_dimension: String,
    pub calibration: Calibration,
    pub prefiltering: String,
    pub samples_per_record: usize,
}

/// An EDF file decoded down to its digital samples.
#[derive(Debug, Clone, PartialEq)]
pub struct EdfRaw {
    pub patient: String,
    pub recording: String,
    pub start_date: String,
    pub start_time: String,
    pub num_records: usize,
    pub record_duration_s: f64,
    pub signals: Vec<EdfSignalHeader>,
    /// One vector of digital samples per signal, records concatenated.
    pub digital: Vec<Vec<i16>>,
}

impl EdfRaw {
    /// Sampling rate shared by all signals, in Hz.
    pub fn sample_rate(&self) -> Result<u32, EdfError> {
        let first = match self.signals.first() {
            Some(s) => s.samples_per_record,
            None => return Err(header_err("num_signals", "file declares no signals")),
        };
        if let Some(s) = self.signals.iter().find(|s| s.samples_per_record != first) {
            return Err(header_err(
                "samples_per_record",
                format!(
                    "signal {:?} has {} samples per record, expected {} (mixed sample rates are not supported)",
                    s.label, s.samples_per_record, first
                ),
            ));
        }
        let rate = first as f64 / self.record_duration_s;
        let rounded = rate.round();
        if rounded < 1.0 || (rate - rounded).abs() > 1e-6 * rounded {
            return Err(header_err(
                "record_duration",
                format!("sample rate {rate} Hz is not a positive integer"),
            ));
        }
        Ok(rounded as u32)
    }
}

fn ascii_field(bytes: &[u8], field: &str) -> Result<String, EdfError> {
    if !bytes.iter().all(|b| (0x20..=0x7e).contains(b)) {
        return Err(header_err(
            field,
            "contains non-printable or non-ASCII bytes",
        ));
    }
    Ok(String::from_utf8_lossy(bytes).trim().to_string())
}

fn number_field<T: std::str::FromStr>(bytes: &[u8], field: &str) -> Result<T, EdfError> {
    let text = ascii_field(bytes, field)?;
    text.parse::<T>()
        .map_err(|_| header_err(field, format!("{text:?} is not a valid number")))
}

/// Reads an EDF file without converting samples to physical units.
pub fn read_edf_raw(path: impl AsRef<Path>) -> Result<EdfRaw, EdfError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| EdfError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode(&bytes)
}

fn decode(bytes: &[u8]) -> Result<EdfRaw, EdfError> {
    if bytes.len() < FIXED_HEADER_LEN {
        return Err(header_err(
            "fixed_header",
            format!(
                "file is {} bytes, shorter than the 256-byte header",
                bytes.len()
            ),
        ));
    }
    let version = &bytes[0..8];
    if ascii_field(version, "version")? != "0" {
        return Err(header_err("version", "expected \"0\" (plain EDF)"));
    }
    let patient = ascii_field(&bytes[8..88], "patient")?;
    let recording = ascii_field(&bytes[88..168], "recording")?;
    let start_date = ascii_field(&bytes[168..176], "start_date")?;
    let start_time = ascii_field(&bytes[176..184], "start_time")?;
    let header_bytes: usize = number_field(&bytes[184..192], "header_bytes")?;
    let num_records: i64 = number_field(&bytes[236..244], "num_records")?;
    let record_duration_s: f64 = number_field(&bytes[244..252], "record_duration")?;
    let num_signals: usize = number_field(&bytes[252..256], "num_signals")?;

    if num_signals == 0 {
        return Err(header_err("num_signals", "file declares no signals"));
    }
    if header_bytes != FIXED_HEADER_LEN + SIGNAL_HEADER_LEN * num_signals {
        return Err(header_err(
            "header_bytes",
            format!(
                "declares {header_bytes}, but {num_signals} signals need {}",
                FIXED_HEADER_LEN + SIGNAL_HEADER_LEN * num_signals
            ),
        ));
    }
    if !(record_duration_s.is_finite() && record_duration_s > 0.0) {
        return Err(header_err("record_duration", "must be positive"));
    }
    if bytes.len() < header_bytes {
        return Err(header_err(
            "signal_headers",
            format!("file is {} bytes, header needs {header_bytes}", bytes.len()),
        ));
    }

    // Column-wise layout: field k of signal i lives at
    // 256 + ns * (sum of widths before k) + i * width_k.
    let mut columns: Vec<Vec<&[u8]>> = Vec::with_capacity(SIGNAL_FIELDS.len());
    let mut offset = FIXED_HEADER_LEN;
    for &(_, width) in &SIGNAL_FIELDS {
        let col = (0..num_signals)
            .map(|i| &bytes[offset + i * width..offset + (i + 1) * width])
            .collect();
        columns.push(col);
        offset += width * num_signals;
    }

    let mut signals = Vec::with_capacity(num_signals);
    for i in 0..num_signals {
        let label = ascii_field(columns[0][i], "label")?;
        let calibration = Calibration {
            physical_min: number_field(columns[3][i], "physical_min")?,
            physical_max: number_field(columns[4][i], "physical_max")?,
            digital_min: number_field(columns[5][i], "digital_min")?,
            digital_max: number_field(columns[6][i], "digital_max")?,
        };
        if calibration.digital_min == calibration.digital_max {
            return Err(EdfError::Scaling {
                label,
                value: calibration.digital_min,
            });
        }
        if calibration.physical_min == calibration.physical_max {
            return Err(header_err(
                "physical_max",
                format!("signal {label:?}: physical_min == physical_max"),
            ));
        }
        let samples_per_record: usize = number_field(columns[8][i], "samples_per_record")?;
        if samples_per_record == 0 {
            return Err(header_err(
                "samples_per_record",
                format!("signal {label:?}: zero"),
            ));
        }
        signals.push(EdfSignalHeader {
            label,
            transducer: ascii_field(columns[1][i], "transducer")?,
            physical_dimension: ascii_field(columns[2][i], "physical_dimension")?,
            calibration,
            prefiltering: ascii_field(columns[7][i], "prefiltering")?,
            samples_per_record,
        });
    }

    let record_len: usize = signals.iter().map(|s| 2 * s.samples_per_record).sum();
    let data = &bytes[header_bytes..];
    let num_records = match num_records {
        -1 => data.len() / record_len,
        n if n < 0 => return Err(header_err("num_records", format!("{n} is negative"))),
        n => n as usize,
    };

    let mut digital: Vec<Vec<i16>> = signals
        .iter()
        .map(|s| Vec::with_capacity(s.samples_per_record * num_records))
        .collect();
    for r in 0..num_records {
        let start = r * record_len;
        if data.len() < start + record_len {
            return Err(EdfError::Truncated {
                offset: (header_bytes + start) as u64,
                needed: record_len,
                available: data.len().saturating_sub(start),
            });
        }
        let mut pos = start;
        for (sig, out) in signals.iter().zip(digital.iter_mut()) {
            let chunk = &data[pos..pos + 2 * sig.samples_per_record];
            out.extend(
                chunk
                    .chunks_exact(2)
                    .map(|b| i16::from_le_bytes([b[0], b[1]])),
            );
            pos += 2 * sig.samples_per_record;
        }
    }

    Ok(EdfRaw {
        patient,
        recording,
        start_date,
        start_time,
        num_records,
        record_duration_s,
        signals,
        digital,
    })
}

/// Reads an EDF file into a [`Recording`] in physical units.
///
/// `file_id` is the file name (e.g. `chb01_03.edf`), matching the names used
/// in seizure summaries; `patient_id` is the header's patient field.
pub fn read_edf(path: impl AsRef<Path>) -> Result<Recording, EdfError> {
    let path = path.as_ref();
    let raw = read_edf_raw(path)?;
    let sample_rate = raw.sample_rate()?;
    let channels = raw
        .signals
        .iter()
        .zip(&raw.digital)
        .map(|(sig, dig)| Channel {
            label: sig.label.clone(),
            samples: dig
                .iter()
                .map(|&d| sig.calibration.to_physical(d))
                .collect(),
            calibration: Some(sig.calibration),
        })
        .collect();
    Ok(Recording {
        patient_id: raw.patient.clone(),
        file_id: path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        sample_rate,
        channels,
    })
}

/// Shortest decimal text of at most 8 characters for `v`.
fn format_number(v: f64) -> Option<String> {
    let s = format!("{v}");
    if s.len() <= 8 {
        return Some(s);
    }
    (0..=7).rev().find_map(|p| {
        let s = format!("{v:.p$}");
        let s = if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        };
        (s.len() <= 8).then_some(s)
    })
}

fn put_field(buf: &mut Vec<u8>, text: &str, width: usize) {
    let bytes: Vec<u8> = text
        .bytes()
        .map(|b| if (0x20..=0x7e).contains(&b) { b } else { b'_' })
        .take(width)
        .collect();
    buf.extend_from_slice(&bytes);
    buf.resize(buf.len() + width - bytes.len(), b' ');
}

/// Calibration the writer will store for a channel; values are passed
/// through their 8-character text form so reader and writer agree exactly.
fn output_calibration(channel: &Channel) -> Result<(Calibration, [String; 2]), EdfError> {
    let cal = match channel.calibration {
        Some(c) => c,
        None => {
            let (lo, hi) = channel
                .samples
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                    (lo.min(x), hi.max(x))
                });
            let (mut lo, mut hi) = if lo.is_finite() {
                (lo.floor(), hi.ceil())
            } else {
                (0.0, 1.0)
            };
            if lo == hi {
                lo -= 1.0;
                hi += 1.0;
            }
            Calibration {
                physical_min: lo,
                physical_max: hi,
                digital_min: i16::MIN as i32,
                digital_max: i16::MAX as i32,
            }
        }
    };
    if cal.digital_min == cal.digital_max {
        return Err(EdfError::Scaling {
            label: channel.label.clone(),
            value: cal.digital_min,
        });
    }
    if cal.digital_min < i16::MIN as i32 || cal.digital_max > i16::MAX as i32 {
        return Err(EdfError::Format(format!(
            "channel {:?}: digital range [{}, {}] exceeds 16 bits",
            channel.label, cal.digital_min, cal.digital_max
        )));
    }
    let text = |v: f64| {
        format_number(v).ok_or_else(|| {
            EdfError::Format(format!(
                "channel {:?}: {v} does not fit an 8-character field",
                channel.label
            ))
        })
    };
    let pmin = text(cal.physical_min)?;
    let pmax = text(cal.physical_max)?;
    let stored = Calibration {
        physical_min: pmin.parse().expect("formatted number parses"),
        physical_max: pmax.parse().expect("formatted number parses"),
        ..cal
    };
    if stored.physical_min == stored.physical_max {
        return Err(EdfError::Format(format!(
            "channel {:?}: physical range collapses to a point",
            channel.label
        )));
    }
    Ok((stored, [pmin, pmax]))
}

/// Writes `recording` as a plain EDF file.
///
/// Records are one second long when the sample count is a whole number of
/// seconds; otherwise the whole recording is stored as a single record.
pub fn write_edf(recording: &Recording, path: impl AsRef<Path>) -> Result<(), EdfError> {
    let bytes = encode(recording)?;
    let path = path.as_ref();
    let io_err = |source| EdfError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = fs::File::create(path).map_err(io_err)?;
    file.write_all(&bytes).map_err(io_err)?;
    Ok(())
}

fn encode(recording: &Recording) -> Result<Vec<u8>, EdfError> {
    if recording.channels.is_empty() {
        return Err(EdfError::Format("recording has no channels".into()));
    }
    if recording.channels.len() > 9999 {
        return Err(EdfError::Format("more than 9999 channels".into()));
    }
    recording.validate().map_err(EdfError::Format)?;

    let ns = recording.channels.len();
    let n = recording.num_samples();
    let rate = recording.sample_rate as usize;
    let (num_records, spr, duration) = if n.is_multiple_of(rate) {
        (n / rate, rate, "1".to_string())
    } else {
        let d = format_number(n as f64 / rate as f64)
            .filter(|d| d.parse::<f64>().ok() == Some(n as f64 / rate as f64))
            .ok_or_else(|| {
                EdfError::Format(format!(
                    "{n} samples at {rate} Hz has no exact 8-character record duration"
                ))
            })?;
        (1, n, d)
    };

    let mut calibrations = Vec::with_capacity(ns);
    let mut digital = Vec::with_capacity(ns);
    for ch in &recording.channels {
        let (cal, text) = output_calibration(ch)?;
        let samples = ch
            .samples
            .iter()
            .enumerate()
            .map(|(index, &value)| {
                cal.to_digital(value).ok_or_else(|| EdfError::Range {
                    channel: ch.label.clone(),
                    index,
                    value,
                })
            })
            .collect::<Result<Vec<i16>, _>>()?;
        calibrations.push((cal, text));
        digital.push(samples);
    }

    let header_bytes = FIXED_HEADER_LEN + SIGNAL_HEADER_LEN * ns;
    let mut buf = Vec::with_capacity(header_bytes + 2 * n * ns);
    put_field(&mut buf, "0", 8);
    put_field(&mut buf, &recording.patient_id, 80);
    put_field(&mut buf, &recording.file_id, 80);
    put_field(&mut buf, "01.01.00", 8);
    put_field(&mut buf, "00.00.00", 8);
    put_field(&mut buf, &header_bytes.to_string(), 8);
    put_field(&mut buf, "", 44);
    put_field(&mut buf, &num_records.to_string(), 8);
    put_field(&mut buf, &duration, 8);
    put_field(&mut buf, &ns.to_string(), 4);

    for (k, &(_, width)) in SIGNAL_FIELDS.iter().enumerate() {
        for (ch, (cal, text)) in recording.channels.iter().zip(&calibrations) {
            let value = match k {
                0 => ch.label.clone(),
                2 => "uV".to_string(),
                3 => text[0].clone(),
                4 => text[1].clone(),
                5 => cal.digital_min.to_string(),
                6 => cal.digital_max.to_string(),
                8 => spr.to_string(),
                _ => String::new(),
            };
            put_field(&mut buf, &value, width);
        }
    }
    debug_assert_eq!(buf.len(), header_bytes);

    for r in 0..num_records {
        for samples in &digital {
            for &d in &samples[r * spr..(r + 1) * spr] {
                buf.extend_from_slice(&d.to_le_bytes());
            }
        }
    }
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_channel(samples: Vec<f64>, cal: Option<Calibration>) -> Recording {
        Recording {
            patient_id: "p".into(),
            file_id: "f.edf".into(),
            sample_rate: 256,
            channels: vec![Channel {
                label: "FP1-F7".into(),
                samples,
                calibration: cal,
            }],
        }
    }

    #[test]
    fn one_second_single_channel_file_size() {
        let rec = one_channel(vec![0.0; 256], None);
        let bytes = encode(&rec).unwrap();
        assert_eq!(bytes.len(), 256 + 256 + 2 * 256);
    }

    #[test]
    fn empty_channel_list_is_a_format_error() {
        let mut rec = one_channel(vec![0.0; 256], None);
        rec.channels.clear();
        assert!(matches!(encode(&rec), Err(EdfError::Format(_))));
    }

    #[test]
    fn out_of_range_sample_is_reported_with_index() {
        let cal = Calibration {
            physical_min: -10.0,
            physical_max: 10.0,
            digital_min: -100,
            digital_max: 100,
        };
        let mut samples = vec![0.0; 256];
        samples[17] = 11.0;
        match encode(&one_channel(samples, Some(cal))) {
            Err(EdfError::Range { index, channel, .. }) => {
                assert_eq!(index, 17);
                assert_eq!(channel, "FP1-F7");
            }
            other => panic!("expected range error, got {other:?}"),
        }
    }

    #[test]
    fn fractional_duration_uses_single_record() {
        let rec = one_channel(vec![1.0; 896], None);
        let raw = decode(&encode(&rec).unwrap()).unwrap();
        assert_eq!(raw.num_records, 1);
        assert_eq!(raw.record_duration_s, 3.5);
        assert_eq!(raw.sample_rate().unwrap(), 256);
        assert_eq!(raw.digital[0].len(), 896);
    }

    #[test]
    fn format_number_fits_eight_chars() {
        assert_eq!(format_number(-3276.8).unwrap(), "-3276.8");
        assert_eq!(format_number(1.0 / 3.0).unwrap(), "0.333333");
        assert!(format_number(1e12).is_none());
    }
}
