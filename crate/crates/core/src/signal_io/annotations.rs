//! Parser for CHB-MIT style `-summary.txt` files.
//!
//! ```text
//! File Name: chb01_03.edf
//! File Start Time: 13:43:04
//! File End Time: 14:43:04
//! Number of Seizures in File: 1
//! Seizure Start Time: 2996 seconds
//! Seizure End Time: 3036 seconds
//! ```
//!
//! Later cases number the seizures (`Seizure 1 Start Time: ...`); both forms
//! are accepted. Lines outside file blocks (channel listings, sampling rate)
//! are ignored.

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct SeizureAnnotation {
    pub file_id: String,
    pub start_s: f64,
    pub end_s: f64,
}

impl SeizureAnnotation {
    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// One `File Name:` block of a summary.
#[derive(Debug, Clone, PartialEq)]
pub struct FileSummary {
    pub file_id: String,
    pub declared_seizures: usize,
    pub seizures: Vec<SeizureAnnotation>,
}

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {detail}")]
    Syntax { line: usize, detail: String },
    #[error(
        "{file_id}: seizure starting at {start_s} s ends at {end_s} s (end must exceed start)"
    )]
    Validation {
        file_id: String,
        start_s: f64,
        end_s: f64,
    },
    #[error("{file_id}: declares {declared} seizures but lists {found}")]
    Consistency {
        file_id: String,
        declared: usize,
        found: usize,
    },
}

fn parse_seconds(text: &str, line: usize) -> Result<f64, AnnotationError> {
    let t = text.trim();
    let t = t
        .strip_suffix("seconds")
        .or_else(|| t.strip_suffix("second"))
        .or_else(|| t.strip_suffix("secs"))
        .or_else(|| t.strip_suffix('s'))
        .unwrap_or(t)
        .trim();
    t.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite() && *v >= 0.0)
        .ok_or_else(|| AnnotationError::Syntax {
            line,
            detail: format!("{text:?} is not a nonnegative time in seconds"),
        })
}

/// Which seizure bound a line carries, if any.
fn seizure_bound(key: &str) -> Option<bool> {
    let key = key.trim().to_ascii_lowercase();
    if !key.starts_with("seizure") {
        return None;
    }
    if key.ends_with("start time") {
        Some(true)
    } else if key.ends_with("end time") {
        Some(false)
    } else {
        None
    }
}

#[derive(Default)]
struct Block {
    file_id: String,
    declared: Option<usize>,
    starts: Vec<f64>,
    ends: Vec<f64>,
}

impl Block {
    fn finish(self) -> Result<FileSummary, AnnotationError> {
        let declared = self.declared.unwrap_or(0);
        let found = self.starts.len().max(self.ends.len());
        if self.starts.len() != self.ends.len() || found != declared {
            return Err(AnnotationError::Consistency {
                file_id: self.file_id,
                declared,
                found: self.starts.len().min(self.ends.len()),
            });
        }
        let seizures = self
            .starts
            .iter()
            .zip(&self.ends)
            .map(|(&start_s, &end_s)| {
                if end_s <= start_s {
                    Err(AnnotationError::Validation {
                        file_id: self.file_id.clone(),
                        start_s,
                        end_s,
                    })
                } else {
                    Ok(SeizureAnnotation {
                        file_id: self.file_id.clone(),
                        start_s,
                        end_s,
                    })
                }
            })
            .collect::<Result<_, _>>()?;
        Ok(FileSummary {
            file_id: self.file_id,
            declared_seizures: declared,
            seizures,
        })
    }
}

/// Parses summary text into per-file blocks, including files without seizures.
pub fn parse_summary_str(text: &str) -> Result<Vec<FileSummary>, AnnotationError> {
    let mut out = Vec::new();
    let mut current: Option<Block> = None;
    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let Some((key, value)) = raw_line.split_once(':') else {
            continue;
        };
        let key_lc = key.trim().to_ascii_lowercase();
        if key_lc == "file name" {
            if let Some(block) = current.take() {
                out.push(block.finish()?);
            }
            current = Some(Block {
                file_id: value.trim().to_string(),
                ..Block::default()
            });
            continue;
        }
        let Some(block) = current.as_mut() else {
            continue;
        };
        if key_lc.starts_with("number of seizures") {
            let n = value
                .trim()
                .parse::<usize>()
                .map_err(|_| AnnotationError::Syntax {
                    line: line_no,
                    detail: format!("seizure count {:?} is not an integer", value.trim()),
                })?;
            block.declared = Some(n);
        } else if let Some(is_start) = seizure_bound(key) {
            let t = parse_seconds(value, line_no)?;
            if is_start {
                block.starts.push(t);
            } else {
                block.ends.push(t);
            }
        }
    }
    if let Some(block) = current {
        out.push(block.finish()?);
    }
    Ok(out)
}

pub fn parse_summary(path: impl AsRef<Path>) -> Result<Vec<FileSummary>, AnnotationError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| AnnotationError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_summary_str(&text)
}

/// All seizures declared in a summary file, in file order.
pub fn parse_annotations(
    path: impl AsRef<Path>,
) -> Result<Vec<SeizureAnnotation>, AnnotationError> {
    Ok(parse_summary(path)?
        .into_iter()
        .flat_map(|f| f.seizures)
        .collect())
}
