//! On-disk block storage: a CSV manifest with one row per block, and a flat
//! float32 tensor file holding the block samples in the same order.
//!
//! Tensor file layout (little-endian):
//!
//! | offset | size   | field                         |
//! |--------|--------|-------------------------------|
//! | 0      | 4      | magic `EEGT`                  |
//! | 4      | 4      | version (u32) = 1             |
//! | 8      | 4      | rank (u32) = 3                |
//! | 12     | 8 x 3  | dims (u64): blocks, time, ch  |
//! | 36     | ...    | f32 samples, row-major        |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EegBlock, PreprocessError, BLOCK_CHANNELS, BLOCK_LEN};

const MAGIC: &[u8; 4] = b"EEGT";
const VERSION: u32 = 1;
const HEADER_LEN: u64 = 36;
const BLOCK_VALUES: usize = BLOCK_LEN * BLOCK_CHANNELS;

/// Identifies a block across files: recording plus start time in whole
/// milliseconds, so float formatting differences cannot split a key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockKey {
    pub file_id: String,
    pub start_ms: i64,
}

impl BlockKey {
    pub fn new(file_id: &str, start_s: f64) -> Self {
        BlockKey {
            file_id: file_id.to_string(),
            start_ms: (start_s * 1000.0).round() as i64,
        }
    }
}

impl std::fmt::Display for BlockKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {} s)", self.file_id, self.start_ms as f64 / 1000.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub patient_id: String,
    pub file_id: String,
    pub start_s: f64,
    pub label: u8,
}

impl ManifestRow {
    pub fn key(&self) -> BlockKey {
        BlockKey::new(&self.file_id, self.start_s)
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PreprocessError + '_ {
    move |source| PreprocessError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_manifest<W: Write>(writer: W, rows: &[ManifestRow]) -> Result<(), PreprocessError> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|source| PreprocessError::Io {
        path: "<manifest>".into(),
        source,
    })?;
    Ok(())
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRow>, PreprocessError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    let mut rows = Vec::new();
    for (i, rec) in csv::Reader::from_reader(file).deserialize().enumerate() {
        let row: ManifestRow = rec?;
        if row.label > 1 {
            return Err(PreprocessError::Format(format!(
                "{}: row {}: label {} is not binary",
                path.display(),
                i + 1,
                row.label
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Streams blocks into a tensor file; the block count is patched into the
/// header by [`BlockTensorWriter::finish`].
pub struct BlockTensorWriter {
    out: BufWriter<File>,
    path: PathBuf,
    count: u64,
}

impl BlockTensorWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<Self, PreprocessError> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(io_err(&path))?;
        let mut w = BlockTensorWriter {
            out: BufWriter::new(file),
            path,
            count: 0,
        };
        w.write_header(0)?;
        Ok(w)
    }

    fn write_header(&mut self, blocks: u64) -> Result<(), PreprocessError> {
        let mut header = Vec::with_capacity(HEADER_LEN as usize);
        header.extend_from_slice(MAGIC);
        header.extend_from_slice(&VERSION.to_le_bytes());
        header.extend_from_slice(&3u32.to_le_bytes());
        for d in [blocks, BLOCK_LEN as u64, BLOCK_CHANNELS as u64] {
            header.extend_from_slice(&d.to_le_bytes());
        }
        self.out.write_all(&header).map_err(io_err(&self.path))
    }

    pub fn push(&mut self, block: &EegBlock) -> Result<(), PreprocessError> {
        if block.samples.len() != BLOCK_VALUES {
            return Err(PreprocessError::Shape(format!(
                "block has {} values, expected {BLOCK_VALUES}",
                block.samples.len()
            )));
        }
        let mut buf = Vec::with_capacity(4 * BLOCK_VALUES);
        for v in &block.samples {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.out.write_all(&buf).map_err(io_err(&self.path))?;
        self.count += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<u64, PreprocessError> {
        let path = self.path.clone();
        self.out.flush().map_err(io_err(&path))?;
        self.out.seek(SeekFrom::Start(0)).map_err(io_err(&path))?;
        let count = self.count;
        self.write_header(count)?;
        self.out.flush().map_err(io_err(&path))?;
        Ok(count)
    }
}

/// Sequential or random access to the blocks of a tensor file.
pub struct BlockTensorReader {
    input: BufReader<File>,
    path: PathBuf,
    len: usize,
}

impl BlockTensorReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, PreprocessError> {
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path).map_err(io_err(&path))?;
        let file_len = file.metadata().map_err(io_err(&path))?.len();
        let mut input = BufReader::new(file);
        let mut header = [0u8; HEADER_LEN as usize];
        input.read_exact(&mut header).map_err(|_| {
            PreprocessError::Format(format!("{}: header truncated", path.display()))
        })?;
        if &header[0..4] != MAGIC {
            return Err(PreprocessError::Format(format!(
                "{}: bad magic",
                path.display()
            )));
        }
        let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
        let dim = |i: usize| u64::from_le_bytes(header[i..i + 8].try_into().unwrap());
        if word(4) != VERSION || word(8) != 3 {
            return Err(PreprocessError::Format(format!(
                "{}: unsupported version {} / rank {}",
                path.display(),
                word(4),
                word(8)
            )));
        }
        let (n, t, c) = (dim(12), dim(20), dim(28));
        if t != BLOCK_LEN as u64 || c != BLOCK_CHANNELS as u64 {
            return Err(PreprocessError::Shape(format!(
                "{}: blocks are {t}x{c}, expected {BLOCK_LEN}x{BLOCK_CHANNELS}",
                path.display()
            )));
        }
        let expected = HEADER_LEN + n * 4 * BLOCK_VALUES as u64;
        if file_len < expected {
            return Err(PreprocessError::Format(format!(
                "{}: {file_len} bytes, header promises {expected}",
                path.display()
            )));
        }
        Ok(BlockTensorReader {
            input,
            path,
            len: n as usize,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Reads block `index` (time-major samples).
    pub fn read(&mut self, index: usize) -> Result<Vec<f32>, PreprocessError> {
        if index >= self.len {
            return Err(PreprocessError::Shape(format!(
                "block {index} out of range ({} blocks)",
                self.len
            )));
        }
        let offset = HEADER_LEN + (index * 4 * BLOCK_VALUES) as u64;
        self.input
            .seek(SeekFrom::Start(offset))
            .map_err(io_err(&self.path))?;
        let mut buf = vec![0u8; 4 * BLOCK_VALUES];
        self.input
            .read_exact(&mut buf)
            .map_err(io_err(&self.path))?;
        Ok(buf
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect())
    }
}
