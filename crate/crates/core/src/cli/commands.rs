use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tempfile::NamedTempFile;

use super::config::*;
use crate::evaluation::{
    cnn_flop_count, evaluate_fold, make_folds, make_folds_with, pr_curve, roc_curve, summarize,
    write_curve_csv, write_fold_csv, Curve, EvalReport, FlopRow, FoldResult, REFERENCE_MODELS,
};
use crate::inference::{fg_flop_count, smooth_evidence, FixedLagSmoother, FG_FLOPS_PER_BLOCK};
use crate::likelihood::{
    evidence_from_probability, load_weights, read_probability_csv, write_probabilities,
    ProbabilityRow,
};
use crate::preprocess::{
    notch_recording, read_manifest, segment, trim_around_seizures, write_manifest, BlockKey,
    BlockTensorReader, BlockTensorWriter, EegBlock, ManifestRow, BLOCK_RATE,
};
use crate::signal_io::{apply_montage, parse_summary, read_edf, SeizureAnnotation};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Writes `path` through a temporary file in the same directory, renamed
/// into place only once complete.
fn write_atomic(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<&mut File>) -> Result<()>,
) -> Result<()> {
    let dir = parent_dir(path)?;
    let mut tmp = NamedTempFile::new_in(&dir)
        .with_context(|| format!("creating temporary file in {}", dir.display()))?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        f(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn parent_dir(path: &Path) -> Result<PathBuf> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

// ---------------------------------------------------------------- ingest

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PatientCount {
    pub patient_id: String,
    pub files: usize,
    pub blocks: usize,
    pub seizure_blocks: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct IngestSummary {
    pub patients: Vec<PatientCount>,
    pub skipped_files: usize,
    pub failures: Vec<(String, String)>,
    pub blocks: usize,
}

impl fmt::Display for IngestSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "patient  files  blocks  seizure_blocks")?;
        for p in &self.patients {
            writeln!(
                f,
                "{:<8} {:>5} {:>7} {:>15}",
                p.patient_id, p.files, p.blocks, p.seizure_blocks
            )?;
        }
        writeln!(
            f,
            "{} blocks; {} files without seizures skipped",
            self.blocks, self.skipped_files
        )?;
        for (file, err) in &self.failures {
            writeln!(f, "failed: {file}: {err}")?;
        }
        Ok(())
    }
}

fn find_summary(dir: &Path) -> Result<Option<PathBuf>> {
    let mut found = None;
    for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.ends_with("-summary.txt"))
        {
            found = Some(path);
        }
    }
    Ok(found)
}

/// Montage, line-noise filter, trim and segment one recording; block start
/// times are in recording time.
fn ingest_file(
    cfg: &PipelineConfig,
    patient: &str,
    path: &Path,
    seizures: &[SeizureAnnotation],
) -> Result<Vec<EegBlock>> {
    let mut rec = read_edf(path)?;
    rec.patient_id = patient.to_string();
    let rec = apply_montage(&rec, &cfg.montage_spec()?)?;
    if rec.sample_rate != BLOCK_RATE {
        bail!(
            "sampled at {} Hz, expected {BLOCK_RATE} Hz",
            rec.sample_rate
        );
    }
    let rec = notch_recording(&rec, &cfg.filter(rec.sample_rate as f64))?;
    let mut blocks = Vec::new();
    for seg in trim_around_seizures(&rec, seizures)? {
        let seq = segment(&seg.recording, &seg.annotations, cfg.window_s, cfg.stride_s)?
            .offset_by(seg.offset_s);
        blocks.extend(seq.blocks);
    }
    Ok(blocks)
}

/// Builds the labelled block manifest and tensor file from a dataset of
/// `<root>/<patient>/*.edf` plus `<patient>-summary.txt`.
pub fn cmd_ingest(cfg: &PipelineConfig) -> Result<IngestSummary> {
    let root = cfg
        .dataset_root
        .as_ref()
        .ok_or_else(|| anyhow!("dataset_root is not set"))?;
    let mut patients: Vec<PathBuf> = std::fs::read_dir(root)
        .with_context(|| format!("listing {}", root.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    patients.sort();
    if patients.is_empty() {
        bail!("{}: no patient directories", root.display());
    }

    let tensor_path = cfg.output(BLOCKS);
    let dir = parent_dir(&tensor_path)?;
    let tmp_tensor = NamedTempFile::new_in(&dir)?.into_temp_path();
    let mut tensor = BlockTensorWriter::create(&tmp_tensor)?;
    let mut manifest = Vec::new();
    let mut summary = IngestSummary::default();

    for pdir in &patients {
        let patient = pdir
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_string();
        let summary_path = find_summary(pdir)?
            .ok_or_else(|| anyhow!("patient {patient}: missing summary file"))?;
        let files = parse_summary(&summary_path).with_context(|| format!("patient {patient}"))?;
        let mut count = PatientCount {
            patient_id: patient.clone(),
            ..Default::default()
        };
        for fs in files {
            if fs.seizures.is_empty() {
                summary.skipped_files += 1;
                continue;
            }
            let path = pdir.join(&fs.file_id);
            match ingest_file(cfg, &patient, &path, &fs.seizures) {
                Ok(blocks) => {
                    count.files += 1;
                    for b in &blocks {
                        tensor.push(b)?;
                        manifest.push(ManifestRow {
                            patient_id: patient.clone(),
                            file_id: fs.file_id.clone(),
                            start_s: b.start_s,
                            label: b.label,
                        });
                        count.blocks += 1;
                        count.seizure_blocks += b.label as usize;
                    }
                }
                Err(e) => {
                    warn!("{}: {e:#}", path.display());
                    summary
                        .failures
                        .push((path.display().to_string(), format!("{e:#}")));
                }
            }
        }
        summary.blocks += count.blocks;
        summary.patients.push(count);
    }
    if manifest.is_empty() {
        bail!("no usable recordings under {}", root.display());
    }
    tensor.finish()?;
    tmp_tensor.persist(&tensor_path)?;
    write_atomic(&cfg.output(MANIFEST), |w| Ok(write_manifest(w, &manifest)?))?;
    Ok(summary)
}

// ----------------------------------------------------------------- infer

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InferSummary {
    pub blocks: usize,
    pub flops_per_block: u64,
    pub total_flops: u64,
}

impl fmt::Display for InferSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} blocks scored", self.blocks)?;
        writeln!(
            f,
            "CNN FLOPs: {} per block x {} blocks = {}",
            self.flops_per_block, self.blocks, self.total_flops
        )
    }
}

const INFER_CHUNK: usize = 256;

/// Runs the CNN on every manifest block and writes the probability CSV.
pub fn cmd_infer(cfg: &PipelineConfig) -> Result<InferSummary> {
    let manifest = read_manifest(cfg.output(MANIFEST))?;
    if manifest.is_empty() {
        bail!("no blocks in {}", cfg.output(MANIFEST).display());
    }
    let weights = cfg
        .weights
        .as_ref()
        .ok_or_else(|| anyhow!("weights is not set"))?;
    let model = load_weights(weights)?;
    let field = model.architecture().receptive_field();
    if field < BLOCK_RATE as usize {
        warn!("receptive field is {field} samples, under one second of signal");
    }
    let mut reader = BlockTensorReader::open(cfg.output(BLOCKS))?;
    if reader.len() != manifest.len() {
        bail!(
            "manifest lists {} blocks but the tensor file holds {}",
            manifest.len(),
            reader.len()
        );
    }
    let mut rows = Vec::with_capacity(manifest.len());
    for start in (0..manifest.len()).step_by(INFER_CHUNK) {
        let end = (start + INFER_CHUNK).min(manifest.len());
        let inputs = (start..end)
            .map(|i| reader.read(i))
            .collect::<Result<Vec<_>, _>>()?;
        let probs = inputs
            .par_iter()
            .map(|x| model.forward(x))
            .collect::<Result<Vec<_>, _>>()?;
        for (m, q) in manifest[start..end].iter().zip(probs) {
            rows.push(ProbabilityRow {
                patient_id: m.patient_id.clone(),
                file_id: m.file_id.clone(),
                start_s: m.start_s,
                probability: q as f64,
            });
        }
    }
    write_atomic(&cfg.probabilities_path(), |w| {
        Ok(write_probabilities(w, &rows)?)
    })?;
    let flops_per_block = cnn_flop_count(model.architecture())?.total;
    Ok(InferSummary {
        blocks: rows.len(),
        flops_per_block,
        total_flops: flops_per_block * rows.len() as u64,
    })
}

// ---------------------------------------------------------------- smooth

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalRow {
    pub patient_id: String,
    pub file_id: String,
    pub start_s: f64,
    pub q_raw: f64,
    pub q_smoothed: f64,
    pub detected: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothSummary {
    pub blocks: usize,
    pub chains: usize,
    pub detected: usize,
    pub flops: u64,
}

impl fmt::Display for SmoothSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} blocks in {} chains; {} detected",
            self.blocks, self.chains, self.detected
        )?;
        writeln!(
            f,
            "FG FLOPs: {FG_FLOPS_PER_BLOCK} x {} = {}",
            self.blocks, self.flops
        )
    }
}

/// Splits rows into independent chains: one per recording, broken again
/// wherever consecutive blocks are not one stride apart (trimmed gaps).
pub fn split_chains(mut rows: Vec<ProbabilityRow>, stride_s: f64) -> Vec<Vec<ProbabilityRow>> {
    let mut first_seen: HashMap<String, usize> = HashMap::new();
    for r in &rows {
        let n = first_seen.len();
        first_seen.entry(r.file_id.clone()).or_insert(n);
    }
    rows.sort_by(|a, b| {
        first_seen[&a.file_id]
            .cmp(&first_seen[&b.file_id])
            .then(a.start_s.total_cmp(&b.start_s))
    });
    let mut chains: Vec<Vec<ProbabilityRow>> = Vec::new();
    for r in rows {
        let continues = chains.last().and_then(|c| c.last()).is_some_and(|prev| {
            prev.file_id == r.file_id && (r.start_s - prev.start_s - stride_s).abs() < 1e-6
        });
        if continues {
            chains.last_mut().unwrap().push(r);
        } else {
            chains.push(vec![r]);
        }
    }
    chains
}

fn smooth_chain(values: &[f64], cfg: &PipelineConfig) -> Result<Vec<f64>> {
    let t = cfg.transition()?;
    let evidence: Vec<_> = values
        .iter()
        .map(|&q| evidence_from_probability(q))
        .collect();
    Ok(match cfg.lag {
        None => smooth_evidence(&evidence, &t)?,
        Some(lag) => {
            let mut s = FixedLagSmoother::new(t, lag);
            let mut out = Vec::with_capacity(values.len());
            for e in evidence {
                if let Some((_, m)) = s.push(e)? {
                    out.push(m);
                }
            }
            out.extend(s.flush().into_iter().map(|(_, m)| m));
            out
        }
    })
}

/// Smooths each recording's probabilities and writes the marginal CSV.
pub fn cmd_smooth(cfg: &PipelineConfig) -> Result<SmoothSummary> {
    let path = cfg.probabilities_path();
    let rows =
        read_probability_csv(&path).with_context(|| format!("reading {}", path.display()))?;
    if rows.is_empty() {
        bail!("no blocks in {}", path.display());
    }
    let detector = cfg.detector()?;
    let chains = split_chains(rows, cfg.stride_s);
    let smoothed = chains
        .par_iter()
        .map(|c| smooth_chain(&c.iter().map(|r| r.probability).collect::<Vec<_>>(), cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for (chain, marginals) in chains.iter().zip(&smoothed) {
        for (r, &m) in chain.iter().zip(marginals) {
            out.push(MarginalRow {
                patient_id: r.patient_id.clone(),
                file_id: r.file_id.clone(),
                start_s: r.start_s,
                q_raw: r.probability,
                q_smoothed: m,
                detected: u8::from(m > detector.threshold()),
            });
        }
    }
    write_atomic(&cfg.output(MARGINALS), |w| {
        let mut csv = csv::Writer::from_writer(w);
        for r in &out {
            csv.serialize(r)?;
        }
        csv.flush()?;
        Ok(())
    })?;
    Ok(SmoothSummary {
        blocks: out.len(),
        chains: chains.len(),
        detected: out.iter().filter(|r| r.detected == 1).count(),
        flops: fg_flop_count(out.len() as u64)?,
    })
}

// -------------------------------------------------------------- evaluate

fn read_marginals(path: &Path) -> Result<Vec<MarginalRow>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    csv::Reader::from_reader(file)
        .deserialize()
        .map(|r| r.with_context(|| format!("reading {}", path.display())))
        .collect()
}

/// Marginal rows in manifest order; every block exactly once.
fn align_marginals(rows: Vec<MarginalRow>, manifest: &[ManifestRow]) -> Result<Vec<MarginalRow>> {
    let mut by_key: HashMap<BlockKey, MarginalRow> = HashMap::with_capacity(rows.len());
    for r in rows {
        let key = BlockKey::new(&r.file_id, r.start_s);
        if by_key.insert(key.clone(), r).is_some() {
            bail!("alignment: block {key} appears more than once");
        }
    }
    let out = manifest
        .iter()
        .map(|m| {
            by_key
                .remove(&m.key())
                .ok_or_else(|| anyhow!("alignment: no marginal for block {}", m.key()))
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(extra) = by_key.keys().min() {
        bail!("alignment: block {extra} is not in the manifest");
    }
    Ok(out)
}

fn flop_rows(cfg: &PipelineConfig) -> Result<Vec<FlopRow>> {
    let cnn = cnn_flop_count(&cfg.cnn_architecture()?)?;
    let mut rows = vec![
        FlopRow {
            model: "1D CNN (configured)".into(),
            source: "computed".into(),
            mflops: cnn.mflops(),
        },
        FlopRow {
            model: "factor graph (per block)".into(),
            source: "computed".into(),
            mflops: FG_FLOPS_PER_BLOCK as f64 / 1e6,
        },
    ];
    rows.extend(REFERENCE_MODELS.iter().map(|r| FlopRow {
        model: r.name.into(),
        source: "published".into(),
        mflops: r.mflops,
    }));
    Ok(rows)
}

/// Cross-validated scoring of raw and smoothed series.
pub fn cmd_evaluate(cfg: &PipelineConfig) -> Result<EvalReport> {
    let seed = cfg
        .fold_seed
        .ok_or_else(|| anyhow!("fold_seed is required for evaluate"))?;
    let manifest = read_manifest(cfg.output(MANIFEST))?;
    if manifest.is_empty() {
        bail!("no blocks in {}", cfg.output(MANIFEST).display());
    }
    let rows = align_marginals(read_marginals(&cfg.output(MARGINALS))?, &manifest)?;
    let patients: Vec<String> = manifest
        .iter()
        .map(|m| m.patient_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let plan = match (cfg.folds, cfg.fold_test_size) {
        (None, None) => make_folds(&patients, seed)?,
        (folds, size) => {
            let folds = folds.unwrap_or(patients.len() / size.unwrap_or(1).max(1));
            let size = size.unwrap_or(patients.len() / folds.max(1));
            make_folds_with(&patients, folds, size, seed)?
        }
    };

    let mut by_patient: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, m) in manifest.iter().enumerate() {
        by_patient.entry(m.patient_id.as_str()).or_default().push(i);
    }
    type Curves = Vec<Curve<'static>>;
    let per_fold = plan
        .folds
        .par_iter()
        .enumerate()
        .map(|(k, fold)| -> Result<(FoldResult, Curves, Curves)> {
            let idx: Vec<usize> = fold
                .test_patients
                .iter()
                .flat_map(|p| by_patient.get(p.as_str()).cloned().unwrap_or_default())
                .collect();
            let truth: Vec<u8> = idx.iter().map(|&i| manifest[i].label).collect();
            let raw: Vec<f64> = idx.iter().map(|&i| rows[i].q_raw).collect();
            let smoothed: Vec<f64> = idx.iter().map(|&i| rows[i].q_smoothed).collect();
            let result = evaluate_fold(
                k,
                &fold.test_patients,
                &raw,
                &smoothed,
                &truth,
                cfg.threshold,
            )
            .with_context(|| format!("fold {k}"))?;
            let (mut roc, mut pr) = (Vec::new(), Vec::new());
            for (name, scores) in [("raw", &raw), ("smoothed", &smoothed)] {
                if let Ok(c) = roc_curve(scores, &truth) {
                    roc.push((k, name, c));
                }
                if let Ok(c) = pr_curve(scores, &truth) {
                    pr.push((k, name, c));
                }
            }
            Ok((result, roc, pr))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut folds = Vec::new();
    let (mut roc, mut pr): (Curves, Curves) = (Vec::new(), Vec::new());
    for (f, r, p) in per_fold {
        folds.push(f);
        roc.extend(r);
        pr.extend(p);
    }
    let (raw, smoothed) = summarize(&folds);
    let report = EvalReport {
        tool_version: TOOL_VERSION.into(),
        config_hash: cfg.hash(),
        threshold: cfg.threshold,
        plan,
        folds,
        raw,
        smoothed,
        flops: flop_rows(cfg)?,
    };
    write_json(&cfg.output(REPORT), &report)?;
    write_json(&cfg.output(FOLD_PLAN), &report.plan)?;
    write_atomic(&cfg.output(FOLDS_CSV), |w| {
        Ok(write_fold_csv(w, &report.folds)?)
    })?;
    write_atomic(&cfg.output(ROC_CSV), |w| {
        Ok(write_curve_csv(w, "fpr", "tpr", &roc)?)
    })?;
    write_atomic(&cfg.output(PR_CSV), |w| {
        Ok(write_curve_csv(w, "recall", "precision", &pr)?)
    })?;
    info!("report written to {}", cfg.output(REPORT).display());
    Ok(report)
}

// ----------------------------------------------------------------- flops

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlopTableRow {
    pub model: String,
    pub source: String,
    pub flops: Option<u64>,
    pub mflops: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlopTable {
    pub blocks: u64,
    pub rows: Vec<FlopTableRow>,
}

impl fmt::Display for FlopTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<36} {:<15} {:>16} {:>12}",
            "model", "source", "FLOPs", "MFLOPs"
        )?;
        for r in &self.rows {
            let flops = r.flops.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
            writeln!(
                f,
                "{:<36} {:<15} {:>16} {:>12.4}",
                r.model, r.source, flops, r.mflops
            )?;
        }
        Ok(())
    }
}

/// Per-block CNN cost, the factor graph's cost for `blocks` blocks, and the
/// published totals of comparison models.
pub fn cmd_flops(cfg: &PipelineConfig) -> Result<FlopTable> {
    let arch = cfg.cnn_architecture()?;
    let cnn = cnn_flop_count(&arch)?;
    let fg = fg_flop_count(cfg.blocks)?;
    let mut rows = Vec::new();
    for l in &cnn.layers {
        rows.push(FlopTableRow {
            model: format!("  layer {} {}", l.index, l.kind),
            source: "computed".into(),
            flops: Some(l.flops),
            mflops: l.flops as f64 / 1e6,
        });
    }
    rows.push(FlopTableRow {
        model: "1D CNN (configured, per block)".into(),
        source: "computed".into(),
        flops: Some(cnn.total),
        mflops: cnn.mflops(),
    });
    rows.push(FlopTableRow {
        model: format!("factor graph ({} blocks)", cfg.blocks),
        source: "computed".into(),
        flops: Some(fg),
        mflops: fg as f64 / 1e6,
    });
    for r in REFERENCE_MODELS {
        rows.push(FlopTableRow {
            model: r.name.into(),
            source: "published".into(),
            flops: None,
            mflops: r.mflops,
        });
    }
    let table = FlopTable {
        blocks: cfg.blocks,
        rows,
    };
    write_atomic(&cfg.output(FLOPS_CSV), |w| {
        let mut csv = csv::Writer::from_writer(w);
        for r in &table.rows {
            csv.serialize(r)?;
        }
        csv.flush()?;
        Ok(())
    })?;
    Ok(table)
}
