//! Independent oracles and fixture builders shared by the integration tests.
#![allow(dead_code)]

use std::path::Path;

use ictal::likelihood::{Activation, CnnArchitecture, Layer, LayerParams, Model, PoolKind};
use ictal::signal_io::{write_edf, Channel, MontageSpec, Recording};
use rand::Rng;
use rand_distr::{Beta, Distribution};

/// `P(s_k = 1 | y)` by summing the joint over all `2^N` state paths.
pub fn brute_force_marginals(
    evidence: &[[f64; 2]],
    p01: f64,
    p10: f64,
    initial: [f64; 2],
) -> Vec<f64> {
    let n = evidence.len();
    let trans = |a: usize, b: usize| match (a, b) {
        (0, 0) => 1.0 - p01,
        (0, 1) => p01,
        (1, 0) => p10,
        _ => 1.0 - p10,
    };
    let mut seizure = vec![0.0; n];
    let mut total = 0.0;
    for path in 0u32..(1 << n) {
        let s = |i: usize| ((path >> i) & 1) as usize;
        let mut p = initial[s(0)] * evidence[0][s(0)];
        for i in 1..n {
            p *= trans(s(i - 1), s(i)) * evidence[i][s(i)];
        }
        total += p;
        for (k, m) in seizure.iter_mut().enumerate() {
            if s(k) == 1 {
                *m += p;
            }
        }
    }
    seizure.iter().map(|m| m / total).collect()
}

/// Evidence pair for a classifier output, clamped like the engine does.
pub fn clamped(q: f64) -> [f64; 2] {
    let c = |v: f64| v.clamp(1e-12, 1.0 - 1e-12);
    [c(1.0 - q), c(q)]
}

/// Fraction of positive-negative pairs ranked correctly, ties counting half.
pub fn pairwise_auc(scores: &[f64], truth: &[u8]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        if truth[i] == 0 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if truth[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Draws a state path and noisy classifier outputs: seizure blocks score
/// from Beta(a, b), others from Beta(b, a).
pub fn hmm_draw<R: Rng>(
    rng: &mut R,
    n: usize,
    p01: f64,
    p10: f64,
    a: f64,
    b: f64,
) -> (Vec<u8>, Vec<f64>) {
    let pi1 = p01 / (p01 + p10);
    let pos = Beta::new(a, b).unwrap();
    let neg = Beta::new(b, a).unwrap();
    let mut s = u8::from(rng.gen::<f64>() < pi1);
    let mut states = Vec::with_capacity(n);
    let mut q = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 {
            let flip = if s == 0 { p01 } else { p10 };
            if rng.gen::<f64>() < flip {
                s = 1 - s;
            }
        }
        states.push(s);
        q.push(if s == 1 {
            pos.sample(rng)
        } else {
            neg.sample(rng)
        });
    }
    (states, q)
}

/// Direct evaluation of a CNN on a time-major `[t][c]` input, written from
/// the layer definitions without sharing code with the engine.
pub fn naive_forward(model: &Model, input: &[f32]) -> f64 {
    let arch = model.architecture();
    // x[t][c]
    let mut x: Vec<Vec<f64>> = (0..arch.input_len)
        .map(|t| {
            (0..arch.input_channels)
                .map(|c| input[t * arch.input_channels + c] as f64)
                .collect()
        })
        .collect();
    let mut flat: Option<Vec<f64>> = None;
    for (layer, params) in arch.layers.iter().zip(model.params()) {
        match *layer {
            Layer::Conv1d {
                out_channels,
                kernel_size,
                stride,
                activation,
            } => {
                let p = params.as_ref().unwrap();
                let cin = x[0].len();
                let lout = (x.len() - kernel_size) / stride + 1;
                let mut y = vec![vec![0.0; out_channels]; lout];
                for (t, row) in y.iter_mut().enumerate() {
                    for (o, v) in row.iter_mut().enumerate() {
                        let mut acc = p.bias[o] as f64;
                        for c in 0..cin {
                            for j in 0..kernel_size {
                                acc += p.weight[(o * cin + c) * kernel_size + j] as f64
                                    * x[t * stride + j][c];
                            }
                        }
                        *v = acc;
                    }
                }
                for row in &mut y {
                    apply(row, activation);
                }
                x = y;
            }
            Layer::MaxPool { width } => {
                x = (0..x.len() / width)
                    .map(|t| {
                        (0..x[0].len())
                            .map(|c| {
                                (0..width)
                                    .map(|j| x[t * width + j][c])
                                    .fold(f64::NEG_INFINITY, f64::max)
                            })
                            .collect()
                    })
                    .collect();
            }
            Layer::GlobalPool { kind } => {
                let len = x.len() as f64;
                flat = Some(
                    (0..x[0].len())
                        .map(|c| {
                            let col = x.iter().map(|r| r[c]);
                            match kind {
                                PoolKind::Average => col.sum::<f64>() / len,
                                PoolKind::Max => col.fold(f64::NEG_INFINITY, f64::max),
                            }
                        })
                        .collect(),
                );
            }
            Layer::Flatten => {
                // channel-major: index c * len + t
                let (len, ch) = (x.len(), x[0].len());
                flat = Some((0..ch * len).map(|i| x[i % len][i / len]).collect());
            }
            Layer::Dense { units, activation } => {
                let p = params.as_ref().unwrap();
                let v = flat.take().unwrap();
                let mut y: Vec<f64> = (0..units)
                    .map(|o| {
                        p.bias[o] as f64
                            + (0..v.len())
                                .map(|i| p.weight[o * v.len() + i] as f64 * v[i])
                                .sum::<f64>()
                    })
                    .collect();
                apply(&mut y, activation);
                flat = Some(y);
            }
            Layer::Dropout { .. } => {}
        }
    }
    let out = flat.unwrap();
    *out.last().unwrap()
}

fn apply(v: &mut [f64], activation: Activation) {
    match activation {
        Activation::Linear => {}
        Activation::Relu => v.iter_mut().for_each(|x| *x = x.max(0.0)),
        Activation::Sigmoid => v.iter_mut().for_each(|x| *x = 1.0 / (1.0 + (-*x).exp())),
        Activation::Softmax => {
            let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = v.iter().map(|x| (x - m).exp()).sum();
            v.iter_mut().for_each(|x| *x = (*x - m).exp() / z);
        }
    }
}

/// Random valid small architecture over a `len x channels` input.
pub fn random_arch<R: Rng>(rng: &mut R, len: usize, channels: usize) -> CnnArchitecture {
    let act = |rng: &mut R| {
        [Activation::Linear, Activation::Relu, Activation::Sigmoid][rng.gen_range(0..3)]
    };
    let mut layers = Vec::new();
    let mut cur = len;
    for _ in 0..rng.gen_range(1..=2) {
        let kernel = rng.gen_range(1..=5.min(cur));
        let stride = rng.gen_range(1..=2);
        layers.push(Layer::Conv1d {
            out_channels: rng.gen_range(1..=4),
            kernel_size: kernel,
            stride,
            activation: act(rng),
        });
        cur = (cur - kernel) / stride + 1;
        if cur >= 4 && rng.gen_bool(0.5) {
            layers.push(Layer::MaxPool { width: 2 });
            cur /= 2;
        }
    }
    if rng.gen_bool(0.5) {
        layers.push(Layer::Flatten);
    } else {
        let kind = if rng.gen_bool(0.5) {
            PoolKind::Average
        } else {
            PoolKind::Max
        };
        layers.push(Layer::GlobalPool { kind });
    }
    if rng.gen_bool(0.5) {
        layers.push(Layer::Dense {
            units: rng.gen_range(1..=5),
            activation: act(rng),
        });
        layers.push(Layer::Dropout { rate: 0.5 });
    }
    layers.push(if rng.gen_bool(0.5) {
        Layer::Dense {
            units: 1,
            activation: Activation::Sigmoid,
        }
    } else {
        Layer::Dense {
            units: 2,
            activation: Activation::Softmax,
        }
    });
    CnnArchitecture {
        input_len: len,
        input_channels: channels,
        layers,
    }
}

/// Small network over full 1024 x 18 blocks, cheap enough for debug builds.
pub fn small_block_arch() -> CnnArchitecture {
    CnnArchitecture {
        input_len: 1024,
        input_channels: 18,
        layers: vec![
            Layer::Conv1d {
                out_channels: 4,
                kernel_size: 16,
                stride: 8,
                activation: Activation::Relu,
            },
            Layer::MaxPool { width: 4 },
            Layer::GlobalPool {
                kind: PoolKind::Average,
            },
            Layer::Dense {
                units: 1,
                activation: Activation::Sigmoid,
            },
        ],
    }
}

pub fn set_params(model: &mut Model, f: impl Fn(&mut LayerParams)) {
    for p in model.params_mut() {
        f(p);
    }
}

pub struct FileSpec {
    pub name: String,
    pub duration_s: usize,
    pub seizures: Vec<(f64, f64)>,
}

/// Synthetic EEG on the standard montage: background rhythms, 60 Hz hum, and
/// a large 3 Hz discharge during seizures.
pub fn synthetic_recording<R: Rng>(rng: &mut R, patient: &str, spec: &FileSpec) -> Recording {
    let fs = 256usize;
    let n = spec.duration_s * fs;
    let montage = MontageSpec::standard();
    let channels = montage
        .pairs()
        .iter()
        .enumerate()
        .map(|(c, label)| {
            let phase = c as f64 * 0.3;
            let samples = (0..n)
                .map(|i| {
                    let t = i as f64 / fs as f64;
                    let ictal = spec.seizures.iter().any(|&(a, b)| t >= a && t < b);
                    let mut v = 20.0 * (2.0 * std::f64::consts::PI * 10.0 * t + phase).sin()
                        + 15.0 * (2.0 * std::f64::consts::PI * 60.0 * t).sin()
                        + rng.gen_range(-5.0..5.0);
                    if ictal {
                        v += 150.0 * (2.0 * std::f64::consts::PI * 3.0 * t).sin();
                    }
                    v
                })
                .collect();
            Channel::new(label.clone(), samples)
        })
        .collect();
    Recording {
        patient_id: patient.to_string(),
        file_id: spec.name.clone(),
        sample_rate: fs as u32,
        channels,
    }
}

pub fn summary_text(files: &[FileSpec]) -> String {
    let mut s = String::from("Data Sampling Rate: 256 Hz\n*************************\n\n");
    for f in files {
        s += &format!(
            "File Name: {}\nFile Start Time: 10:00:00\nFile End Time: 10:01:00\nNumber of Seizures in File: {}\n",
            f.name,
            f.seizures.len()
        );
        for (i, (a, b)) in f.seizures.iter().enumerate() {
            s += &format!(
                "Seizure {} Start Time: {a} seconds\nSeizure {} End Time: {b} seconds\n",
                i + 1,
                i + 1
            );
        }
        s += "\n";
    }
    s
}

/// Writes `<root>/<patient>/<file>.edf` and `<patient>-summary.txt`.
pub fn write_dataset<R: Rng>(rng: &mut R, root: &Path, patients: &[(&str, Vec<FileSpec>)]) {
    for (patient, files) in patients {
        let dir = root.join(patient);
        std::fs::create_dir_all(&dir).unwrap();
        for f in files {
            write_edf(&synthetic_recording(rng, patient, f), dir.join(&f.name)).unwrap();
        }
        std::fs::write(
            dir.join(format!("{patient}-summary.txt")),
            summary_text(files),
        )
        .unwrap();
    }
}

/// Blocks a file contributes: each merged window keeps `3d` seconds of
/// context around its seizures and yields `floor(length) - 3` blocks.
pub fn expected_blocks(spec: &FileSpec) -> usize {
    let mut windows: Vec<(f64, f64)> = Vec::new();
    let mut sz = spec.seizures.clone();
    sz.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (a, b) in sz {
        let d = b - a;
        let lo = (a - 3.0 * d).max(0.0);
        let hi = (b + 3.0 * d).min(spec.duration_s as f64);
        match windows.last_mut() {
            Some(w) if lo <= w.1 => w.1 = w.1.max(hi),
            _ => windows.push((lo, hi)),
        }
    }
    windows
        .iter()
        .map(|(lo, hi)| ((hi - lo).floor() as usize).saturating_sub(3))
        .sum()
}

/// Two patients with one seizure recording and one seizure-free recording each.
pub fn two_patient_dataset() -> Vec<(&'static str, Vec<FileSpec>)> {
    vec![
        (
            "chb01",
            vec![
                FileSpec {
                    name: "chb01_01.edf".into(),
                    duration_s: 60,
                    seizures: vec![(24.0, 32.0)],
                },
                FileSpec {
                    name: "chb01_02.edf".into(),
                    duration_s: 20,
                    seizures: vec![],
                },
            ],
        ),
        (
            "chb02",
            vec![
                FileSpec {
                    name: "chb02_01.edf".into(),
                    duration_s: 20,
                    seizures: vec![],
                },
                FileSpec {
                    name: "chb02_02.edf".into(),
                    duration_s: 50,
                    seizures: vec![(10.0, 16.0)],
                },
            ],
        ),
    ]
}

/// Hand-assembled single-signal EDF file with every header field editable.
#[derive(Debug, Clone)]
pub struct EdfFixture {
    pub version: String,
    pub header_bytes: String,
    pub num_records: String,
    pub duration: String,
    pub num_signals: String,
    pub label: String,
    pub physical_min: String,
    pub physical_max: String,
    pub digital_min: String,
    pub digital_max: String,
    pub samples_per_record: String,
    pub samples: Vec<i16>,
}

impl EdfFixture {
    /// One record holding `samples`, one second long.
    pub fn new(samples: &[i16], physical: (f64, f64), digital: (i32, i32)) -> Self {
        EdfFixture {
            version: "0".into(),
            header_bytes: "512".into(),
            num_records: "1".into(),
            duration: "1".into(),
            num_signals: "1".into(),
            label: "FP1-F7".into(),
            physical_min: physical.0.to_string(),
            physical_max: physical.1.to_string(),
            digital_min: digital.0.to_string(),
            digital_max: digital.1.to_string(),
            samples_per_record: samples.len().to_string(),
            samples: samples.to_vec(),
        }
    }

    pub fn bytes(&self) -> Vec<u8> {
        fn field(out: &mut Vec<u8>, text: &str, width: usize) {
            let mut b = text.as_bytes().to_vec();
            b.resize(width, b' ');
            out.extend_from_slice(&b[..width]);
        }
        let mut out = Vec::new();
        field(&mut out, &self.version, 8);
        field(&mut out, "fixture patient", 80);
        field(&mut out, "fixture recording", 80);
        field(&mut out, "01.01.25", 8);
        field(&mut out, "00.00.00", 8);
        field(&mut out, &self.header_bytes, 8);
        field(&mut out, "", 44);
        field(&mut out, &self.num_records, 8);
        field(&mut out, &self.duration, 8);
        field(&mut out, &self.num_signals, 4);
        field(&mut out, &self.label, 16);
        field(&mut out, "AgAgCl electrode", 80);
        field(&mut out, "uV", 8);
        field(&mut out, &self.physical_min, 8);
        field(&mut out, &self.physical_max, 8);
        field(&mut out, &self.digital_min, 8);
        field(&mut out, &self.digital_max, 8);
        field(&mut out, "", 80);
        field(&mut out, &self.samples_per_record, 8);
        field(&mut out, "", 32);
        for s in &self.samples {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out
    }

    pub fn write(&self, path: &Path) {
        std::fs::write(path, self.bytes()).unwrap();
    }
}
