use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::inference::{DetectorConfig, TransitionModel, DEFAULT_P01, DEFAULT_P10};
use crate::likelihood::{load_weights, CnnArchitecture};
use crate::preprocess::{FilterSpec, STRIDE_S, WINDOW_S};
use crate::signal_io::MontageSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum MontageChoice {
    /// The default 18 derivations (includes F3-T3, T3-P3).
    #[default]
    Standard,
    /// The double-banana montage as labelled in CHB-MIT files (F3-C3, C3-P3).
    Chbmit,
}

/// Every tunable of the pipeline. Loaded from TOML, then overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset_root: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub montage: MontageChoice,
    /// Explicit derivation list; takes precedence over `montage`.
    pub montage_pairs: Option<Vec<String>>,
    pub notch_freq: f64,
    pub quality_factor: f64,
    pub window_s: f64,
    pub stride_s: f64,
    pub p01: f64,
    pub p10: f64,
    /// Distribution of the first block; the stationary one when absent.
    pub initial: Option<[f64; 2]>,
    pub threshold: f64,
    pub fold_seed: Option<u64>,
    pub folds: Option<usize>,
    pub fold_test_size: Option<usize>,
    pub weights: Option<PathBuf>,
    pub architecture: Option<PathBuf>,
    pub probabilities: Option<PathBuf>,
    /// Fixed-lag smoothing with this lag instead of offline smoothing.
    pub lag: Option<usize>,
    /// Block count used for the FLOP table.
    pub blocks: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            dataset_root: None,
            output_dir: PathBuf::from("out"),
            montage: MontageChoice::Standard,
            montage_pairs: None,
            notch_freq: 60.0,
            quality_factor: 30.0,
            window_s: WINDOW_S,
            stride_s: STRIDE_S,
            p01: DEFAULT_P01,
            p10: DEFAULT_P10,
            initial: None,
            threshold: 0.5,
            fold_seed: None,
            folds: None,
            fold_test_size: None,
            weights: None,
            architecture: None,
            probabilities: None,
            lag: None,
            blocks: 1000,
        }
    }
}

/// Flags that override fields of the configuration file.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// CHB-MIT style root with one directory per patient.
    #[arg(long, global = true)]
    pub dataset_root: Option<PathBuf>,
    /// Directory for every artifact the pipeline writes.
    #[arg(long, short = 'o', global = true)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub montage: Option<MontageChoice>,
    /// Line-noise frequency in Hz.
    #[arg(long, global = true)]
    pub notch_freq: Option<f64>,
    /// Notch quality factor (center / bandwidth).
    #[arg(long, global = true)]
    pub quality_factor: Option<f64>,
    /// Block length in seconds.
    #[arg(long, global = true)]
    pub window_s: Option<f64>,
    /// Block stride in seconds.
    #[arg(long, global = true)]
    pub stride_s: Option<f64>,
    /// P(seizure | previous block normal).
    #[arg(long, global = true)]
    pub p01: Option<f64>,
    /// P(normal | previous block seizure).
    #[arg(long, global = true)]
    pub p10: Option<f64>,
    /// Initial distribution as `pi0,pi1`.
    #[arg(long, global = true, value_delimiter = ',', num_args = 2)]
    pub initial: Option<Vec<f64>>,
    /// Detection threshold on the smoothed marginal (strict).
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    /// Seed of the patient shuffle for cross-validation.
    #[arg(long, global = true)]
    pub fold_seed: Option<u64>,
    /// Number of folds, overriding the 6 x 4 patient plan.
    #[arg(long, global = true)]
    pub folds: Option<usize>,
    /// Test patients per fold, overriding the 6 x 4 patient plan.
    #[arg(long, global = true)]
    pub fold_test_size: Option<usize>,
    /// CNN weight file.
    #[arg(long, global = true)]
    pub weights: Option<PathBuf>,
    /// CNN architecture descriptor (TOML or JSON) for the FLOP table.
    #[arg(long, global = true)]
    pub architecture: Option<PathBuf>,
    /// Block probability CSV; defaults to the one infer writes.
    #[arg(long, global = true)]
    pub probabilities: Option<PathBuf>,
    /// Smooth with this fixed lag instead of the whole recording.
    #[arg(long, global = true)]
    pub lag: Option<usize>,
    /// Block count for the factor-graph row of the FLOP table.
    #[arg(long, global = true)]
    pub blocks: Option<u64>,
}

impl PipelineConfig {
    pub fn from_toml(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// The configuration file named by `args` (or defaults) with every
    /// given flag applied on top.
    pub fn resolve(args: &ConfigArgs) -> Result<Self> {
        let mut c = match &args.config {
            Some(p) => PipelineConfig::from_toml(p)?,
            None => PipelineConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = &args.$f { c.$f = v.clone(); } )* };
        }
        macro_rules! set_opt {
            ($($f:ident),*) => { $( if let Some(v) = &args.$f { c.$f = Some(v.clone()); } )* };
        }
        set!(
            output_dir,
            montage,
            notch_freq,
            quality_factor,
            window_s,
            stride_s,
            p01,
            p10,
            threshold,
            blocks
        );
        set_opt!(
            dataset_root,
            fold_seed,
            folds,
            fold_test_size,
            weights,
            architecture,
            probabilities,
            lag
        );
        if let Some(v) = &args.initial {
            c.initial = Some([v[0], v[1]]);
        }
        c.check()?;
        Ok(c)
    }

    /// Range checks delegated to the owning modules.
    pub fn check(&self) -> Result<()> {
        self.transition()?;
        self.detector()?;
        self.montage_spec()?;
        FilterSpec {
            notch_freq: self.notch_freq,
            quality_factor: self.quality_factor,
            sample_rate: 256.0,
        }
        .validate()?;
        if !(self.window_s > 0.0 && self.stride_s > 0.0) {
            bail!("window_s and stride_s must be positive");
        }
        Ok(())
    }

    pub fn transition(&self) -> Result<TransitionModel> {
        Ok(match self.initial {
            Some(pi) => TransitionModel::new(self.p01, self.p10, pi)?,
            None => TransitionModel::stationary(self.p01, self.p10)?,
        })
    }

    pub fn detector(&self) -> Result<DetectorConfig> {
        Ok(DetectorConfig::new(self.threshold)?)
    }

    pub fn montage_spec(&self) -> Result<MontageSpec> {
        Ok(match (&self.montage_pairs, self.montage) {
            (Some(pairs), _) => MontageSpec::new(pairs)?,
            (None, MontageChoice::Standard) => MontageSpec::standard(),
            (None, MontageChoice::Chbmit) => MontageSpec::chb_mit(),
        })
    }

    pub fn filter(&self, sample_rate: f64) -> FilterSpec {
        FilterSpec {
            notch_freq: self.notch_freq,
            quality_factor: self.quality_factor,
            sample_rate,
        }
    }

    /// The architecture from `architecture` (TOML or JSON), else from the
    /// weight file, else the default.
    pub fn cnn_architecture(&self) -> Result<CnnArchitecture> {
        if let Some(p) = &self.architecture {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let arch: CnnArchitecture = if p.extension().is_some_and(|e| e == "json") {
                serde_json::from_str(&text)?
            } else {
                toml::from_str(&text)?
            };
            arch.validate()?;
            return Ok(arch);
        }
        if let Some(p) = &self.weights {
            return Ok(load_weights(p)?.architecture().clone());
        }
        Ok(CnnArchitecture::default())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn output(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }

    pub fn probabilities_path(&self) -> PathBuf {
        self.probabilities
            .clone()
            .unwrap_or_else(|| self.output(PROBABILITIES))
    }
}

pub const MANIFEST: &str = "manifest.csv";
pub const BLOCKS: &str = "blocks.eegt";
pub const PROBABILITIES: &str = "probabilities.csv";
pub const MARGINALS: &str = "marginals.csv";
pub const REPORT: &str = "report.json";
pub const FOLDS_CSV: &str = "folds.csv";
pub const FOLD_PLAN: &str = "fold_plan.json";
pub const ROC_CSV: &str = "roc.csv";
pub const PR_CSV: &str = "pr.csv";
pub const FLOPS_CSV: &str = "flops.csv";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(
            &path,
            "threshold = 0.3\nfold_seed = 5\nmontage = \"chbmit\"\n",
        )
        .unwrap();
        let args = ConfigArgs {
            config: Some(path),
            fold_seed: Some(9),
            initial: Some(vec![0.5, 0.5]),
            ..Default::default()
        };
        let c = PipelineConfig::resolve(&args).unwrap();
        assert_eq!(c.threshold, 0.3);
        assert_eq!(c.fold_seed, Some(9));
        assert_eq!(c.montage, MontageChoice::Chbmit);
        assert_eq!(c.initial, Some([0.5, 0.5]));
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        let args = ConfigArgs {
            p01: Some(1.5),
            ..Default::default()
        };
        assert!(PipelineConfig::resolve(&args).is_err());
        let args = ConfigArgs {
            threshold: Some(-1.0),
            ..Default::default()
        };
        assert!(PipelineConfig::resolve(&args).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.threshold = 0.4;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
