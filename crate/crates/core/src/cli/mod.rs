//! Command-line front end: `ingest`, `infer`, `smooth`, `evaluate`, `flops`.

mod commands;
mod config;

pub use commands::{
    cmd_evaluate, cmd_flops, cmd_infer, cmd_ingest, cmd_smooth, split_chains, FlopTable,
    FlopTableRow, InferSummary, IngestSummary, MarginalRow, PatientCount, SmoothSummary,
    TOOL_VERSION,
};
pub use config::*;

use anyhow::Result;
use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "ictal",
    version,
    about = "Seizure detection with CNN likelihoods and HMM smoothing"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Select seizure recordings, filter, trim and cut them into labelled blocks.
    Ingest,
    /// Score every block with the CNN.
    Infer,
    /// Smooth block probabilities per recording and threshold them.
    Smooth,
    /// Cross-validated metrics for raw and smoothed probabilities.
    Evaluate,
    /// FLOP table for the configured CNN and the factor graph.
    Flops,
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = PipelineConfig::resolve(&cli.config)?;
    match cli.command {
        Command::Ingest => print!("{}", cmd_ingest(&cfg)?),
        Command::Infer => print!("{}", cmd_infer(&cfg)?),
        Command::Smooth => print!("{}", cmd_smooth(&cfg)?),
        Command::Evaluate => {
            let r = cmd_evaluate(&cfg)?;
            for (name, s) in [("raw", &r.raw), ("smoothed", &r.smoothed)] {
                let fmt = |m: Option<crate::evaluation::MeanStd>| {
                    m.map(|m| format!("{:.2} ± {:.2}", m.mean, m.std))
                        .unwrap_or_else(|| "n/a".into())
                };
                println!(
                    "{name:<9} AUC-ROC {}  AUC-PR {}  F1 {}  precision {}  recall {}",
                    fmt(s.auc_roc),
                    fmt(s.auc_pr),
                    fmt(s.f1),
                    fmt(s.precision),
                    fmt(s.recall)
                );
            }
        }
        Command::Flops => print!("{}", cmd_flops(&cfg)?),
    }
    Ok(())
}
