use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fuselect::commands;
use fuselect::config::{ConfigFile, FoldSelection, Overrides, PipelineConfig};
use fuselect::CliResult;
use fuselect_core::Split;

#[derive(Parser)]
#[command(
    name = "fuselect",
    version,
    about = "Entropy-aware fusion of speech-emotion and text-sentiment scores"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one calibration artifact per fold from its training rows.
    Calibrate(RunArgs),
    /// Merge one fold's test rows under a calibration artifact.
    Apply(ApplyArgs),
    /// Score merged files: before/after UA, WA, F1 per fold and averaged.
    Evaluate(EvaluateArgs),
    /// Export entropy/varentropy histograms per predicted class.
    Diagnose(DiagnoseArgs),
    /// Generate a synthetic score file with known structure.
    Synth(SynthArgs),
    /// Calibrate, apply, and evaluate every selected fold.
    Pipeline(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Canonical score CSV.
    #[arg(long)]
    scores: Option<PathBuf>,
    /// TOML file with defaults for any of these options.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `all` or a comma-separated list such as `1,2`.
    #[arg(long)]
    folds: Option<FoldSelection>,
    /// Half-width of the percentile search window.
    #[arg(long)]
    delta: Option<u32>,
    /// Percentile grid spacing; must divide 2 * delta.
    #[arg(long)]
    step: Option<u32>,
    /// Spacing of the mapping-threshold grid; must divide 1.
    #[arg(long)]
    tau_m_step: Option<f64>,
}

impl RunArgs {
    fn resolve(self) -> CliResult<PipelineConfig> {
        let file = ConfigFile::load(self.config.as_deref())?;
        PipelineConfig::resolve(
            &file,
            Overrides {
                delta: self.delta,
                step: self.step,
                tau_m_step: self.tau_m_step,
                folds: self.folds,
                bins: None,
                scores: self.scores,
                out: self.out,
            },
        )
    }
}

#[derive(Args)]
struct ApplyArgs {
    #[arg(long)]
    scores: PathBuf,
    /// Artifact written by `calibrate`.
    #[arg(long)]
    artifact: PathBuf,
    /// Fold whose test rows to merge; defaults to the artifact's fold.
    #[arg(long)]
    fold: Option<u32>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Merged-prediction CSVs written by `apply` or `pipeline`.
    #[arg(required = true)]
    merged: Vec<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    scores: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// `all` or a comma-separated list of folds.
    #[arg(long)]
    folds: Option<FoldSelection>,
    /// Histogram bins per panel.
    #[arg(long)]
    bins: Option<usize>,
    /// Restrict to one split (`train`, `val`, `test`); all rows by default.
    #[arg(long)]
    split: Option<Split>,
}

#[derive(Args)]
struct SynthArgs {
    /// TOML file whose `[synth]` table describes the corpus.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of utterances.
    #[arg(long)]
    records: Option<usize>,
    /// Number of cross-validation folds.
    #[arg(long)]
    fold_count: Option<u32>,
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Calibrate(args) => {
            for path in commands::cmd_calibrate(&args.resolve()?)? {
                println!("{}", path.display());
            }
        }
        Command::Apply(args) => {
            for path in commands::cmd_apply(&args.scores, &args.artifact, args.fold, &args.out)? {
                println!("{}", path.display());
            }
        }
        Command::Evaluate(args) => {
            print!("{}", commands::cmd_evaluate(&args.merged, &args.out)?);
        }
        Command::Diagnose(args) => {
            let file = ConfigFile::load(args.config.as_deref())?;
            let cfg = PipelineConfig::resolve(
                &file,
                Overrides {
                    folds: args.folds,
                    bins: args.bins,
                    scores: args.scores,
                    out: args.out,
                    ..Overrides::default()
                },
            )?;
            for path in commands::cmd_diagnose(&cfg, args.split)? {
                println!("{}", path.display());
            }
        }
        Command::Synth(args) => {
            let file = ConfigFile::load(args.config.as_deref())?;
            let mut spec = file.synth.unwrap_or_default();
            if let Some(seed) = args.seed {
                spec.seed = seed;
            }
            if let Some(n) = args.records {
                spec.n_records = n;
            }
            if let Some(k) = args.fold_count {
                spec.folds = k;
            }
            let out = args.out.or(file.out).unwrap_or_else(|| PathBuf::from("."));
            for path in commands::cmd_synth(&spec, &out)? {
                println!("{}", path.display());
            }
        }
        Command::Pipeline(args) => {
            print!("{}", commands::cmd_pipeline(&args.resolve()?)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
