mod commands;
mod report;

use clap::{Args, Parser, Subcommand};

/// Exit codes: 0 success, 2 usage error (clap), 3 data error, 4 backend error.
pub const EXIT_DATA: i32 = 3;
pub const EXIT_BACKEND: i32 = 4;

#[derive(Parser)]
#[command(name = "soundscene", version, about = "Sound-scene tagging/separation toolkit")]
struct Cli {
    /// Optional JSON config file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<std::path::PathBuf>,
    /// Per-clip parallelism.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dump mel, spectral roll-off, and chroma matrices per input WAV.
    Features(FeaturesArgs),
    /// Score predictions against a manifest: Acc1/Acc2/Acc3 and CA-SDRi.
    Evaluate(EvaluateArgs),
    /// Run the label-correction agent over a corpus.
    Agent(AgentArgs),
    /// Dataset tooling.
    #[command(subcommand)]
    Dataset(DatasetCommand),
}

#[derive(Subcommand)]
enum DatasetCommand {
    /// Reproduce the refinement audit table from a source manifest.
    Audit(AuditArgs),
    /// Synthesize a mixture corpus.
    Mix(MixArgs),
}

#[derive(Args)]
struct FeaturesArgs {
    /// Input WAV files.
    inputs: Vec<std::path::PathBuf>,
    #[arg(long, default_value = "features_out")]
    out_dir: std::path::PathBuf,
    /// Roll-off cumulative energy fraction.
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    n_mels: Option<usize>,
    /// Channel to analyze for multichannel input.
    #[arg(long, default_value_t = 0)]
    channel: usize,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Mixture manifest (line-delimited, versioned header).
    #[arg(long)]
    manifest: std::path::PathBuf,
    /// Predictions: one JSON record {"clip_id", "labels"} per line.
    #[arg(long)]
    predictions: std::path::PathBuf,
    /// Corpus directory with mixtures and ground-truth stems; enables CA-SDRi.
    #[arg(long)]
    corpus_dir: Option<std::path::PathBuf>,
    /// Estimated stems directory ({clip_id}/{class}.wav); enables CA-SDRi.
    #[arg(long)]
    est_stems: Option<std::path::PathBuf>,
    /// Per-clip report output (line-delimited JSON).
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Args)]
struct AgentArgs {
    #[arg(long)]
    manifest: std::path::PathBuf,
    /// Corpus directory with mixture.wav and stems/ per clip.
    #[arg(long)]
    corpus_dir: std::path::PathBuf,
    #[arg(long, default_value = "agent_out")]
    out_dir: std::path::PathBuf,
    /// Directory for per-clip agent traces.
    #[arg(long)]
    trace_dir: Option<std::path::PathBuf>,
    /// External tagger command; oracle tagger from the manifest when absent.
    #[arg(long, num_args = 1.., value_delimiter = ' ')]
    backend_tag: Option<Vec<String>>,
    /// External separator command; oracle separator when absent.
    #[arg(long, num_args = 1.., value_delimiter = ' ')]
    backend_sep: Option<Vec<String>>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    top_k: Option<usize>,
    /// retag_score | original_score
    #[arg(long)]
    rank_by: Option<String>,
    /// Chain into evaluation against the manifest after correction.
    #[arg(long)]
    evaluate: bool,
}

#[derive(Args)]
struct AuditArgs {
    /// Source records, one JSON object per line.
    #[arg(long)]
    sources: std::path::PathBuf,
    /// Flag file of heterogeneous source ids (one per line).
    #[arg(long)]
    heterogeneous: Option<std::path::PathBuf>,
    /// Flag file of externally added source ids.
    #[arg(long)]
    added: Option<std::path::PathBuf>,
    #[arg(long, default_value_t = soundscene_core::dataset::DEFAULT_MIN_DURATION)]
    min_duration: f64,
    /// Audit report output (line-delimited JSON).
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Args)]
struct MixArgs {
    /// Source records, one JSON object per line.
    #[arg(long)]
    sources: std::path::PathBuf,
    /// Noise bed WAV.
    #[arg(long)]
    noise: std::path::PathBuf,
    #[arg(long, default_value = "corpus_out")]
    out_dir: std::path::PathBuf,
    #[arg(long, default_value_t = 10)]
    n_clips: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    events_min: usize,
    #[arg(long, default_value_t = 3)]
    events_max: usize,
    #[arg(long, default_value_t = 5.0)]
    snr_min: f64,
    #[arg(long, default_value_t = 20.0)]
    snr_max: f64,
    #[arg(long, default_value_t = 10.0)]
    duration: f64,
}

fn main() {
    let cli = Cli::parse();
    let file_config = match commands::FileConfig::load(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(EXIT_DATA);
        }
    };
    let result = match cli.command {
        Command::Features(args) => commands::cmd_features(args, &file_config),
        Command::Evaluate(args) => commands::cmd_evaluate(args, &file_config),
        Command::Agent(args) => commands::cmd_agent(args, &file_config),
        Command::Dataset(DatasetCommand::Audit(args)) => commands::cmd_audit(args),
        Command::Dataset(DatasetCommand::Mix(args)) => {
            commands::cmd_mix(args, &file_config, cli.jobs)
        }
    };
    match result {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let backendish = e
                .downcast_ref::<soundscene_core::Error>()
                .map(|err| {
                    matches!(
                        err,
                        soundscene_core::Error::BackendProcess(_)
                            | soundscene_core::Error::BackendTimeout(_)
                            | soundscene_core::Error::ProtocolViolation(_)
                            | soundscene_core::Error::ResponseValidation(_)
                            | soundscene_core::Error::BackendLabel { .. }
                    )
                })
                .unwrap_or(false);
            std::process::exit(if backendish { EXIT_BACKEND } else { EXIT_DATA });
        }
    }
}
