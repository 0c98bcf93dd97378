//! Command-line surface: argument definitions and dispatch. The binary is
//! a thin wrapper over [`dispatch`] so integration tests can drive the
//! full command path in-process.

pub mod commands;
pub mod config;
pub mod persist;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use hisum_core::dataset::SourceFormat;

#[derive(Debug, Parser)]
#[command(
    name = "hisum",
    version,
    about = "Question answering over trusted documents via verbatim \
             highlighting and a question-blind summarizer"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ask one question through one configured pipeline.
    Ask(AskArgs),
    /// Interactive loop: each stdin line is a question.
    Repl(ReplArgs),
    /// Batch evaluation over a dataset.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Adversarial-prompt harness.
    #[command(subcommand)]
    Security(SecurityCommand),
    /// Dataset utilities.
    #[command(subcommand)]
    Dataset(DatasetCommand),
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Run pipelines over the dataset and persist their answers.
    Run(EvalRunArgs),
    /// Score persisted answers with the correctness, relevance, and
    /// quality judges.
    Judge(EvalJudgeArgs),
    /// Run all configured pipelines, battle them pairwise per question,
    /// and write ratings plus metric summaries.
    Battle(EvalBattleArgs),
}

#[derive(Debug, Subcommand)]
pub enum SecurityCommand {
    /// Run an attack corpus against the configured pipeline setups.
    Run(SecurityRunArgs),
}

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    /// Read a dataset in one shape and write it in another.
    Convert(DatasetConvertArgs),
}

fn parse_format(s: &str) -> Result<SourceFormat, String> {
    s.parse()
}

#[derive(Debug, Args)]
pub struct AskArgs {
    /// Run configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Name of the configured pipeline to use.
    #[arg(long)]
    pub pipeline: String,
    /// The question text.
    #[arg(long)]
    pub question: String,
    /// Question id; defaults to "ask". Use a dataset question id to get
    /// that record's associated document under passthrough retrieval.
    #[arg(long)]
    pub id: Option<String>,
    /// Also print highlights, the guessed question, and usage.
    #[arg(long)]
    pub debug: bool,
}

#[derive(Debug, Args)]
pub struct ReplArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub pipeline: String,
    /// Also print highlights, the guessed question, and usage per answer.
    #[arg(long)]
    pub debug: bool,
}

#[derive(Debug, Args)]
pub struct EvalRunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Restrict to one configured pipeline (default: all).
    #[arg(long)]
    pub pipeline: Option<String>,
    /// Dataset path, overriding the config.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Dataset shape: repliqa, bioasq, or normalized.
    #[arg(long, value_parser = parse_format)]
    pub format: Option<SourceFormat>,
    /// Output directory for results-<pipeline>.jsonl files.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-question parallelism.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Replace existing output files.
    #[arg(long)]
    pub overwrite: bool,
}

#[derive(Debug, Args)]
pub struct EvalJudgeArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Restrict to one configured pipeline (default: all).
    #[arg(long)]
    pub pipeline: Option<String>,
    /// Directory holding results-<pipeline>.jsonl; verdicts and scores
    /// are written next to them.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub overwrite: bool,
}

#[derive(Debug, Args)]
pub struct EvalBattleArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, value_parser = parse_format)]
    pub format: Option<SourceFormat>,
    /// Output directory for results, battles.jsonl, and report.json.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Override the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub overwrite: bool,
}

#[derive(Debug, Args)]
pub struct SecurityRunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Attack corpus JSONL ({"id","prompt"}), overriding the config; the
    /// bundled 25-case corpus when neither names one.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Output directory for security_report.json.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub overwrite: bool,
}

#[derive(Debug, Args)]
pub struct DatasetConvertArgs {
    /// Input dataset file.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Input shape: repliqa, bioasq, or normalized.
    #[arg(long, value_parser = parse_format)]
    pub format: SourceFormat,
    /// Output shape: normalized or repliqa.
    #[arg(long, value_parser = parse_format, default_value = "normalized")]
    pub to: SourceFormat,
    /// Output file.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub overwrite: bool,
}

/// Parse and run. Returns the process exit status: 0 on success, 1 on any
/// hard error, 2 on usage errors (0 for --help/--version).
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Ask(args) => commands::ask(&args),
        Command::Repl(args) => commands::repl(&args),
        Command::Eval(EvalCommand::Run(args)) => commands::eval_run(&args),
        Command::Eval(EvalCommand::Judge(args)) => commands::eval_judge(&args),
        Command::Eval(EvalCommand::Battle(args)) => commands::eval_battle(&args),
        Command::Security(SecurityCommand::Run(args)) => commands::security_run(&args),
        Command::Dataset(DatasetCommand::Convert(args)) => commands::dataset_convert(&args),
    }
}
