//! `xoscgen`: generate, validate, batch, run and score driving scenarios.

mod batch;
mod context;
mod corpus;
mod exit;
mod generate;
mod run;
mod score;
mod validate;

use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use context::SourceArgs;

#[derive(Debug, Parser)]
#[command(
    name = "xoscgen",
    version,
    about = "Driving-scenario descriptions to OpenSCENARIO documents"
)]
struct Cli {
    #[command(flatten)]
    sources: SourceArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Turn one description into a representation, a document and a trace.
    Generate(generate::GenerateArgs),
    /// Generate every text under every seed and summarize.
    Batch(batch::BatchArgs),
    /// Check a representation against the rules or a document against the schema.
    Validate(validate::ValidateArgs),
    /// Replay a document with its monitors and write the report.
    Run(run::RunArgs),
    /// Element accuracy, matching accuracy and rater agreement.
    Score(score::ScoreArgs),
    /// Corpus maintenance.
    Corpus {
        #[command(subcommand)]
        command: CorpusCommand,
    },
}

#[derive(Debug, Subcommand)]
enum CorpusCommand {
    /// Load the corpus and check it covers the repository.
    Check,
}

/// Writes one line to stdout. A closed pipe is not an error for a
/// command whose output is being truncated by its reader.
pub(crate) fn print_line(line: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(a) => generate::cmd_generate(a, &cli.sources),
        Command::Batch(a) => batch::cmd_batch(a, &cli.sources),
        Command::Validate(a) => validate::cmd_validate(a, &cli.sources),
        Command::Run(a) => run::cmd_run(a, &cli.sources),
        Command::Score(a) => score::cmd_score(a),
        Command::Corpus {
            command: CorpusCommand::Check,
        } => corpus::cmd_corpus_check(&cli.sources),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", exit::error_json(&err));
            ExitCode::from(exit::class_of(&err).code())
        }
    }
}
