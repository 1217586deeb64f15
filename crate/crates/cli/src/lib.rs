//! Stage-by-stage pipeline over coded student-AI dialogues.
//!
//! Each subcommand reads upstream JSON artifacts from the output directory,
//! runs one analysis step and writes its own artifact. Every artifact carries
//! the schema version, tool version and a hash of the configuration and
//! input files; stages refuse upstream artifacts whose hash differs.
//!
//! Exit codes: 0 success, 1 I/O or internal failure, 2 missing or stale
//! artifact, 3 invalid input or configuration, 4 statistically degenerate
//! data (empty group, rank-deficient design, ...).

pub mod artifacts;
pub mod config;
pub mod report;
mod stages;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;
use thiserror::Error;

use helpseek_core::codes::CodesError;
use helpseek_core::corpus::CorpusError;
use helpseek_core::htna::HtnaError;
use helpseek_core::regress::RegressError;
use helpseek_core::stats::StatsError;

pub use config::{Cli, Command, ConfigArgs, PipelineConfig};
pub use stages::run;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("missing artifact {}: {hint}", path.display())]
    MissingArtifact { path: PathBuf, hint: String },
    #[error("artifact {} has config hash {found}, expected {expected}: {hint}", path.display())]
    StaleArtifact {
        path: PathBuf,
        found: String,
        expected: String,
        hint: String,
    },
    #[error("unreadable artifact {}: {message}; rerun the stage that produced it", path.display())]
    BadArtifact { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Codes(#[from] CodesError),
    #[error(transparent)]
    Htna(#[from] HtnaError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Regress(#[from] RegressError),
}

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_ARTIFACT: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_DEGENERATE: i32 = 4;

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::MissingArtifact { .. } | CliError::StaleArtifact { .. } | CliError::BadArtifact { .. } => {
                EXIT_ARTIFACT
            }
            CliError::Config(_) => EXIT_VALIDATION,
            CliError::Io { .. } => EXIT_FAILURE,
            CliError::Corpus(e) => match e {
                CorpusError::Io(_) => EXIT_FAILURE,
                CorpusError::InsufficientStudents(_) => EXIT_DEGENERATE,
                _ => EXIT_VALIDATION,
            },
            CliError::Codes(e) => match e {
                CodesError::TooFewItems(_) => EXIT_DEGENERATE,
                _ => EXIT_VALIDATION,
            },
            CliError::Htna(e) => match e {
                HtnaError::EmptySelection | HtnaError::EmptySequenceSet => EXIT_DEGENERATE,
                _ => EXIT_VALIDATION,
            },
            CliError::Stats(e) => match e {
                StatsError::EmptyGroup(_) | StatsError::Shape(_) | StatsError::Htna(_) => EXIT_DEGENERATE,
                StatsError::Workers(_) => EXIT_FAILURE,
                _ => EXIT_VALIDATION,
            },
            CliError::Regress(e) => match e {
                RegressError::UngradedStudent(_) | RegressError::UnknownPredictor(_) => EXIT_VALIDATION,
                _ => EXIT_DEGENERATE,
            },
        }
    }
}

/// Parses `argv`, runs the subcommand and returns the process exit code.
/// Stage summaries go to `stdout`, warnings and errors to `stderr`.
pub fn main_with_args<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let sink: &mut dyn Write = if code == 0 { stdout } else { stderr };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let result = cli.args.resolve().and_then(|cfg| run(cli.command, &cfg, stdout, stderr));
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
