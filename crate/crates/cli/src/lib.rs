//! `mythmark` command line and review service.
//!
//! [`run`] is the whole program minus process setup, so tests drive it
//! in-process with captured output.

mod commands;
pub mod serve;
pub mod store;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use mythmark::pipeline::DEFAULT_MAX_LEN;
use mythmark::quote::DEFAULT_THRESHOLD;

pub use commands::BANNER;
pub use store::{Store, StoreError};

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    /// Validation violations, lint findings or unfound quotes.
    Findings = 1,
    Usage = 2,
    /// Backend or I/O failure.
    Failure = 3,
}

#[derive(Debug, Parser)]
#[command(name = "mythmark", version, about = "Annotate, check and review mythological references in French texts")]
pub struct Cli {
    /// Store directory (texts/, annotations/, reports/, gold/, cache/).
    #[arg(long, global = true, default_value = "store")]
    pub store: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    Txt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportArg {
    Md,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Copy a plain-text file into the store, normalizing line endings.
    Ingest {
        path: PathBuf,
        #[arg(long, value_enum, default_value = "txt")]
        format: InputFormat,
        /// Document id; defaults to the file stem.
        #[arg(long)]
        id: Option<String>,
    },
    /// Pre-annotate a stored document with the model.
    Annotate {
        doc_id: String,
        /// Backend configuration (JSON). Optional with --mock.
        #[arg(long)]
        backend: Option<PathBuf>,
        /// One name per line; passages mentioning none are skipped.
        #[arg(long)]
        gazetteer: Option<PathBuf>,
        /// Directory holding canned responses (responses.json); no network.
        #[arg(long)]
        mock: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_MAX_LEN)]
        max_len: usize,
    },
    /// Check a document's annotation set against its text.
    Validate { doc_id: String },
    /// Report suspicious annotations.
    Lint { doc_id: String },
    /// Ground quotations against a corpus of plain-text files.
    VerifyQuotes {
        /// JSON list of quotes: strings or {"quote", "claimed_doc_id"}.
        quotes: PathBuf,
        /// Directory of .txt files (or a store, whose texts/ is used).
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
    },
    /// Score predicted annotations against gold. Arguments are stand-off
    /// files, or document ids resolved in the store's annotations/ and gold/.
    Evaluate {
        pred: String,
        gold: String,
        #[arg(long, value_enum, default_value = "md")]
        report: ReportArg,
        /// Write the report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ask the model to comment on one passage. The answer is printed as
    /// unverified.
    Interpret {
        doc_id: String,
        /// Passage index, as numbered in the pipeline report.
        #[arg(long)]
        passage: usize,
        #[arg(long)]
        backend: Option<PathBuf>,
        #[arg(long)]
        mock: Option<PathBuf>,
    },
    /// Serve the review API over HTTP on localhost.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { Exit::Usage } else { Exit::Success };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{rendered}")
            } else {
                write!(out, "{rendered}")
            };
            return code as i32;
        }
    };
    let code = match commands::dispatch(cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.exit
        }
    };
    code as i32
}
