use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use mythmark::eval::{compute_metrics, match_documents, render_report, ReportFormat};
use mythmark::gateway::{
    build_interpretation_prompt, BackendConfig, ChatBackend, Clock, Gateway, GatewayError, HttpBackend, MockBackend,
    TranscriptCache,
};
use mythmark::pipeline::{annotate_document, lint_document, segment, Gazetteer, PipelineConfig, PipelineError, DEFAULT_MAX_LEN};
use mythmark::quote::{build_index, check_attribution, verify_quote, NormalizationConfig, QuoteError, QuoteStatus};
use mythmark::schema::{load_standoff, validate_annotations, SchemaError, StandoffFile};
use mythmark::text::{char_len, sha256_hex};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::store::{check_id, write_atomic, Store, StoreError};
use crate::{Cli, Command, Exit, ReportArg};

/// Printed before any model commentary.
pub const BANNER: &str = "=== UNVERIFIED MODEL OUTPUT: not checked against the text or any source ===";

pub(crate) struct CliError {
    pub exit: Exit,
    pub message: String,
}

fn usage(message: impl Display) -> CliError {
    CliError { exit: Exit::Usage, message: message.to_string() }
}

fn failure(message: impl Display) -> CliError {
    CliError { exit: Exit::Failure, message: message.to_string() }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownDoc(_) | StoreError::BadId(_) => usage(e),
            _ => failure(e),
        }
    }
}

impl From<GatewayError> for CliError {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::Config(_) => usage(e),
            _ => failure(e),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        failure(format!("writing output: {e}"))
    }
}

type CmdResult = Result<Exit, CliError>;

pub(crate) fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let store = Store::new(cli.store);
    match cli.command {
        Command::Ingest { path, format: _, id } => ingest(&store, &path, id, out),
        Command::Annotate { doc_id, backend, gazetteer, mock, max_len } => {
            annotate(&store, &doc_id, backend.as_deref(), gazetteer.as_deref(), mock.as_deref(), max_len, out)
        }
        Command::Validate { doc_id } => validate(&store, &doc_id, out),
        Command::Lint { doc_id } => lint(&store, &doc_id, out),
        Command::VerifyQuotes { quotes, corpus, threshold } => verify_quotes(&quotes, &corpus, threshold, out, err),
        Command::Evaluate { pred, gold, report, out: target } => evaluate(&store, &pred, &gold, report, target, out),
        Command::Interpret { doc_id, passage, backend, mock } => {
            interpret(&store, &doc_id, passage, backend.as_deref(), mock.as_deref(), out)
        }
        Command::Serve { port } => serve(store, port, out),
    }
}

fn runtime() -> Result<tokio::runtime::Runtime, CliError> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| failure(format!("starting runtime: {e}")))
}

fn ingest(store: &Store, path: &Path, id: Option<String>, out: &mut dyn Write) -> CmdResult {
    let id = match id {
        Some(id) => id,
        None => path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| usage(format!("cannot derive a document id from {}; pass --id", path.display())))?
            .to_string(),
    };
    check_id(&id)?;
    let bytes = std::fs::read(path).map_err(|e| failure(format!("reading {}: {e}", path.display())))?;
    let raw = String::from_utf8(bytes).map_err(|_| usage(format!("{} is not valid UTF-8", path.display())))?;
    let text = raw
        .strip_prefix('\u{feff}')
        .unwrap_or(&raw)
        .replace("\r\n", "\n")
        .replace('\r', "\n");
    if text.trim().is_empty() {
        return Err(usage(format!("{} holds no text", path.display())));
    }

    let digest = sha256_hex(&text);
    match store.read_text(&id) {
        Ok(existing) if existing == text => {
            writeln!(out, "{id}: unchanged (sha256 {digest})")?;
            return Ok(Exit::Success);
        }
        Ok(_) if store.annotations_path(&id).exists() => {
            return Err(usage(format!(
                "`{id}` is already stored with different text and has annotations; remove {} first",
                store.annotations_path(&id).display()
            )));
        }
        Ok(_) | Err(StoreError::UnknownDoc(_)) => {}
        Err(e) => return Err(e.into()),
    }
    write_atomic(&store.text_path(&id), &text)?;
    writeln!(out, "{id}: ingested {} characters (sha256 {digest})", char_len(&text))?;
    Ok(Exit::Success)
}

/// Mock runs never touch the network or the transcript cache and stamp
/// provenance with a fixed clock, so they are reproducible byte for byte.
fn gateway(store: &Store, backend: Option<&Path>, mock: Option<&Path>) -> Result<Gateway, CliError> {
    let config = backend.map(BackendConfig::from_json_file).transpose()?;
    if let Some(dir) = mock {
        let config = config.unwrap_or_else(|| BackendConfig::new("mock://offline", "mock"));
        let backend: Arc<dyn ChatBackend> = Arc::new(MockBackend::load(dir)?);
        return Ok(Gateway::new(backend, config)?.with_clock(Clock::epoch()));
    }
    let config = config.ok_or_else(|| usage("--backend <config> is required unless --mock is given"))?;
    let backend: Arc<dyn ChatBackend> = Arc::new(HttpBackend::from_config(&config)?);
    let cache = TranscriptCache::open(store.cache_dir())?;
    Ok(Gateway::new(backend, config)?.with_cache(cache))
}

fn annotate(
    store: &Store,
    doc_id: &str,
    backend: Option<&Path>,
    gazetteer: Option<&Path>,
    mock: Option<&Path>,
    max_len: usize,
    out: &mut dyn Write,
) -> CmdResult {
    let text = store.read_text(doc_id)?;
    let gateway = gateway(store, backend, mock)?;
    let mut config = PipelineConfig { max_len, ..PipelineConfig::default() };
    if let Some(path) = gazetteer {
        config.gazetteer = Gazetteer::load(path).map_err(failure)?;
    }

    let result = runtime()?.block_on(annotate_document(doc_id, &text, &gateway, &config));
    let (doc, report) = result.map_err(|e| match e {
        PipelineError::MaxLenTooSmall(_) => usage(e),
        _ => failure(e),
    })?;

    store.write_standoff(&store.annotations_path(doc_id), &StandoffFile::from_document(&doc))?;
    write_atomic(&store.report_path(doc_id), &report.to_json())?;

    let c = &report.counts;
    writeln!(
        out,
        "{doc_id}: {} annotations from {} passages (annotated {}, remapped {}, failed preservation {}, \
         parse errors {}, backend errors {}, skipped {})",
        c.annotations,
        c.passages,
        c.annotated,
        c.annotated_with_remap,
        c.failed_preservation,
        c.parse_error,
        c.backend_error,
        c.skipped_prefilter
    )?;
    // the backend never answered: nothing to show for the run
    if c.backend_error > 0 && c.backend_error + c.skipped_prefilter == c.passages {
        return Err(failure("every model request failed"));
    }
    Ok(Exit::Success)
}

fn validate(store: &Store, doc_id: &str, out: &mut dyn Write) -> CmdResult {
    let text = store.read_text(doc_id)?;
    let Some((file, _)) = store.read_annotations(doc_id)? else {
        writeln!(out, "{doc_id}: no annotations yet")?;
        return Ok(Exit::Success);
    };
    let digest_matches = file.text_sha256.eq_ignore_ascii_case(&sha256_hex(&text));
    let report = validate_annotations(&text, &file.annotations);
    let body = json!({
        "doc_id": doc_id,
        "text_sha256_matches": digest_matches,
        "violations": report.violations,
    });
    writeln!(out, "{}", serde_json::to_string_pretty(&body).expect("json"))?;
    Ok(if digest_matches && report.is_valid() { Exit::Success } else { Exit::Findings })
}

fn lint(store: &Store, doc_id: &str, out: &mut dyn Write) -> CmdResult {
    let doc = store.load_document(doc_id)?;
    let findings = lint_document(&doc);
    writeln!(out, "{}", serde_json::to_string_pretty(&findings).expect("json"))?;
    Ok(if findings.is_empty() { Exit::Success } else { Exit::Findings })
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum QuoteInput {
    Plain(String),
    Claimed {
        quote: String,
        #[serde(default)]
        claimed_doc_id: Option<String>,
    },
}

#[derive(Debug, Serialize)]
struct QuoteResult<'a> {
    quote: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    claimed_doc_id: Option<&'a str>,
    #[serde(flatten)]
    verdict: mythmark::quote::QuoteVerdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    warning: Option<mythmark::quote::AttributionWarning>,
}

/// `*.txt` files of `dir`, or of `dir/texts` when `dir` is a store.
fn read_corpus(dir: &Path) -> Result<Vec<(String, String)>, CliError> {
    let texts = dir.join("texts");
    let dir = if texts.is_dir() { texts } else { dir.to_path_buf() };
    let entries = std::fs::read_dir(&dir).map_err(|e| failure(format!("reading {}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "txt"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let id = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            let text = std::fs::read_to_string(&p).map_err(|e| failure(format!("reading {}: {e}", p.display())))?;
            Ok((id, text))
        })
        .collect()
}

fn verify_quotes(quotes: &Path, corpus: &Path, threshold: f64, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    if !(0.0..1.0).contains(&threshold) {
        return Err(usage(format!("--threshold {threshold} is outside [0, 1)")));
    }
    let raw = std::fs::read_to_string(quotes).map_err(|e| failure(format!("reading {}: {e}", quotes.display())))?;
    let inputs: Vec<QuoteInput> =
        serde_json::from_str(&raw).map_err(|e| usage(format!("{}: {e}", quotes.display())))?;
    let index = build_index(read_corpus(corpus)?, NormalizationConfig::default()).map_err(usage)?;

    let mut results = Vec::with_capacity(inputs.len());
    for input in &inputs {
        let (quote, claimed) = match input {
            QuoteInput::Plain(q) => (q.as_str(), None),
            QuoteInput::Claimed { quote, claimed_doc_id } => (quote.as_str(), claimed_doc_id.as_deref()),
        };
        let verdict = verify_quote(&index, quote, threshold).map_err(|e| match e {
            QuoteError::EmptyQuote => usage(format!("empty quote in {}", quotes.display())),
            other => failure(other),
        })?;
        let warning = check_attribution(&index, &verdict, claimed);
        if let Some(w) = warning {
            writeln!(err, "warning: {w:?} for quote {quote:?}")?;
        }
        results.push(QuoteResult { quote, claimed_doc_id: claimed, verdict, warning });
    }
    writeln!(out, "{}", serde_json::to_string_pretty(&results).expect("json"))?;
    let missing = results.iter().any(|r| r.verdict.status == QuoteStatus::NotFound);
    Ok(if missing { Exit::Findings } else { Exit::Success })
}

/// A path if it exists, else a document id in the store's `dir`.
fn resolve(store: &Store, arg: &str, in_store: impl Fn(&Store, &str) -> PathBuf) -> Result<PathBuf, CliError> {
    let path = PathBuf::from(arg);
    if path.is_file() {
        return Ok(path);
    }
    if check_id(arg).is_ok() {
        let p = in_store(store, arg);
        if p.is_file() {
            return Ok(p);
        }
    }
    Err(usage(format!("`{arg}` is neither a stand-off file nor a document in {}", store.root().display())))
}

fn load(path: &Path) -> Result<mythmark::schema::AnnotatedDocument, CliError> {
    load_standoff(path).map(|(_, doc)| doc).map_err(|e| match e {
        SchemaError::Io { .. } => failure(e),
        _ => usage(e),
    })
}

fn evaluate(store: &Store, pred: &str, gold: &str, report: ReportArg, target: Option<PathBuf>, out: &mut dyn Write) -> CmdResult {
    let pred = load(&resolve(store, pred, Store::annotations_path)?)?;
    let gold = load(&resolve(store, gold, Store::gold_path)?)?;
    let matching = match_documents(&pred, &gold).map_err(usage)?;
    let metrics = compute_metrics(&matching, &pred.annotations, &gold.annotations);
    let format = match report {
        ReportArg::Md => ReportFormat::Markdown,
        ReportArg::Json => ReportFormat::Json,
    };
    let rendered = render_report(&metrics, format);
    match target {
        Some(path) => {
            write_atomic(&path, &rendered)?;
            writeln!(out, "wrote {}", path.display())?;
        }
        None => write!(out, "{rendered}")?,
    }
    Ok(Exit::Success)
}

fn interpret(
    store: &Store,
    doc_id: &str,
    index: usize,
    backend: Option<&Path>,
    mock: Option<&Path>,
    out: &mut dyn Write,
) -> CmdResult {
    let doc = store.load_document(doc_id)?;
    let passages = segment(doc_id, &doc.text, DEFAULT_MAX_LEN).map_err(failure)?;
    let passage = passages
        .get(index)
        .ok_or_else(|| usage(format!("`{doc_id}` has {} passages; --passage {index} is out of range", passages.len())))?;
    let local: Vec<_> = doc
        .annotations
        .iter()
        .filter(|a| a.start >= passage.start && a.end <= passage.end)
        .map(|a| a.shifted(-(passage.start as isize)))
        .collect();
    let prompt = build_interpretation_prompt(&passage.text, &local)?;
    let gateway = gateway(store, backend, mock)?;
    let completion = runtime()?.block_on(gateway.complete(&prompt, &passage.text))?;
    writeln!(out, "{BANNER}")?;
    writeln!(out, "{}", completion.transcript.response.trim_end())?;
    Ok(Exit::Success)
}

fn serve(store: Store, port: u16, out: &mut dyn Write) -> CmdResult {
    if !store.root().is_dir() {
        return Err(usage(format!("store {} does not exist", store.root().display())));
    }
    runtime()?.block_on(async {
        let listener = tokio::net::TcpListener::bind(("127.0.0.1", port))
            .await
            .map_err(|e| failure(format!("binding port {port}: {e}")))?;
        let addr = listener.local_addr().map_err(|e| failure(e))?;
        writeln!(out, "serving {} on http://{addr}", store.root().display())?;
        out.flush()?;
        axum::serve(listener, crate::serve::router(store))
            .await
            .map_err(|e| failure(format!("server: {e}")))?;
        Ok(Exit::Success)
    })
}
