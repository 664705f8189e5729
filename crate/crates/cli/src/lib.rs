//! The `dashjudge` command line: corpus ingestion, index building,
//! single-case judging, dataset evaluation and the HTTP service.
//!
//! Exit codes: 0 on success, 1 for invalid input (flags, files, config,
//! data), 2 for runtime or backend failures.

pub mod service;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use dashjudge_core::config::{PipelineConfig, ENV_LLM_API_KEY};
use dashjudge_core::corpus::{load_case_dataset, CaseRecord, Corpus, CorpusError, KnowledgeBase};
use dashjudge_core::eval::{ablation_sweep, evaluate_dataset, render_table, EvalError};
use dashjudge_core::pipeline::{sha256_hex, Engine, SetupError};
use dashjudge_core::retrieval::{build_index, corpus_docs, Bm25Params, InvertedIndex};
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<SetupError> for CliError {
    fn from(e: SetupError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::EmptyDataset | EvalError::Unlabeled(_) => CliError::Validation(e.to_string()),
            EvalError::Io(_) | EvalError::Runtime(_) => CliError::Runtime(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dashjudge", version, about = "Traffic accident responsibility adjudication")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate statute, precedent and mode-map files and write a bundle.
    Ingest(IngestArgs),
    /// Build a BM25 index artifact from a bundle or corpus files.
    Index(IndexArgs),
    /// Adjudicate a single case and print its report.
    Judge(JudgeArgs),
    /// Evaluate a labeled case set, optionally as an ablation sweep.
    Eval(EvalArgs),
    /// Serve POST /v1/judge and GET /v1/health over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Statute JSONL file (repeatable).
    #[arg(long, required = true)]
    pub statutes: Vec<PathBuf>,
    /// Precedent JSONL file (repeatable).
    #[arg(long)]
    pub precedents: Vec<PathBuf>,
    /// Responsibility-mode map (JSON).
    #[arg(long)]
    pub mode_map: PathBuf,
    /// Where to write the normalized bundle.
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["bundle", "corpus"]))]
pub struct IndexArgs {
    /// Bundle written by `ingest`.
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    /// Statute or precedent JSONL file (repeatable).
    #[arg(long)]
    pub corpus: Vec<PathBuf>,
    /// Take BM25 parameters from this pipeline config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub k1: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub top_k_coarse: Option<usize>,
    #[arg(long)]
    pub top_k_rerank: Option<usize>,
    /// Where to write the index artifact.
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EngineArgs {
    /// Pipeline config (TOML, or JSON with a .json extension).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Knowledge-base bundle; the shipped one is used when omitted.
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    /// Index artifact; built in memory from the bundle when omitted.
    #[arg(long)]
    pub index: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["case", "text"]))]
pub struct JudgeArgs {
    #[command(flatten)]
    pub engine: EngineArgs,
    /// Case file (JSONL, one case per line).
    #[arg(long)]
    pub case: Option<PathBuf>,
    /// Which case of a multi-case file to judge.
    #[arg(long, requires = "case")]
    pub case_id: Option<String>,
    /// Inline accident description.
    #[arg(long)]
    pub text: Option<String>,
    /// Inline video description, used with --text.
    #[arg(long, requires = "text")]
    pub video: Option<String>,
    /// Print the final judgment as JSON instead of the report.
    #[arg(long)]
    pub json: bool,
    /// Also write the stage trace here.
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Sweep {
    Ablation,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub engine: EngineArgs,
    /// Labeled case set (JSONL).
    #[arg(long)]
    pub cases: PathBuf,
    /// Run every row of a sweep instead of the configured flags.
    #[arg(long, value_enum)]
    pub sweep: Option<Sweep>,
    /// Write the report(s) as JSON here.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Print JSON instead of the table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub engine: EngineArgs,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
    /// Pipelines allowed to run at once; defaults to runner.concurrency.
    #[arg(long)]
    pub max_concurrency: Option<usize>,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Ingest(a) => cmd_ingest(&a),
        Command::Index(a) => cmd_index(&a),
        Command::Judge(a) => cmd_judge(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Serve(a) => cmd_serve(&a),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("creating {}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))
}

pub fn cmd_ingest(args: &IngestArgs) -> Result<(), CliError> {
    let files: Vec<&Path> = args
        .statutes
        .iter()
        .chain(&args.precedents)
        .map(PathBuf::as_path)
        .collect();
    let kb = KnowledgeBase::load(&files, &args.mode_map)?;
    write_file(&args.out, &kb.to_bundle_json())?;
    eprintln!(
        "wrote {} ({} statutes, {} precedents)",
        args.out.display(),
        kb.corpus.statute_count(),
        kb.corpus.precedent_count()
    );
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig, CliError> {
    let mut config = match path {
        Some(p) => PipelineConfig::read(p).map_err(|e| CliError::Validation(e.to_string()))?,
        None => PipelineConfig::default(),
    };
    config.apply_env_overrides(|k| std::env::var(k).ok());
    config.validate().map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(config)
}

pub fn cmd_index(args: &IndexArgs) -> Result<(), CliError> {
    let mut params = load_config(args.config.as_deref())?.retrieval.bm25();
    params = Bm25Params {
        k1: args.k1.unwrap_or(params.k1),
        b: args.b.unwrap_or(params.b),
        top_k_coarse: args.top_k_coarse.unwrap_or(params.top_k_coarse),
        top_k_rerank: args.top_k_rerank.unwrap_or(params.top_k_rerank),
    };
    let corpus = match &args.bundle {
        Some(path) => KnowledgeBase::load_bundle(path)?.corpus,
        None => {
            let mut corpus = Corpus::new();
            for path in &args.corpus {
                corpus.load_file(path)?;
            }
            corpus.check_references()?;
            corpus
        }
    };
    let index = build_index(&corpus_docs(&corpus), &params).map_err(|e| CliError::Validation(e.to_string()))?;
    write_file(&args.out, &index.to_json())?;
    eprintln!("wrote {} ({} documents)", args.out.display(), index.doc_count());
    Ok(())
}

/// Builds the engine from the shared flags and the environment.
pub fn load_engine(args: &EngineArgs) -> Result<Engine, CliError> {
    let config = load_config(args.config.as_deref())?;
    let kb = match &args.bundle {
        Some(path) => KnowledgeBase::load_bundle(path)?,
        None => KnowledgeBase::builtin(),
    };
    let index = match &args.index {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Validation(format!("index {}: {e}", path.display())))?;
            Some(InvertedIndex::from_json(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?)
        }
        None => None,
    };
    let api_key = std::env::var(ENV_LLM_API_KEY).ok().filter(|k| !k.is_empty());
    Ok(Engine::from_config(kb, index, config, api_key)?)
}

/// Stable id for a case given inline: the same texts always get the same id.
pub fn derived_case_id(accident_text: &str, video_description: &str) -> String {
    let body = json!({"accident_text": accident_text, "video_description": video_description});
    format!("case-{}", &sha256_hex(body.to_string().as_bytes())[..12])
}

fn select_case(args: &JudgeArgs) -> Result<CaseRecord, CliError> {
    if let Some(text) = &args.text {
        let video = args.video.clone().unwrap_or_default();
        let case = CaseRecord::new(derived_case_id(text, &video), text.clone()).with_video(video);
        case.validate().map_err(CliError::Validation)?;
        return Ok(case);
    }
    let path = args.case.as_ref().expect("clap requires --case or --text");
    let mut cases = load_case_dataset(path)?;
    match &args.case_id {
        Some(id) => cases
            .into_iter()
            .find(|c| &c.case_id == id)
            .ok_or_else(|| CliError::Validation(format!("{}: no case {id:?}", path.display()))),
        None if cases.len() == 1 => Ok(cases.remove(0)),
        None => Err(CliError::Validation(format!(
            "{} holds {} cases; pick one with --case-id",
            path.display(),
            cases.len()
        ))),
    }
}

pub fn cmd_judge(args: &JudgeArgs) -> Result<(), CliError> {
    let case = select_case(args)?;
    let engine = load_engine(&args.engine)?;
    let outcome = engine.run_case(&case);
    if let Some(path) = &args.trace_out {
        let trace = match &outcome {
            Ok(r) => &r.trace,
            Err(f) => f.trace.as_ref(),
        };
        write_file(path, &trace.to_json())?;
    }
    engine
        .persist(&outcome)
        .map_err(|e| CliError::Runtime(format!("writing artifacts: {e}")))?;
    match outcome {
        Ok(report) => {
            if args.json {
                println!("{}", serde_json::to_string_pretty(&report.judgment).expect("judgment serializes"));
            } else {
                print!("{}", report.text);
            }
            Ok(())
        }
        Err(failure) if failure.error.is_backend() => Err(CliError::Runtime(failure.to_string())),
        Err(failure) => Err(CliError::Validation(failure.to_string())),
    }
}

pub fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let cases = load_case_dataset(&args.cases)?;
    let engine = load_engine(&args.engine)?;
    let reports = match args.sweep {
        Some(Sweep::Ablation) => ablation_sweep(&engine, &cases)?,
        None => vec![evaluate_dataset(&engine, &cases)?],
    };
    let json = match reports.as_slice() {
        [one] if args.sweep.is_none() => serde_json::to_string_pretty(one),
        all => serde_json::to_string_pretty(all),
    }
    .expect("reports serialize");
    if let Some(path) = &args.out {
        write_file(path, &json)?;
    }
    if args.json {
        println!("{json}");
    } else {
        print!("{}", render_table(&reports));
    }
    if reports.iter().any(|r| r.cases > 0 && r.failed == r.cases) {
        return Err(CliError::Runtime("every case failed; see the report for per-case errors".into()));
    }
    Ok(())
}

pub fn cmd_serve(args: &ServeArgs) -> Result<(), CliError> {
    let engine = load_engine(&args.engine)?;
    let permits = args.max_concurrency.unwrap_or(engine.config().runner.concurrency);
    if permits == 0 {
        return Err(CliError::Validation("--max-concurrency must be positive".into()));
    }
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Runtime(format!("starting runtime: {e}")))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&args.addr)
            .await
            .map_err(|e| CliError::Runtime(format!("binding {}: {e}", args.addr)))?;
        eprintln!("listening on {}", args.addr);
        axum::serve(listener, service::router(engine, permits))
            .await
            .map_err(|e| CliError::Runtime(format!("server: {e}")))
    })
}
