//! `ragx` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 backend error, 3 data error.
//! Failures are written to stderr as one line of `{"code", "message"}` JSON.

use std::ffi::OsString;
use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::app::{App, GenerationRequest, RetrievalRequest};
use crate::config::AppConfig;
use crate::error::{Error, ErrorClass, Result};
use crate::eval::run_eval;
use crate::rag::{build_index, ingest, VectorIndex};
use crate::render::{canonical_json, render_ansi, render_html, strip_ansi, to_canonical_json};
use crate::types::{Explanation, Granularity};

#[derive(Debug, Parser)]
#[command(name = "ragx", version, about = "Perturbation-based explanations for RAG pipelines")]
pub struct Cli {
    /// TOML configuration file
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Embedder backend (`lexical` or `openai`)
    #[arg(long, global = true, value_name = "ID")]
    pub embedder: Option<String>,
    /// Generator backend (`mock` or `openai`)
    #[arg(long, global = true, value_name = "ID")]
    pub generator: Option<String>,
    /// Maximum concurrent backend calls per explanation
    #[arg(long, global = true, value_name = "N")]
    pub parallelism: Option<usize>,
    /// Index file to read (defaults to `rag.index` from the config)
    #[arg(long, global = true, value_name = "PATH")]
    pub index: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest a file or directory and persist a vector index
    Index {
        path: PathBuf,
        #[arg(long, value_name = "PATH", default_value = "index.ragx")]
        out: PathBuf,
    },
    /// Answer a question with the indexed corpus
    Query {
        question: String,
        #[arg(long, value_name = "N")]
        k: Option<usize>,
    },
    /// Explain a retrieval score or a generated answer
    #[command(subcommand)]
    Explain(ExplainCommand),
    /// Score explanations against human annotations
    Eval {
        annotations: PathBuf,
        /// Also write the full report as JSON
        #[arg(long, value_name = "PATH")]
        report: Option<PathBuf>,
    },
    /// Run the HTTP API
    Serve {
        #[arg(long)]
        port: Option<u16>,
    },
}

#[derive(Debug, Subcommand)]
pub enum ExplainCommand {
    /// Which words of a document made it similar to the question
    Retrieval {
        question: String,
        #[arg(long, value_name = "ID", conflicts_with = "text")]
        doc_id: Option<String>,
        #[arg(long)]
        text: Option<String>,
        #[arg(long, value_name = "ID")]
        strategy: Option<String>,
        #[arg(long, value_enum)]
        granularity: Option<GranularityArg>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Which prompt sentences drove the generated answer
    Generation {
        question: String,
        #[arg(long, value_name = "N")]
        k: Option<usize>,
        #[arg(long, value_name = "ID")]
        comparator: Option<String>,
        /// Let instruction text be perturbed too
        #[arg(long)]
        include_instruction: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Ansi)]
    pub format: Format,
    /// Only highlight the N highest-weighted features
    #[arg(long, value_name = "N")]
    pub top_k: Option<usize>,
    #[arg(long, value_enum, default_value_t = ColorChoice::Auto)]
    pub color: ColorChoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Ansi,
    Html,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ColorChoice {
    Auto,
    Always,
    Never,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GranularityArg {
    Word,
    Sentence,
}

impl From<GranularityArg> for Granularity {
    fn from(g: GranularityArg) -> Self {
        match g {
            GranularityArg::Word => Granularity::Word,
            GranularityArg::Sentence => Granularity::Sentence,
        }
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err.class() {
        ErrorClass::Usage => 1,
        ErrorClass::Backend => 2,
        ErrorClass::Data => 3,
    }
}

/// Single-line `{"code","message"}` JSON.
pub fn error_line(code: &str, message: &str) -> String {
    json!({ "code": code, "message": message }).to_string()
}

/// Parse `args`, run the command, and return the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write, stdout_is_tty: bool) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = write!(stdout, "{e}");
            return 0;
        }
        Err(e) => {
            let message = e.to_string();
            let first = message.lines().next().unwrap_or("").trim_start_matches("error: ");
            let _ = writeln!(stderr, "{}", error_line("usage", first));
            return 1;
        }
    };
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            let _ = writeln!(stderr, "{}", error_line("io_error", &e.to_string()));
            return 3;
        }
    };
    match runtime.block_on(execute(cli, stdout, stdout_is_tty)) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{}", error_line(e.code(), &e.to_string()));
            exit_code(&e)
        }
    }
}

/// Entry point for the binary.
pub fn main_from_env() -> i32 {
    let stdout = std::io::stdout();
    let tty = stdout.is_terminal();
    run(std::env::args_os(), &mut stdout.lock(), &mut std::io::stderr(), tty)
}

/// Load the configuration named by the global flags.
pub fn load_config(cli: &Cli) -> Result<AppConfig> {
    let mut config = match &cli.config {
        Some(path) => AppConfig::load(path)?,
        None => AppConfig::default(),
    };
    if let Some(e) = &cli.embedder {
        config.embedder.kind = e.clone();
    }
    if let Some(g) = &cli.generator {
        config.generator.kind = g.clone();
    }
    if let Some(p) = cli.parallelism {
        config.explain.parallelism = p;
    }
    if let Some(index) = &cli.index {
        config.rag.index = index.clone();
    }
    config.validate()?;
    Ok(config)
}

/// Open the configured index, or `None` when the file does not exist.
pub fn open_index(config: &AppConfig) -> Result<Option<VectorIndex>> {
    let path = &config.rag.index;
    if !path.exists() {
        return Ok(None);
    }
    VectorIndex::load(path).map(Some)
}

async fn execute(cli: Cli, out: &mut dyn Write, tty: bool) -> Result<()> {
    let config = load_config(&cli)?;
    match cli.command {
        Command::Index { path, out: target } => {
            let count = index_corpus(&config, &path, &target).await?;
            writeln!(out, "indexed {count} documents into {}", target.display())?;
        }
        Command::Query { question, k } => {
            let app = App::new(config.clone(), open_index(&config)?)?;
            let result = app.query(&question, k).await?;
            out.write_all(canonical_json(&result)?.as_bytes())?;
        }
        Command::Explain(ExplainCommand::Retrieval {
            question,
            doc_id,
            text,
            strategy,
            granularity,
            output,
        }) => {
            let app = App::new(config.clone(), open_index(&config)?)?;
            let request = RetrievalRequest {
                question,
                document_id: doc_id,
                text,
                strategy,
                granularity: granularity.map(Into::into),
            };
            let explanation = app.explain_retrieval(&request).await?;
            write_explanation(out, &explanation, &output, tty)?;
        }
        Command::Explain(ExplainCommand::Generation {
            question,
            k,
            comparator,
            include_instruction,
            output,
        }) => {
            let app = App::new(config.clone(), open_index(&config)?)?;
            let request = GenerationRequest {
                question,
                k,
                comparator,
                include_instruction: Some(include_instruction),
            };
            let explanation = app.explain_generation(&request).await?;
            write_explanation(out, &explanation, &output, tty)?;
        }
        Command::Eval { annotations, report } => {
            let app = App::new(config.clone(), open_index(&config)?)?;
            let result = run_eval(&annotations, &config.explain, app.embedders().as_ref(), app.generator()).await?;
            if let Some(path) = report {
                std::fs::write(path, canonical_json(&result)?)?;
            }
            out.write_all(result.to_table().as_bytes())?;
        }
        Command::Serve { port } => {
            let app = App::new(config.clone(), open_index(&config)?)?;
            let port = port.unwrap_or(config.service.port);
            crate::service::serve(app, port).await?;
        }
    }
    Ok(())
}

/// Ingest `source`, embed it, and save the index to `target`.
pub async fn index_corpus(config: &AppConfig, source: &Path, target: &Path) -> Result<usize> {
    let corpus = ingest(source)?;
    let texts = corpus.documents().iter().map(|d| d.text.clone()).collect();
    let embedder = config.embedder.provider(texts)?.embedder_for(&[])?;
    let index = build_index(&corpus, embedder.as_ref()).await?;
    index.save(target)?;
    Ok(index.len())
}

fn write_explanation(out: &mut dyn Write, explanation: &Explanation, output: &OutputArgs, tty: bool) -> Result<()> {
    let text = match output.format {
        Format::Json => to_canonical_json(explanation),
        Format::Html => render_html(explanation),
        Format::Ansi => {
            let styled = render_ansi(explanation, output.top_k);
            let color = match output.color {
                ColorChoice::Always => true,
                ColorChoice::Never => false,
                ColorChoice::Auto => tty,
            };
            let mut text = if color { styled } else { strip_ansi(&styled) };
            if !text.ends_with('\n') {
                text.push('\n');
            }
            text
        }
    };
    out.write_all(text.as_bytes())?;
    Ok(())
}
