use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Parser, Subcommand};

use typecase_core::ingest::{
    adapter_for, export_dataset, parse_dataset, IngestError, ParsedDocument,
};
use typecase_core::model::build_indexes;
use typecase_core::synth::{generate, SynthConfig};
use typecase_server::images::{encode_png, ImageStore};
use typecase_server::reports::{write_reports, AnalyzeOptions};
use typecase_server::AppState;

#[derive(Parser)]
#[command(
    name = "typecase",
    version,
    about = "Catalogue, curate and analyse movable-type impressions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a dataset and print its validation report.
    Validate {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Write every analytics report (CSV plus report.json) to a directory.
    Analyze {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        min_shared: u32,
        #[arg(long, default_value_t = 3.5)]
        k: f64,
    },
    /// Generate a synthetic book with its ground truth.
    Synth {
        /// JSON generator settings; omitted fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the HTTP API (and optionally a UI bundle).
    Serve {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        images: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
        /// Directory of static UI files served outside /api.
        #[arg(long)]
        ui: Option<PathBuf>,
    },
    /// Re-export a dataset in canonical form.
    Export {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert a foreign document to the canonical format.
    Convert {
        #[arg(long, default_value = "canonical")]
        adapter: String,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    /// The dataset is unreadable or fails validation.
    Invalid(String),
    Usage(String),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.into())
    }
}

fn describe(e: &IngestError) -> String {
    match e {
        IngestError::Integrity(report) => {
            let mut s = format!(
                "{} error(s), {} warning(s)\n",
                report.errors.len(),
                report.warnings.len()
            );
            for issue in &report.errors {
                s += &format!("error: {issue}\n");
            }
            for issue in &report.warnings {
                s += &format!("warning: {issue}\n");
            }
            s
        }
        other => format!("{other}\n"),
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn load(path: &Path) -> Result<ParsedDocument, Failure> {
    parse_dataset(&read_text(path)?).map_err(|e| Failure::Invalid(describe(&e)))
}

fn print_warnings(doc: &ParsedDocument) {
    for w in &doc.report.warnings {
        eprintln!("warning: {w}");
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { dataset } => {
            let doc = load(&dataset)?;
            print_warnings(&doc);
            println!(
                "ok: {} spreads, {} segments, {} blocks, {} warning(s)",
                doc.dataset.spreads.len(),
                doc.dataset.segments.len(),
                doc.dataset.blocks.len(),
                doc.report.warnings.len()
            );
        }
        Command::Analyze {
            dataset,
            out,
            min_shared,
            k,
        } => {
            if !(k.is_finite() && k > 0.0) {
                return Err(Failure::Usage(format!("--k must be positive, got {k}")));
            }
            let doc = load(&dataset)?;
            let ix = build_indexes(doc.dataset).context("indexing dataset")?;
            for path in write_reports(&ix, &out, &AnalyzeOptions { min_shared, k })? {
                println!("{}", path.display());
            }
        }
        Command::Synth { config, seed, out } => {
            let mut cfg: SynthConfig = match config {
                Some(p) => serde_json::from_str(&read_text(&p)?)
                    .map_err(|e| Failure::Usage(format!("bad config {}: {e}", p.display())))?,
                None => SynthConfig::default(),
            };
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let book = generate(&cfg).map_err(|e| Failure::Usage(e.to_string()))?;
            fs::create_dir_all(&out)?;
            fs::write(
                out.join("dataset.json"),
                export_dataset(&book.dataset, &Default::default()),
            )?;
            fs::write(out.join("ground_truth.json"), book.truth.to_sidecar_json())?;
            if let Some(pages) = &book.pages {
                for (spread, page) in book.dataset.spreads.iter().zip(pages) {
                    if let Some(name) = &spread.image {
                        fs::write(out.join(name), encode_png(page))?;
                    }
                }
            }
            println!("wrote {}", out.display());
        }
        Command::Serve {
            dataset,
            images,
            bind,
            ui,
        } => {
            let doc = load(&dataset)?;
            print_warnings(&doc);
            let store = images.map(|dir| ImageStore::from_dir(dir, &doc.dataset));
            let state = AppState::new(doc.dataset, doc.edit_log, store)
                .map_err(|e| Failure::Invalid(format!("{}: {}\n", e.code, e.message)))?;
            let app = typecase_server::app(Arc::new(state), ui);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async {
                let listener = tokio::net::TcpListener::bind(&bind)
                    .await
                    .with_context(|| format!("binding {bind}"))?;
                tracing::info!("listening on {}", listener.local_addr()?);
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await
                    .context("serving")
            })?;
        }
        Command::Export { dataset, out } => {
            let doc = load(&dataset)?;
            fs::write(&out, export_dataset(&doc.dataset, &doc.edit_log))?;
        }
        Command::Convert {
            adapter,
            input,
            out,
        } => {
            let conv = adapter_for(&adapter)
                .ok_or_else(|| Failure::Usage(format!("unknown adapter {adapter:?}")))?;
            let doc = conv
                .convert(&read_text(&input)?)
                .map_err(|e| Failure::Invalid(describe(&e)))?;
            print_warnings(&doc);
            fs::write(&out, export_dataset(&doc.dataset, &doc.edit_log))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(report)) => {
            eprint!("{report}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
