//! `promptgate` — mediate prompts, evaluate corpora, or serve the gateway.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use promptgate_cli::corpus::{load_corpus, CorpusError};
use promptgate_cli::eval::{run_sweep, DEFAULT_WORKERS};
use promptgate_core::types::StageSwitches;
use promptgate_core::{
    AnalyzerBackend, Lexicon, Pipeline, PipelineConfig, RawPrompt, RemoteBackend,
    RemoteBackendConfig, RuleBackend,
};
use promptgate_gateway::{GatewayConfig, GatewayState, NoopDownstream};

const EXIT_USAGE: u8 = 1;
const EXIT_CORPUS: u8 = 2;
const EXIT_BACKEND: u8 = 3;

#[derive(Parser)]
#[command(name = "promptgate", version, about = "Prompt safety mediation for text-to-video generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendKind {
    Rule,
    Remote,
}

#[derive(Debug, Args)]
struct SharedArgs {
    /// Analyzer backend.
    #[arg(long, value_enum, default_value = "rule")]
    backend: BackendKind,
    /// Lexicon file for the rule backend (bundled lexicon when omitted).
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Risk threshold in (0, 1].
    #[arg(long)]
    tau: Option<f64>,
    /// Rollout horizon (trajectory holds horizon + 1 states).
    #[arg(long)]
    horizon: Option<usize>,
    /// Skip decomposition: treat the whole prompt as one state.
    #[arg(long)]
    disable_msd: bool,
    /// Skip rollout and risk localization.
    #[arg(long)]
    disable_trpg: bool,
    /// Skip rewriting: triggered prompts are rejected.
    #[arg(long)]
    disable_tcsr: bool,
    /// Remote backend endpoint URL.
    #[arg(long)]
    endpoint: Option<String>,
    /// Remote backend model identifier.
    #[arg(long, default_value = "judge-small")]
    model: String,
    /// Environment variable holding the remote credential.
    #[arg(long, default_value = "MEDIATION_API_KEY")]
    credential_env: String,
}

impl SharedArgs {
    fn pipeline_config(&self) -> PipelineConfig {
        let mut config = PipelineConfig::default();
        if let Some(tau) = self.tau {
            config.tau = tau;
        }
        if let Some(horizon) = self.horizon {
            config.horizon = horizon;
        }
        config.stage_switches = StageSwitches {
            msd_enabled: !self.disable_msd,
            trpg_enabled: !self.disable_trpg,
            tcsr_enabled: !self.disable_tcsr,
        };
        config
    }

    fn backend(&self) -> Result<Arc<dyn AnalyzerBackend>, CliError> {
        match self.backend {
            BackendKind::Rule => {
                let lexicon = match &self.lexicon {
                    Some(path) => Lexicon::load(path)
                        .map_err(|e| CliError::Usage(format!("cannot load lexicon: {e}")))?,
                    None => Lexicon::bundled(),
                };
                Ok(Arc::new(RuleBackend::new(lexicon)))
            }
            BackendKind::Remote => {
                let endpoint = self.endpoint.clone().ok_or_else(|| {
                    CliError::Usage("--endpoint is required with --backend remote".into())
                })?;
                let remote = RemoteBackend::new(RemoteBackendConfig {
                    endpoint,
                    model: self.model.clone(),
                    credential_env: self.credential_env.clone(),
                    timeout_secs: 30,
                    max_retries: 2,
                    max_concurrency: 8,
                })
                .map_err(|e| CliError::Backend(e.to_string()))?
                .with_rewrite_fallback(RuleBackend::bundled());
                Ok(Arc::new(remote))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Json,
    Markdown,
}

#[derive(Subcommand)]
enum Command {
    /// Mediate a single prompt and print the decision as JSON.
    Mediate {
        /// The prompt text.
        prompt: String,
        /// Include the full mediation trace in the output.
        #[arg(long)]
        trace: bool,
        #[command(flatten)]
        shared: SharedArgs,
    },
    /// Mediate a JSONL corpus and emit an aggregate report.
    Eval {
        /// Corpus path (line-delimited JSON: {id, prompt, label?, category?, source?}).
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        report_format: ReportFormat,
        /// Write the report here instead of stdout. With --sweep, one file
        /// per threshold: <out>.tau-<value>.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated ascending threshold list; one report per value.
        #[arg(long, value_delimiter = ',')]
        sweep: Option<Vec<f64>>,
        /// Parallel mediation worker cap.
        #[arg(long, default_value_t = DEFAULT_WORKERS)]
        workers: usize,
        /// Skip malformed corpus lines instead of aborting.
        #[arg(long)]
        lenient: bool,
        #[command(flatten)]
        shared: SharedArgs,
    },
    /// Run the HTTP mediation gateway.
    Serve {
        /// Gateway TOML config (defaults apply when omitted).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the configured bind address.
        #[arg(long)]
        bind: Option<String>,
        #[command(flatten)]
        shared: SharedArgs,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Corpus(String),
    Backend(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Corpus(_) => EXIT_CORPUS,
            CliError::Backend(_) => EXIT_BACKEND,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Corpus(m) | CliError::Backend(m) => m,
        }
    }
}

impl From<promptgate_core::PipelineError> for CliError {
    fn from(e: promptgate_core::PipelineError) -> Self {
        if e.is_backend_unavailable() {
            CliError::Backend(e.to_string())
        } else {
            CliError::Usage(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version are successful exits; everything else is usage.
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
    match runtime.block_on(run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

async fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Mediate { prompt, trace, shared } => {
            let pipeline = Pipeline::new(shared.backend()?, shared.pipeline_config())
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let decision = pipeline
                .mediate(&RawPrompt::new("cli", prompt))
                .await
                .map_err(CliError::from)?;
            let mut value = serde_json::json!({
                "verdict": decision.verdict,
                "output_text": decision.output_text,
                "trigger": decision.trigger(),
                "categories": decision.categories(),
                "rejection_reason": decision.trace.rejection_reason,
            });
            if trace {
                value["trace"] = serde_json::to_value(&decision.trace)
                    .map_err(|e| CliError::Usage(e.to_string()))?;
            }
            println!("{}", serde_json::to_string_pretty(&value).expect("decision serializes"));
            Ok(())
        }
        Command::Eval {
            corpus,
            report_format,
            out,
            sweep,
            workers,
            lenient,
            shared,
        } => {
            let loaded = load_corpus(&corpus, !lenient).map_err(|e| match e {
                CorpusError::Io(e) => CliError::Corpus(format!("{}: {e}", corpus.display())),
                parse => CliError::Corpus(parse.to_string()),
            })?;
            if loaded.skipped > 0 {
                eprintln!("skipped {} malformed corpus lines", loaded.skipped);
            }
            let pipeline = Pipeline::new(shared.backend()?, shared.pipeline_config())
                .map_err(|e| CliError::Usage(e.to_string()))?;

            let taus = sweep.unwrap_or_else(|| vec![pipeline.config().tau]);
            let reports = run_sweep(&pipeline, &loaded.records, &taus, workers)
                .await
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let single = reports.len() == 1;
            for report in reports {
                let rendered = match report_format {
                    ReportFormat::Json => report.canonical_json(),
                    ReportFormat::Markdown => report.to_markdown(),
                };
                match &out {
                    None => print!("{rendered}"),
                    Some(path) => {
                        let target = if single {
                            path.clone()
                        } else {
                            let mut name = path.as_os_str().to_os_string();
                            name.push(format!(".tau-{}", report.config.tau));
                            PathBuf::from(name)
                        };
                        std::fs::write(&target, rendered).map_err(|e| {
                            CliError::Usage(format!("cannot write {}: {e}", target.display()))
                        })?;
                    }
                }
            }
            Ok(())
        }
        Command::Serve { config, bind, shared } => {
            let mut gateway_config = match config {
                Some(path) => {
                    GatewayConfig::load(&path).map_err(|e| CliError::Usage(e.to_string()))?
                }
                None => GatewayConfig::default(),
            };
            if let Some(bind) = bind {
                gateway_config.bind_addr = bind;
            }
            gateway_config.pipeline = shared.pipeline_config();
            let backend = shared.backend()?;
            let state = GatewayState::new(gateway_config, Arc::new(NoopDownstream))
                .await
                .map_err(|e| CliError::Usage(e.to_string()))?;
            state.attach_backend(backend).await;
            promptgate_gateway::serve(state)
                .await
                .map_err(|e| CliError::Backend(e.to_string()))
        }
    }
}
