//! `linkmap`: serve the link-map API or run batch analyses over a dump.
//!
//! Exit codes: 0 clean, 1 input error, 2 consistency violations found.

mod report;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use linkmap_api::{router, ApiConfig};
use linkmap_core::graph::UNBOUNDED;
use linkmap_core::ingestion::jira::{self, fetch_project, Credentials, FetchOptions, HttpTransport};
use linkmap_core::ingestion::{read_dump_file, write_dump};
use linkmap_core::service::{ServiceError, StartupError, Workspace, DEFAULT_MAX_DEPTH};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "linkmap", version, about = "Issue link maps, link recommendations and release-plan checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// List pending link recommendations.
    Detect(AnalyzeArgs),
    /// Check release-plan consistency per connected component or scope.
    Check(AnalyzeArgs),
    /// Print graph statistics.
    Stats(AnalyzeArgs),
    /// Export a project from a Jira server into a dump file.
    Fetch(FetchArgs),
}

#[derive(Args)]
struct Input {
    /// Issue dump (JSON).
    #[arg(long, env = "LINKMAP_DUMP")]
    dump: PathBuf,
    /// Decision log (JSON lines); replayed on load, appended to by `serve`.
    #[arg(long, env = "LINKMAP_DECISIONS")]
    decisions: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long, env = "LINKMAP_LISTEN", default_value = "127.0.0.1:8080")]
    listen: String,
    /// Largest depth a map or consistency request may ask for.
    #[arg(long, env = "LINKMAP_MAX_DEPTH", default_value_t = DEFAULT_MAX_DEPTH)]
    max_depth: usize,
    /// Prefix for every route, e.g. `/api`.
    #[arg(long, env = "LINKMAP_BASE_PATH", default_value = "")]
    base_path: String,
    /// Origin allowed by CORS; any origin when omitted.
    #[arg(long, env = "LINKMAP_CORS_ORIGIN")]
    cors_origin: Option<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Json,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long, value_enum, default_value_t = Format::Human)]
    format: Format,
    /// Restrict to one issue (detect) or to the map around it (check).
    #[arg(long)]
    issue: Option<String>,
    /// Map depth around `--issue` for check; defaults to 2.
    #[arg(long, requires = "issue")]
    depth: Option<String>,
}

#[derive(Args)]
struct FetchArgs {
    /// Project code, e.g. QTBUG.
    #[arg(long)]
    project: String,
    #[arg(long, env = jira::BASE_URL_ENV)]
    base_url: String,
    #[arg(long, env = jira::TOKEN_ENV, hide_env_values = true)]
    token: Option<String>,
    /// User for basic authentication; bearer token auth when omitted.
    #[arg(long, env = jira::USER_ENV)]
    user: Option<String>,
    /// Output file; standard output when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    page_size: u32,
}

/// A failure with its exit code, reported on standard error.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<ServiceError> for Failure {
    fn from(e: ServiceError) -> Self {
        Failure::input(e.to_string())
    }
}

/// Loads the dump and replays the decision log. Only `serve` keeps the log
/// open for appending.
fn load(input: &Input, max_depth: usize, writable: bool) -> Result<Workspace, Failure> {
    let dump = read_dump_file(&input.dump).map_err(|e| Failure::input(format!("{}: {e}", input.dump.display())))?;
    let decisions = input.decisions.as_deref();
    let opened = if writable {
        Workspace::open(&dump, decisions, max_depth)
    } else {
        Workspace::open_read_only(&dump, decisions, max_depth)
    };
    let startup = opened.map_err(|e| {
        let path = match (&e, decisions) {
            (StartupError::Log(_), Some(log)) => log,
            _ => input.dump.as_path(),
        };
        Failure::input(format!("{}: {e}", path.display()))
    })?;
    for warning in &startup.warnings {
        tracing::warn!("{warning}");
    }
    Ok(startup.workspace)
}

fn emit(text: &str) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Failure::input(format!("writing output: {e}")))
}

fn json(value: &impl serde::Serialize) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("views serialize");
    text.push('\n');
    text
}

fn detect(args: &AnalyzeArgs) -> Result<u8, Failure> {
    let ws = load(&args.input, UNBOUNDED, false)?;
    let text = match &args.issue {
        Some(key) => {
            let recs = ws.recommendations(key)?;
            match args.format {
                Format::Json => json(&recs),
                Format::Human => report::recommendations(&recs),
            }
        }
        None => {
            let all = ws.all_recommendations()?;
            match args.format {
                Format::Json => json(&all),
                Format::Human => all.values().map(|r| report::recommendations(r)).collect(),
            }
        }
    };
    emit(&text)?;
    Ok(0)
}

fn check(args: &AnalyzeArgs) -> Result<u8, Failure> {
    let ws = load(&args.input, UNBOUNDED, false)?;
    let (text, violations) = match &args.issue {
        Some(key) => {
            let view = ws.consistency(key, args.depth.as_deref())?;
            let n = view.violations.len();
            let text = match args.format {
                Format::Json => json(&view),
                Format::Human => report::consistency(std::slice::from_ref(&view)),
            };
            (text, n)
        }
        None => {
            let views = ws.consistency_by_component()?;
            let n = views.iter().map(|v| v.violations.len()).sum();
            let text = match args.format {
                Format::Json => json(&views),
                Format::Human => report::consistency(&views),
            };
            (text, n)
        }
    };
    emit(&text)?;
    Ok(if violations > 0 { 2 } else { 0 })
}

fn stats(args: &AnalyzeArgs) -> Result<u8, Failure> {
    let ws = load(&args.input, UNBOUNDED, false)?;
    let stats = ws.stats();
    emit(&match args.format {
        Format::Json => json(&stats),
        Format::Human => report::stats(&stats),
    })?;
    Ok(0)
}

fn fetch(args: &FetchArgs) -> Result<u8, Failure> {
    let credentials = Credentials::from_parts(args.user.clone(), args.token.clone());
    let transport = HttpTransport::new(&args.base_url, &credentials);
    let options = FetchOptions {
        page_size: args.page_size,
        ..FetchOptions::default()
    };
    let outcome = fetch_project(&transport, &args.project, &options).map_err(|e| Failure::input(e.to_string()))?;
    for warning in &outcome.warnings {
        tracing::warn!("{warning}");
    }
    let written = match &args.output {
        Some(path) => write_to(path, &outcome.dump),
        None => write_dump(&outcome.dump, std::io::stdout().lock()).map_err(|e| e.to_string()),
    };
    written.map_err(Failure::input)?;
    tracing::info!(
        issues = outcome.dump.issues.len(),
        links = outcome.dump.links.len(),
        "fetched {}",
        args.project
    );
    Ok(0)
}

fn write_to(path: &Path, dump: &linkmap_core::ingestion::IssueDump) -> Result<(), String> {
    let file = std::fs::File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut writer = std::io::BufWriter::new(file);
    write_dump(dump, &mut writer).map_err(|e| format!("{}: {e}", path.display()))?;
    writer.flush().map_err(|e| format!("{}: {e}", path.display()))
}

fn serve(args: &ServeArgs) -> Result<u8, Failure> {
    let ws = load(&args.input, args.max_depth, true)?;
    let s = ws.stats();
    tracing::info!(
        issue_count = s.issue_count,
        link_count = s.link_count,
        issues_with_links = s.issues_with_links,
        component_count = s.component_count,
        largest_component = s.largest_component,
        largest_component_diameter = s.largest_component_diameter,
        "loaded {}",
        args.input.dump.display()
    );
    let config = ApiConfig {
        base_path: args.base_path.clone(),
        cors_origin: args.cors_origin.clone(),
    };
    let app = router(Arc::new(ws), &config);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::input(e.to_string()))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&args.listen)
            .await
            .map_err(|e| Failure::input(format!("cannot listen on {}: {e}", args.listen)))?;
        let addr = listener.local_addr().map_err(|e| Failure::input(e.to_string()))?;
        tracing::info!("listening on http://{addr}{}", config.base_path);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| Failure::input(e.to_string()))
    })?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    let result = match &cli.command {
        Command::Serve(args) => serve(args),
        Command::Detect(args) => detect(args),
        Command::Check(args) => check(args),
        Command::Stats(args) => stats(args),
        Command::Fetch(args) => fetch(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
