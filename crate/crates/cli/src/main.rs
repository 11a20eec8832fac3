use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use clapper_core::agent::AgentRole;
use clapper_core::library::FunctionLibrary;
use clapper_core::pipeline::config::BackendKind;
use clapper_core::pipeline::{reduce, replay, LogError, SessionConfig, SessionStatus, StoreError, SCHEMA_VERSION};
use clapper_core::rag::{ingest_corpus_dir, RagStore};
use clapper_core::render::{assemble, AssetCatalog};

#[derive(Parser)]
#[command(name = "clapper", version, about = "Turn a video description into a rendered 3D engine script")]
struct Cli {
    /// Config file; defaults to ./clapper.toml.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Machine-readable output on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full session for a description.
    Generate(GenerateArgs),
    /// Index a corpus directory for retrieval.
    Ingest { corpus: PathBuf },
    /// Inspect or promote function libraries.
    #[command(subcommand)]
    Library(LibraryCommand),
    /// Re-execute a session from its event log and compare.
    Replay { session: String },
    /// Render the final video again from a session's accepted script.
    RenderFinal { session: String },
    /// List sessions, or show one.
    Status { session: Option<String> },
}

#[derive(Args)]
struct GenerateArgs {
    /// What the video should show.
    description: String,
    /// Use offline mock agents and the mock renderer.
    #[arg(long)]
    mock_all: bool,
    /// Review iterations per sub-process before the last attempt is kept.
    #[arg(long)]
    max_iterations: Option<u32>,
    /// Mock reviewer policy: pass, reject, or scripted:reject,pass.
    #[arg(long)]
    mock_reviewer: Option<String>,
}

#[derive(Subcommand)]
enum LibraryCommand {
    /// Names of the stored libraries.
    List,
    /// Print a library's functions; `name` may also be a session id.
    Show { name: String },
    /// Copy a session-composed function into a base library.
    Promote {
        session: String,
        function: String,
        /// Base library to promote into; the configured one by default.
        #[arg(long)]
        into: Option<String>,
    },
}

/// Error carrying the process exit code.
struct Fail {
    code: u8,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Fail {
    fn from(e: E) -> Self {
        let error = e.into();
        let code = match error.downcast_ref::<StoreError>() {
            Some(StoreError::UnknownSession(_)) => 2,
            Some(StoreError::Log(LogError::Corrupt { .. })) => 3,
            _ => match error.downcast_ref::<LogError>() {
                Some(LogError::Corrupt { .. }) => 3,
                _ => 1,
            },
        };
        Fail { code, error }
    }
}

fn fail(code: u8, error: anyhow::Error) -> Fail {
    Fail { code, error }
}

type CmdResult = Result<u8, Fail>;

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .with_ansi(std::io::IsTerminal::is_terminal(&std::io::stderr()))
        .init();
    let cli = Cli::parse();
    let out = match &cli.command {
        Command::Generate(args) => generate(&cli, args),
        Command::Ingest { corpus } => ingest(&cli, corpus),
        Command::Library(cmd) => library(&cli, cmd),
        Command::Replay { session } => replay_cmd(&cli, session),
        Command::RenderFinal { session } => render_final(&cli, session),
        Command::Status { session } => status(&cli, session.as_deref()),
    };
    match out {
        Ok(code) => ExitCode::from(code),
        Err(Fail { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}

fn load_config(cli: &Cli, allow_default: bool) -> Result<SessionConfig, Fail> {
    let path = match &cli.config {
        Some(p) => p.clone(),
        None => {
            let p = PathBuf::from("clapper.toml");
            if !p.is_file() && allow_default {
                return Ok(SessionConfig::mock_all("."));
            }
            p
        }
    };
    SessionConfig::load(&path).map_err(|e| fail(2, e.into()))
}

fn print_json(value: serde_json::Value) {
    let mut v = value;
    if let Some(m) = v.as_object_mut() {
        m.insert("schema_version".into(), json!(SCHEMA_VERSION));
    }
    println!("{}", serde_json::to_string_pretty(&v).expect("json output"));
}

fn status_str(s: SessionStatus) -> &'static str {
    match s {
        SessionStatus::Completed => "completed",
        SessionStatus::CompletedWithWarnings => "completed_with_warnings",
        SessionStatus::Failed => "failed",
    }
}

fn generate(cli: &Cli, args: &GenerateArgs) -> CmdResult {
    let mut cfg = if args.mock_all && cli.config.is_none() { SessionConfig::mock_all(".") } else { load_config(cli, false)? };
    if args.mock_all {
        for a in cfg.agents.values_mut() {
            a.backend = BackendKind::Mock;
        }
        cfg.renderer.kind = clapper_core::pipeline::config::RendererKind::Mock;
    }
    if let Some(n) = args.max_iterations {
        cfg.max_review_iterations = n;
    }
    if let Some(policy) = &args.mock_reviewer {
        let reviewer = cfg.agents.entry(AgentRole::Reviewer).or_default();
        reviewer.backend = BackendKind::Mock;
        reviewer.mock_policy = Some(policy.clone());
    }
    cfg.validate().map_err(|e| fail(2, e.into()))?;
    let engine = cfg.build_engine().map_err(|e| fail(2, e.into()))?;
    let store = cfg.session_store();
    let result = engine.run_session(&args.description, &store).map_err(|e| match e {
        clapper_core::pipeline::SessionError::EmptyDescription(_) => fail(2, e.into()),
        other => Fail::from(other),
    })?;
    let iterations: serde_json::Map<_, _> =
        result.per_subprocess_iterations.iter().map(|(k, n)| (k.to_string(), json!(n))).collect();
    if cli.json {
        print_json(json!({
            "session_id": result.session_id,
            "dir": result.dir,
            "status": status_str(result.status),
            "iterations": iterations,
            "video": result.final_video.as_ref().map(|v| &v.path),
            "failure": result.failure.as_ref().map(|f| format!("{}: {}", f.stage, f.error)),
        }));
    } else {
        println!("session {}", result.session_id);
        println!("dir     {}", result.dir.display());
        println!("status  {}", status_str(result.status));
        for (k, n) in &result.per_subprocess_iterations {
            println!("  {k:<15} {n} iteration(s)");
        }
        if let Some(v) = &result.final_video {
            println!("video   {}", v.path.display());
        }
    }
    match result.status {
        SessionStatus::Completed => Ok(0),
        SessionStatus::CompletedWithWarnings => {
            eprintln!("warning: at least one sub-process reached the review limit without a pass");
            Ok(0)
        }
        SessionStatus::Failed => {
            if let Some(f) = &result.failure {
                eprintln!("error: session failed at {}: {}", f.stage, f.error);
            }
            Ok(1)
        }
    }
}

fn ingest(cli: &Cli, corpus: &Path) -> CmdResult {
    let cfg = load_config(cli, true)?;
    let index = cfg.rag_index_path();
    let mut store = if index.is_file() { RagStore::load(&index, cfg.embedder())? } else { RagStore::new(cfg.embedder()) };
    let (docs, chunks) = ingest_corpus_dir(&mut store, corpus, cfg.rag.chunk_words, cfg.rag.overlap_words)?;
    if let Some(parent) = index.parent() {
        std::fs::create_dir_all(parent)?;
    }
    store.save(&index)?;
    if cli.json {
        print_json(json!({"index": index, "documents_added": docs, "chunks_added": chunks, "total_chunks": store.chunks().len()}));
    } else {
        println!("ingested {docs} document(s), {chunks} chunk(s) into {}", index.display());
    }
    Ok(0)
}

/// Library in force at the end of a session, rebuilt from its log.
fn session_library(cfg: &SessionConfig, session: &str) -> Result<FunctionLibrary, Fail> {
    let events = cfg.session_store().events(session)?;
    let state = reduce(&events)?;
    state.library.ok_or_else(|| fail(1, anyhow::anyhow!("session `{session}` has no library")))
}

fn library(cli: &Cli, cmd: &LibraryCommand) -> CmdResult {
    let cfg = load_config(cli, true)?;
    let libs = cfg.library_store();
    match cmd {
        LibraryCommand::List => {
            let mut names = libs.list()?;
            if !names.iter().any(|n| n == "seed") {
                names.insert(0, "seed".into());
            }
            if cli.json {
                print_json(json!({"libraries": names}));
            } else {
                names.iter().for_each(|n| println!("{n}"));
            }
        }
        LibraryCommand::Show { name } => {
            let lib = match libs.load_or_seed(name) {
                Ok(l) => l,
                Err(_) if cfg.session_store().dir(name).is_dir() => session_library(&cfg, name)?,
                Err(e) => return Err(fail(2, e.into())),
            };
            show_library(cli, &lib);
        }
        LibraryCommand::Promote { session, function, into } => {
            let lib = session_library(&cfg, session)?;
            let base = into.clone().unwrap_or_else(|| cfg.library.name.clone());
            let next = libs.promote(&base, &lib, function)?;
            let f = next.get(function).expect("promoted function present");
            if cli.json {
                print_json(json!({"library": next.name(), "library_version": next.version(), "function": function, "function_version": f.version}));
            } else {
                println!("{function} is in `{}` at version {} (library version {})", next.name(), f.version, next.version());
            }
        }
    }
    Ok(0)
}

fn show_library(cli: &Cli, lib: &FunctionLibrary) {
    if cli.json {
        let fns: Vec<_> = lib
            .functions()
            .map(|f| json!({"name": f.name, "signature": f.signature_line(), "version": f.version, "provenance": f.provenance}))
            .collect();
        print_json(json!({"name": lib.name(), "library_version": lib.version(), "functions": fns}));
    } else {
        println!("{} (version {})", lib.name(), lib.version());
        for f in lib.functions() {
            println!("  {:<60} v{} {:?}", f.signature_line(), f.version, f.provenance);
        }
    }
}

fn replay_cmd(cli: &Cli, session: &str) -> CmdResult {
    let cfg = load_config(cli, true)?;
    let events = cfg.session_store().events(session)?;
    let report = replay(session, &events, cfg.templates()?)?;
    if cli.json {
        print_json(serde_json::to_value(&report)?);
    } else if report.identical {
        println!("identical");
        if !report.prompt_divergences.is_empty() {
            println!("note: {} prompt(s) differ from the recorded ones", report.prompt_divergences.len());
        }
    } else {
        println!("different");
        if !report.script_identical {
            let diff = similar::TextDiff::from_lines(&report.recorded_script, &report.replayed_script);
            print!("{}", diff.unified_diff().header("recorded", "replayed"));
        }
        if !report.actions_identical {
            println!("feedback actions differ:");
            let n = report.recorded_actions.len().max(report.replayed_actions.len());
            for i in 0..n {
                let a = report.recorded_actions.get(i);
                let b = report.replayed_actions.get(i);
                if a != b {
                    let show = |r: Option<&clapper_core::pipeline::ActionRecord>| {
                        r.map(|r| format!("{}#{} {}", r.subprocess, r.iteration, r.action.label())).unwrap_or_else(|| "-".into())
                    };
                    println!("  recorded {:<40} replayed {}", show(a), show(b));
                }
            }
        }
        if report.recorded_status != report.replayed_status {
            println!("status: recorded {:?}, replayed {:?}", report.recorded_status, report.replayed_status);
        }
    }
    Ok(if report.identical { 0 } else { 1 })
}

fn render_final(cli: &Cli, session: &str) -> CmdResult {
    let cfg = load_config(cli, true)?;
    let store = cfg.session_store();
    let state = reduce(&store.events(session)?)?;
    if state.script.is_empty() {
        return Err(fail(1, anyhow::anyhow!("session `{session}` has no accepted snippets")));
    }
    let library = state.library.clone().context("session has no library")?;
    let catalog = AssetCatalog::from_recorded(&state.assets);
    let assembled = assemble(&library.emit_prelude(), &state.script.sources(), &catalog)?;
    let settings = state.settings.map(|s| s.final_settings).unwrap_or_else(|| cfg.final_settings.clone());
    let dir = store.dir(session);
    let staging = dir.join("final.rerender");
    if staging.exists() {
        std::fs::remove_dir_all(&staging)?;
    }
    let mut video = cfg.renderer().render_final(&assembled, &settings, &staging)?;
    let script_path = staging.join("script.py");
    if !script_path.exists() {
        std::fs::write(&script_path, &assembled.text)?;
    }
    let final_dir = dir.join("final");
    if final_dir.exists() {
        std::fs::remove_dir_all(&final_dir)?;
    }
    std::fs::rename(&staging, &final_dir)?;
    if let Ok(rel) = video.path.strip_prefix(&staging) {
        video.path = final_dir.join(rel);
    }
    if cli.json {
        print_json(json!({"session_id": session, "video": video.path, "frame_count": video.frame_count, "fps": video.fps}));
    } else {
        println!("{} ({} frames at {} fps)", video.path.display(), video.frame_count, video.fps);
    }
    Ok(0)
}

fn status(cli: &Cli, session: Option<&str>) -> CmdResult {
    let cfg = load_config(cli, true)?;
    let store = cfg.session_store();
    let describe = |id: &str| -> Result<serde_json::Value, Fail> {
        let events = store.events(id)?;
        let state = reduce(&events)?;
        Ok(json!({
            "session_id": id,
            "status": state.status.map(status_str).unwrap_or("running"),
            "description": state.description.map(|d| d.text),
            "events": events.len(),
            "iterations": state.iterations.iter().map(|(k, n)| (k.to_string(), json!(n))).collect::<serde_json::Map<_, _>>(),
            "library_version": state.library.map(|l| l.version()),
            "failure": state.failure,
        }))
    };
    match session {
        Some(id) => {
            let v = describe(id)?;
            if cli.json {
                print_json(v);
            } else {
                println!("session     {id}");
                println!("status      {}", v["status"].as_str().unwrap_or_default());
                println!("description {}", v["description"].as_str().unwrap_or_default());
                println!("events      {}", v["events"]);
                if let Some(m) = v["iterations"].as_object() {
                    for (k, n) in m {
                        println!("  {k:<15} {n} iteration(s)");
                    }
                }
                if let Some(f) = v["failure"].as_str() {
                    println!("failure     {f}");
                }
            }
        }
        None => {
            let ids = store.list()?;
            let mut rows = Vec::new();
            for id in &ids {
                rows.push(describe(id).unwrap_or_else(|f| json!({"session_id": id, "status": "unreadable", "error": format!("{:#}", f.error)})));
            }
            if cli.json {
                print_json(json!({"sessions": rows}));
            } else {
                for r in &rows {
                    println!("{}  {}", r["session_id"].as_str().unwrap_or_default(), r["status"].as_str().unwrap_or_default());
                }
            }
        }
    }
    Ok(0)
}
