use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};

use searchsim_cli::commands::{evaluate_run_dir, replay_run_dir, TruthSpec};
use searchsim_cli::scheduler::{default_workers, Scheduler};
use searchsim_cli::service::{router, AppState};
use searchsim_cli::store::{RunStatus, Store};
use searchsim_core::iface::parse_recipe;
use searchsim_core::logs::read_session_logs;
use searchsim_core::policy::forest::dataset_lines;
use searchsim_core::policy::{label_sessions, read_dataset, train_policy, TrainConfig};
use searchsim_core::sim::{prepare, RunConfig};
use searchsim_core::simulators::{fit_click_model, ClickModel};

/// Exit codes: 0 finished (stopped or step budget), 1 other failure,
/// 2 the run ended in error, 3 the config is invalid.
const EXIT_RUN_ERROR: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser)]
#[command(name = "searchsim", version, about = "Simulate, replay and evaluate search sessions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FitModel {
    Pbm,
    Ubm,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run one session from a config file into a new run directory.
    Run {
        #[arg(short, long)]
        config: PathBuf,
        /// Directory that receives the run directory; defaults to the
        /// config's `output` or ./runs.
        #[arg(long)]
        runs_dir: Option<PathBuf>,
    },
    /// Evaluate a finished run against relevance judgments.
    Eval {
        run_dir: PathBuf,
        /// Judgments file; defaults to the one in the run config.
        #[arg(short, long)]
        truth: Option<PathBuf>,
        /// Logged sessions for click and query comparison.
        #[arg(short, long)]
        sessions: Option<PathBuf>,
        #[arg(long)]
        task: Option<String>,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Re-apply a run's logged commands and compare observations.
    Replay { run_dir: PathBuf },
    /// Parse and check an interface recipe.
    ValidateRecipe { file: PathBuf },
    /// Fit a click model to logged sessions.
    FitClicks {
        logs: PathBuf,
        #[arg(long, value_enum)]
        model: FitModel,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Train the learned orchestration policy from labeled decisions.
    TrainPolicy {
        labeled: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = TrainConfig::default().trees)]
        trees: usize,
        #[arg(long, default_value_t = TrainConfig::default().max_depth)]
        max_depth: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Turn logged sessions into labeled decisions (one JSON line each).
    LabelSessions {
        logs: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(short, long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value = "runs")]
        runs_dir: PathBuf,
        /// Concurrent runs; defaults to the number of logical cores.
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), String> {
    match output {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| e.to_string()),
    }
}

fn open(p: &Path) -> Result<File, String> {
    File::open(p).map_err(|e| format!("{}: {e}", p.display()))
}

fn run(config: &Path, runs_dir: Option<PathBuf>) -> ExitCode {
    let cfg = match RunConfig::load(config) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    if let Err(e) = prepare(&cfg) {
        return fail(EXIT_CONFIG, e);
    }
    let root = runs_dir.or_else(|| cfg.output.as_ref().map(|o| cfg.resolve_path(o))).unwrap_or_else(|| "runs".into());
    let result = Store::open(&root).and_then(|store| {
        let rec = store.create(&cfg)?;
        store.execute(&rec.run_id, &AtomicBool::new(false)).map(|r| (store.dir(&r.run_id), r))
    });
    match result {
        Err(e) => fail(1, e),
        Ok((dir, rec)) => {
            println!("{}", dir.display());
            eprintln!("{:?} after {} steps: {}", rec.status, rec.steps, rec.reason.as_deref().unwrap_or(""));
            match rec.status {
                RunStatus::Stopped | RunStatus::MaxSteps => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_RUN_ERROR),
            }
        }
    }
}

fn serve(host: &str, port: u16, runs_dir: &Path, workers: Option<usize>) -> ExitCode {
    let store = match Store::open(runs_dir) {
        Ok(s) => Arc::new(s),
        Err(e) => return fail(1, e),
    };
    let scheduler = Arc::new(Scheduler::new(store, workers.unwrap_or_else(default_workers)));
    let base_dir = std::env::current_dir().unwrap_or_default();
    let app = router(AppState { scheduler, base_dir, poll: Duration::from_millis(50) });
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => return fail(1, e),
    };
    rt.block_on(async {
        let listener = match tokio::net::TcpListener::bind((host, port)).await {
            Ok(l) => l,
            Err(e) => return fail(1, format!("cannot listen on {host}:{port}: {e}")),
        };
        eprintln!("listening on http://{}", listener.local_addr().map_or_else(|_| format!("{host}:{port}"), |a| a.to_string()));
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        match axum::serve(listener, app).with_graceful_shutdown(shutdown).await {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(1, e),
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let done = |r: Result<(), String>| r.map_or_else(|e| fail(1, e), |_| ExitCode::SUCCESS);
    match cli.command {
        Command::Run { config, runs_dir } => run(&config, runs_dir),
        Command::Serve { port, host, runs_dir, workers } => serve(&host, port, &runs_dir, workers),
        Command::Eval { run_dir, truth, sessions, task, format } => {
            let cwd = std::env::current_dir().unwrap_or_default();
            let spec = TruthSpec {
                judgments: truth.map(|p| p.display().to_string()),
                sessions: sessions.map(|p| p.display().to_string()),
                task_id: task,
            };
            done(evaluate_run_dir(&run_dir, &spec, &cwd).and_then(|report| match format {
                Format::Table => emit(None, &report.to_table()),
                Format::Json => emit(None, &format!("{}\n", report.to_json())),
            }))
        }
        Command::Replay { run_dir } => match replay_run_dir(&run_dir) {
            Err(e) => fail(1, e),
            Ok(report) => {
                println!("{}", serde_json::to_string_pretty(&report).expect("reports serialize"));
                if report.is_consistent() {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(EXIT_RUN_ERROR)
                }
            }
        },
        Command::ValidateRecipe { file } => done(
            std::fs::read_to_string(&file)
                .map_err(|e| format!("{}: {e}", file.display()))
                .and_then(|text| parse_recipe(&text).map_err(|e| e.to_string()))
                .map(|r| println!("ok: recipe {} ({} elements, {} lists)", r.recipe_id, r.elements.len(), r.lists.len())),
        ),
        Command::FitClicks { logs, model, output } => done((|| {
            let sessions = read_session_logs(open(&logs)?).map_err(|e| e.to_string())?;
            let model = match model {
                FitModel::Pbm => ClickModel::Pbm,
                FitModel::Ubm => ClickModel::Ubm,
            };
            let fit = fit_click_model::<f64>(&sessions, model).map_err(|e| e.to_string())?;
            let text = serde_json::to_string_pretty(&fit).expect("fits serialize");
            emit(output.as_deref(), &format!("{text}\n"))
        })()),
        Command::TrainPolicy { labeled, output, trees, max_depth, seed } => done((|| {
            let data = read_dataset(open(&labeled)?).map_err(|e| e.to_string())?;
            let config = TrainConfig { trees, max_depth, seed, ..TrainConfig::default() };
            let forest = train_policy(&data, &config).map_err(|e| e.to_string())?;
            emit(Some(&output), &forest.to_json())
        })()),
        Command::LabelSessions { logs, output } => done((|| {
            let sessions = read_session_logs(open(&logs)?).map_err(|e| e.to_string())?;
            let labeled = label_sessions(&sessions);
            if labeled.skipped > 0 {
                eprintln!("skipped {} events", labeled.skipped);
            }
            emit(output.as_deref(), &dataset_lines(&labeled.decisions))
        })()),
    }
}
