//! `flightlink` command line: run missions, replay and evaluate logs, render
//! plots, validate worlds, generate fixtures and serve the gateway.
//!
//! Exit codes: 0 success, 1 mission or check failure, 2 usage error,
//! 3 environment error (unreadable inputs, unwritable outputs, network).

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use flightlink_core::llm::{
    price_table_from, HttpProvider, ModelConfig, Provider, ScriptedProvider, API_KEY_ENV,
    DEFAULT_COMPLETION_MARKER,
};
use flightlink_core::mission::{
    evaluate, replay, run_direct, run_llm, script_from_log, with_malformed_first_turn, LlmRunConfig, LoadedMission,
    MissionLog, RunError, RunStatus,
};
use flightlink_core::plot;
use flightlink_core::streams::{all_schemas, validate_ordering, SessionConfig};
use flightlink_core::world::{random_world, validate_world, WorldSpec};
use flightlink_gateway::GatewayConfig;
use thiserror::Error;

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Failure(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Environment(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Failure(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Environment(_) => 3,
        }
    }
}

type CliResult = Result<(), CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Direct,
    Llm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProviderArg {
    Scripted,
    Http,
}

#[derive(Parser)]
#[command(name = "flightlink", version, about = "Simulated UAV missions driven by direct control or a tool-calling model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fly a mission and write its log.
    Run {
        #[arg(long)]
        mission: PathBuf,
        #[arg(long, value_enum, default_value = "direct")]
        mode: Mode,
        #[arg(long, value_enum, default_value = "scripted")]
        provider: ProviderArg,
        /// Scripted-provider fixture (required with `--provider scripted`).
        #[arg(long)]
        fixture: Option<PathBuf>,
        /// Where to write the NDJSON log.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        call_limit: Option<u32>,
        /// Model name; must be in the price table.
        #[arg(long)]
        model: Option<String>,
        /// OpenAI-compatible endpoint for `--provider http`.
        #[arg(long, default_value = "https://api.openai.com/v1")]
        base_url: String,
        /// JSON price table replacing the built-in one.
        #[arg(long)]
        prices: Option<PathBuf>,
    },
    /// Render a log as top-down and altitude SVGs plus a CSV of samples.
    Plot {
        #[arg(long)]
        log: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a world file and print an occupancy summary.
    Validate {
        #[arg(long)]
        world: PathBuf,
    },
    /// Re-execute a log's stream calls and check that they reproduce it.
    Replay {
        #[arg(long)]
        log: PathBuf,
    },
    /// Print metrics for a log as JSON.
    Evaluate {
        #[arg(long)]
        log: PathBuf,
    },
    /// Print the eight stream tool schemas as JSON.
    Schemas,
    /// Write a random world.
    GenWorld {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        max_obstacles: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Derive a scripted-provider fixture from a direct-control run.
    Script {
        #[arg(long)]
        mission: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Prepend one malformed turn to exercise the retry path.
        #[arg(long)]
        malformed: bool,
    },
    /// Serve the HTTP/WebSocket gateway.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Directory of mission files offered by the gateway.
        #[arg(long, default_value = "fixtures/missions")]
        missions: PathBuf,
        /// Directory of scripted-provider fixtures.
        #[arg(long, default_value = "fixtures/scripts")]
        scripts: PathBuf,
        /// OpenAI-compatible endpoint for HTTP-provider sessions.
        #[arg(long)]
        base_url: Option<String>,
    },
}

fn env_err(what: &str) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Environment(format!("{what}: {e}"))
}

fn require_file(path: &Path) -> CliResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Environment(format!("{}: no such file", path.display())))
    }
}

fn load_mission(path: &Path) -> Result<LoadedMission, CliError> {
    require_file(path)?;
    LoadedMission::load(path).map_err(|e| CliError::Environment(format!("{}: {e}", path.display())))
}

fn load_log(path: &Path) -> Result<MissionLog, CliError> {
    require_file(path)?;
    MissionLog::read(path).map_err(|e| CliError::Environment(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(env_err("creating output directory"))?;
    }
    std::fs::write(path, text).map_err(env_err("writing output"))
}

fn json_pretty<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    mission: &Path,
    mode: Mode,
    provider: ProviderArg,
    fixture: Option<&Path>,
    out: &Path,
    call_limit: Option<u32>,
    model: Option<&str>,
    base_url: &str,
    prices: Option<&Path>,
) -> CliResult {
    let mut mission = load_mission(mission)?;
    if let Some(limit) = call_limit {
        if limit == 0 {
            return Err(CliError::Usage("--call-limit must be at least 1".into()));
        }
        mission.spec.call_limit = limit;
    }
    let log = match mode {
        Mode::Direct => run_direct(&mission, SessionConfig::default()).map_err(run_error)?,
        Mode::Llm => {
            let kind = provider;
            let mut provider: Box<dyn Provider> = match kind {
                ProviderArg::Scripted => {
                    let path = fixture.ok_or_else(|| {
                        CliError::Usage("--provider scripted needs --fixture <script.json>".into())
                    })?;
                    require_file(path)?;
                    Box::new(ScriptedProvider::load(path).map_err(|e| CliError::Environment(e.to_string()))?)
                }
                ProviderArg::Http => {
                    let key = std::env::var(API_KEY_ENV)
                        .map_err(|_| CliError::Environment(format!("{API_KEY_ENV} is not set")))?;
                    Box::new(HttpProvider::new(base_url, &key, Duration::from_secs(60)))
                }
            };
            let mut config = LlmRunConfig::default();
            if let Some(path) = prices {
                require_file(path)?;
            }
            config.price_table = price_table_from(prices).map_err(|e| CliError::Environment(e.to_string()))?;
            // The scripted provider is priced at zero; a real endpoint needs a real model name.
            let default_model = if kind == ProviderArg::Http { "gpt-4o" } else { "scripted" };
            config.model = ModelConfig::new(model.unwrap_or(default_model));
            run_llm(&mission, provider.as_mut(), &config).map_err(run_error)?
        }
    };
    write(out, &log.to_ndjson())?;
    let m = evaluate(&log).map_err(|e| CliError::Failure(e.to_string()))?;
    println!(
        "{}: {} ({} stream calls, {} model calls, {} net collisions, goal distance {:.3} m) -> {}",
        log.mission.id,
        log.status.as_str(),
        m.stream_calls,
        log.calls_used,
        m.net_collisions,
        m.goal_distance,
        out.display()
    );
    if let Some(reason) = &log.halt_reason {
        println!("reason: {reason}");
    }
    if log.status == RunStatus::Reached && m.net_collisions == 0 {
        Ok(())
    } else {
        Err(CliError::Failure(format!("mission {} did not succeed", log.mission.id)))
    }
}

fn run_error(e: RunError) -> CliError {
    match e {
        RunError::Llm(err) => CliError::Usage(err.to_string()),
        RunError::WorldFileInvalid(m) => CliError::Environment(format!("world file is invalid: {m}")),
        other => CliError::Failure(other.to_string()),
    }
}

fn cmd_plot(log: &Path, out: &Path) -> CliResult {
    let log = load_log(log)?;
    let art = plot::render(&log).map_err(|e| CliError::Failure(e.to_string()))?;
    std::fs::create_dir_all(out).map_err(env_err("creating output directory"))?;
    write(&out.join("top-down.svg"), &art.top_down_svg)?;
    write(&out.join("altitude.svg"), &art.altitude_svg)?;
    write(&out.join("trajectory.csv"), &art.csv)?;
    println!("wrote top-down.svg, altitude.svg and trajectory.csv to {}", out.display());
    Ok(())
}

fn cmd_validate(world: &Path) -> CliResult {
    require_file(world)?;
    let spec = WorldSpec::load(world).map_err(|e| CliError::Failure(format!("{}: {e}", world.display())))?;
    let report = validate_world(&spec).map_err(|e| CliError::Failure(format!("{}: {e}", world.display())))?;
    println!(
        "{}: {}x{} cells, {} obstacles, {} occupied cells, digest {}",
        world.display(),
        report.cells.0,
        report.cells.1,
        report.obstacle_count,
        report.occupied_cells,
        report.digest
    );
    let grid = spec.build_grid().map_err(|e| CliError::Failure(e.to_string()))?;
    print!("{}", grid.to_csv());
    if report.passed() {
        println!("ok");
        Ok(())
    } else {
        let cells: Vec<String> = report.mismatches.iter().map(|c| c.to_string()).collect();
        Err(CliError::Failure(format!("occupancy disagrees with the footprint test at {}", cells.join(", "))))
    }
}

fn cmd_replay(path: &Path) -> CliResult {
    let log = load_log(path)?;
    validate_ordering(&log.records).map_err(|e| CliError::Failure(e.to_string()))?;
    replay(&log).map_err(|e| CliError::Failure(e.to_string()))?;
    println!("{}: {} stream calls replayed identically", path.display(), log.records.len());
    Ok(())
}

fn cmd_evaluate(path: &Path) -> CliResult {
    let log = load_log(path)?;
    let m = evaluate(&log).map_err(|e| CliError::Failure(e.to_string()))?;
    print!("{}", json_pretty(&m));
    Ok(())
}

fn cmd_script(mission: &Path, out: &Path, malformed: bool) -> CliResult {
    let mission = load_mission(mission)?;
    let log = run_direct(&mission, SessionConfig::default()).map_err(run_error)?;
    let mut script = script_from_log(&log, DEFAULT_COMPLETION_MARKER);
    if malformed {
        script = with_malformed_first_turn(&script);
    }
    write(out, &script.to_json_pretty())?;
    println!("{}: {} responders -> {}", log.mission.id, script.responders.len(), out.display());
    Ok(())
}

fn load_missions(dir: &Path) -> Result<Vec<LoadedMission>, CliError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(env_err("reading the mission directory"))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths.iter().map(|p| load_mission(p)).collect()
}

fn cmd_serve(bind: &str, port: u16, missions: &Path, scripts: &Path, base_url: Option<String>) -> CliResult {
    let addr: SocketAddr = format!("{bind}:{port}")
        .parse()
        .map_err(|e| CliError::Usage(format!("invalid bind address {bind}:{port}: {e}")))?;
    let mut config = GatewayConfig::new(load_missions(missions)?);
    config.scripts_dir = Some(scripts.to_path_buf());
    config.http_base_url = base_url;
    let ids: Vec<&str> = config.missions.iter().map(|m| m.id()).collect();
    println!("serving {} missions ({}) on http://{addr}/v1", ids.len(), ids.join(", "));
    let rt = tokio::runtime::Runtime::new().map_err(env_err("starting the runtime"))?;
    rt.block_on(flightlink_gateway::serve(addr, config)).map_err(env_err("serving"))
}

fn dispatch(cli: Cli) -> CliResult {
    match cli.command {
        Command::Run { mission, mode, provider, fixture, out, call_limit, model, base_url, prices } => cmd_run(
            &mission,
            mode,
            provider,
            fixture.as_deref(),
            &out,
            call_limit,
            model.as_deref(),
            &base_url,
            prices.as_deref(),
        ),
        Command::Plot { log, out } => cmd_plot(&log, &out),
        Command::Validate { world } => cmd_validate(&world),
        Command::Replay { log } => cmd_replay(&log),
        Command::Evaluate { log } => cmd_evaluate(&log),
        Command::Schemas => {
            print!("{}", json_pretty(&all_schemas()));
            Ok(())
        }
        Command::GenWorld { seed, max_obstacles, out } => {
            let spec = random_world(seed, max_obstacles);
            write(&out, &format!("{}\n", spec.to_json_pretty()))?;
            println!("seed {seed}: {} obstacles -> {}", spec.obstacles.len(), out.display());
            Ok(())
        }
        Command::Script { mission, out, malformed } => cmd_script(&mission, &out, malformed),
        Command::Serve { bind, port, missions, scripts, base_url } => {
            cmd_serve(&bind, port, &missions, &scripts, base_url)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
