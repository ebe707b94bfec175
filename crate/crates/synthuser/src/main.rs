use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use synthuser::config::{parse_config, AgentEntry, PlayConfig, SourceRef};
use synthuser::core::agents::AgentKind;
use synthuser::core::FaultConfig;
use synthuser::engine::{run_simulation, EngineSink};
use synthuser::http::{router, serve, wall_ms, AppState};
use synthuser::pipeline::{simulation_from, synthesize};
use synthuser::report::{load_report, summarize, write_report};
use synthuser::trace_io::SharedTraceLog;

#[derive(Parser)]
#[command(
    name = "synthuser",
    version,
    about = "Track, synthesize and play synthetic end users"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct FaultFlags {
    /// Enable the alert navigation fault.
    #[arg(long)]
    fault_alert_nav: bool,
    /// Probability that a follow request fails with a server error.
    #[arg(long, value_name = "P")]
    fault_follow_p: Option<f64>,
}

impl FaultFlags {
    fn apply(&self, faults: &mut FaultConfig) {
        if self.fault_alert_nav {
            faults.alert_nav_bug_enabled = true;
        }
        if let Some(p) = self.fault_follow_p {
            faults.follow_error_probability = p;
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Serve the demo target, the tracker endpoints and the static web UI.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Trace file that receives every tracked action (appended to).
        #[arg(long, default_value = "traces.jsonl")]
        trace_out: PathBuf,
        /// Directory with the web UI.
        #[arg(long)]
        static_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        faults: FaultFlags,
    },
    /// Build a frequency model from trace files.
    Synthesize {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
    /// Run agents against a fresh target and report what they found.
    Play {
        #[arg(long, group = "source")]
        model: Option<PathBuf>,
        #[arg(long, group = "source")]
        replay: Option<PathBuf>,
        #[arg(long, group = "source")]
        random: bool,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        faults: FaultFlags,
    },
    /// Print the summary of a report file.
    Report { file: PathBuf },
}

struct PlayArgs {
    model: Option<PathBuf>,
    replay: Option<PathBuf>,
    random: bool,
    config: Option<PathBuf>,
    output: Option<PathBuf>,
    seed: Option<u64>,
    faults: FaultFlags,
}

fn play(args: PlayArgs) -> Result<bool> {
    let mut config = match &args.config {
        Some(path) => parse_config(path).with_context(|| format!("reading {}", path.display()))?,
        None => PlayConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = Some(seed);
    }
    args.faults.apply(&mut config.faults);
    config.faults.validate()?;
    let seed = config.require_seed()?;
    let single = |kind, source| AgentEntry {
        kind,
        source,
        count: 1,
        max_steps: None,
    };
    if let Some(m) = args.model {
        config.agents = vec![single(AgentKind::Frequency, SourceRef::Model(m))];
    } else if let Some(t) = args.replay {
        config.agents = vec![single(AgentKind::Replay, SourceRef::Traces(vec![t]))];
    } else if args.random {
        config.agents = vec![single(AgentKind::Random, SourceRef::Random)];
    }
    let (sim, target) = simulation_from(&config, seed)?;
    let sink = match &config.trace_out {
        Some(path) => {
            EngineSink::Log(SharedTraceLog::open(path).with_context(|| format!("opening {}", path.display()))?)
        }
        None => EngineSink::Discard,
    };
    let report = run_simulation(&sim, &target, sink)?;
    if let Some(out) = &args.output {
        write_report(&report, out).with_context(|| format!("writing {}", out.display()))?;
    }
    print!("{}", summarize(&report));
    Ok(report.has_findings())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Serve {
            addr,
            trace_out,
            static_dir,
            seed,
            faults,
        } => {
            let mut config = FaultConfig::none();
            faults.apply(&mut config);
            config.validate()?;
            let log = SharedTraceLog::open(&trace_out).with_context(|| format!("opening {}", trace_out.display()))?;
            let app = router(AppState::with_local_target(config, seed, log), static_dir);
            eprintln!("serving on http://{addr}, recording to {}", trace_out.display());
            tokio::runtime::Runtime::new()?.block_on(serve(addr, app))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Synthesize { traces, output } => {
            let model = synthesize(&traces, &output, wall_ms())?;
            println!(
                "model: {} states, {} transition rows -> {}",
                model.action_rows().count(),
                model.transition_rows().count(),
                output.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Play {
            model,
            replay,
            random,
            config,
            output,
            seed,
            faults,
        } => {
            let findings = play(PlayArgs {
                model,
                replay,
                random,
                config,
                output,
                seed,
                faults,
            })?;
            Ok(if findings { ExitCode::from(1) } else { ExitCode::SUCCESS })
        }
        Command::Report { file } => {
            let report = load_report(&file).with_context(|| format!("reading {}", file.display()))?;
            print!("{}", summarize(&report));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
