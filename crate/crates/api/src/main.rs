use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use seatwin::harness::{run_scenario, MissionConfig, RunMode, Scenario};
use seatwin_api::{router, MissionService};

#[derive(Parser)]
#[command(name = "seatwin", version, about = "Digital-twin mission over a simulated acoustic network")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its report. Exits 0 iff every assertion passes.
    Run {
        #[arg(long)]
        scenario: Scenario,
        #[command(flatten)]
        mission: MissionArgs,
        #[arg(long, value_enum, default_value = "virtual")]
        mode: ModeArg,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the mission in real time behind the HTTP API.
    Serve {
        #[command(flatten)]
        mission: MissionArgs,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Static files served for paths outside the API.
        #[arg(long)]
        console: Option<PathBuf>,
    },
}

#[derive(Args)]
struct MissionArgs {
    /// Mission TOML; the built-in five-platform mission if omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Seconds.
    #[arg(long)]
    duration: Option<f64>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ModeArg {
    Virtual,
    Realtime,
}

impl MissionArgs {
    fn load(&self) -> Result<MissionConfig, String> {
        let mut config = match &self.config {
            Some(path) => MissionConfig::load(path).map_err(|e| format!("{}: {e}", path.display()))?,
            None => MissionConfig::default_mission(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(d) = self.duration {
            config.duration_s = d;
        }
        config.validate().map_err(|e| e.to_string())?;
        Ok(config)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run { scenario, mission, mode, out } => {
            let mut config = match mission.load() {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            config.mode = match mode {
                ModeArg::Virtual => RunMode::Virtual,
                ModeArg::Realtime => RunMode::Realtime,
            };
            match run_scenario(scenario, &config, Some(&out)) {
                Ok(report) => {
                    print!("{}", report.to_text());
                    println!("report: {}", out.join(format!("{}-report.json", scenario.letter())).display());
                    if report.passed {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => fail(&e.to_string()),
            }
        }
        Command::Serve { mission, addr, console } => {
            let config = match mission.load() {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            match serve(config, addr, console) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(&e),
            }
        }
    }
}

fn fail(message: &str) -> ExitCode {
    eprintln!("seatwin: {message}");
    ExitCode::from(2)
}

fn serve(config: MissionConfig, addr: SocketAddr, console: Option<PathBuf>) -> Result<(), String> {
    let (service, _worker) = MissionService::spawn(config, None).map_err(|e| e.to_string())?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| format!("{addr}: {e}"))?;
        eprintln!("serving on http://{}", listener.local_addr().map_err(|e| e.to_string())?);
        axum::serve(listener, router(service, console))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| e.to_string())
    })
}
