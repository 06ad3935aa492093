use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use apfwf::batch::{run_batch, summarize, BatchPlan, SeedRange};
use apfwf::server::{serve, ServeConfig};
use apfwf::sim::{generate_instance, Layout, Method, ScenarioSpec, TrajectoryLog};
use apfwf::{Error, Result};

#[derive(Parser)]
#[command(name = "apfwf", version, about = "Multi-robot potential-field navigation with wall-following switches")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a batch of generated instances and write metrics.csv and summary.csv.
    Run {
        /// flat, cylind, swap or a scenario file; comma-separated for several.
        #[arg(long, value_delimiter = ',', required = true)]
        layout: Vec<String>,
        /// apf, apf-rs or apf-ls; comma-separated for several.
        #[arg(long, value_delimiter = ',', required = true)]
        method: Vec<Method>,
        #[arg(long, value_delimiter = ',', required = true)]
        robots: Vec<usize>,
        /// A..B (end exclusive) or A..=B.
        #[arg(long)]
        seeds: SeedRange,
        #[arg(long)]
        out: PathBuf,
        /// Weights file for apf-ls.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        /// Also write one trajectory log per instance.
        #[arg(long)]
        logs: bool,
    },
    /// Aggregate a metrics CSV into a summary table.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the switch events of a trajectory log.
    Replay {
        #[arg(long)]
        log: PathBuf,
    },
    /// Serve a live run over WebSocket at /ws.
    Serve {
        /// Scenario file; overrides --layout.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value = "swap")]
        layout: String,
        #[arg(long, default_value_t = 6)]
        robots: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        method: Option<Method>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Multiplier on the 5 Hz real-time rate.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
        /// Controlled robot ids; the first three by default.
        #[arg(long, value_delimiter = ',')]
        controlled: Option<Vec<usize>>,
        #[arg(long)]
        paused: bool,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Generation(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { layout, method, robots, seeds, out, model, workers, logs } => {
            let layouts = layout.iter().map(|s| s.parse()).collect::<Result<Vec<Layout>>>()?;
            let mut plan = BatchPlan::new(layouts, robots, seeds, method, out);
            plan.model = model;
            plan.workers = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            plan.save_logs = logs;
            let result = run_batch(&plan)?;
            for s in &result.summary {
                println!(
                    "{:<8} {:<7} N={:<3} success {:>5.1}%  arrival {:.3}  makespan {}",
                    s.env,
                    s.method,
                    s.n,
                    100.0 * s.success_rate,
                    s.arrival_rate_mean,
                    s.makespan_mean.map_or("-".into(), |m| format!("{m:.1}"))
                );
            }
            println!("wrote {} and {}", result.metrics_path.display(), result.summary_path.display());
        }
        Command::Summarize { input, out } => {
            let rows = summarize(&input, &out)?;
            println!("wrote {} groups to {}", rows.len(), out.display());
        }
        Command::Replay { log } => {
            let log = TrajectoryLog::load(&log)?;
            for r in log.records.iter().filter(|r| r.event.is_some()) {
                println!(
                    "t={:<5} robot={:<3} {:<18} mode={:?} theta={:+.4} dir={:+} |F|={:.3}",
                    r.t,
                    r.id,
                    r.event.as_deref().unwrap_or_default(),
                    r.mode,
                    r.theta_rot,
                    r.i_dir.sign() as i8,
                    r.f_tot_mag
                );
            }
            println!("{} records, last step {}", log.len(), log.last_step());
        }
        Command::Serve { scenario, layout, robots, seed, method, model, addr, speed, controlled, paused } => {
            let mut spec = match scenario {
                Some(path) => ScenarioSpec::load(path)?,
                None => generate_instance(&layout.parse()?, robots, seed)?,
            };
            if let Some(m) = method {
                spec.params.method = m;
            }
            if model.is_some() {
                spec.params.weights = model;
            }
            spec.validate()?;
            let cfg = ServeConfig { addr, speed, controlled, start_paused: paused };
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                eprintln!("serving ws://{addr}/ws");
                serve(spec, cfg).await
            })?;
        }
    }
    Ok(())
}
