use clap::{Args, Parser, Subcommand};
use freqcoord::sim::ControllerMode;
use freqcoord_cli::commands;
use freqcoord_cli::scenario::Scenario;
use freqcoord_cli::CliError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "freqcoord", version, about = "Wind-farm and governor frequency coordination simulator")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Scenario TOML file; built-in defaults when omitted.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Device parameter preset.
    #[arg(long, global = true)]
    preset: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the load flow and print the bus table.
    Powerflow,
    /// Run one time-domain simulation.
    Simulate {
        #[arg(long, value_parser = parse_mode)]
        mode: Option<ControllerMode>,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Record inertial-mode runs and sample a training set.
    GenDataset {
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Fit the coordination network to a dataset.
    Train {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Compare no support, inertial support and coordinated control.
    Compare {
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Dataset, training and comparison over the alpha sweep.
    Pipeline {
        /// Comma-separated alpha values.
        #[arg(long, value_delimiter = ',')]
        alpha: Option<Vec<f64>>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
    },
}

fn parse_mode(s: &str) -> Result<ControllerMode, String> {
    match s {
        "none" => Ok(ControllerMode::None),
        "inertial" => Ok(ControllerMode::Inertial),
        "coordinated" => Ok(ControllerMode::Coordinated),
        _ => Err(format!("unknown mode `{s}` (none, inertial, coordinated)")),
    }
}

fn scenario(g: &Global) -> Result<Scenario, CliError> {
    let mut sc = match &g.scenario {
        Some(p) => Scenario::load(p)?,
        None => Scenario::default(),
    };
    if let Some(o) = &g.out {
        sc.out_dir = o.clone();
    }
    if let Some(s) = g.seed {
        sc.seed = s;
    }
    if let Some(p) = &g.preset {
        sc.preset = p.clone();
    }
    Ok(sc)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut sc = scenario(&cli.global)?;
    match cli.command {
        Command::Powerflow => {
            commands::cmd_powerflow(&sc)?;
        }
        Command::Simulate { mode, weights, t_end, dt } => {
            if let Some(m) = mode {
                sc.sim.mode = m;
            }
            if weights.is_some() {
                sc.sim.weights = weights;
            }
            if let Some(t) = t_end {
                sc.sim.t_end = t;
            }
            if let Some(d) = dt {
                sc.sim.dt = d;
            }
            commands::cmd_simulate(&sc)?;
        }
        Command::GenDataset { alpha, samples } => {
            if let Some(a) = alpha {
                sc.dataset.alpha = a;
            }
            if let Some(n) = samples {
                sc.dataset.n_samples = n;
            }
            commands::cmd_gen_dataset(&sc)?;
        }
        Command::Train { dataset, epochs } => {
            if dataset.is_some() {
                sc.dataset.path = dataset;
            }
            if let Some(e) = epochs {
                sc.train.max_epochs = e;
            }
            commands::cmd_train(&sc)?;
        }
        Command::Compare { weights } => {
            if weights.is_some() {
                sc.sim.weights = weights;
            }
            commands::cmd_compare(&sc)?;
        }
        Command::Pipeline { alpha, samples, epochs } => {
            if let Some(a) = alpha {
                sc.compare.alphas = a;
            }
            if let Some(n) = samples {
                sc.dataset.n_samples = n;
            }
            if let Some(e) = epochs {
                sc.train.max_epochs = e;
            }
            let out = commands::cmd_pipeline(&sc)?;
            println!("pipeline finished in {:.1} s", out.seconds);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
