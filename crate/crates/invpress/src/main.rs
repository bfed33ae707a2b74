use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use invpress::commands::{self, CommandOutput, ControlSetOverrides};
use invpress::config::{parse_config, RunConfig};
use invpress::error::CliError;
use invpress::report::write_text;
use invpress::verify::{VerifyOptions, DEFAULT_U0};

#[derive(Parser)]
#[command(
    name = "invpress",
    version,
    about = "Invariance pressure of control systems"
)]
struct Cli {
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write the command's CSV table here.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// Override every seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Suppress the summary printed when the report goes to a file.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form pressure of a hyperbolic controllable linear system.
    Formula { config: PathBuf },
    /// Lower bound, closed form and equilibrium upper bound.
    Bounds { config: PathBuf },
    /// Cover-counting estimate of the pressure over growing horizons.
    Estimate { config: PathBuf },
    /// Sampled approximation of the control set containing the origin.
    Controlset {
        config: PathBuf,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Floquet exponents of a periodic control-trajectory pair.
    Lyapunov {
        config: PathBuf,
        /// Period `T`.
        #[arg(long = "T", alias = "period")]
        period: f64,
        /// Control file: `delta,<step>` then one row per interval.
        #[arg(long)]
        control: PathBuf,
        /// Initial state, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
    },
    /// Runs the built-in spiral scenario and grades every stage.
    Verify {
        /// Centres of the control range, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        u0: Option<Vec<f64>>,
    },
}

fn load(path: &Path, seed: Option<u64>) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut cfg = parse_config(&text)?;
    if let Some(s) = seed {
        cfg.set_seed(s);
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    }
    let mut out = cli.out.clone();
    let mut csv = cli.csv.clone();
    let mut defaults = |cfg: &RunConfig| {
        if let Some(o) = &cfg.output {
            out = out.take().or_else(|| o.json.as_ref().map(PathBuf::from));
            csv = csv.take().or_else(|| o.csv.as_ref().map(PathBuf::from));
        }
    };
    let output: CommandOutput = match &cli.command {
        Command::Formula { config } => {
            let cfg = load(config, cli.seed)?;
            defaults(&cfg);
            commands::formula(&cfg)?
        }
        Command::Bounds { config } => {
            let cfg = load(config, cli.seed)?;
            defaults(&cfg);
            commands::bounds(&cfg)?
        }
        Command::Estimate { config } => {
            let cfg = load(config, cli.seed)?;
            defaults(&cfg);
            commands::estimate(&cfg)?
        }
        Command::Controlset {
            config,
            samples,
            horizon,
        } => {
            let cfg = load(config, cli.seed)?;
            defaults(&cfg);
            let over = ControlSetOverrides {
                samples: *samples,
                horizon: *horizon,
                seed: cli.seed,
            };
            commands::controlset(&cfg, &over)?
        }
        Command::Lyapunov {
            config,
            period,
            control,
            x0,
        } => {
            let cfg = load(config, cli.seed)?;
            defaults(&cfg);
            let text = std::fs::read_to_string(control)
                .map_err(|e| CliError::Io(format!("{}: {e}", control.display())))?;
            commands::lyapunov(&cfg, *period, &text, x0.clone())?
        }
        Command::Verify { u0 } => {
            let u0s = u0.clone().unwrap_or_else(|| DEFAULT_U0.to_vec());
            let mut opts = VerifyOptions::default();
            if let Some(s) = cli.seed {
                opts.seed = s;
            }
            let output = commands::verify(&u0s, &opts)?;
            if !cli.quiet {
                print!("{}", output.text.as_deref().unwrap_or_default());
            }
            if let Some(p) = &out {
                write_text(Some(p), &output.json)?;
            }
            return output.status.map_or(Ok(()), Err);
        }
    };
    if let (Some(p), Some(table)) = (&csv, &output.csv) {
        write_text(Some(p), table)?;
    }
    write_text(out.as_deref(), &output.json)?;
    if out.is_some() && !cli.quiet {
        print!("{}", output.text.as_deref().unwrap_or_default());
    }
    output.status.map_or(Ok(()), Err)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("invpress: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
