use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use detdecoy_cli::{oneshot, sweep, validate, with_threads, CliError, Config, Preset, PRESETS};

#[derive(Parser)]
#[command(name = "detdecoy", version, about = "Detector-decoy HD-QKD security analysis")]
struct Cli {
    /// Worker threads (defaults to one per core).
    #[arg(long, env = "DETDECOY_THREADS", global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Shipped configuration (see `presets list`).
    #[arg(long)]
    preset: Option<String>,
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Source {
    fn load(&self) -> Result<Config, CliError> {
        match (&self.preset, &self.config) {
            (Some(name), _) => Ok(name.parse::<Preset>()?.config()),
            (_, Some(path)) => Config::load(path),
            _ => Err(CliError::Usage("give --preset or --config".into())),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Compare protocols along one parameter axis and write CSV.
    Sweep {
        #[command(flatten)]
        source: Source,
        /// Output file; `-` for stdout. Overrides the config.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Check every bound against the Monte Carlo ground truth.
    Validate {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        frames: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the report here instead of stdout.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Bounds from observables given as TOML on stdin or in a file.
    Bounds {
        /// Input file; stdin when absent or `-`.
        input: Option<PathBuf>,
    },
    /// Shipped configurations.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    /// Print a preset as TOML.
    Show { name: String },
}

fn write_out(path: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) if p.as_os_str() != "-" => std::fs::write(p, text)?,
        _ => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Sweep { source, output } => {
            let config = source.load()?;
            let csv = with_threads(cli.threads, || sweep::sweep_csv(&config))??;
            let target = output.or_else(|| config.sweep.as_ref().and_then(|s| s.output.clone()));
            write_out(target.as_ref(), &csv)
        }
        Command::Validate {
            source,
            frames,
            seed,
            output,
        } => {
            let mut config = source.load()?;
            if let Some(n) = frames {
                config.validate.n_frames = n;
            }
            if let Some(s) = seed {
                config.validate.seed = s;
            }
            let report = with_threads(cli.threads, || validate::run_validation(&config))??;
            write_out(output.as_ref(), &report.render())?;
            if report.passed() {
                Ok(())
            } else {
                Err(CliError::ValidationFailed {
                    failed: report.failures(),
                    total: report.checks.len(),
                })
            }
        }
        Command::Bounds { input } => {
            let text = match input {
                Some(p) if p.as_os_str() != "-" => std::fs::read_to_string(&p)
                    .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?,
                _ => {
                    let mut s = String::new();
                    io::stdin().read_to_string(&mut s)?;
                    s
                }
            };
            let parsed = oneshot::parse_input(&text)?;
            let out = with_threads(cli.threads, || oneshot::compute(&parsed))??;
            write_out(None, &oneshot::render(&out)?)
        }
        Command::Presets { action } => match action {
            PresetAction::List => {
                let mut s = String::new();
                for p in PRESETS {
                    s.push_str(&format!("{:<8} {}\n", p.name, p.description));
                }
                write_out(None, &s)
            }
            PresetAction::Show { name } => write_out(None, name.parse::<Preset>()?.text),
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { detdecoy_cli::EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
