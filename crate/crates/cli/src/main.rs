use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use modalsim::config::{canonical_toml, parse_config, OracleParams, ScenarioParams};
use modalsim::emit::write_outputs;
use modalsim::scenarios::run_scenario;
use modalsim::{CliError, ScenarioConfig};

/// Deterministic scenario runner for coarse-grained subsystem spectra,
/// decoherence models and branch-history ensembles.
#[derive(Parser)]
#[command(name = "modalsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config and emit data files plus a manifest.
    Run {
        config_file: PathBuf,
        /// Override the config's RNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's trajectory count.
        #[arg(long)]
        trajectories: Option<usize>,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config's output format (csv or json).
        #[arg(long)]
        format: Option<String>,
    },
    /// Parse and validate a config, reporting every violation.
    Validate { config_file: PathBuf },
    /// Diagonalize the built-in validation kernels against their closed
    /// forms and report per-level relative errors.
    OracleCheck {
        /// Maximum accepted relative error per level.
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
    },
}

fn init_workers() {
    if let Ok(value) = std::env::var("MODALSIM_WORKERS") {
        match value.parse::<usize>() {
            Ok(n) if n >= 1 => {
                // ignore failure: the pool can only be set once per process
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("warning: ignoring invalid MODALSIM_WORKERS value {value:?}"),
        }
    }
}

fn load_config(path: &PathBuf) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text).map_err(CliError::Config)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config_file, seed, trajectories, out, format } => {
            let mut config = load_config(&config_file)?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            if let Some(n) = trajectories {
                config.n_trajectories = n;
            }
            if let Some(dir) = out {
                config.output_dir = dir.display().to_string();
            }
            if let Some(fmt) = format {
                config.output_format = match fmt.as_str() {
                    "csv" => modalsim::config::OutputFormat::Csv,
                    "json" => modalsim::config::OutputFormat::Json,
                    other => {
                        return Err(CliError::Config(vec![modalsim::Violation {
                            key: "--format".into(),
                            message: format!("expected \"csv\" or \"json\", got \"{other}\""),
                        }]))
                    }
                };
            }
            let outcome = run_scenario(&config)?;
            let written = write_outputs(
                std::path::Path::new(&config.output_dir),
                config.output_format,
                &canonical_toml(&config),
                &outcome.tables,
            )?;
            for name in &written {
                println!("{}/{name}", config.output_dir);
            }
            if !outcome.passed {
                return Err(CliError::Acceptance(
                    "oracle check exceeded the configured tolerance (see emitted table)".into(),
                ));
            }
            Ok(())
        }
        Command::Validate { config_file } => {
            let config = load_config(&config_file)?;
            println!("valid: scenario {}", config.params.scenario_name());
            Ok(())
        }
        Command::OracleCheck { tolerance } => {
            let params = OracleParams { tolerance, ..OracleParams::default() };
            let config = ScenarioConfig {
                params: ScenarioParams::OracleCheck(params),
                seed: 0,
                n_trajectories: 0,
                output_dir: String::new(),
                output_format: modalsim::config::OutputFormat::Csv,
            };
            let outcome = run_scenario(&config)?;
            for table in &outcome.tables {
                let (_, content) = table.render(modalsim::config::OutputFormat::Csv);
                print!("{content}");
            }
            if outcome.passed {
                Ok(())
            } else {
                Err(CliError::Acceptance(
                    "oracle check exceeded the configured tolerance".into(),
                ))
            }
        }
    }
}

fn main() -> ExitCode {
    init_workers();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
