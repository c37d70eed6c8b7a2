use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bdlp_cli::checks::Check;
use bdlp_cli::commands::{self, IbmOverrides, Method};
use bdlp_cli::{CliError, LoadedConfig};
use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};

/// Spatial birth–death dynamics: kinetic solvers, individual-based
/// simulation and hierarchy operator checks.
#[derive(Debug, Parser)]
#[command(name = "bdlp", version)]
struct Cli {
    /// JSON experiment configuration; defaults apply to omitted fields.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the parameter validation report.
    Validate {
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Solve the kinetic equation; writes a trajectory CSV and a
    /// diagnostics JSON next to it.
    Vlasov {
        #[arg(long, value_enum, default_value = "picard")]
        method: Method,
        #[arg(long, value_name = "PATH", default_value = "vlasov.csv")]
        out: PathBuf,
        /// Run Picard iteration even when the mortality condition fails.
        #[arg(long)]
        override_regime: bool,
    },
    /// Simulate ensembles; writes snapshots, densities and pair
    /// correlations into a directory.
    Ibm {
        #[arg(long, value_name = "DIR", default_value = "ibm_out")]
        out: PathBuf,
        #[command(flatten)]
        ensemble: EnsembleArgs,
        /// Write binned counts instead of particle positions.
        #[arg(long)]
        binned: bool,
    },
    /// Mean-field convergence table: eps, t, l2_error, stderr.
    Sweep {
        #[arg(long, value_name = "PATH", default_value = "sweep.csv")]
        out: PathBuf,
        #[command(flatten)]
        ensemble: EnsembleArgs,
    },
    /// Numerical checks of the truncated hierarchy operators.
    Ops {
        #[arg(long, value_enum, default_value = "all")]
        check: Check,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Exit with status 4 if any check fails.
        #[arg(long)]
        strict: bool,
    },
}

#[derive(Debug, clap::Args)]
struct EnsembleArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated list, e.g. 0.4,0.2,0.1.
    #[arg(long, value_delimiter = ',', value_name = "CSVLIST")]
    eps_list: Option<Vec<f64>>,
    #[arg(long)]
    reps: Option<usize>,
}

impl From<EnsembleArgs> for IbmOverrides {
    fn from(a: EnsembleArgs) -> Self {
        Self {
            seed: a.seed,
            eps_list: a.eps_list,
            replicates: a.reps,
        }
    }
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("BDLP_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Config(format!("BDLP_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let cfg = match &cli.config {
        Some(p) => LoadedConfig::from_path(p)?,
        None => LoadedConfig::defaults(),
    };
    match cli.command {
        Command::Validate { out } => {
            let (report, json) = commands::validate(&cfg);
            for w in report.warnings() {
                log::warn!("{w}");
            }
            print!("{json}");
            if let Some(p) = out {
                write(&p, &json)?;
            }
        }
        Command::Vlasov {
            method,
            out,
            override_regime,
        } => {
            let (csv, diag) = commands::vlasov(&cfg, method, override_regime)?;
            write(&out, &csv)?;
            write(&out.with_extension("json"), &diag)?;
        }
        Command::Ibm { out, ensemble, binned } => {
            for a in commands::ibm(&cfg, &ensemble.into(), binned)? {
                write(&out.join(&a.name), &a.contents)?;
            }
        }
        Command::Sweep { out, ensemble } => {
            let csv = commands::sweep(&cfg, &ensemble.into())?;
            write(&out, &csv)?;
        }
        Command::Ops { check, out, strict } => {
            let result = commands::ops(&cfg, check, strict);
            let json = match &result {
                Ok((_, json)) => json.clone(),
                Err(CliError::ChecksFailed(json)) => json.clone(),
                Err(_) => String::new(),
            };
            if !json.is_empty() {
                print!("{json}");
                if let Some(p) = &out {
                    write(p, &json)?;
                }
            }
            if let Err(CliError::ChecksFailed(_)) = result {
                return Err(CliError::ChecksFailed("see report".into()));
            }
            result?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let defaults = serde_json::to_string_pretty(&bdlp_cli::ExperimentConfig::default()).expect("serializable");
    let matches = Cli::command()
        .after_long_help(format!("Default configuration:\n{defaults}"))
        .get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = serde_json::json!({ "error": e.to_string(), "exit_code": e.exit_code() });
            eprintln!("{msg}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
