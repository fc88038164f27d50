use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use qfb::cli::{self, CliError, ConfigError};

/// Stochastic trajectory simulator for homodyne-feedback entanglement
/// control of two dispersively measured qubits.
#[derive(Parser, Debug)]
#[command(name = "qfb", version, about)]
struct Args {
    /// Scenario preset: fig2a, fig2bc, fig3, fig4, eta08
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,

    /// Config file in the flat dotted-key format (see README)
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override one key, e.g. --set feedback.u=5 (repeatable, last wins)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Random seed (overrides run.seed)
    #[arg(long)]
    seed: Option<u64>,

    /// Ensemble size (overrides run.trajectories)
    #[arg(long)]
    trajectories: Option<usize>,

    /// Also write one CSV per trajectory
    #[arg(long)]
    emit_trajectories: bool,

    /// Output directory (overrides run.out)
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores)
    #[arg(long)]
    workers: Option<usize>,
}

/// Environment overrides, applied between the config file/preset and the
/// command-line flags.
const ENV_KEYS: [(&str, &str); 4] = [
    ("QFB_SEED", "run.seed"),
    ("QFB_TRAJECTORIES", "run.trajectories"),
    ("QFB_OUT", "run.out"),
    ("QFB_EMIT_TRAJECTORIES", "run.emit_trajectories"),
];

fn assemble(args: &Args) -> Result<cli::ScenarioConfig, CliError> {
    let base_text = match (&args.preset, &args.config) {
        (Some(name), None) => cli::emit_config(&cli::preset(name)?),
        (None, Some(path)) => std::fs::read_to_string(path).map_err(|e| {
            ConfigError::single(
                "--config",
                format!("cannot read {}: {e}", path.display()),
            )
        })?,
        _ => {
            return Err(ConfigError::single(
                "--preset/--config",
                "exactly one of --preset or --config is required",
            )
            .into())
        }
    };

    let mut pairs = cli::config_pairs(&base_text)?;

    for (var, key) in ENV_KEYS {
        match std::env::var(var) {
            Ok(v) => pairs.push((key.to_string(), v)),
            Err(std::env::VarError::NotPresent) => {}
            Err(e) => return Err(ConfigError::single(var, e.to_string()).into()),
        }
    }

    for s in &args.set {
        match s.split_once('=') {
            Some((k, v)) => pairs.push((k.trim().to_string(), v.trim().to_string())),
            None => {
                return Err(ConfigError::single(
                    "--set",
                    format!("expected KEY=VALUE, got \"{s}\""),
                )
                .into())
            }
        }
    }

    if let Some(seed) = args.seed {
        pairs.push(("run.seed".to_string(), seed.to_string()));
    }
    if let Some(n) = args.trajectories {
        pairs.push(("run.trajectories".to_string(), n.to_string()));
    }
    if args.emit_trajectories {
        pairs.push(("run.emit_trajectories".to_string(), "true".to_string()));
    }
    if let Some(out) = &args.out {
        pairs.push(("run.out".to_string(), out.display().to_string()));
    }

    Ok(cli::build_config(&pairs)?)
}

fn workers(args: &Args) -> Result<Option<usize>, CliError> {
    if let Some(w) = args.workers {
        return Ok(Some(w));
    }
    match std::env::var("QFB_WORKERS") {
        Ok(v) => match v.parse::<usize>() {
            Ok(w) if w >= 1 => Ok(Some(w)),
            _ => Err(ConfigError::single(
                "QFB_WORKERS",
                format!("not a positive integer: \"{v}\""),
            )
            .into()),
        },
        Err(_) => Ok(None),
    }
}

fn real_main(args: &Args) -> Result<(), CliError> {
    let config = assemble(args)?;
    if let Some(w) = workers(args)? {
        if w == 0 {
            return Err(
                ConfigError::single("--workers", "must be at least 1").into(),
            );
        }
        // Errors only if a global pool already exists, which cannot happen
        // this early in main.
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .expect("global thread pool set twice");
    }
    cli::run(&config)?;
    Ok(())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            // --help / --version land here with a zero exit code.
            let code = if e.exit_code() == 0 { 0 } else { 1 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match real_main(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
