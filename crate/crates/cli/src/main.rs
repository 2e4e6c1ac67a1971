//! `cqs`: Floquet spectra, densities of quasienergy states and the
//! magnetization protocol from the command line.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cqs_cli::{commands, AppError, ConfigError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "cqs", version, about = "Critical quasienergy states of driven collective spins")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact eigenphases, unfolded quasienergies and their pairing.
    Spectrum(Common),
    /// Exact, trace-sum and semiclassical densities of quasienergy states.
    Doqs(Common),
    /// Mode magnetization, cusp report and the coherent-state protocol.
    Protocol(Common),
    /// Landscape raster and critical-point inventory.
    Landscape(Common),
    /// Print the resolved configuration.
    Config(Common),
}

#[derive(Args)]
struct Common {
    /// Parameter preset: fig2a, fig2b, fig3a or fig3b.
    #[arg(long)]
    params: Option<String>,
    /// Configuration file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any key, e.g. `--set cells=2048`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    j: Option<String>,
    #[arg(long)]
    ht: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    gt: Option<String>,
    #[arg(long)]
    omega_t: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    periods: Option<String>,
    #[arg(long)]
    out: Option<String>,
}

fn resolve(c: &Common) -> Result<ExperimentConfig, AppError> {
    let mut cfg = match &c.params {
        Some(name) => ExperimentConfig::from_preset(name)?,
        None => ExperimentConfig::default(),
    };
    if let Some(path) = &c.config {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
    }
    for kv in &c.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| ConfigError(format!("expected KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    let flags = [
        ("model", &c.model),
        ("j", &c.j),
        ("ht", &c.ht),
        ("k", &c.k),
        ("gt", &c.gt),
        ("omega_t", &c.omega_t),
        ("steps", &c.steps),
        ("periods", &c.periods),
        ("out", &c.out),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.set(k, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Spectrum(c) => commands::spectrum(&resolve(&c)?),
        Command::Doqs(c) => commands::doqs(&resolve(&c)?),
        Command::Protocol(c) => commands::protocol(&resolve(&c)?),
        Command::Landscape(c) => commands::landscape(&resolve(&c)?),
        Command::Config(c) => {
            print!("{}", resolve(&c)?.to_text());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cqs: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
