//! `thicket`: run one experiment and write its table and manifest.

mod commands;
mod config;
mod error;
mod flags;
mod params;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use commands::Artifact;
use config::{CommandName, ExperimentConfig};
use error::{invalid, CliError};
use flags::Flags;

pub const THREADS_VAR: &str = "THICKET_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Parser)]
#[command(name = "thicket", version, about = "Thick sets, fractional heat flows and their observability constants")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment config (JSON); flags given alongside override its parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Output file; standard output when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(clap::Args)]
struct Invocation {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run whatever command the config names.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Build a fat Cantor set exactly.
    SvcBuild(Invocation),
    /// Exact thickness profile of `R \ K`.
    Thickness(Invocation),
    /// Fit `theta(L) ≈ c exp(-C L^-alpha)` to a thickness profile.
    FitAlpha(Invocation),
    /// Two-sided tail bounds on the thickness of an SVC complement.
    SvcVerify(Invocation),
    /// Spectral-inequality constants `d(λ)` and their growth.
    Spectral(Invocation),
    /// Observability constants over a range of times.
    Observability(Invocation),
    /// Interior asymptotics and exterior decay of the coherent-state probe.
    ProbeAsymptotics(Invocation),
    /// Observability ratio of the probe as `h` decreases.
    Necessity(Invocation),
}

fn build_config(command: Option<CommandName>, common: &Common, flags: Option<&Flags>) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::new(command.ok_or_else(|| invalid("run needs --config"))?),
    };
    if let Some(cmd) = command {
        if cfg.command != cmd {
            return Err(invalid(format!("/command: config is for {}, not {cmd}", cfg.command)));
        }
    }
    if let Some(flags) = flags {
        flags.apply(cfg.command, &mut cfg.parameters)?;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.output {
        cfg.output_path = Some(out.clone());
    }
    Ok(cfg)
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(text) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = text
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| invalid(format!("{THREADS_VAR} = {text:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| invalid(format!("cannot size the thread pool: {e}")))
}

#[derive(Serialize)]
struct Manifest<'a> {
    producer: String,
    version: &'static str,
    config_hash: &'a str,
    config: &'a ExperimentConfig,
    columns: &'a [&'static str],
    result: &'a Value,
}

fn producer(cfg: &ExperimentConfig, hash: &str) -> String {
    format!("thicket {} config={hash}", cfg.command)
}

fn csv_text(art: &Artifact, hash: &str) -> String {
    let mut out = format!("# {}\n{}\n", producer(&art.config, hash), art.columns.join(","));
    for row in &art.rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn manifest_text(art: &Artifact, hash: &str) -> String {
    let m = Manifest {
        producer: producer(&art.config, hash),
        version: env!("CARGO_PKG_VERSION"),
        config_hash: hash,
        config: &art.config,
        columns: &art.columns,
        result: &art.result,
    };
    let mut text = serde_json::to_string_pretty(&m).expect("manifest serializes");
    text.push('\n');
    text
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| invalid(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| invalid(format!("cannot write {}: {e}", path.display())))
}

fn manifest_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    path.with_file_name(name)
}

fn emit(art: &Artifact, format: Format) -> Result<(), CliError> {
    let hash = art.config.content_hash();
    let text = match format {
        Format::Csv => csv_text(art, &hash),
        Format::Json => manifest_text(art, &hash),
    };
    match &art.config.output_path {
        Some(path) => {
            write_file(path, &text)?;
            if format == Format::Csv {
                write_file(&manifest_path(path), &manifest_text(art, &hash))?;
            }
            Ok(())
        }
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| invalid(format!("cannot write to stdout: {e}"))),
    }
}

fn main_inner(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let (cfg, format) = match &cli.command {
        Cmd::Run { common } => (build_config(None, common, None)?, common.format),
        Cmd::SvcBuild(i) => invocation(CommandName::SvcBuild, i)?,
        Cmd::Thickness(i) => invocation(CommandName::Thickness, i)?,
        Cmd::FitAlpha(i) => invocation(CommandName::FitAlpha, i)?,
        Cmd::SvcVerify(i) => invocation(CommandName::SvcVerify, i)?,
        Cmd::Spectral(i) => invocation(CommandName::Spectral, i)?,
        Cmd::Observability(i) => invocation(CommandName::Observability, i)?,
        Cmd::ProbeAsymptotics(i) => invocation(CommandName::ProbeAsymptotics, i)?,
        Cmd::Necessity(i) => invocation(CommandName::Necessity, i)?,
    };
    let art = commands::run(&cfg)?;
    emit(&art, format)
}

fn invocation(cmd: CommandName, i: &Invocation) -> Result<(ExperimentConfig, Format), CliError> {
    Ok((build_config(Some(cmd), &i.common, Some(&i.flags))?, i.common.format))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = match e {
                CliError::Validation(_) => "invalid input",
                CliError::Numerical(_) => "numerical failure",
            };
            eprintln!("thicket: {kind}: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
