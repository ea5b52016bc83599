use clap::{Parser, Subcommand};
use phototaxis::cli::{self, OutputFormat, RunConfig, Sink};
use phototaxis::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "phototaxis", version, about = "Onset of phototactic bioconvection in a scattering suspension")]
struct Args {
    /// TOML run configuration; defaults are used for missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the configuration).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    /// Worker threads for wavenumber sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Equilibrium concentration and light profiles.
    BasicState,
    /// Light profiles in a uniform suspension.
    UniformIntensity,
    /// Neutral curve over the configured wavenumber sweep.
    NeutralCurve,
    /// Critical wavenumber, Rayleigh number and mode.
    Critical,
    /// Recompute one of the embedded reference tables (2, 3 or 4).
    ReproduceTable { table: u8 },
    /// Vertical-velocity field of the neutral eigenmode.
    ModeField,
    /// Neutral curves of the scattering and up-swimming models.
    CompareUpswim,
}

fn run(args: Args) -> Result<usize, Error> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(out) = args.out {
        cfg.output.directory = out;
    }
    if let Some(f) = args.format {
        cfg.output.format = f;
    }
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let mut sink = Sink::new(&cfg.output.directory, cfg.output.format)?;
    let failures = match args.command {
        Command::BasicState => cli::cmd_basic_state(&cfg, &mut sink).map(|_| 0)?,
        Command::UniformIntensity => cli::cmd_uniform_intensity(&cfg, &mut sink).map(|_| 0)?,
        Command::NeutralCurve => cli::cmd_neutral_curve(&cfg, &mut sink).map(|_| 0)?,
        Command::Critical => cli::cmd_critical(&cfg, &mut sink).map(|_| 0)?,
        Command::ReproduceTable { table } => cli::cmd_reproduce_table(&cfg, table, &mut sink)?,
        Command::ModeField => cli::cmd_mode_field(&cfg, &mut sink).map(|_| 0)?,
        Command::CompareUpswim => cli::cmd_compare_upswim(&cfg, &mut sink).map(|_| 0)?,
    };
    for p in &sink.written {
        println!("{}", p.display());
    }
    Ok(failures)
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            eprintln!("{n} row(s) failed");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::InvalidParameter { .. } => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}
