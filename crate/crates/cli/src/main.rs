use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use diabolo_cli::{load_with, presets, run, CliError, Format, Mode, Overrides};

#[derive(Parser)]
#[command(name = "diabolo", version, about = "Spin-chain diabolic points and switching lifetimes")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,

    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Bundled parameter set to start from.
    #[arg(long, global = true)]
    preset: Option<String>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Telegraph RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,

    /// Override any config key, e.g. `--set transport.bias_mv=5`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Verb {
    /// Lowest levels at one field or along the sweep.
    Spectrum,
    /// Locate diabolic points along the transverse field.
    DpScan,
    /// DP positions over chain length and coupling.
    Atlas,
    /// Switching lifetimes along the sweep, one file per probed atom.
    LifetimeCurve,
    /// Simulate a telegraph trace and analyse it.
    Telegraph,
    /// Detect switches and fit lifetimes in a recorded trace.
    AnalyzeTrace,
    /// Split lifetime-versus-current data into tip and bath contributions.
    FitCurrent,
    /// Print the bundled preset names.
    Presets,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

fn mode_of(v: Verb) -> Option<Mode> {
    Some(match v {
        Verb::Spectrum => Mode::Spectrum,
        Verb::DpScan => Mode::DpScan,
        Verb::Atlas => Mode::Atlas,
        Verb::LifetimeCurve => Mode::LifetimeCurve,
        Verb::Telegraph => Mode::Telegraph,
        Verb::AnalyzeTrace => Mode::AnalyzeTrace,
        Verb::FitCurrent => Mode::FitCurrent,
        Verb::Presets => return None,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let Some(mode) = mode_of(cli.verb) else {
        for name in presets::names() {
            println!("{name}");
        }
        return ExitCode::SUCCESS;
    };
    match execute(&cli, mode) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cli: &Cli, mode: Mode) -> Result<Vec<PathBuf>, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("--threads: {e}")))?;
    }
    let ov = Overrides {
        preset: cli.preset.clone(),
        out: cli.out.clone(),
        seed: cli.seed,
        format: cli.format.map(|f| match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }),
        set: cli.set.clone(),
    };
    let cfg = load_with(cli.config.as_deref(), Some(mode), &ov)?;
    run(&cfg)
}
