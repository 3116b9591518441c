use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use spde_mcn::harness::{
    self, emit_csv, emit_report, validate_statistics, ErrorNorm, StudyConfig, ValidationConfig,
};
use spde_mcn::heat::{ExactMode, HeatScheme};
use spde_mcn::{Error, Result};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "spde-mcn", version, about = "Strong convergence studies for stochastic heat and wave equations")]
struct Cli {
    /// Key-value (TOML) file with defaults for any flag; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Heat equation study against the closed-form solution.
    Heat(HeatArgs),
    /// Wave equation study against a fine-step reference solution.
    Wave(WaveArgs),
    /// Monte Carlo checks of the quadrature moment identities.
    Validate(ValidateArgs),
}

#[derive(Args, Debug, Default)]
struct StudyArgs {
    /// Comma-separated step counts (powers of two).
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    /// Interior spatial nodes.
    #[arg(long)]
    k: Option<usize>,
    /// Monte Carlo realizations.
    #[arg(long)]
    mc: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Master grid steps of each Wiener path (power of two).
    #[arg(long)]
    master_steps: Option<usize>,
    #[arg(long)]
    t_final: Option<f64>,
    /// Comma-separated subset of the N list used for the rate fit.
    #[arg(long, value_delimiter = ',')]
    fit_range: Option<Vec<usize>>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Full-size benchmark configuration.
    #[arg(long)]
    paper: bool,
    /// CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Text report path (default: stdout).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct HeatArgs {
    #[arg(long)]
    scheme: Option<HeatScheme>,
    #[arg(long)]
    exact_mode: Option<ExactMode>,
    /// l2 | h1_displacement
    #[arg(long)]
    norm: Option<ErrorNorm>,
    #[command(flatten)]
    study: StudyArgs,
}

#[derive(Args, Debug)]
struct WaveArgs {
    /// Reference step count.
    #[arg(long)]
    n_ref: Option<usize>,
    /// h1_displacement | l2_velocity | l2
    #[arg(long)]
    norm: Option<ErrorNorm>,
    #[command(flatten)]
    study: StudyArgs,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

/// Mirror of the command-line flags for the optional config file.
#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct FileConfig {
    scheme: Option<String>,
    exact_mode: Option<String>,
    norm: Option<String>,
    n_ref: Option<usize>,
    n_list: Option<Vec<usize>>,
    k: Option<usize>,
    mc: Option<usize>,
    seed: Option<u64>,
    master_steps: Option<usize>,
    t_final: Option<f64>,
    fit_range: Option<Vec<usize>>,
    workers: Option<usize>,
    paper: Option<bool>,
    out: Option<PathBuf>,
    report: Option<PathBuf>,
    samples: Option<usize>,
}

fn load_file(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn parse_opt<T: std::str::FromStr<Err = Error>>(v: &Option<String>) -> Result<Option<T>> {
    v.as_deref().map(str::parse).transpose()
}

struct Outputs {
    out: Option<PathBuf>,
    report: Option<PathBuf>,
}

fn apply_study(config: &mut StudyConfig, file: &FileConfig, args: &StudyArgs) -> Outputs {
    if args.paper || file.paper.unwrap_or(false) {
        config.apply_full_size_preset();
    }
    macro_rules! merge {
        ($field:ident, $file:ident, $arg:ident) => {
            if let Some(v) = args.$arg.clone().or_else(|| file.$file.clone()) {
                config.$field = v;
            }
        };
    }
    merge!(n_list, n_list, n_list);
    merge!(k, k, k);
    merge!(mc_count, mc, mc);
    merge!(base_seed, seed, seed);
    merge!(master_steps, master_steps, master_steps);
    merge!(t_final, t_final, t_final);
    if let Some(v) = args.fit_range.clone().or_else(|| file.fit_range.clone()) {
        config.fit_range = Some(v);
    }
    if let Some(v) = args.workers.or(file.workers) {
        config.workers = Some(v);
    }
    Outputs {
        out: args.out.clone().or_else(|| file.out.clone()),
        report: args.report.clone().or_else(|| file.report.clone()),
    }
}

fn run_and_emit(config: &StudyConfig, outputs: Outputs) -> Result<()> {
    let table = harness::run_study(config)?;
    if let Some(out) = &outputs.out {
        emit_csv(&table, out)?;
    }
    match &outputs.report {
        Some(path) => emit_report(&table, config, path)?,
        None => print!("{}", harness::table::format_report(&table, config)),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let file = load_file(cli.config.as_deref())?;
    match cli.command {
        Command::Heat(args) => {
            let mut config = StudyConfig::heat_default();
            let outputs = apply_study(&mut config, &file, &args.study);
            if let Some(s) = args.scheme.or(parse_opt(&file.scheme)?) {
                config.scheme = s;
            }
            if let Some(m) = args.exact_mode.or(parse_opt(&file.exact_mode)?) {
                config.exact_mode = m;
            }
            if let Some(n) = args.norm.or(parse_opt(&file.norm)?) {
                config.error_norm = n;
            }
            run_and_emit(&config, outputs)?;
            Ok(true)
        }
        Command::Wave(args) => {
            let mut config = StudyConfig::wave_default();
            let outputs = apply_study(&mut config, &file, &args.study);
            if let Some(n) = args.n_ref.or(file.n_ref) {
                config.n_ref = n;
            }
            if let Some(n) = args.norm.or(parse_opt(&file.norm)?) {
                config.error_norm = n;
            }
            run_and_emit(&config, outputs)?;
            Ok(true)
        }
        Command::Validate(args) => {
            let mut config = ValidationConfig::default();
            if let Some(s) = args.samples.or(file.samples) {
                config.samples = s;
            }
            if let Some(s) = args.seed.or(file.seed) {
                config.seed = s;
            }
            let report = validate_statistics(&config)?;
            print!("{report}");
            Ok(report.all_passed())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
