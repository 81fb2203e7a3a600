use std::path::PathBuf;
use std::process::ExitCode;

use chaotic_tc::config::{OutputFormat, RunConfig, UnitMode};
use chaotic_tc::output::{cmd_dynamics, cmd_regimes, cmd_selftest, cmd_spectrum, CommandReport};
use chaotic_tc::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "chaotic-tc", version, about = "Disordered Tavis-Cummings thermalization simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Level-spacing histograms and normalized initial-state energies.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Replace spectra with an equally spaced ladder.
        #[arg(long)]
        picket_fence: bool,
    },
    /// IPR, trace distance, cavity population and autocorrelation.
    Dynamics {
        #[command(flatten)]
        common: Common,
    },
    /// Representative trace distance and regime labels per coupling.
    Regimes {
        #[command(flatten)]
        common: Common,
    },
    /// Built-in analytic checks.
    Selftest {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Units {
    Dimensionless,
    #[value(name = "mev-ps")]
    MevPs,
}

/// Flags override keys of the config file.
#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long, value_enum)]
    units: Option<Units>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    sites: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    omega0: Option<f64>,
    /// Comma-separated coupling ratios g/sigma.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    g_over_sigma: Option<Vec<f64>>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    subsystem_size: Option<usize>,
    #[arg(long)]
    panel_count: Option<usize>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    log_level: Option<String>,
}

impl Common {
    fn load(self) -> Result<RunConfig, Error> {
        let mut c = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = self.$field { c.$field = v; } )* };
        }
        set!(workers, sites, sigma, omega0, g_over_sigma, realizations, subsystem_size, panel_count, steps, log_level);
        if let Some(v) = self.seed {
            c.master_seed = v;
        }
        if self.output_dir.is_some() {
            c.output_dir = self.output_dir;
        }
        if self.t_max.is_some() {
            c.t_max = self.t_max;
        }
        if self.cache_dir.is_some() {
            c.cache_dir = self.cache_dir;
        }
        if let Some(f) = self.format {
            c.output_format = match f {
                Format::Csv => OutputFormat::Csv,
                Format::Json => OutputFormat::Json,
            };
        }
        if let Some(u) = self.units {
            c.unit_mode = match u {
                Units::Dimensionless => UnitMode::Dimensionless,
                Units::MevPs => UnitMode::MevPs,
            };
        }
        c.validate()?;
        Ok(c)
    }
}

fn init_logging(level: &str) {
    let _ = env_logger::Builder::new().parse_filters(level).parse_default_env().try_init();
}

fn print_report(report: &CommandReport) {
    println!("{}: wrote {} files to {}", report.command, report.files.len(), report.output_dir.display());
    for f in &report.failures {
        eprintln!("failed: {f}");
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    let report = match cli.command {
        Command::Spectrum { common, picket_fence } => {
            let mut config = common.load()?;
            config.picket_fence |= picket_fence;
            init_logging(&config.log_level);
            cmd_spectrum(&config)?
        }
        Command::Dynamics { common } => {
            let config = common.load()?;
            init_logging(&config.log_level);
            cmd_dynamics(&config)?
        }
        Command::Regimes { common } => {
            let config = common.load()?;
            init_logging(&config.log_level);
            cmd_regimes(&config)?
        }
        Command::Selftest { common } => {
            let config = common.load()?;
            init_logging(&config.log_level);
            let (report, checks) = cmd_selftest(&config)?;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            report
        }
    };
    print_report(&report);
    // Partial outputs stay on disk; the exit code flags the failure.
    Ok(if report.incomplete { ExitCode::from(3) } else { ExitCode::SUCCESS })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(3)
            } else if matches!(e, Error::Io(_)) {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
