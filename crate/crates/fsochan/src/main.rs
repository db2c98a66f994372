use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fsochan::scenario::{self, default_cache_dir, parse_quantity, Dim, RunError, RunOptions, Scenario, StatsCache, Table};

#[derive(Parser)]
#[command(name = "fsochan", version, about = "Transmittance statistics and key rates for turbulent free-space links")]
struct Cli {
    /// Overrides `scenario.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Total QMC points (`2^20` form accepted); overrides `budget.points`.
    #[arg(long, global = true, value_parser = parse_budget)]
    budget: Option<u64>,
    /// Stats cache location [default: $FSOCHAN_CACHE_DIR or the user cache dir].
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    no_cache: bool,
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Every table listed in `scenario.outputs`.
    Run { scenario: PathBuf },
    /// Beam statistics with their standard errors.
    Stats { scenario: PathBuf },
    /// Density over the η grid for each tracking fraction.
    Pdt { scenario: PathBuf },
    /// Exceedance over the η grid for each tracking fraction.
    Exceedance { scenario: PathBuf },
    /// Postselected squeezing for each threshold and tracking fraction.
    Squeezing { scenario: PathBuf },
    /// Averaged decoy-state key rates.
    Qkd {
        scenario: PathBuf,
        /// Use saved PDT files instead of recomputing the channel.
        #[arg(long = "pdt")]
        pdt: Vec<PathBuf>,
    },
    /// The scenario's outputs over `sweep.lengths`.
    Sweep { scenario: PathBuf },
}

fn parse_budget(s: &str) -> Result<u64, String> {
    let v = parse_quantity(s, Dim::None)?;
    if v < 1.0 || v.fract() != 0.0 {
        return Err(format!("`{s}` is not a positive integer"));
    }
    Ok(v as u64)
}

fn execute(cli: Cli) -> Result<(), RunError> {
    let (path, tables, pdt_files, need_sweep) = match cli.command {
        Command::Run { scenario } => (scenario, None, Vec::new(), false),
        Command::Stats { scenario } => (scenario, Some(vec![Table::Stats]), Vec::new(), false),
        Command::Pdt { scenario } => (scenario, Some(vec![Table::Pdt]), Vec::new(), false),
        Command::Exceedance { scenario } => (scenario, Some(vec![Table::Exceedance]), Vec::new(), false),
        Command::Squeezing { scenario } => (scenario, Some(vec![Table::Squeezing]), Vec::new(), false),
        Command::Qkd { scenario, pdt } => (scenario, Some(vec![Table::Qkd]), pdt, false),
        Command::Sweep { scenario } => (scenario, None, Vec::new(), true),
    };
    let (s, text) = Scenario::from_file(&path)?;
    if need_sweep && s.lengths.is_empty() {
        return Err(scenario::ConfigError::new(0, "sweep.lengths", "the sweep command needs a length list").into());
    }
    let seed = cli.seed.unwrap_or(s.seed);
    if !pdt_files.is_empty() {
        std::fs::create_dir_all(&cli.out_dir).map_err(|e| RunError::io(&cli.out_dir, e))?;
        let out = cli.out_dir.join(format!("{}_qkd.csv", s.id));
        scenario::qkd_from_pdt_files(&s, &pdt_files, seed, &out)?;
        println!("{}", out.display());
        return Ok(());
    }
    let cache = if cli.no_cache {
        None
    } else {
        Some(StatsCache::new(cli.cache_dir.unwrap_or_else(default_cache_dir)))
    };
    let opts = RunOptions {
        out_dir: cli.out_dir,
        cache,
        seed: cli.seed,
        budget_points: cli.budget,
        tables,
    };
    let report = scenario::run(&s, &text, &opts)?;
    for p in report.tables.values().chain(&report.pdt_files).chain([&report.manifest]) {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
