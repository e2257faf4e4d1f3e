use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use salsa_core::checks::standard_suite;
use salsa_core::harness::{
    emit_plot_data, run_sweep, run_to_dir, set_path, GridAxis, PlotKind, RunConfig, SweepOptions,
};
use salsa_core::Error;

/// `println!` that ignores a closed stdout.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

#[derive(Parser)]
#[command(name = "salsa-opt", version, about = "Seeded stochastic-optimization experiments with statistical step-size control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// `key.path=value`, applied in order; values parse as JSON or fall back to strings.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory; defaults to `out_dir` from the config, then `runs/<config name>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one run and write its artifacts.
    Run(ConfigArgs),
    /// Execute a grid of runs, one directory per point, plus sweep.csv.
    Sweep {
        #[command(flatten)]
        base: ConfigArgs,
        /// `key.path=v1,v2,...`; repeat for a cartesian product.
        #[arg(long, value_name = "KEY=V1,V2")]
        grid: Vec<String>,
        /// Give every point the base seed instead of base + index.
        #[arg(long)]
        shared_seed: bool,
    },
    /// Write tidy `iteration,series,value` CSVs from a run directory.
    PlotData {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        which: Which,
    },
    /// Execute the stationarity and identity checks.
    Check {
        #[arg(long, default_value_t = 200_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    LrTrace,
    DeltaCi,
    VarianceComparison,
    Loss,
    All,
}

impl Which {
    fn kinds(self) -> Vec<PlotKind> {
        match self {
            Which::LrTrace => vec![PlotKind::LrTrace],
            Which::DeltaCi => vec![PlotKind::DeltaCi],
            Which::VarianceComparison => vec![PlotKind::VarianceComparison],
            Which::Loss => vec![PlotKind::Loss],
            Which::All => PlotKind::ALL.to_vec(),
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(e: impl ToString) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: e.to_string(),
        }
    }

    fn runtime(e: impl ToString) -> Self {
        Self {
            code: EXIT_RUNTIME,
            message: e.to_string(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config_error() {
            Self::config(e)
        } else {
            Self::runtime(e)
        }
    }
}

fn base_value(args: &ConfigArgs) -> Result<serde_json::Value, Failure> {
    let mut v = RunConfig::load_value(&args.config, &args.overrides).map_err(Failure::config)?;
    if let Some(seed) = args.seed {
        set_path(&mut v, "seed", seed.into()).map_err(Failure::config)?;
    }
    Ok(v)
}

fn out_dir(args: &ConfigArgs, cfg_out: Option<&Path>) -> PathBuf {
    args.out
        .clone()
        .or_else(|| cfg_out.map(Path::to_path_buf))
        .unwrap_or_else(|| {
            let stem = args.config.file_stem().map(|s| s.to_string_lossy().into_owned());
            Path::new("runs").join(stem.unwrap_or_else(|| "run".into()))
        })
}

fn cmd_run(args: &ConfigArgs) -> Result<(), Failure> {
    let cfg = RunConfig::resolve(base_value(args)?)?;
    let dir = out_dir(args, cfg.out_dir.as_deref());
    let outcome = run_to_dir(&cfg, &dir)?;
    let s = &outcome.summary;
    say!(
        "{}: {} iterations, final loss {:.6e}, final alpha {:.3e}, drops {}, switch {}",
        s.scheduler,
        s.iterations,
        s.final_loss,
        s.final_alpha,
        s.drops,
        s.switch_iteration.map_or("none".into(), |k| k.to_string())
    );
    say!("artifacts in {}", dir.display());
    if let Some(e) = &s.replay_error {
        return Err(Failure::runtime(format!("replay validation failed: {e}")));
    }
    Ok(())
}

fn cmd_sweep(args: &ConfigArgs, grid: &[String], shared_seed: bool) -> Result<(), Failure> {
    let base = base_value(args)?;
    let axes = grid
        .iter()
        .map(|g| GridAxis::parse(g))
        .collect::<Result<Vec<_>, _>>()
        .map_err(Failure::config)?;
    let base_seed = match base.get("seed") {
        None => 0,
        Some(v) => v
            .as_u64()
            .ok_or_else(|| Failure::config("seed: expected a non-negative integer"))?,
    };
    let cfg_out = base.get("out_dir").and_then(|v| v.as_str()).map(PathBuf::from);
    let dir = out_dir(args, cfg_out.as_deref());
    let opts = SweepOptions {
        base_seed,
        shared_seed,
        threads: None,
    };
    let report = run_sweep(&base, &axes, &dir, &opts)?;
    for p in &report.points {
        match &p.outcome {
            Ok(s) => say!(
                "point {:03} seed {}: final loss {:.6e}, drops {}",
                p.index, p.seed, s.final_loss, s.drops
            ),
            Err(e) => eprintln!("point {:03} seed {} failed: {e}", p.index, p.seed),
        }
    }
    say!("sweep.csv in {}", dir.display());
    let failed = report.failures();
    let replay_failed = report
        .points
        .iter()
        .filter(|p| p.outcome.as_ref().is_ok_and(|s| !s.replay_ok))
        .count();
    if failed + replay_failed > 0 {
        return Err(Failure::runtime(format!(
            "{failed} of {} points failed, {replay_failed} failed replay validation",
            report.points.len()
        )));
    }
    Ok(())
}

fn cmd_plot(run: &Path, which: Which) -> Result<(), Failure> {
    for kind in which.kinds() {
        let path = emit_plot_data(run, kind).map_err(Failure::runtime)?;
        say!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_check(samples: usize, seed: u64) -> Result<(), Failure> {
    let outcomes = standard_suite(samples, seed)?;
    let mut failed = 0;
    for o in &outcomes {
        say!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
        failed += usize::from(!o.passed);
    }
    if failed > 0 {
        return Err(Failure::runtime(format!("{failed} of {} checks failed", outcomes.len())));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep {
            base,
            grid,
            shared_seed,
        } => cmd_sweep(base, grid, *shared_seed),
        Command::PlotData { run, which } => cmd_plot(run, *which),
        Command::Check { samples, seed } => cmd_check(*samples, *seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
