use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lob_convexity::lob_model::{CurveConfig, SessionLayout};
use lob_convexity::pipeline::{run_pipeline, RunConfig, Stages};
use lob_convexity::regression::{DynamicsConfig, MIN_KAPPA_PAIRS};
use lob_convexity::synthetic::{generate, ConvexityProcess, ScaleProcess, SynthConfig};
use lob_convexity::timeseries::AcfConfig;

#[derive(Parser)]
#[command(
    name = "lobcvx",
    version,
    about = "Limit order book convexity analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic panel with ground truth.
    Synth(SynthArgs),
    /// Fit the convexity panel and its summary.
    Estimate(RunArgs),
    /// Autocorrelation, long-memory fit and kappa AR(1).
    Acf(RunArgs),
    /// Intraday profile of normalized convexity.
    Intraday(RunArgs),
    /// Dynamic-adjustment regressions.
    Dynamics(RunArgs),
    /// Price-discovery regressions (needs --trades).
    Discovery(RunArgs),
    /// Every stage.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    snapshots: PathBuf,
    #[arg(long)]
    trades: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 300.0)]
    interval_sec: f64,
    #[arg(long, default_value_t = 10.0)]
    spacing_sec: f64,
    #[arg(long, default_value_t = 20)]
    min_snapshots: usize,
    #[arg(long, default_value_t = 50)]
    min_points: usize,
    #[arg(long, default_value_t = 40)]
    acf_max_lag: usize,
    #[arg(long, default_value_t = 5)]
    acf_min_pairs: usize,
    /// Autocorrelate log c instead of c.
    #[arg(long)]
    acf_on_log: bool,
    /// Use lagged return and realized variance in the dynamics equation.
    #[arg(long)]
    lag_exogenous: bool,
    /// Keep negative-exponent windows in downstream series.
    #[arg(long)]
    include_degenerate: bool,
    #[arg(long)]
    min_days: Option<usize>,
    #[arg(long, default_value_t = MIN_KAPPA_PAIRS)]
    min_kappa_pairs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl RunArgs {
    fn config(self) -> RunConfig {
        let defaults = SessionLayout::default();
        RunConfig {
            snapshots: self.snapshots,
            trades: self.trades,
            out_dir: self.out,
            layout: SessionLayout {
                interval_sec: self.interval_sec,
                spacing_sec: self.spacing_sec,
                ..defaults
            },
            curve: CurveConfig {
                min_snapshots: self.min_snapshots,
                min_points: self.min_points,
            },
            acf: AcfConfig {
                max_lag: self.acf_max_lag,
                min_pairs: self.acf_min_pairs,
            },
            acf_on_log: self.acf_on_log,
            dynamics: DynamicsConfig {
                lag_exogenous: self.lag_exogenous,
            },
            include_degenerate: self.include_degenerate,
            min_days: self.min_days,
            min_kappa_pairs: self.min_kappa_pairs,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProcessKind {
    Constant,
    Ar1,
    Drift,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    stocks: usize,
    #[arg(long, default_value_t = 5)]
    days: usize,
    #[arg(long, value_enum, default_value_t = ProcessKind::Constant)]
    process: ProcessKind,
    /// Exponent for `constant`; start of `drift`.
    #[arg(long, default_value_t = 0.7)]
    c: f64,
    /// End of `drift`.
    #[arg(long, default_value_t = 1.0)]
    c_end: f64,
    /// Mean of log c for `ar1`.
    #[arg(long, default_value_t = -0.36)]
    mean_log_c: f64,
    #[arg(long, default_value_t = 0.5)]
    phi: f64,
    #[arg(long, default_value_t = 0.2)]
    innovation_std: f64,
    /// Fixed bid scale W; otherwise the bid level-1 deviation is fixed.
    #[arg(long)]
    bid_scale: Option<f64>,
    #[arg(long, default_value_t = 1e-3)]
    level_one_deviation: f64,
    #[arg(long, default_value_t = 20.0)]
    initial_mid: f64,
    #[arg(long, default_value_t = 2e-4)]
    sigma: f64,
    #[arg(long, default_value_t = 20_000.0)]
    total_depth: f64,
    #[arg(long, default_value_t = 0.0)]
    noise_std: f64,
    #[arg(long, default_value_t = 50.0)]
    trade_intensity: f64,
    #[arg(long, default_value_t = 300.0)]
    mean_trade_volume: f64,
    #[arg(long, default_value_t = 0.01)]
    tick: f64,
    /// Write un-rounded prices.
    #[arg(long)]
    exact: bool,
}

impl SynthArgs {
    fn config(&self) -> SynthConfig {
        let process = match self.process {
            ProcessKind::Constant => ConvexityProcess::Constant { c: self.c },
            ProcessKind::Ar1 => ConvexityProcess::Ar1 {
                mean_log_c: self.mean_log_c,
                phi: self.phi,
                innovation_std: self.innovation_std,
            },
            ProcessKind::Drift => ConvexityProcess::LinearDrift {
                start: self.c,
                end: self.c_end,
            },
        };
        SynthConfig {
            seed: self.seed,
            n_stocks: self.stocks,
            n_days: self.days,
            bid_process: process,
            ask_process: process,
            scale: match self.bid_scale {
                Some(w) => ScaleProcess::FixedBid { w },
                None => ScaleProcess::LevelOne {
                    deviation: self.level_one_deviation,
                },
            },
            initial_mid: self.initial_mid,
            mid_volatility: self.sigma,
            total_depth: self.total_depth,
            noise_std: self.noise_std,
            trade_intensity: self.trade_intensity,
            mean_trade_volume: self.mean_trade_volume,
            tick: (!self.exact).then_some(self.tick),
            ..SynthConfig::default()
        }
    }
}

fn run(command: Command) -> Result<(), String> {
    let (args, stages) = match command {
        Command::Synth(args) => {
            let market = generate(&args.config()).map_err(|e| e.to_string())?;
            market
                .write_dir(&args.out)
                .map_err(|e| format!("write: {e}"))?;
            println!(
                "wrote {} snapshots, {} trades to {}",
                market.snapshots.len(),
                market.trades.len(),
                args.out.display()
            );
            return Ok(());
        }
        Command::Estimate(a) => (
            a,
            Stages {
                estimate: true,
                ..Stages::NONE
            },
        ),
        Command::Acf(a) => (
            a,
            Stages {
                acf: true,
                ..Stages::NONE
            },
        ),
        Command::Intraday(a) => (
            a,
            Stages {
                intraday: true,
                ..Stages::NONE
            },
        ),
        Command::Dynamics(a) => (
            a,
            Stages {
                dynamics: true,
                ..Stages::NONE
            },
        ),
        Command::Discovery(a) => {
            if a.trades.is_none() {
                return Err("discovery requires --trades".into());
            }
            (
                a,
                Stages {
                    discovery: true,
                    ..Stages::NONE
                },
            )
        }
        Command::Run(a) => (a, Stages::ALL),
    };
    let report = run_pipeline(&args.config(), stages).map_err(|e| e.to_string())?;
    for file in &report.files {
        println!("{}", file.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
