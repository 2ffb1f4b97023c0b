//! End-to-end run: ingest, estimate, analyze, write.
//!
//! All outputs are built in memory first and written only when every
//! requested stage succeeded. If a write fails, files already written by the
//! run are removed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::convexity::{estimate_panel, summarize_log_convexity, ConvexityPanel};
use crate::ingest::{aggregate_flows, ingest_snapshots, ingest_trades, IngestReport, Trade};
use crate::lob_model::{assemble_windows, BookSnapshot, CurveConfig, SessionLayout, Side};
use crate::output;
use crate::regression::{
    ar1_kappa, dynamic_adjustment, price_discovery, DynamicsConfig, MIN_KAPPA_PAIRS,
};
use crate::timeseries::{
    assemble_records, exponent_series, fit_long_memory, intraday_profile, kappa_series, panel_acf,
    AcfConfig, DaySeries,
};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub snapshots: PathBuf,
    pub trades: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub layout: SessionLayout,
    pub curve: CurveConfig,
    pub acf: AcfConfig,
    /// Autocorrelate `log c` instead of `c`.
    pub acf_on_log: bool,
    pub dynamics: DynamicsConfig,
    /// Keep windows with a negative fitted exponent in the downstream series.
    pub include_degenerate: bool,
    /// Drop stocks with fewer accepted trading days than this.
    pub min_days: Option<usize>,
    pub min_kappa_pairs: usize,
    /// Recorded in the manifest; the pipeline itself draws no random numbers.
    pub seed: u64,
}

impl RunConfig {
    pub fn new(snapshots: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            snapshots: snapshots.into(),
            trades: None,
            out_dir: out_dir.into(),
            layout: SessionLayout::default(),
            curve: CurveConfig::default(),
            acf: AcfConfig::default(),
            acf_on_log: false,
            dynamics: DynamicsConfig::default(),
            include_degenerate: false,
            min_days: None,
            min_kappa_pairs: MIN_KAPPA_PAIRS,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let fail = |m: String| Err(PipelineError::new("config", m));
        if let Err(e) = self.layout.validate() {
            return fail(e.to_string());
        }
        if self.curve.min_snapshots == 0 || self.curve.min_points < 2 {
            return fail("min_snapshots must be positive and min_points at least 2".into());
        }
        if self.acf.max_lag == 0 || self.acf.min_pairs < 2 {
            return fail("ACF max lag must be positive and min pairs at least 2".into());
        }
        if self.min_kappa_pairs < 3 {
            return fail("min kappa pairs must be at least 3".into());
        }
        if self.min_days == Some(0) {
            return fail("min days must be positive".into());
        }
        Ok(())
    }

    /// Canonical description of everything that affects the results.
    /// Output location is excluded so runs into different directories agree.
    fn canonical(&self) -> String {
        let l = &self.layout;
        format!(
            "interval_sec={};spacing_sec={};session_sec={};session_opens={},{};min_snapshots={};min_points={};\
             acf_max_lag={};acf_min_pairs={};acf_on_log={};lag_exogenous={};include_degenerate={};\
             min_days={:?};min_kappa_pairs={};seed={}",
            l.interval_sec,
            l.spacing_sec,
            l.session_sec,
            l.session_opens[0],
            l.session_opens[1],
            self.curve.min_snapshots,
            self.curve.min_points,
            self.acf.max_lag,
            self.acf.min_pairs,
            self.acf_on_log,
            self.dynamics.lag_exogenous,
            self.include_degenerate,
            self.min_days,
            self.min_kappa_pairs,
            self.seed,
        )
    }
}

/// Which groups of outputs to produce. The convexity panel is always
/// estimated because every other stage depends on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stages {
    pub estimate: bool,
    pub acf: bool,
    pub intraday: bool,
    pub dynamics: bool,
    pub discovery: bool,
}

impl Stages {
    pub const ALL: Stages = Stages {
        estimate: true,
        acf: true,
        intraday: true,
        dynamics: true,
        discovery: true,
    };
    pub const NONE: Stages = Stages {
        estimate: false,
        acf: false,
        intraday: false,
        dynamics: false,
        discovery: false,
    };

    fn names(&self) -> String {
        [
            (self.estimate, "estimate"),
            (self.acf, "acf"),
            (self.intraday, "intraday"),
            (self.dynamics, "dynamics"),
            (self.discovery, "discovery"),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .map(|(_, n)| *n)
        .collect::<Vec<_>>()
        .join("+")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("stage {stage}: {message}")]
pub struct PipelineError {
    pub stage: &'static str,
    pub message: String,
}

impl PipelineError {
    fn new(stage: &'static str, message: impl Into<String>) -> Self {
        Self {
            stage,
            message: message.into(),
        }
    }
}

fn tag<E: std::fmt::Display>(stage: &'static str) -> impl Fn(E) -> PipelineError {
    move |e| PipelineError::new(stage, e.to_string())
}

/// Named output files in write order.
pub type Outputs = Vec<(String, Vec<u8>)>;

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub manifest: Vec<(String, String)>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

fn drop_short_stocks(
    snapshots: Vec<BookSnapshot<f64>>,
    min_days: Option<usize>,
) -> Vec<BookSnapshot<f64>> {
    let Some(min_days) = min_days else {
        return snapshots;
    };
    let mut days: BTreeMap<&str, BTreeSet<u32>> = BTreeMap::new();
    for s in &snapshots {
        days.entry(s.stock_id()).or_default().insert(s.day_id());
    }
    let keep: BTreeSet<String> = days
        .into_iter()
        .filter(|(_, d)| d.len() >= min_days)
        .map(|(s, _)| s.to_owned())
        .collect();
    snapshots
        .into_iter()
        .filter(|s| keep.contains(s.stock_id()))
        .collect()
}

/// Runs every requested stage on already-ingested data and returns the
/// output files, manifest included, without touching the filesystem.
pub fn analyze(
    snapshots: Vec<BookSnapshot<f64>>,
    report: &IngestReport,
    trades: Option<&[Trade]>,
    config: &RunConfig,
    stages: Stages,
    input_hashes: &[(String, String)],
) -> Result<Outputs, PipelineError> {
    config.validate()?;
    let ipd = config.layout.intervals_per_day();
    let snapshots = drop_short_stocks(snapshots, config.min_days);
    let n_used = snapshots.len();
    let windows = assemble_windows(snapshots, &config.layout);
    let panel: ConvexityPanel<f64> = estimate_panel(&windows, &config.curve);
    let flows = trades.map(|t| aggregate_flows(t, &windows, &config.layout));
    let records = assemble_records(&windows, &panel, flows.as_ref());

    let mut out: Outputs = Vec::new();
    let mut manifest: Vec<(String, String)> = vec![
        (
            "config_sha256".into(),
            sha256_hex(config.canonical().as_bytes()),
        ),
        ("config".into(), config.canonical()),
    ];
    manifest.extend(input_hashes.iter().cloned());
    manifest.extend([
        ("stages".into(), stages.names()),
        ("rows_total".into(), report.total_rows.to_string()),
        ("rows_accepted".into(), report.accepted.to_string()),
        ("rows_rejected".into(), report.rejections.len().to_string()),
        (
            "rows_accounted".into(),
            (report.accepted + report.rejections.len() == report.total_rows).to_string(),
        ),
        ("snapshots_used".into(), n_used.to_string()),
        ("windows".into(), windows.len().to_string()),
        (
            "estimates_bid".into(),
            panel.side(Side::Bid).count().to_string(),
        ),
        (
            "estimates_ask".into(),
            panel.side(Side::Ask).count().to_string(),
        ),
        ("gaps".into(), panel.gaps.len().to_string()),
        ("records".into(), records.len().to_string()),
    ]);
    out.push((
        "rejections.csv".into(),
        output::rejections_csv(report).map_err(tag("output"))?,
    ));

    if stages.estimate {
        let summary =
            summarize_log_convexity(&panel, config.include_degenerate).map_err(tag("summary"))?;
        out.push((
            "intervals.csv".into(),
            output::records_csv(&records).map_err(tag("output"))?,
        ));
        out.push((
            "convexity_panel.csv".into(),
            output::panel_csv(&panel).map_err(tag("output"))?,
        ));
        out.push((
            "gaps.csv".into(),
            output::gaps_csv(&panel.gaps).map_err(tag("output"))?,
        ));
        out.push((
            "summary_log_c.csv".into(),
            output::summary_csv(&summary).map_err(tag("output"))?,
        ));
    }

    let series: Vec<(Side, Vec<DaySeries<f64>>)> = Side::BOTH
        .iter()
        .map(|&side| {
            (
                side,
                exponent_series(&panel, side, ipd, config.include_degenerate),
            )
        })
        .collect();

    if stages.acf {
        let mut fits = Vec::new();
        for (side, c) in &series {
            let log_c: Vec<DaySeries<f64>> = c.iter().map(DaySeries::log).collect();
            let kappa = kappa_series(&log_c);
            let levels = if config.acf_on_log { &log_c } else { c };
            for (name, s) in [("c", levels), ("kappa", &kappa)] {
                let acf = panel_acf(s, &config.acf).map_err(tag("acf"))?;
                let label = format!("{name}_{}", side.as_str());
                out.push((
                    format!("acf_{label}.csv"),
                    output::acf_csv(&acf).map_err(tag("output"))?,
                ));
                fits.push((label, fit_long_memory(&acf).map_err(|e| e.to_string())));
            }
            let ar1 = ar1_kappa(&kappa, config.min_kappa_pairs);
            let name = format!("kappa_ar1_{}", side.as_str());
            out.push((
                format!("{name}.csv"),
                output::regression_summary_csv(&ar1).map_err(tag("output"))?,
            ));
            out.push((
                format!("{name}_by_stock.csv"),
                output::regression_detail_csv(&ar1).map_err(tag("output"))?,
            ));
        }
        out.push((
            "long_memory.csv".into(),
            output::long_memory_csv(&fits).map_err(tag("output"))?,
        ));
    }

    if stages.intraday {
        for (side, c) in &series {
            let profile = intraday_profile(c, ipd).map_err(tag("intraday"))?;
            out.push((
                format!("intraday_{}.csv", side.as_str()),
                output::profile_csv(&profile).map_err(tag("output"))?,
            ));
        }
    }

    if stages.dynamics {
        for side in Side::BOTH {
            let summary = dynamic_adjustment(&records, side, &config.dynamics);
            let name = format!("dynamics_{}", side.as_str());
            out.push((
                format!("{name}.csv"),
                output::regression_summary_csv(&summary).map_err(tag("output"))?,
            ));
            out.push((
                format!("{name}_by_stock.csv"),
                output::regression_detail_csv(&summary).map_err(tag("output"))?,
            ));
        }
    }

    if stages.discovery {
        if trades.is_some() {
            let summary = price_discovery(&records);
            out.push((
                "discovery.csv".into(),
                output::regression_summary_csv(&summary).map_err(tag("output"))?,
            ));
            out.push((
                "discovery_by_stock.csv".into(),
                output::regression_detail_csv(&summary).map_err(tag("output"))?,
            ));
            manifest.push(("discovery".into(), "estimated".into()));
        } else {
            manifest.push(("discovery".into(), "skipped (no trades)".into()));
        }
    }

    manifest.push((
        "outputs".into(),
        out.iter()
            .map(|(n, _)| n.as_str())
            .collect::<Vec<_>>()
            .join(";"),
    ));
    for (name, bytes) in &out {
        manifest.push((format!("sha256:{name}"), sha256_hex(bytes)));
    }
    out.push((
        "manifest.csv".into(),
        output::manifest_csv(&manifest).map_err(tag("output"))?,
    ));
    Ok(out)
}

fn write_all(dir: &Path, outputs: &Outputs) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, bytes) in outputs {
        let path = dir.join(name);
        if let Err(e) = fs::write(&path, bytes) {
            for p in written.iter().chain(std::iter::once(&path)) {
                let _ = fs::remove_file(p);
            }
            return Err(e);
        }
        written.push(path);
    }
    Ok(written)
}

/// Ingests the configured files, runs the requested stages and writes
/// their outputs into `config.out_dir`.
pub fn run_pipeline(config: &RunConfig, stages: Stages) -> Result<RunReport, PipelineError> {
    config.validate()?;
    let (snapshots, report) =
        ingest_snapshots(&config.snapshots, &config.layout).map_err(tag("ingest"))?;
    let mut hashes = vec![(
        "input_snapshots_sha256".to_owned(),
        sha256_hex(&fs::read(&config.snapshots).map_err(tag("ingest"))?),
    )];
    let trades = match &config.trades {
        Some(path) => {
            let trades = ingest_trades(path).map_err(tag("trades"))?;
            hashes.push((
                "input_trades_sha256".to_owned(),
                sha256_hex(&fs::read(path).map_err(tag("trades"))?),
            ));
            Some(trades)
        }
        None => None,
    };
    let outputs = analyze(
        snapshots,
        &report,
        trades.as_deref(),
        config,
        stages,
        &hashes,
    )?;
    let files = write_all(&config.out_dir, &outputs).map_err(tag("write"))?;
    let manifest_bytes = &outputs.last().expect("manifest is always produced").1;
    let manifest = csv::Reader::from_reader(manifest_bytes.as_slice())
        .records()
        .filter_map(Result::ok)
        .map(|r| (r[0].to_owned(), r[1].to_owned()))
        .collect();
    Ok(RunReport { files, manifest })
}
