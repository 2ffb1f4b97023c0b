//! Deterministic order-book panels with known ground truth.
//!
//! # Reproducibility
//!
//! Every (stock, day) is an independent substream. Its seed is
//! `splitmix64(splitmix64(seed ^ splitmix64(stock_index)) ^ day_index)` and the
//! generator is ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`). Three
//! ChaCha streams are used per substream: 0 for the convexity path, 1 for the
//! mid path and observation noise, 2 for trades. Substreams are generated in
//! parallel and emitted in canonical (stock, day, time) order, so output depends
//! only on the configuration.

use std::fs;
use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::ingest::{Aggressor, Trade};
use crate::lob_model::{BookSnapshot, SessionLayout, Side, SnapshotError, WindowKey, LEVELS};
use crate::output;
use crate::timeseries::{realized_variance, DaySeries, IntervalRecord};

/// Law of the exponent `c` on one side over the intervals of a day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConvexityProcess {
    Constant {
        c: f64,
    },
    /// AR(1) in `log c`, started from its stationary law every day.
    Ar1 {
        mean_log_c: f64,
        phi: f64,
        innovation_std: f64,
    },
    /// `c` moves linearly from `start` at the first interval to `end` at the last.
    LinearDrift {
        start: f64,
        end: f64,
    },
}

/// How the scale `W` is set. Only the bid scale is free: with an arithmetic
/// mid, the level-1 deviations must satisfy `exp(-w1_bid) + exp(w1_ask) = 2`,
/// so the ask scale follows from the bid level-1 deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaleProcess {
    /// Constant bid scale `W`.
    FixedBid { w: f64 },
    /// Constant bid level-1 log deviation; `W_bid` adjusts to the exponent.
    LevelOne { deviation: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_stocks: usize,
    pub n_days: usize,
    pub first_day_id: u32,
    pub bid_process: ConvexityProcess,
    pub ask_process: ConvexityProcess,
    pub scale: ScaleProcess,
    pub initial_mid: f64,
    /// Per-snapshot volatility of the log mid.
    pub mid_volatility: f64,
    pub total_depth: f64,
    /// Cumulative depth at each level as a fraction of `total_depth`.
    pub depth_fractions: [f64; LEVELS],
    /// Std of the multiplicative log-normal noise on `w`.
    pub noise_std: f64,
    /// Mean number of trades per window; 0 disables trades.
    pub trade_intensity: f64,
    pub mean_trade_volume: f64,
    /// Price tick; `None` writes exact prices.
    pub tick: Option<f64>,
    pub layout: SessionLayout,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            n_stocks: 2,
            n_days: 5,
            first_day_id: 1,
            bid_process: ConvexityProcess::Constant { c: 0.7 },
            ask_process: ConvexityProcess::Constant { c: 0.7 },
            scale: ScaleProcess::LevelOne { deviation: 1e-3 },
            initial_mid: 20.0,
            mid_volatility: 2e-4,
            total_depth: 20_000.0,
            depth_fractions: [0.1, 0.25, 0.45, 0.7, 1.0],
            noise_std: 0.0,
            trade_intensity: 50.0,
            mean_trade_volume: 300.0,
            tick: Some(0.01),
            layout: SessionLayout::default(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("generated book for {stock_id} day {day_id} at {ts_sec}s is invalid: {error}")]
    InvalidBook {
        stock_id: String,
        day_id: u32,
        ts_sec: f64,
        error: SnapshotError,
    },
}

fn invalid(msg: impl Into<String>) -> SynthError {
    SynthError::InvalidConfig(msg.into())
}

fn check_finite(name: &str, values: &[f64]) -> Result<(), SynthError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite")))
    }
}

impl ConvexityProcess {
    fn validate(&self, name: &str) -> Result<(), SynthError> {
        match *self {
            ConvexityProcess::Constant { c } => {
                check_finite(name, &[c])?;
                if c <= 0.0 {
                    return Err(invalid(format!("{name}: c must be positive")));
                }
            }
            ConvexityProcess::Ar1 {
                mean_log_c,
                phi,
                innovation_std,
            } => {
                check_finite(name, &[mean_log_c, phi, innovation_std])?;
                if phi.abs() >= 1.0 || innovation_std < 0.0 {
                    return Err(invalid(format!(
                        "{name}: need |phi| < 1 and innovation_std >= 0"
                    )));
                }
            }
            ConvexityProcess::LinearDrift { start, end } => {
                check_finite(name, &[start, end])?;
                if start <= 0.0 || end <= 0.0 {
                    return Err(invalid(format!("{name}: drift endpoints must be positive")));
                }
            }
        }
        Ok(())
    }

    /// One value of `c` per interval of a day.
    fn path(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match *self {
            ConvexityProcess::Constant { c } => vec![c; n],
            ConvexityProcess::Ar1 {
                mean_log_c,
                phi,
                innovation_std,
            } => {
                let mut x = mean_log_c + innovation_std / (1.0 - phi * phi).sqrt() * normal(rng);
                let mut out = Vec::with_capacity(n);
                for i in 0..n {
                    if i > 0 {
                        x = mean_log_c + phi * (x - mean_log_c) + innovation_std * normal(rng);
                    }
                    out.push(x.exp());
                }
                out
            }
            ConvexityProcess::LinearDrift { start, end } => (0..n)
                .map(|i| {
                    let s = if n > 1 {
                        i as f64 / (n - 1) as f64
                    } else {
                        0.0
                    };
                    start + (end - start) * s
                })
                .collect(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        self.layout.validate().map_err(|e| invalid(e.to_string()))?;
        if self.n_stocks == 0 || self.n_days == 0 {
            return Err(invalid("n_stocks and n_days must be positive"));
        }
        if self
            .first_day_id
            .checked_add(self.n_days as u32 - 1)
            .is_none()
        {
            return Err(invalid("day ids overflow"));
        }
        self.bid_process.validate("bid_process")?;
        self.ask_process.validate("ask_process")?;
        match self.scale {
            ScaleProcess::FixedBid { w } | ScaleProcess::LevelOne { deviation: w } => {
                check_finite("scale", &[w])?;
                if w <= 0.0 {
                    return Err(invalid("scale must be positive"));
                }
            }
        }
        check_finite(
            "scalar parameters",
            &[
                self.initial_mid,
                self.mid_volatility,
                self.total_depth,
                self.noise_std,
                self.trade_intensity,
                self.mean_trade_volume,
            ],
        )?;
        check_finite("depth_fractions", &self.depth_fractions)?;
        if self.initial_mid <= 0.0 {
            return Err(invalid("initial_mid must be positive"));
        }
        if self.mid_volatility < 0.0 || self.noise_std < 0.0 || self.trade_intensity < 0.0 {
            return Err(invalid(
                "volatility, noise and trade intensity must be non-negative",
            ));
        }
        if self.mean_trade_volume <= 0.0 {
            return Err(invalid("mean_trade_volume must be positive"));
        }
        let ladder = self.cumulative_depths();
        if ladder[0] < 1.0 || ladder.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid(
                "depth ladder must be strictly increasing with at least one share per level",
            ));
        }
        if let Some(tick) = self.tick {
            let inv = 1.0 / tick;
            if !(tick > 0.0) || !inv.is_finite() || (inv - inv.round()).abs() > 1e-9 * inv {
                return Err(invalid("tick must be positive with an integer reciprocal"));
            }
        }
        Ok(())
    }

    /// Integer cumulative depths of the ladder.
    pub fn cumulative_depths(&self) -> [f64; LEVELS] {
        self.depth_fractions.map(|f| (f * self.total_depth).round())
    }

    pub fn stock_ids(&self) -> Vec<String> {
        let width = self.n_stocks.to_string().len().max(3);
        (1..=self.n_stocks)
            .map(|i| format!("S{i:0width$}"))
            .collect()
    }

    fn day_ids(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        (0..self.n_days).map(|d| (d, self.first_day_id + d as u32))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn substream(seed: u64, stock: usize, day: usize, stream: u64) -> ChaCha8Rng {
    let key = splitmix64(splitmix64(seed ^ splitmix64(stock as u64)) ^ day as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(stream);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// True `(W, c)` of one side in one window.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthRow {
    pub key: WindowKey,
    pub side: Side,
    pub scale: f64,
    pub exponent: f64,
}

/// Mid-path facts of one window: mean mid and realized variance of the
/// snapshot mids as generated (before tick rounding).
#[derive(Debug, Clone, PartialEq)]
pub struct WindowTruth {
    pub key: WindowKey,
    pub mid: f64,
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SyntheticMarket {
    pub snapshots: Vec<BookSnapshot<f64>>,
    pub trades: Vec<Trade>,
    pub truth: Vec<TruthRow>,
    pub windows: Vec<WindowTruth>,
}

impl SyntheticMarket {
    /// Writes `snapshots.csv`, `trades.csv` and `truth.csv` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(
            dir.join("snapshots.csv"),
            output::snapshots_csv(&self.snapshots)?,
        )?;
        fs::write(dir.join("trades.csv"), output::trades_csv(&self.trades)?)?;
        fs::write(dir.join("truth.csv"), output::truth_csv(&self.truth)?)?;
        Ok(())
    }
}

/// Per-interval scales implied by the exponents and the scale rule.
fn scales(scale: ScaleProcess, d1: f64, c_bid: f64, c_ask: f64) -> (f64, f64) {
    let (w_bid, h) = match scale {
        ScaleProcess::FixedBid { w } => (w, w * d1.powf(c_bid)),
        ScaleProcess::LevelOne { deviation } => (deviation / d1.powf(c_bid), deviation),
    };
    (w_bid, ask_level_one(h) / d1.powf(c_ask))
}

/// Ask level-1 log deviation that keeps the arithmetic mid at the reference mid.
fn ask_level_one(bid_level_one: f64) -> f64 {
    (-(-bid_level_one).exp_m1()).ln_1p()
}

struct Quantizer {
    inv: Option<f64>,
}

impl Quantizer {
    fn bid(&self, x: f64) -> f64 {
        self.inv.map_or(x, |inv| (x * inv).floor() / inv)
    }
    fn ask(&self, x: f64) -> f64 {
        self.inv.map_or(x, |inv| (x * inv).ceil() / inv)
    }
    /// Next price strictly inside `prev` in the given direction.
    fn step(&self, prev: f64, down: bool) -> f64 {
        match self.inv {
            Some(inv) => ((prev * inv).round() + if down { -1.0 } else { 1.0 }) / inv,
            None => prev * if down { 1.0 - 1e-12 } else { 1.0 + 1e-12 },
        }
    }
}

fn generate_day(
    config: &SynthConfig,
    stock_index: usize,
    stock_id: &str,
    day_index: usize,
    day_id: u32,
) -> Result<SyntheticMarket, SynthError> {
    let layout = &config.layout;
    let n_intervals = layout.intervals_per_day();
    let n_slots = layout.snapshots_per_window();
    let mut path_rng = substream(config.seed, stock_index, day_index, 0);
    let c_bid = config.bid_process.path(n_intervals, &mut path_rng);
    let c_ask = config.ask_process.path(n_intervals, &mut path_rng);

    let mut book_rng = substream(config.seed, stock_index, day_index, 1);
    let mut trade_rng = substream(config.seed, stock_index, day_index, 2);
    let poisson = (config.trade_intensity > 0.0)
        .then(|| Poisson::new(config.trade_intensity).expect("validated intensity"));
    let volume_law = Exp::new(1.0 / config.mean_trade_volume).expect("validated volume");

    let cumulative = config.cumulative_depths();
    let mut level = [0.0; LEVELS];
    level[0] = cumulative[0];
    for k in 1..LEVELS {
        level[k] = cumulative[k] - cumulative[k - 1];
    }
    let quantizer = Quantizer {
        inv: config.tick.map(|t| (1.0 / t).round()),
    };

    let mut out = SyntheticMarket::default();
    let mut mid = config.initial_mid;
    let mut first = true;
    for i in 0..n_intervals {
        let t = (i + 1) as u16;
        let key = WindowKey::new(stock_id, day_id, t);
        let (w_bid, w_ask) = scales(config.scale, cumulative[0], c_bid[i], c_ask[i]);
        out.truth.push(TruthRow {
            key: key.clone(),
            side: Side::Bid,
            scale: w_bid,
            exponent: c_bid[i],
        });
        out.truth.push(TruthRow {
            key: key.clone(),
            side: Side::Ask,
            scale: w_ask,
            exponent: c_ask[i],
        });

        let start = layout.interval_start(t);
        let mut mids = Vec::with_capacity(n_slots);
        let first_snapshot = out.snapshots.len();
        for slot in 0..n_slots {
            let z = normal(&mut book_rng);
            if !first {
                mid *= (config.mid_volatility * z).exp();
            }
            first = false;
            mids.push(mid);

            let mut noise = [[1.0; LEVELS]; 2];
            for row in &mut noise {
                for v in row.iter_mut() {
                    let z = normal(&mut book_rng);
                    if config.noise_std > 0.0 {
                        *v = (config.noise_std * z).exp();
                    }
                }
            }
            let mut bid = [0.0; LEVELS];
            let mut ask = [0.0; LEVELS];
            let mut bid_w1 = 0.0;
            for k in 0..LEVELS {
                let w = w_bid * cumulative[k].powf(c_bid[i]) * noise[0][k];
                if k == 0 {
                    bid_w1 = w;
                }
                bid[k] = quantizer.bid(mid * (-w).exp());
                let w = if k == 0 {
                    ask_level_one(bid_w1)
                } else {
                    w_ask * cumulative[k].powf(c_ask[i]) * noise[1][k]
                };
                ask[k] = quantizer.ask(mid * w.exp());
                if k > 0 {
                    if bid[k] >= bid[k - 1] {
                        bid[k] = quantizer.step(bid[k - 1], true);
                    }
                    if ask[k] <= ask[k - 1] {
                        ask[k] = quantizer.step(ask[k - 1], false);
                    }
                }
            }
            let ts = start + slot as f64 * layout.spacing_sec;
            let snapshot = BookSnapshot::new(stock_id, day_id, ts, bid, level, ask, level)
                .map_err(|error| SynthError::InvalidBook {
                    stock_id: stock_id.to_owned(),
                    day_id,
                    ts_sec: ts,
                    error,
                })?;
            out.snapshots.push(snapshot);
        }
        out.windows.push(WindowTruth {
            key,
            mid: mids.iter().sum::<f64>() / mids.len() as f64,
            g: realized_variance(&mids),
        });

        if let Some(poisson) = &poisson {
            let count = poisson.sample(&mut trade_rng) as usize;
            let mut trades: Vec<Trade> = (0..count)
                .map(|_| {
                    let offset = ((trade_rng.random::<f64>() * layout.interval_sec * 1000.0)
                        .floor()
                        / 1000.0)
                        .min(layout.interval_sec - 0.001);
                    let volume = volume_law.sample(&mut trade_rng).ceil().max(1.0);
                    let aggressor = if trade_rng.random::<bool>() {
                        Aggressor::Buy
                    } else {
                        Aggressor::Sell
                    };
                    let slot = ((offset / layout.spacing_sec).round() as usize).min(n_slots - 1);
                    let book = &out.snapshots[first_snapshot + slot];
                    let price = match aggressor {
                        Aggressor::Buy => book.best_ask(),
                        Aggressor::Sell => book.best_bid(),
                    };
                    Trade {
                        stock_id: stock_id.to_owned(),
                        day_id,
                        ts_sec: start + offset,
                        price,
                        volume,
                        aggressor,
                    }
                })
                .collect();
            trades.sort_by(|a, b| a.ts_sec.total_cmp(&b.ts_sec));
            out.trades.extend(trades);
        }
    }
    Ok(out)
}

fn merge(days: Vec<SyntheticMarket>) -> SyntheticMarket {
    let mut market = SyntheticMarket::default();
    for day in days {
        market.snapshots.extend(day.snapshots);
        market.trades.extend(day.trades);
        market.truth.extend(day.truth);
        market.windows.extend(day.windows);
    }
    market
}

/// Generates the full panel. Output is ordered by (stock, day, time).
pub fn generate(config: &SynthConfig) -> Result<SyntheticMarket, SynthError> {
    config.validate()?;
    let stocks = config.stock_ids();
    let jobs: Vec<(usize, usize, u32)> = (0..config.n_stocks)
        .flat_map(|s| config.day_ids().map(move |(d, id)| (s, d, id)))
        .collect();
    let days: Vec<SyntheticMarket> = jobs
        .par_iter()
        .map(|&(s, d, id)| generate_day(config, s, &stocks[s], d, id))
        .collect::<Result<_, _>>()?;
    Ok(merge(days))
}

/// Generates one stock of the panel, identical to its slice of [`generate`].
pub fn generate_stock(
    config: &SynthConfig,
    stock_index: usize,
) -> Result<SyntheticMarket, SynthError> {
    config.validate()?;
    let stocks = config.stock_ids();
    let stock = stocks
        .get(stock_index)
        .ok_or_else(|| invalid(format!("stock index {stock_index} out of range")))?;
    let jobs: Vec<(usize, u32)> = config.day_ids().collect();
    let days: Vec<SyntheticMarket> = jobs
        .par_iter()
        .map(|&(d, id)| generate_day(config, stock_index, stock, d, id))
        .collect::<Result<_, _>>()?;
    Ok(merge(days))
}

/// True exponent paths of one side without building books. Matches the
/// exponents that [`generate`] uses for the same configuration.
pub fn true_exponent_series(
    config: &SynthConfig,
    side: Side,
) -> Result<Vec<DaySeries<f64>>, SynthError> {
    config.validate()?;
    let n = config.layout.intervals_per_day();
    let stocks = config.stock_ids();
    let mut out = Vec::with_capacity(config.n_stocks * config.n_days);
    for (s, stock) in stocks.iter().enumerate() {
        for (d, day_id) in config.day_ids() {
            let mut rng = substream(config.seed, s, d, 0);
            let bid = config.bid_process.path(n, &mut rng);
            let values = match side {
                Side::Bid => bid,
                Side::Ask => config.ask_process.path(n, &mut rng),
            };
            out.push(DaySeries {
                stock_id: stock.clone(),
                day_id,
                values: values.into_iter().map(Some).collect(),
            });
        }
    }
    Ok(out)
}

/// Coefficients of `log c_t = alpha + beta log c_{t-1} + gamma (log c_{t-1} - log c_{t-2})
/// + lambda r_t + eta G_t + e_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsTruth {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub eta: f64,
    pub noise_std: f64,
}

/// Coefficients of `log p_t = alpha + beta log p_{t-1} + gamma r_book_{t-1}
/// + lambda r_{t-1} + e_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscoveryTruth {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub noise_std: f64,
}

/// Shape of a record panel generated directly from the regression equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordPanelShape {
    pub seed: u64,
    pub n_stocks: usize,
    pub n_days: usize,
    pub intervals_per_day: usize,
}

const RETURN_STD: f64 = 1e-3;
const G_SCALE: f64 = 2.9e-5;

fn panel_ids(shape: &RecordPanelShape) -> Vec<(usize, String, usize)> {
    let width = shape.n_stocks.to_string().len().max(3);
    (0..shape.n_stocks)
        .flat_map(|s| (0..shape.n_days).map(move |d| (s, format!("S{:0width$}", s + 1), d)))
        .collect()
}

/// Records whose exponents follow the dynamic-adjustment equation on both
/// sides, driven by shared returns and realized variances. Exponents start
/// each day near the stationary level.
pub fn dynamics_records(
    bid: &DynamicsTruth,
    ask: &DynamicsTruth,
    shape: &RecordPanelShape,
) -> Vec<IntervalRecord<f64>> {
    let n = shape.intervals_per_day;
    panel_ids(shape)
        .into_par_iter()
        .map(|(s, stock, d)| {
            let mut rng = substream(shape.seed, s, d, 3);
            let r: Vec<Option<f64>> = (0..n)
                .map(|t| (t > 0).then(|| RETURN_STD * normal(&mut rng)))
                .collect();
            let g: Vec<f64> = (0..n)
                .map(|_| G_SCALE * (0.5 * normal(&mut rng)).exp())
                .collect();
            let mean_g = G_SCALE * 0.125f64.exp();
            let mut path = |truth: &DynamicsTruth| {
                let level = (truth.alpha + truth.eta * mean_g) / (1.0 - truth.beta);
                let mut lc = Vec::with_capacity(n);
                for t in 0..n {
                    let e = truth.noise_std * normal(&mut rng);
                    let v = if t < 2 {
                        level + e
                    } else {
                        truth.alpha
                            + truth.beta * lc[t - 1]
                            + truth.gamma * (lc[t - 1] - lc[t - 2])
                            + truth.lambda * r[t].unwrap_or(0.0)
                            + truth.eta * g[t]
                            + e
                    };
                    lc.push(v);
                }
                lc
            };
            let lc_bid = path(bid);
            let lc_ask = path(ask);
            let mut mid = 10.0;
            (0..n)
                .map(|t| {
                    if let Some(rt) = r[t] {
                        mid *= rt.exp();
                    }
                    IntervalRecord {
                        key: WindowKey::new(stock.clone(), d as u32 + 1, (t + 1) as u16),
                        c_bid: lc_bid[t].exp(),
                        c_ask: lc_ask[t].exp(),
                        w_bid: 1e-4,
                        w_ask: 1e-4,
                        mid,
                        r: r[t],
                        g: g[t],
                        v_buy: None,
                        v_sell: None,
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Records whose log mid follows the price-discovery equation. Book shapes
/// and aggressor volumes are drawn independently per window.
pub fn discovery_records(
    truth: &DiscoveryTruth,
    shape: &RecordPanelShape,
) -> Vec<IntervalRecord<f64>> {
    let n = shape.intervals_per_day;
    panel_ids(shape)
        .into_par_iter()
        .map(|(s, stock, d)| {
            let mut rng = substream(shape.seed, s, d, 4);
            let level = truth.alpha / (1.0 - truth.beta);
            let mut records: Vec<IntervalRecord<f64>> = Vec::with_capacity(n);
            let mut lp: Vec<f64> = Vec::with_capacity(n);
            for t in 0..n {
                let mut rec = IntervalRecord {
                    key: WindowKey::new(stock.clone(), d as u32 + 1, (t + 1) as u16),
                    c_bid: rng.random_range(0.4..1.2),
                    c_ask: rng.random_range(0.4..1.2),
                    w_bid: rng.random_range(0.5e-5..1.5e-5),
                    w_ask: rng.random_range(0.5e-5..1.5e-5),
                    mid: 0.0,
                    r: None,
                    g: 0.0,
                    v_buy: Some(f64::from(rng.random_range(0u32..=5000))),
                    v_sell: Some(f64::from(rng.random_range(0u32..=5000))),
                };
                let e = normal(&mut rng);
                let v = match t {
                    0 => level + 0.01 * e,
                    1 => lp[0] + RETURN_STD * e,
                    _ => {
                        let prev = &records[t - 1];
                        let rb =
                            crate::regression::book_return(prev).expect("valid generated record");
                        truth.alpha
                            + truth.beta * lp[t - 1]
                            + truth.gamma * rb
                            + truth.lambda * (lp[t - 1] - lp[t - 2])
                            + truth.noise_std * e
                    }
                };
                rec.mid = v.exp();
                rec.r = (t > 0).then(|| v - lp[t - 1]);
                lp.push(v);
                records.push(rec);
            }
            records
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convexity::estimate_panel;
    use crate::lob_model::{assemble_windows, CurveConfig};

    fn exact(bid: ConvexityProcess, ask: ConvexityProcess) -> SynthConfig {
        SynthConfig {
            n_stocks: 1,
            n_days: 1,
            bid_process: bid,
            ask_process: ask,
            tick: None,
            trade_intensity: 0.0,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn same_seed_same_output() {
        let config = SynthConfig::default();
        assert_eq!(generate(&config).unwrap(), generate(&config).unwrap());
        let other = SynthConfig {
            seed: 2,
            ..config.clone()
        };
        assert_ne!(
            generate(&config).unwrap().snapshots,
            generate(&other).unwrap().snapshots
        );
    }

    #[test]
    fn noiseless_books_recover_truth() {
        let config = exact(
            ConvexityProcess::Constant { c: 0.55 },
            ConvexityProcess::Constant { c: 1.3 },
        );
        let market = generate(&config).unwrap();
        let windows = assemble_windows(market.snapshots.iter().cloned(), &config.layout);
        let panel = estimate_panel(&windows, &CurveConfig::default());
        assert!(panel.gaps.is_empty());
        assert_eq!(panel.estimates.len(), market.truth.len());
        for truth in &market.truth {
            let est = panel
                .estimates
                .iter()
                .find(|e| e.key == truth.key && e.side == truth.side)
                .unwrap();
            assert!(
                (est.exponent - truth.exponent).abs() < 1e-10,
                "{est:?} {truth:?}"
            );
            assert!((est.scale / truth.scale - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn stock_slices_match_full_panel() {
        let config = SynthConfig::default();
        let full = generate(&config).unwrap();
        let second = generate_stock(&config, 1).unwrap();
        let n = second.snapshots.len();
        assert_eq!(full.snapshots[n..], second.snapshots[..]);
        assert_eq!(
            full.trades.iter().filter(|t| t.stock_id == "S002").count(),
            second.trades.len()
        );
        assert!(generate_stock(&config, 2).is_err());
    }

    #[test]
    fn constant_mid_has_zero_variance() {
        let config = SynthConfig {
            mid_volatility: 0.0,
            ..SynthConfig::default()
        };
        let market = generate(&config).unwrap();
        assert!(market.windows.iter().all(|w| w.g == 0.0));
    }

    #[test]
    fn tick_mode_books_are_on_grid() {
        let config = SynthConfig {
            noise_std: 0.3,
            ..SynthConfig::default()
        };
        let market = generate(&config).unwrap();
        for s in &market.snapshots {
            for side in Side::BOTH {
                for &q in s.quotes(side) {
                    assert_eq!(
                        format!("{q}"),
                        format!("{q:.2}")
                            .trim_end_matches('0')
                            .trim_end_matches('.')
                    );
                }
            }
        }
    }

    #[test]
    fn exponent_series_matches_books() {
        let ar = ConvexityProcess::Ar1 {
            mean_log_c: -0.3,
            phi: 0.6,
            innovation_std: 0.2,
        };
        let config = SynthConfig {
            n_days: 3,
            ..exact(ar, ar)
        };
        let market = generate(&config).unwrap();
        let series = true_exponent_series(&config, Side::Ask).unwrap();
        let from_truth: Vec<f64> = market
            .truth
            .iter()
            .filter(|r| r.side == Side::Ask)
            .map(|r| r.exponent)
            .collect();
        let flat: Vec<f64> = series
            .iter()
            .flat_map(|s| s.values.iter().map(|v| v.unwrap()))
            .collect();
        assert_eq!(from_truth, flat);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = [
            SynthConfig {
                n_days: 0,
                ..SynthConfig::default()
            },
            SynthConfig {
                mid_volatility: -1.0,
                ..SynthConfig::default()
            },
            SynthConfig {
                initial_mid: f64::NAN,
                ..SynthConfig::default()
            },
            SynthConfig {
                bid_process: ConvexityProcess::Ar1 {
                    mean_log_c: 0.0,
                    phi: 1.0,
                    innovation_std: 0.1,
                },
                ..SynthConfig::default()
            },
            SynthConfig {
                depth_fractions: [0.1, 0.1, 0.45, 0.7, 1.0],
                ..SynthConfig::default()
            },
            SynthConfig {
                tick: Some(0.003),
                ..SynthConfig::default()
            },
        ];
        for config in bad {
            assert!(
                matches!(generate(&config), Err(SynthError::InvalidConfig(_))),
                "{config:?}"
            );
        }
    }
}
