//! Per-interval market statistics and the panel time-series analyses of the
//! convexity exponent: lagged correlation, power-law decay of that correlation,
//! first differences, and the normalized intraday profile.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::convexity::{ConvexityEstimate, ConvexityPanel};
use crate::linfit::fit_line;
use crate::lob_model::{mid_quote, IntervalWindow, Side, WindowKey};
use crate::scalar::{self, Scalar};

/// Window-level price statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalStats<T> {
    /// Mean of the per-snapshot mid-quotes.
    pub mid: T,
    /// Log return against the previous interval's mid, when one is given.
    pub r: Option<T>,
    /// Realized variance of the snapshot mid path.
    pub g: T,
}

/// Sum of squared consecutive log changes of a price path.
pub fn realized_variance<T: Scalar>(mids: &[T]) -> T {
    mids.windows(2).fold(T::zero(), |acc, w| {
        let step = (w[1] / w[0]).ln();
        acc + step * step
    })
}

/// Mid, return and realized variance of one window. `None` for an empty window.
pub fn interval_stats<T: Scalar>(
    window: &IntervalWindow<T>,
    prev_mid: Option<T>,
) -> Option<IntervalStats<T>> {
    let mids: Vec<T> = window.snapshots.iter().map(mid_quote).collect();
    let mid = scalar::mean(&mids)?;
    Some(IntervalStats {
        mid,
        r: prev_mid.map(|p| (mid / p).ln()),
        g: realized_variance(&mids),
    })
}

/// One row of the interval panel.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalRecord<T> {
    pub key: WindowKey,
    pub c_bid: T,
    pub c_ask: T,
    pub w_bid: T,
    pub w_ask: T,
    pub mid: T,
    /// Absent at the first interval of a day and after a gap.
    pub r: Option<T>,
    pub g: T,
    /// Aggressor buy volume; absent when no trades were supplied.
    pub v_buy: Option<T>,
    pub v_sell: Option<T>,
}

impl<T: Scalar> IntervalRecord<T> {
    pub fn exponent(&self, side: Side) -> T {
        match side {
            Side::Bid => self.c_bid,
            Side::Ask => self.c_ask,
        }
    }

    pub fn scale(&self, side: Side) -> T {
        match side {
            Side::Bid => self.w_bid,
            Side::Ask => self.w_ask,
        }
    }

    pub fn log_exponent(&self, side: Side) -> Option<T> {
        let c = self.exponent(side);
        (c > T::zero()).then(|| c.ln())
    }
}

/// Joins window statistics with both-side estimates.
///
/// A record is emitted only for windows where both sides were estimated. The
/// return chains only across consecutive emitted records of the same day.
/// `flows` supplies aggressor (buy, sell) volume per window when trades exist.
pub fn assemble_records<T: Scalar>(
    windows: &[IntervalWindow<T>],
    panel: &ConvexityPanel<T>,
    flows: Option<&BTreeMap<WindowKey, (T, T)>>,
) -> Vec<IntervalRecord<T>> {
    let mut by_key: HashMap<&WindowKey, [Option<&ConvexityEstimate<T>>; 2]> = HashMap::new();
    for e in &panel.estimates {
        by_key.entry(&e.key).or_default()[e.side as usize] = Some(e);
    }

    let mut ordered: Vec<&IntervalWindow<T>> = windows.iter().collect();
    ordered.sort_by(|a, b| a.key.cmp(&b.key));

    let mut records: Vec<IntervalRecord<T>> = Vec::new();
    for window in ordered {
        let Some([Some(bid), Some(ask)]) = by_key.get(&window.key).copied() else {
            continue;
        };
        let prev_mid = records
            .last()
            .filter(|r| Some(&r.key) == window.key.previous().as_ref())
            .map(|r| r.mid);
        let Some(stats) = interval_stats(window, prev_mid) else {
            continue;
        };
        let flow = flows.map(|f| {
            f.get(&window.key)
                .copied()
                .unwrap_or((T::zero(), T::zero()))
        });
        records.push(IntervalRecord {
            key: window.key.clone(),
            c_bid: bid.exponent,
            c_ask: ask.exponent,
            w_bid: bid.scale,
            w_ask: ask.scale,
            mid: stats.mid,
            r: stats.r,
            g: stats.g,
            v_buy: flow.map(|f| f.0),
            v_sell: flow.map(|f| f.1),
        });
    }
    records
}

/// A within-day series indexed by interval (`values[t - 1]`), with gaps as `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct DaySeries<T> {
    pub stock_id: String,
    pub day_id: u32,
    pub values: Vec<Option<T>>,
}

impl<T: Scalar> DaySeries<T> {
    /// Natural log of each value; non-positive values become gaps.
    pub fn log(&self) -> DaySeries<T> {
        DaySeries {
            stock_id: self.stock_id.clone(),
            day_id: self.day_id,
            values: self
                .values
                .iter()
                .map(|v| v.filter(|&x| x > T::zero()).map(T::ln))
                .collect(),
        }
    }
}

/// Per-(stock, day) series of the exponent `c` on one side.
pub fn exponent_series<T: Scalar>(
    panel: &ConvexityPanel<T>,
    side: Side,
    intervals_per_day: usize,
    include_degenerate: bool,
) -> Vec<DaySeries<T>> {
    let mut days: BTreeMap<(&str, u32), Vec<Option<T>>> = BTreeMap::new();
    for e in panel.side(side) {
        let values = days
            .entry((e.key.stock_id.as_str(), e.key.day_id))
            .or_insert_with(|| vec![None; intervals_per_day]);
        if let Some(slot) = values.get_mut(usize::from(e.key.t) - 1) {
            if include_degenerate || !e.degenerate {
                *slot = Some(e.exponent);
            }
        }
    }
    days.into_iter()
        .map(|((stock, day), values)| DaySeries {
            stock_id: stock.to_owned(),
            day_id: day,
            values,
        })
        .collect()
}

fn canonical<T>(series: &[DaySeries<T>]) -> Vec<&DaySeries<T>> {
    let mut ordered: Vec<&DaySeries<T>> = series.iter().collect();
    ordered.sort_by(|a, b| (&a.stock_id, a.day_id).cmp(&(&b.stock_id, b.day_id)));
    ordered
}

/// Pearson correlation; `None` when either side has zero variance or fewer
/// than two pairs are given.
pub fn pearson<T: Scalar>(x: &[T], y: &[T]) -> Option<T> {
    let mx = scalar::mean(x)?;
    let my = scalar::mean(y)?;
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let (mut sxx, mut syy, mut sxy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
        sxy = sxy + dx * dy;
    }
    if !(sxx > T::zero()) || !(syy > T::zero()) {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).max(-T::one()).min(T::one()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AcfConfig {
    pub max_lag: usize,
    /// Minimum lagged pairs a series needs to contribute at a lag.
    pub min_pairs: usize,
}

impl Default for AcfConfig {
    fn default() -> Self {
        Self {
            max_lag: 40,
            min_pairs: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcfPoint<T> {
    pub lag: usize,
    /// Equal-weight mean of the per-series lag correlations.
    pub value: T,
    pub n_contributing: usize,
    /// Standard error of `value` across contributing series.
    pub std_error: Option<T>,
}

/// Lag 1..=L panel autocorrelation. Lags no series could supply are omitted.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AcfCurve<T> {
    pub points: Vec<AcfPoint<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum AcfError {
    #[error("panel has no series")]
    NoSeries,
    #[error("maximum lag must be at least 1")]
    InvalidMaxLag,
}

/// Averages, across all (stock, day) series, the within-day Pearson
/// correlation between `x_t` and `x_{t-lag}`.
///
/// A series contributes at a lag only if it has at least `min_pairs` gap-free
/// pairs and both legs vary.
pub fn panel_acf<T: Scalar>(
    series: &[DaySeries<T>],
    config: &AcfConfig,
) -> Result<AcfCurve<T>, AcfError> {
    if series.is_empty() {
        return Err(AcfError::NoSeries);
    }
    if config.max_lag == 0 {
        return Err(AcfError::InvalidMaxLag);
    }
    let ordered = canonical(series);
    let mut curve = AcfCurve::default();
    let mut lead = Vec::new();
    let mut lagged = Vec::new();
    let mut coeffs = Vec::with_capacity(ordered.len());
    for lag in 1..=config.max_lag {
        coeffs.clear();
        for s in &ordered {
            lead.clear();
            lagged.clear();
            for t in lag..s.values.len() {
                if let (Some(a), Some(b)) = (s.values[t], s.values[t - lag]) {
                    lead.push(a);
                    lagged.push(b);
                }
            }
            if lead.len() < config.min_pairs.max(2) {
                continue;
            }
            if let Some(r) = pearson(&lead, &lagged) {
                coeffs.push(r);
            }
        }
        if let Some(value) = scalar::mean(&coeffs) {
            let std_error =
                scalar::sample_std(&coeffs).map(|sd| sd / T::count(coeffs.len()).sqrt());
            curve.points.push(AcfPoint {
                lag,
                value,
                n_contributing: coeffs.len(),
                std_error,
            });
        }
    }
    Ok(curve)
}

/// Power-law decay `v = a * lag^(-b)` fitted through
/// `log v + log lag = alpha - beta * log lag` with `beta = b - 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LongMemoryFit<T> {
    pub alpha: T,
    pub beta: T,
    pub a: T,
    pub b: T,
    pub r_squared: T,
    pub lags_used: usize,
    /// Lags dropped because their correlation was not positive.
    pub lags_dropped: usize,
}

impl<T: Scalar> LongMemoryFit<T> {
    /// Decay slower than `1 / lag`.
    pub fn long_memory(&self) -> bool {
        self.b < T::one()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum LongMemoryError {
    #[error("only {positive} lags with positive correlation; need {required}")]
    InsufficientPositiveLags { positive: usize, required: usize },
}

pub const MIN_POSITIVE_LAGS: usize = 5;

pub fn fit_long_memory<T: Scalar>(acf: &AcfCurve<T>) -> Result<LongMemoryFit<T>, LongMemoryError> {
    let positive: Vec<&AcfPoint<T>> = acf.points.iter().filter(|p| p.value > T::zero()).collect();
    let insufficient = LongMemoryError::InsufficientPositiveLags {
        positive: positive.len(),
        required: MIN_POSITIVE_LAGS,
    };
    if positive.len() < MIN_POSITIVE_LAGS {
        return Err(insufficient);
    }
    let x: Vec<T> = positive.iter().map(|p| T::count(p.lag).ln()).collect();
    let y: Vec<T> = positive
        .iter()
        .zip(&x)
        .map(|(p, &log_lag)| p.value.ln() + log_lag)
        .collect();
    let line = fit_line(&x, &y).ok_or(insufficient)?;
    let beta = -line.slope;
    Ok(LongMemoryFit {
        alpha: line.intercept,
        beta,
        a: line.intercept.exp(),
        b: beta + T::one(),
        r_squared: line.r_squared,
        lags_used: positive.len(),
        lags_dropped: acf.points.len() - positive.len(),
    })
}

/// First differences within each day: `kappa_t = x_t - x_{t-1}`.
/// A gap at either end leaves `kappa_t` undefined.
pub fn kappa_series<T: Scalar>(log_c: &[DaySeries<T>]) -> Vec<DaySeries<T>> {
    log_c
        .iter()
        .map(|s| {
            let mut values = vec![None; s.values.len()];
            for t in 1..s.values.len() {
                if let (Some(now), Some(before)) = (s.values[t], s.values[t - 1]) {
                    values[t] = Some(now - before);
                }
            }
            DaySeries {
                stock_id: s.stock_id.clone(),
                day_id: s.day_id,
                values,
            }
        })
        .collect()
}

/// Divides a complete day by its own mean. `None` if any value is missing or
/// the mean is zero.
pub fn normalize_day<T: Scalar>(values: &[Option<T>]) -> Option<Vec<T>> {
    let complete: Vec<T> = values.iter().copied().collect::<Option<_>>()?;
    let tau = scalar::mean(&complete)?;
    if tau == T::zero() || !tau.is_finite() {
        return None;
    }
    Some(complete.into_iter().map(|c| c / tau).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntradayProfile<T> {
    /// Cross-sectional mean of normalized `c` at each interval.
    pub values: Vec<T>,
    pub n_days: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ProfileError {
    #[error("no day has all {0} intervals")]
    NoCompleteDays(usize),
}

/// Mean over complete days of `c_t / tau`, where `tau` is that day's mean `c`.
pub fn intraday_profile<T: Scalar>(
    series: &[DaySeries<T>],
    intervals_per_day: usize,
) -> Result<IntradayProfile<T>, ProfileError> {
    let mut sums = vec![T::zero(); intervals_per_day];
    let mut n_days = 0;
    for s in canonical(series) {
        if s.values.len() != intervals_per_day {
            continue;
        }
        if let Some(norm) = normalize_day(&s.values) {
            for (acc, v) in sums.iter_mut().zip(norm) {
                *acc = *acc + v;
            }
            n_days += 1;
        }
    }
    if n_days == 0 {
        return Err(ProfileError::NoCompleteDays(intervals_per_day));
    }
    let n = T::count(n_days);
    Ok(IntradayProfile {
        values: sums.into_iter().map(|s| s / n).collect(),
        n_days,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lob_model::BookSnapshot;

    fn window_with_mids(mids: &[f64]) -> IntervalWindow<f64> {
        let snapshots = mids
            .iter()
            .enumerate()
            .map(|(i, &m)| {
                let h = 0.001 * m;
                let bid = std::array::from_fn(|k| m - h * (k + 1) as f64);
                let ask = std::array::from_fn(|k| m + h * (k + 1) as f64);
                BookSnapshot::new("S", 1, 10.0 * i as f64, bid, [10.0; 5], ask, [10.0; 5]).unwrap()
            })
            .collect();
        IntervalWindow {
            key: WindowKey::new("S", 1, 2),
            snapshots,
        }
    }

    #[test]
    fn constant_mid_has_no_variance() {
        let w = window_with_mids(&[25.0; 30]);
        let s = interval_stats(&w, Some(25.0)).unwrap();
        assert_eq!(s.g, 0.0);
        assert_eq!(s.r, Some(0.0));
        assert!((s.mid - 25.0).abs() < 1e-12);
        assert_eq!(interval_stats(&w, None).unwrap().r, None);
    }

    #[test]
    fn alternating_mid_realized_variance() {
        // Oracle: 29 consecutive moves of exactly ±0.01 in log space.
        let up = 100.0 * 0.01_f64.exp();
        let mids: Vec<f64> = (0..30)
            .map(|i| if i % 2 == 0 { 100.0 } else { up })
            .collect();
        let g = realized_variance(&mids);
        assert!((g - 2.9e-3).abs() < 1e-15);
    }

    fn day(stock: &str, d: u32, values: Vec<Option<f64>>) -> DaySeries<f64> {
        DaySeries {
            stock_id: stock.into(),
            day_id: d,
            values,
        }
    }

    #[test]
    fn acf_excludes_constant_series_and_never_emits_lag_zero() {
        let varying: Vec<Option<f64>> = (0..48).map(|t| Some(((t * 37) % 11) as f64)).collect();
        let panel = vec![day("A", 1, vec![Some(2.0); 48]), day("A", 2, varying)];
        let acf = panel_acf(&panel, &AcfConfig::default()).unwrap();
        assert!(acf.points.iter().all(|p| p.lag >= 1));
        assert_eq!(acf.points[0].n_contributing, 1);
        assert_eq!(
            panel_acf::<f64>(&[], &AcfConfig::default()),
            Err(AcfError::NoSeries)
        );
    }

    #[test]
    fn acf_of_linear_trend_is_one() {
        let trend: Vec<Option<f64>> = (0..48).map(|t| Some(t as f64)).collect();
        let acf = panel_acf(
            &[day("A", 1, trend)],
            &AcfConfig {
                max_lag: 10,
                min_pairs: 5,
            },
        )
        .unwrap();
        assert_eq!(acf.points.len(), 10);
        for p in &acf.points {
            assert!((p.value - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn long_memory_exact_curve() {
        let points = (1..=40)
            .map(|lag| AcfPoint {
                lag,
                value: 0.45 * (lag as f64).powf(-0.221),
                n_contributing: 1,
                std_error: None,
            })
            .collect();
        let fit = fit_long_memory(&AcfCurve { points }).unwrap();
        assert!((fit.alpha - 0.45_f64.ln()).abs() < 1e-10);
        assert!((fit.beta + 0.779).abs() < 1e-10);
        assert!((fit.b - 0.221).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-10);
        assert!(fit.long_memory());
    }

    #[test]
    fn long_memory_needs_positive_lags() {
        let points = (1..=10)
            .map(|lag| AcfPoint {
                lag,
                value: if lag <= 4 { 0.3 } else { -0.01 },
                n_contributing: 1,
                std_error: None,
            })
            .collect();
        assert_eq!(
            fit_long_memory(&AcfCurve::<f64> { points }),
            Err(LongMemoryError::InsufficientPositiveLags {
                positive: 4,
                required: 5
            })
        );
    }

    #[test]
    fn kappa_rules() {
        let constant = day("A", 1, vec![Some(0.3); 48]);
        let k = kappa_series(&[constant]);
        assert_eq!(k[0].values[0], None);
        assert!(k[0].values[1..].iter().all(|v| *v == Some(0.0)));

        let doubling = day("A", 1, vec![Some(1.0_f64.ln()), Some(2.0_f64.ln())]);
        let k = kappa_series(&[doubling]);
        assert!((k[0].values[1].unwrap() - std::f64::consts::LN_2).abs() < 1e-15);

        let mut gappy = vec![Some(0.1); 48];
        gappy[9] = None; // t = 10
        let k = kappa_series(&[day("A", 1, gappy)]);
        assert_eq!(k[0].values[9], None);
        assert_eq!(k[0].values[10], None);
        assert_eq!(k[0].values[11], Some(0.0));
    }

    #[test]
    fn intraday_profile_cases() {
        let flat = day("A", 1, vec![Some(0.7); 48]);
        let p = intraday_profile(&[flat], 48).unwrap();
        assert!(p.values.iter().all(|&v| (v - 1.0).abs() < 1e-15));

        // Oracle: tau = (1 + ... + 48) / 48 = 24.5.
        let ramp = day("B", 1, (1..=48).map(|t| Some(t as f64)).collect());
        let p = intraday_profile(&[ramp], 48).unwrap();
        for (i, v) in p.values.iter().enumerate() {
            assert!((v - (i + 1) as f64 / 24.5).abs() < 1e-15);
        }

        let mut gap = vec![Some(1.0); 48];
        gap[3] = None;
        assert_eq!(
            intraday_profile(&[day("C", 1, gap)], 48),
            Err(ProfileError::NoCompleteDays(48))
        );
    }
}
