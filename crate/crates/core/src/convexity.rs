//! Power-law shape fit `w = W * D^c` per side and interval, and the panel of
//! estimates built from it.

use rayon::prelude::*;
use thiserror::Error;

use crate::linfit::fit_line;
use crate::lob_model::{
    build_side_curve, CurveConfig, CurveError, IntervalWindow, Side, SideCurve, WindowKey,
};
use crate::scalar::{self, Scalar};
use crate::stats::one_sample_t_test;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum FitError {
    #[error("insufficient data: {points} points")]
    InsufficientData { points: usize },
    #[error("cumulative depth has no spread; slope is not identified")]
    SingularFit,
    #[error("fit points must have positive depth and deviation")]
    NonPositivePoint,
}

/// Fitted shape of one side curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit<T> {
    /// `W`, the deviation at unit cumulative depth.
    pub scale: T,
    /// `c`, the convexity exponent.
    pub exponent: T,
    /// Initial density, `1 / W`.
    pub rho: T,
    /// R² of the log-log regression.
    pub r_squared: T,
    pub n_points: usize,
    /// Set when the unconstrained fit gives `c < 0`.
    pub degenerate: bool,
}

/// Least-squares fit of `log w = log W + c log D`.
///
/// The fit is unconstrained; a negative exponent is flagged rather than
/// clipped. `W = exp(intercept)` is positive by construction.
pub fn fit_power_law<T: Scalar>(curve: &SideCurve<T>) -> Result<PowerLawFit<T>, FitError> {
    let n = curve.points.len();
    if n < 2 {
        return Err(FitError::InsufficientData { points: n });
    }
    if curve.points.iter().any(|p| {
        !(p.depth > T::zero() && p.depth.is_finite())
            || !(p.deviation > T::zero() && p.deviation.is_finite())
    }) {
        return Err(FitError::NonPositivePoint);
    }
    let log_depth: Vec<T> = curve.points.iter().map(|p| p.depth.ln()).collect();
    let log_dev: Vec<T> = curve.points.iter().map(|p| p.deviation.ln()).collect();
    let line = fit_line(&log_depth, &log_dev).ok_or(FitError::SingularFit)?;

    let scale = line.intercept.exp();
    Ok(PowerLawFit {
        scale,
        exponent: line.slope,
        rho: scale.recip(),
        r_squared: line.r_squared,
        n_points: n,
        degenerate: line.slope < T::zero(),
    })
}

/// One row of the convexity panel.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityEstimate<T> {
    pub key: WindowKey,
    pub side: Side,
    pub scale: T,
    pub exponent: T,
    pub rho: T,
    pub r_squared: T,
    pub n_points: usize,
    pub degenerate: bool,
}

impl<T: Scalar> ConvexityEstimate<T> {
    pub fn from_fit(key: WindowKey, side: Side, fit: PowerLawFit<T>) -> Self {
        Self {
            key,
            side,
            scale: fit.scale,
            exponent: fit.exponent,
            rho: fit.rho,
            r_squared: fit.r_squared,
            n_points: fit.n_points,
            degenerate: fit.degenerate,
        }
    }

    /// `log c`, when the exponent is positive.
    pub fn log_exponent(&self) -> Option<T> {
        (self.exponent > T::zero()).then(|| self.exponent.ln())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum GapReason {
    InsufficientData,
    SingularFit,
    InvalidPoints,
}

impl GapReason {
    pub fn as_str(self) -> &'static str {
        match self {
            GapReason::InsufficientData => "InsufficientData",
            GapReason::SingularFit => "SingularFit",
            GapReason::InvalidPoints => "InvalidPoints",
        }
    }
}

/// A window (or one side of it) that produced no estimate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Gap {
    pub key: WindowKey,
    /// `None` when the whole window failed the snapshot gate.
    pub side: Option<Side>,
    pub reason: GapReason,
}

/// Estimates for every window of a panel, plus the windows that failed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvexityPanel<T> {
    /// Sorted by (stock, day, t, side).
    pub estimates: Vec<ConvexityEstimate<T>>,
    pub gaps: Vec<Gap>,
}

impl<T: Scalar> ConvexityPanel<T> {
    pub fn side(&self, side: Side) -> impl Iterator<Item = &ConvexityEstimate<T>> {
        self.estimates.iter().filter(move |e| e.side == side)
    }
}

fn estimate_window<T: Scalar>(
    window: &IntervalWindow<T>,
    config: &CurveConfig,
) -> (Vec<ConvexityEstimate<T>>, Vec<Gap>) {
    if window.snapshots.len() < config.min_snapshots {
        let gap = Gap {
            key: window.key.clone(),
            side: None,
            reason: GapReason::InsufficientData,
        };
        return (Vec::new(), vec![gap]);
    }
    let mut estimates = Vec::with_capacity(2);
    let mut gaps = Vec::new();
    for side in Side::BOTH {
        let fitted = build_side_curve(window, side, config)
            .map_err(|CurveError::InsufficientData { .. }| GapReason::InsufficientData)
            .and_then(|curve| {
                fit_power_law(&curve).map_err(|e| match e {
                    FitError::InsufficientData { .. } => GapReason::InsufficientData,
                    FitError::SingularFit => GapReason::SingularFit,
                    FitError::NonPositivePoint => GapReason::InvalidPoints,
                })
            });
        match fitted {
            Ok(fit) => estimates.push(ConvexityEstimate::from_fit(window.key.clone(), side, fit)),
            Err(reason) => gaps.push(Gap {
                key: window.key.clone(),
                side: Some(side),
                reason,
            }),
        }
    }
    (estimates, gaps)
}

/// Fits both sides of every window. Per-window failures become gap records;
/// the output order does not depend on evaluation order.
pub fn estimate_panel<T: Scalar>(
    windows: &[IntervalWindow<T>],
    config: &CurveConfig,
) -> ConvexityPanel<T> {
    let parts: Vec<_> = windows
        .par_iter()
        .map(|w| estimate_window(w, config))
        .collect();
    let mut panel = ConvexityPanel::default();
    for (est, gaps) in parts {
        panel.estimates.extend(est);
        panel.gaps.extend(gaps);
    }
    panel
        .estimates
        .sort_by(|a, b| (&a.key, a.side).cmp(&(&b.key, b.side)));
    panel.gaps.sort();
    panel
}

/// One line of the log-convexity summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow<T> {
    pub label: &'static str,
    pub n: usize,
    pub mean: T,
    pub std_dev: T,
    pub median: T,
    pub min: T,
    pub max: T,
    /// Two-sided p-value for a zero mean; `None` when the t statistic is undefined.
    pub p_value: Option<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SummaryError {
    #[error("no usable estimates for `{0}`")]
    EmptyPanel(&'static str),
}

/// Distribution of `log c` on each side and of the bid/ask difference.
#[derive(Debug, Clone, PartialEq)]
pub struct LogConvexitySummary<T> {
    pub rows: [SummaryRow<T>; 3],
}

fn summary_row<T: Scalar>(
    label: &'static str,
    values: &[T],
) -> Result<SummaryRow<T>, SummaryError> {
    let mean = scalar::mean(values).ok_or(SummaryError::EmptyPanel(label))?;
    let std_dev = scalar::sample_std(values).unwrap_or_else(T::zero);
    let min = values.iter().copied().fold(T::infinity(), T::min);
    let max = values.iter().copied().fold(T::neg_infinity(), T::max);
    Ok(SummaryRow {
        label,
        n: values.len(),
        mean,
        std_dev,
        median: scalar::median(values).expect("non-empty"),
        min,
        max,
        p_value: one_sample_t_test(values),
    })
}

/// Mean, standard deviation, median, extremes and zero-mean t-test p-value of
/// `log c` (bid, ask) and of `log c_bid - log c_ask` over windows with both sides.
///
/// Degenerate estimates are skipped unless `include_degenerate` is set; an
/// exponent that is not strictly positive has no logarithm and is always skipped.
pub fn summarize_log_convexity<T: Scalar>(
    panel: &ConvexityPanel<T>,
    include_degenerate: bool,
) -> Result<LogConvexitySummary<T>, SummaryError> {
    let usable = |e: &ConvexityEstimate<T>| {
        if e.degenerate && !include_degenerate {
            None
        } else {
            e.log_exponent()
        }
    };
    let mut bid = Vec::new();
    let mut ask = Vec::new();
    let mut diff = Vec::new();
    let mut pending_bid: Option<(&WindowKey, T)> = None;
    for e in &panel.estimates {
        let Some(lc) = usable(e) else {
            continue;
        };
        match e.side {
            Side::Bid => {
                bid.push(lc);
                pending_bid = Some((&e.key, lc));
            }
            Side::Ask => {
                ask.push(lc);
                if let Some((key, lb)) = pending_bid.take() {
                    if *key == e.key {
                        diff.push(lb - lc);
                    }
                }
            }
        }
    }
    Ok(LogConvexitySummary {
        rows: [
            summary_row("log_c_bid", &bid)?,
            summary_row("log_c_ask", &ask)?,
            summary_row("log_c_bid_minus_ask", &diff)?,
        ],
    })
}
