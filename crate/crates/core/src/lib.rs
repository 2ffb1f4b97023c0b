//! Order-book convexity: fits the shape law `w = W * D^c` to each side of a
//! five-level limit order book over five-minute windows, then studies the
//! resulting panel (summary statistics, autocorrelation and long memory,
//! intraday profile, and panel regressions).
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`). The aliases
//! below fix the scalar to `f64`, which is what ingestion, the synthetic
//! generator and the pipeline use.

pub mod convexity;
pub mod ingest;
pub mod linfit;
pub mod lob_model;
pub mod output;
pub mod pipeline;
pub mod regression;
pub mod scalar;
pub mod stats;
pub mod synthetic;
pub mod timeseries;

pub use convexity::{estimate_panel, fit_power_law, summarize_log_convexity};
pub use lob_model::{Side, WindowKey};
pub use scalar::Scalar;

pub type Snapshot = lob_model::BookSnapshot<f64>;
pub type Window = lob_model::IntervalWindow<f64>;
pub type Curve = lob_model::SideCurve<f64>;
pub type Estimate = convexity::ConvexityEstimate<f64>;
pub type Panel = convexity::ConvexityPanel<f64>;
pub type Record = timeseries::IntervalRecord<f64>;
pub type Series = timeseries::DaySeries<f64>;
pub type Regression = regression::RegressionResult<f64>;
pub type RegressionSummary = regression::PanelRegressionSummary<f64>;

pub type Snapshot32 = lob_model::BookSnapshot<f32>;
pub type Estimate32 = convexity::ConvexityEstimate<f32>;
pub type Regression32 = regression::RegressionResult<f32>;
