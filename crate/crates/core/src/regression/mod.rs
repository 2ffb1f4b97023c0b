//! Least-squares engine with classical inference, and the per-stock panel
//! equations built on it.

mod models;
mod ols;
mod panel;

pub use models::{
    ar1_kappa, book_return, dynamic_adjustment, price_discovery, DynamicsConfig, MIN_KAPPA_PAIRS,
};
pub use ols::{ols, Design, RegressionError, RegressionResult};
pub use panel::{
    summarize_panel, CoefSummary, PanelRegressionSummary, StockFailure, StockRegression,
};
