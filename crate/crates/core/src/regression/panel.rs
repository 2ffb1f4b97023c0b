use std::collections::BTreeMap;

use crate::regression::{RegressionError, RegressionResult};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct StockRegression<T> {
    pub stock_id: String,
    pub result: RegressionResult<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StockFailure {
    pub stock_id: String,
    pub error: RegressionError,
}

/// Cross-stock view of one coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefSummary<T> {
    pub name: String,
    pub mean: T,
    pub n_sig_neg_5: usize,
    pub n_sig_neg_10: usize,
    pub n_sig_pos_5: usize,
    pub n_sig_pos_10: usize,
}

/// Per-stock regressions of one equation and their cross-sectional summary.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelRegressionSummary<T> {
    /// Sorted by stock id.
    pub per_stock: Vec<StockRegression<T>>,
    pub failures: Vec<StockFailure>,
    pub coefficients: Vec<CoefSummary<T>>,
    /// `None` when no stock could be estimated.
    pub mean_r_squared: Option<T>,
}

impl<T: Scalar> PanelRegressionSummary<T> {
    pub fn coefficient(&self, name: &str) -> Option<&CoefSummary<T>> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    pub fn n_stocks(&self) -> usize {
        self.per_stock.len()
    }
}

/// Significance counts use two-sided p-values below 5% and 10%, split by the
/// sign of the estimate.
pub fn summarize_panel<T: Scalar>(
    results: BTreeMap<String, Result<RegressionResult<T>, RegressionError>>,
) -> PanelRegressionSummary<T> {
    let mut per_stock = Vec::new();
    let mut failures = Vec::new();
    for (stock_id, outcome) in results {
        match outcome {
            Ok(result) => per_stock.push(StockRegression { stock_id, result }),
            Err(error) => failures.push(StockFailure { stock_id, error }),
        }
    }

    let Some(first) = per_stock.first() else {
        return PanelRegressionSummary {
            per_stock,
            failures,
            coefficients: Vec::new(),
            mean_r_squared: None,
        };
    };
    let n = T::count(per_stock.len());
    let five = T::lit(0.05);
    let ten = T::lit(0.10);
    let coefficients = first
        .result
        .names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let mut summary = CoefSummary {
                name: name.clone(),
                mean: T::zero(),
                n_sig_neg_5: 0,
                n_sig_neg_10: 0,
                n_sig_pos_5: 0,
                n_sig_pos_10: 0,
            };
            let mut sum = T::zero();
            for s in &per_stock {
                let est = s.result.estimates[i];
                let p = s.result.p_values[i];
                sum = sum + est;
                if est < T::zero() {
                    summary.n_sig_neg_5 += usize::from(p < five);
                    summary.n_sig_neg_10 += usize::from(p < ten);
                } else if est > T::zero() {
                    summary.n_sig_pos_5 += usize::from(p < five);
                    summary.n_sig_pos_10 += usize::from(p < ten);
                }
            }
            summary.mean = sum / n;
            summary
        })
        .collect();
    let r2 = per_stock
        .iter()
        .fold(T::zero(), |s, r| s + r.result.r_squared)
        / n;

    PanelRegressionSummary {
        per_stock,
        failures,
        coefficients,
        mean_r_squared: Some(r2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(est: [f64; 2], p: [f64; 2], r2: f64) -> RegressionResult<f64> {
        RegressionResult {
            names: vec!["a".into(), "b".into()],
            estimates: est.to_vec(),
            std_errors: vec![1.0; 2],
            t_stats: est.to_vec(),
            p_values: p.to_vec(),
            r_squared: r2,
            rss: 1.0,
            n_obs: 10,
        }
    }

    #[test]
    fn counts_and_means() {
        let mut m = BTreeMap::new();
        m.insert("A".to_string(), Ok(result([-1.0, 2.0], [0.01, 0.07], 0.2)));
        m.insert("B".to_string(), Ok(result([-3.0, 4.0], [0.2, 0.001], 0.4)));
        m.insert(
            "C".to_string(),
            Err(RegressionError::TooFewObservations {
                n_obs: 1,
                n_coef: 2,
            }),
        );
        let s = summarize_panel(m);
        assert_eq!(s.n_stocks(), 2);
        assert_eq!(s.failures.len(), 1);
        let a = s.coefficient("a").unwrap();
        assert_eq!(a.mean, -2.0);
        assert_eq!(
            (a.n_sig_neg_5, a.n_sig_neg_10, a.n_sig_pos_5, a.n_sig_pos_10),
            (1, 1, 0, 0)
        );
        let b = s.coefficient("b").unwrap();
        assert_eq!(
            (b.n_sig_neg_5, b.n_sig_neg_10, b.n_sig_pos_5, b.n_sig_pos_10),
            (0, 0, 1, 2)
        );
        assert!((s.mean_r_squared.unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn empty_summary() {
        let s = summarize_panel::<f64>(BTreeMap::new());
        assert!(s.coefficients.is_empty());
        assert_eq!(s.mean_r_squared, None);
    }
}
