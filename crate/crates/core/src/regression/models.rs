//! The three panel equations estimated stock by stock.

use std::collections::BTreeMap;

use crate::lob_model::Side;
use crate::regression::{ols, summarize_panel, Design, PanelRegressionSummary, RegressionError};
use crate::scalar::Scalar;
use crate::timeseries::{DaySeries, IntervalRecord};

/// Stocks with fewer within-day kappa pairs than this are not estimated.
pub const MIN_KAPPA_PAIRS: usize = 100;

/// `kappa_t = a + b * kappa_{t-1}` per stock, pooling within-day pairs.
pub fn ar1_kappa<T: Scalar>(kappa: &[DaySeries<T>], min_pairs: usize) -> PanelRegressionSummary<T> {
    let mut pairs: BTreeMap<&str, (Vec<T>, Vec<T>)> = BTreeMap::new();
    let mut ordered: Vec<&DaySeries<T>> = kappa.iter().collect();
    ordered.sort_by(|a, b| (&a.stock_id, a.day_id).cmp(&(&b.stock_id, b.day_id)));
    for s in ordered {
        let (y, x) = pairs.entry(s.stock_id.as_str()).or_default();
        for t in 1..s.values.len() {
            if let (Some(now), Some(prev)) = (s.values[t], s.values[t - 1]) {
                y.push(now);
                x.push(prev);
            }
        }
    }
    let results = pairs
        .into_iter()
        .map(|(stock, (y, x))| {
            let outcome = if y.len() < min_pairs {
                Err(RegressionError::TooFewObservations {
                    n_obs: y.len(),
                    n_coef: 2,
                })
            } else {
                ols(&y, &Design::with_intercept("a").column("b", x))
            };
            (stock.to_owned(), outcome)
        })
        .collect();
    summarize_panel(results)
}

/// Records of one stock grouped by day, indexed by `t - 1`.
type DayGrid<'a, T> = Vec<Vec<Option<&'a IntervalRecord<T>>>>;

fn by_stock_and_day<T: Scalar>(records: &[IntervalRecord<T>]) -> BTreeMap<&str, DayGrid<'_, T>> {
    let mut days: BTreeMap<(&str, u32), Vec<Option<&IntervalRecord<T>>>> = BTreeMap::new();
    for r in records {
        let idx = usize::from(r.key.t) - 1;
        let slots = days
            .entry((r.key.stock_id.as_str(), r.key.day_id))
            .or_default();
        if slots.len() <= idx {
            slots.resize(idx + 1, None);
        }
        slots[idx] = Some(r);
    }
    let mut stocks: BTreeMap<&str, DayGrid<'_, T>> = BTreeMap::new();
    for ((stock, _), slots) in days {
        stocks.entry(stock).or_default().push(slots);
    }
    stocks
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DynamicsConfig {
    /// Use `r_{t-1}` and `G_{t-1}` instead of the contemporaneous values.
    pub lag_exogenous: bool,
}

/// Per stock:
/// `log c_t = alpha + beta log c_{t-1} + gamma kappa_{t-1} + lambda r_t + eta G_t`,
/// with `kappa_{t-1} = log c_{t-1} - log c_{t-2}`, all within one day.
pub fn dynamic_adjustment<T: Scalar>(
    records: &[IntervalRecord<T>],
    side: Side,
    config: &DynamicsConfig,
) -> PanelRegressionSummary<T> {
    let results = by_stock_and_day(records)
        .into_iter()
        .map(|(stock, days)| {
            let mut y = Vec::new();
            let mut cols: [Vec<T>; 4] = Default::default();
            for day in &days {
                for t in 2..day.len() {
                    let (Some(now), Some(prev), Some(prev2)) = (day[t], day[t - 1], day[t - 2])
                    else {
                        continue;
                    };
                    let (Some(lc), Some(lc1), Some(lc2)) = (
                        now.log_exponent(side),
                        prev.log_exponent(side),
                        prev2.log_exponent(side),
                    ) else {
                        continue;
                    };
                    let exog = if config.lag_exogenous { prev } else { now };
                    let Some(r) = exog.r else {
                        continue;
                    };
                    y.push(lc);
                    cols[0].push(lc1);
                    cols[1].push(lc1 - lc2);
                    cols[2].push(r);
                    cols[3].push(exog.g);
                }
            }
            let [c0, c1, c2, c3] = cols;
            let design = Design::with_intercept("alpha")
                .column("beta", c0)
                .column("gamma", c1)
                .column("lambda", c2)
                .column("eta", c3);
            (stock.to_owned(), ols(&y, &design))
        })
        .collect();
    summarize_panel(results)
}

/// Return implied by executing the window's aggressor volume against a static
/// fitted book: `W_ask * V_buy^c_ask - W_bid * V_sell^c_bid`.
///
/// Zero volume contributes nothing.
pub fn book_return<T: Scalar>(record: &IntervalRecord<T>) -> Result<T, RegressionError> {
    let (Some(buy), Some(sell)) = (record.v_buy, record.v_sell) else {
        return Err(RegressionError::MissingVolumes);
    };
    if buy < T::zero() || sell < T::zero() {
        return Err(RegressionError::NegativeVolume);
    }
    if record.c_bid < T::zero() || record.c_ask < T::zero() {
        return Err(RegressionError::DegenerateEstimate);
    }
    let impact = |scale: T, volume: T, exponent: T| {
        if volume == T::zero() {
            T::zero()
        } else {
            scale * volume.powf(exponent)
        }
    };
    Ok(impact(record.w_ask, buy, record.c_ask) - impact(record.w_bid, sell, record.c_bid))
}

/// Per stock: `log p_t = alpha + beta log p_{t-1} + gamma r_book_{t-1} + lambda r_{t-1}`,
/// with `p` the window-mean mid.
pub fn price_discovery<T: Scalar>(records: &[IntervalRecord<T>]) -> PanelRegressionSummary<T> {
    let results = by_stock_and_day(records)
        .into_iter()
        .map(|(stock, days)| {
            let mut y = Vec::new();
            let mut cols: [Vec<T>; 3] = Default::default();
            for day in &days {
                for t in 1..day.len() {
                    let (Some(now), Some(prev)) = (day[t], day[t - 1]) else {
                        continue;
                    };
                    let (Ok(rb), Some(r)) = (book_return(prev), prev.r) else {
                        continue;
                    };
                    y.push(now.mid.ln());
                    cols[0].push(prev.mid.ln());
                    cols[1].push(rb);
                    cols[2].push(r);
                }
            }
            let [c0, c1, c2] = cols;
            let design = Design::with_intercept("alpha")
                .column("beta", c0)
                .column("gamma", c1)
                .column("lambda", c2);
            (stock.to_owned(), ols(&y, &design))
        })
        .collect();
    summarize_panel(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lob_model::WindowKey;

    fn record(t: u16, w: (f64, f64), c: (f64, f64), v: Option<(f64, f64)>) -> IntervalRecord<f64> {
        IntervalRecord {
            key: WindowKey::new("S", 1, t),
            c_bid: c.0,
            c_ask: c.1,
            w_bid: w.0,
            w_ask: w.1,
            mid: 10.0,
            r: None,
            g: 0.0,
            v_buy: v.map(|x| x.0),
            v_sell: v.map(|x| x.1),
        }
    }

    #[test]
    fn book_return_cases() {
        let sym = record(1, (2e-4, 2e-4), (0.7, 0.7), Some((300.0, 300.0)));
        assert_eq!(book_return(&sym).unwrap(), 0.0);

        // 1e-4 * 100 - 1e-4 * 50 = 0.005
        let r = record(1, (1e-4, 1e-4), (1.0, 1.0), Some((100.0, 50.0)));
        assert!((book_return(&r).unwrap() - 0.005).abs() < 1e-15);

        let zero = record(1, (1e-4, 3e-4), (0.5, 0.9), Some((0.0, 0.0)));
        assert_eq!(book_return(&zero).unwrap(), 0.0);

        let none = record(1, (1e-4, 1e-4), (1.0, 1.0), None);
        assert_eq!(book_return(&none), Err(RegressionError::MissingVolumes));

        let degenerate = record(1, (1e-4, 1e-4), (-0.2, 1.0), Some((1.0, 1.0)));
        assert_eq!(
            book_return(&degenerate),
            Err(RegressionError::DegenerateEstimate)
        );
    }

    #[test]
    fn book_return_is_antisymmetric() {
        let r = record(1, (3e-5, 7e-5), (0.4, 0.9), Some((1200.0, 800.0)));
        let swapped = record(1, (7e-5, 3e-5), (0.9, 0.4), Some((800.0, 1200.0)));
        assert_eq!(book_return(&r).unwrap(), -book_return(&swapped).unwrap());
    }

    #[test]
    fn ar1_requires_enough_pairs() {
        let s = DaySeries {
            stock_id: "S".into(),
            day_id: 1,
            values: (0..20).map(|i| Some((i as f64).sin())).collect(),
        };
        let summary = ar1_kappa(&[s], MIN_KAPPA_PAIRS);
        assert_eq!(summary.n_stocks(), 0);
        assert!(matches!(
            summary.failures[0].error,
            RegressionError::TooFewObservations { n_obs: 19, .. }
        ));
    }

    #[test]
    fn constant_book_return_is_rank_deficient() {
        let mut records = Vec::new();
        for t in 1..=48u16 {
            let mut r = record(t, (1e-4, 1e-4), (0.8, 0.8), Some((100.0, 100.0)));
            r.mid = 10.0 + (f64::from(t) * 0.37).sin();
            r.r = (t > 1).then(|| (f64::from(t) * 1.3).cos() * 1e-3);
            records.push(r);
        }
        let s = price_discovery(&records);
        assert_eq!(s.n_stocks(), 0);
        assert!(
            matches!(s.failures[0].error, RegressionError::RankDeficient(ref n) if n == "gamma")
        );
    }
}
