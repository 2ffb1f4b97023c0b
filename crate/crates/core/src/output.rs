//! CSV serialization with a fixed column order. Computed floats are written
//! with 17 significant digits; generated input files use the shortest
//! representation that round-trips.

use std::io;

use crate::convexity::{ConvexityPanel, Gap, LogConvexitySummary};
use crate::ingest::{IngestReport, Trade, SNAPSHOT_HEADER, TRADE_HEADER};
use crate::lob_model::{BookSnapshot, Side};
use crate::regression::PanelRegressionSummary;
use crate::synthetic::TruthRow;
use crate::timeseries::{AcfCurve, IntervalRecord, IntradayProfile, LongMemoryFit};

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new<I: IntoIterator<Item = S>, S: AsRef<[u8]>>(header: I) -> io::Result<Self> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header)?;
        Ok(Self { writer })
    }

    fn row<I: IntoIterator<Item = S>, S: AsRef<[u8]>>(&mut self, fields: I) -> io::Result<()> {
        Ok(self.writer.write_record(fields)?)
    }

    fn finish(self) -> io::Result<Vec<u8>> {
        self.writer.into_inner().map_err(|e| e.into_error())
    }
}

pub fn snapshots_csv(snapshots: &[BookSnapshot<f64>]) -> io::Result<Vec<u8>> {
    let mut table = Table::new(SNAPSHOT_HEADER)?;
    for s in snapshots {
        let mut fields = vec![
            s.stock_id().to_owned(),
            s.day_id().to_string(),
            s.ts_sec().to_string(),
        ];
        for side in Side::BOTH {
            fields.extend(s.quotes(side).iter().map(f64::to_string));
            fields.extend(s.depths(side).iter().map(f64::to_string));
        }
        table.row(&fields)?;
    }
    table.finish()
}

pub fn trades_csv(trades: &[Trade]) -> io::Result<Vec<u8>> {
    let mut table = Table::new(TRADE_HEADER)?;
    for t in trades {
        table.row([
            t.stock_id.clone(),
            t.day_id.to_string(),
            t.ts_sec.to_string(),
            t.price.to_string(),
            t.volume.to_string(),
            t.aggressor.as_str().to_owned(),
        ])?;
    }
    table.finish()
}

pub fn truth_csv(rows: &[TruthRow]) -> io::Result<Vec<u8>> {
    let mut table = Table::new(["stock_id", "day_id", "t", "side", "true_W", "true_c"])?;
    for r in rows {
        table.row([
            r.key.stock_id.clone(),
            r.key.day_id.to_string(),
            r.key.t.to_string(),
            r.side.as_str().to_owned(),
            fmt_f64(r.scale),
            fmt_f64(r.exponent),
        ])?;
    }
    table.finish()
}

pub fn records_csv(records: &[IntervalRecord<f64>]) -> io::Result<Vec<u8>> {
    let mut table = Table::new([
        "stock_id", "day_id", "t", "c_bid", "c_ask", "W_bid", "W_ask", "mid", "r", "G", "v_buy",
        "v_sell",
    ])?;
    for r in records {
        table.row([
            r.key.stock_id.clone(),
            r.key.day_id.to_string(),
            r.key.t.to_string(),
            fmt_f64(r.c_bid),
            fmt_f64(r.c_ask),
            fmt_f64(r.w_bid),
            fmt_f64(r.w_ask),
            fmt_f64(r.mid),
            fmt_opt(r.r),
            fmt_f64(r.g),
            fmt_opt(r.v_buy),
            fmt_opt(r.v_sell),
        ])?;
    }
    table.finish()
}

pub fn panel_csv(panel: &ConvexityPanel<f64>) -> io::Result<Vec<u8>> {
    let mut table = Table::new([
        "stock_id",
        "day_id",
        "t",
        "side",
        "W",
        "c",
        "rho",
        "r_squared",
        "n_points",
        "degenerate",
    ])?;
    for e in &panel.estimates {
        table.row([
            e.key.stock_id.clone(),
            e.key.day_id.to_string(),
            e.key.t.to_string(),
            e.side.as_str().to_owned(),
            fmt_f64(e.scale),
            fmt_f64(e.exponent),
            fmt_f64(e.rho),
            fmt_f64(e.r_squared),
            e.n_points.to_string(),
            e.degenerate.to_string(),
        ])?;
    }
    table.finish()
}

pub fn gaps_csv(gaps: &[Gap]) -> io::Result<Vec<u8>> {
    let mut table = Table::new(["stock_id", "day_id", "t", "side", "reason"])?;
    for g in gaps {
        table.row([
            g.key.stock_id.as_str(),
            &g.key.day_id.to_string(),
            &g.key.t.to_string(),
            g.side.map_or("both", Side::as_str),
            g.reason.as_str(),
        ])?;
    }
    table.finish()
}

pub fn rejections_csv(report: &IngestReport) -> io::Result<Vec<u8>> {
    let mut table = Table::new(["line", "reason"])?;
    for r in &report.rejections {
        table.row([r.line.to_string(), r.reason.code()])?;
    }
    table.finish()
}

pub fn summary_csv(summary: &LogConvexitySummary<f64>) -> io::Result<Vec<u8>> {
    let mut table = Table::new([
        "statistic",
        "n",
        "mean",
        "std_dev",
        "median",
        "min",
        "max",
        "p_value",
    ])?;
    for r in &summary.rows {
        table.row([
            r.label.to_owned(),
            r.n.to_string(),
            fmt_f64(r.mean),
            fmt_f64(r.std_dev),
            fmt_f64(r.median),
            fmt_f64(r.min),
            fmt_f64(r.max),
            fmt_opt(r.p_value),
        ])?;
    }
    table.finish()
}

pub fn acf_csv(curve: &AcfCurve<f64>) -> io::Result<Vec<u8>> {
    let mut table = Table::new(["lag", "value", "n_series", "std_error"])?;
    for p in &curve.points {
        table.row([
            p.lag.to_string(),
            fmt_f64(p.value),
            p.n_contributing.to_string(),
            fmt_opt(p.std_error),
        ])?;
    }
    table.finish()
}

/// One row per named ACF; failed fits keep their error message.
pub fn long_memory_csv(
    fits: &[(String, Result<LongMemoryFit<f64>, String>)],
) -> io::Result<Vec<u8>> {
    let mut table = Table::new([
        "series",
        "alpha",
        "beta",
        "a",
        "b",
        "r_squared",
        "lags_used",
        "lags_dropped",
        "long_memory",
        "error",
    ])?;
    for (name, fit) in fits {
        match fit {
            Ok(f) => table.row([
                name.clone(),
                fmt_f64(f.alpha),
                fmt_f64(f.beta),
                fmt_f64(f.a),
                fmt_f64(f.b),
                fmt_f64(f.r_squared),
                f.lags_used.to_string(),
                f.lags_dropped.to_string(),
                f.long_memory().to_string(),
                String::new(),
            ])?,
            Err(e) => {
                let mut fields = vec![name.clone()];
                fields.extend(std::iter::repeat_n(String::new(), 8));
                fields.push(e.clone());
                table.row(fields)?
            }
        }
    }
    table.finish()
}

pub fn profile_csv(profile: &IntradayProfile<f64>) -> io::Result<Vec<u8>> {
    let mut table = Table::new(["t", "value"])?;
    for (i, v) in profile.values.iter().enumerate() {
        table.row([(i + 1).to_string(), fmt_f64(*v)])?;
    }
    table.finish()
}

/// Cross-stock summary: one row per coefficient, then a mean R² row.
pub fn regression_summary_csv(summary: &PanelRegressionSummary<f64>) -> io::Result<Vec<u8>> {
    let mut table = Table::new([
        "coefficient",
        "mean",
        "n_sig_neg_5",
        "n_sig_neg_10",
        "n_sig_pos_5",
        "n_sig_pos_10",
        "n_stocks",
        "n_failed",
    ])?;
    let n = summary.n_stocks().to_string();
    let failed = summary.failures.len().to_string();
    for c in &summary.coefficients {
        table.row([
            c.name.clone(),
            fmt_f64(c.mean),
            c.n_sig_neg_5.to_string(),
            c.n_sig_neg_10.to_string(),
            c.n_sig_pos_5.to_string(),
            c.n_sig_pos_10.to_string(),
            n.clone(),
            failed.clone(),
        ])?;
    }
    table.row([
        "R2".to_owned(),
        fmt_opt(summary.mean_r_squared),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        n,
        failed,
    ])?;
    table.finish()
}

/// Per-stock estimates, one row per coefficient; failed stocks get one row
/// carrying the error.
pub fn regression_detail_csv(summary: &PanelRegressionSummary<f64>) -> io::Result<Vec<u8>> {
    let mut table = Table::new([
        "stock_id",
        "coefficient",
        "estimate",
        "std_error",
        "t_stat",
        "p_value",
        "r_squared",
        "n_obs",
        "error",
    ])?;
    for s in &summary.per_stock {
        let r = &s.result;
        for i in 0..r.names.len() {
            table.row([
                s.stock_id.clone(),
                r.names[i].clone(),
                fmt_f64(r.estimates[i]),
                fmt_f64(r.std_errors[i]),
                fmt_f64(r.t_stats[i]),
                fmt_f64(r.p_values[i]),
                fmt_f64(r.r_squared),
                r.n_obs.to_string(),
                String::new(),
            ])?;
        }
    }
    for f in &summary.failures {
        let mut fields = vec![f.stock_id.clone()];
        fields.extend(std::iter::repeat_n(String::new(), 7));
        fields.push(f.error.to_string());
        table.row(fields)?;
    }
    table.finish()
}

pub fn manifest_csv(entries: &[(String, String)]) -> io::Result<Vec<u8>> {
    let mut table = Table::new(["key", "value"])?;
    for (k, v) in entries {
        table.row([k, v])?;
    }
    table.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::read_snapshots;
    use crate::lob_model::SessionLayout;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.5), "-2.5000000000000000e0");
        for x in [std::f64::consts::PI, 1e-300, 123456.789] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn snapshot_csv_round_trips() {
        let s = BookSnapshot::new(
            "S1",
            3,
            20.0,
            [10.0, 9.99, 9.98, 9.97, 9.96],
            [100.0, 200.0, 300.0, 400.0, 500.0],
            [10.01, 10.02, 10.03, 10.04, 10.05],
            [150.0, 250.0, 350.0, 450.0, 550.0],
        )
        .unwrap();
        let bytes = snapshots_csv(std::slice::from_ref(&s)).unwrap();
        let (back, report) = read_snapshots(bytes.as_slice(), &SessionLayout::default()).unwrap();
        assert!(report.rejections.is_empty());
        assert_eq!(back, vec![s]);
    }
}
