//! CSV ingestion for book snapshots and trades.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::lob_model::{
    BookSnapshot, IntervalWindow, SessionLayout, SnapshotError, WindowKey, LEVELS,
};

pub const SNAPSHOT_HEADER: [&str; 23] = [
    "stock_id",
    "day_id",
    "ts_sec",
    "bid_px_1",
    "bid_px_2",
    "bid_px_3",
    "bid_px_4",
    "bid_px_5",
    "bid_qty_1",
    "bid_qty_2",
    "bid_qty_3",
    "bid_qty_4",
    "bid_qty_5",
    "ask_px_1",
    "ask_px_2",
    "ask_px_3",
    "ask_px_4",
    "ask_px_5",
    "ask_qty_1",
    "ask_qty_2",
    "ask_qty_3",
    "ask_qty_4",
    "ask_qty_5",
];

pub const TRADE_HEADER: [&str; 6] = [
    "stock_id",
    "day_id",
    "ts_sec",
    "price",
    "volume",
    "aggressor_side",
];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("bad header: expected `{expected}`, found `{found}`")]
    BadHeader { expected: String, found: String },
    #[error("line {line}: unknown aggressor side `{value}`")]
    UnknownSide { line: u64, value: String },
    #[error("line {line}: cannot parse field `{field}`")]
    TradeParse { line: u64, field: &'static str },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Why a snapshot row was not accepted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RejectReason {
    Parse(&'static str),
    WrongFieldCount(usize),
    OutOfSession,
    Invalid(SnapshotError),
}

impl RejectReason {
    pub fn code(&self) -> String {
        match self {
            RejectReason::Parse(field) => format!("ParseFailure({field})"),
            RejectReason::WrongFieldCount(n) => format!("WrongFieldCount({n})"),
            RejectReason::OutOfSession => "OutOfSession".to_owned(),
            RejectReason::Invalid(e) => e.code().to_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    /// 1-based line number in the file (the header is line 1).
    pub line: u64,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IngestReport {
    pub total_rows: usize,
    pub accepted: usize,
    pub rejections: Vec<Rejection>,
}

fn open(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => IngestError::FileNotFound(path.to_owned()),
        _ => IngestError::Io(e),
    })
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<(), IngestError> {
    if found.iter().map(str::trim).eq(expected.iter().copied()) {
        Ok(())
    } else {
        Err(IngestError::BadHeader {
            expected: expected.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        })
    }
}

fn parse_row(
    row: &csv::StringRecord,
    layout: &SessionLayout,
) -> Result<BookSnapshot<f64>, RejectReason> {
    if row.len() != SNAPSHOT_HEADER.len() {
        return Err(RejectReason::WrongFieldCount(row.len()));
    }
    let field = |i: usize| row[i].trim();
    let price = |i: usize| -> Result<f64, RejectReason> {
        field(i)
            .parse::<f64>()
            .map_err(|_| RejectReason::Parse(SNAPSHOT_HEADER[i]))
    };
    let qty = |i: usize| -> Result<f64, RejectReason> {
        field(i)
            .parse::<u64>()
            .map(|q| q as f64)
            .map_err(|_| RejectReason::Parse(SNAPSHOT_HEADER[i]))
    };
    let ladder = |start: usize, f: &dyn Fn(usize) -> Result<f64, RejectReason>| {
        let mut out = [0.0; LEVELS];
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = f(start + k)?;
        }
        Ok::<_, RejectReason>(out)
    };

    let stock_id = field(0);
    if stock_id.is_empty() {
        return Err(RejectReason::Parse("stock_id"));
    }
    let day_id = field(1)
        .parse::<u32>()
        .map_err(|_| RejectReason::Parse("day_id"))?;
    let ts = price(2)?;
    let bid_px = ladder(3, &price)?;
    let bid_qty = ladder(8, &qty)?;
    let ask_px = ladder(13, &price)?;
    let ask_qty = ladder(18, &qty)?;
    let snapshot = BookSnapshot::new(stock_id, day_id, ts, bid_px, bid_qty, ask_px, ask_qty)
        .map_err(RejectReason::Invalid)?;
    if layout.interval_of(ts).is_none() {
        return Err(RejectReason::OutOfSession);
    }
    Ok(snapshot)
}

/// Parses snapshot CSV, rejecting invalid rows individually. Accepted
/// snapshots are returned sorted by (stock, day, timestamp).
pub fn read_snapshots<R: Read>(
    reader: R,
    layout: &SessionLayout,
) -> Result<(Vec<BookSnapshot<f64>>, IngestReport), IngestError> {
    let mut csv = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    check_header(csv.headers()?, &SNAPSHOT_HEADER)?;

    let mut snapshots = Vec::new();
    let mut report = IngestReport::default();
    let mut row = csv::StringRecord::new();
    let mut line = 1;
    while csv.read_record(&mut row)? {
        line += 1;
        report.total_rows += 1;
        match parse_row(&row, layout) {
            Ok(s) => snapshots.push(s),
            Err(reason) => report.rejections.push(Rejection { line, reason }),
        }
    }
    report.accepted = snapshots.len();
    snapshots.sort_by(|a, b| {
        (a.stock_id(), a.day_id())
            .cmp(&(b.stock_id(), b.day_id()))
            .then(a.ts_sec().total_cmp(&b.ts_sec()))
    });
    Ok((snapshots, report))
}

pub fn ingest_snapshots(
    path: &Path,
    layout: &SessionLayout,
) -> Result<(Vec<BookSnapshot<f64>>, IngestReport), IngestError> {
    read_snapshots(open(path)?, layout)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggressor {
    Buy,
    Sell,
}

impl Aggressor {
    pub fn as_str(self) -> &'static str {
        match self {
            Aggressor::Buy => "buy",
            Aggressor::Sell => "sell",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trade {
    pub stock_id: String,
    pub day_id: u32,
    pub ts_sec: f64,
    pub price: f64,
    pub volume: f64,
    pub aggressor: Aggressor,
}

/// Parses a trades CSV. Any malformed row fails the whole file.
pub fn read_trades<R: Read>(reader: R) -> Result<Vec<Trade>, IngestError> {
    let mut csv = csv::ReaderBuilder::new().from_reader(reader);
    check_header(csv.headers()?, &TRADE_HEADER)?;
    let mut trades = Vec::new();
    let mut row = csv::StringRecord::new();
    let mut line = 1;
    while csv.read_record(&mut row)? {
        line += 1;
        let parse_f = |i: usize| -> Result<f64, IngestError> {
            row[i]
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or(IngestError::TradeParse {
                    line,
                    field: TRADE_HEADER[i],
                })
        };
        let aggressor = match row[5].trim() {
            "buy" => Aggressor::Buy,
            "sell" => Aggressor::Sell,
            other => {
                return Err(IngestError::UnknownSide {
                    line,
                    value: other.to_owned(),
                })
            }
        };
        let volume = parse_f(4)?;
        if volume < 0.0 {
            return Err(IngestError::TradeParse {
                line,
                field: "volume",
            });
        }
        trades.push(Trade {
            stock_id: row[0].trim().to_owned(),
            day_id: row[1].trim().parse().map_err(|_| IngestError::TradeParse {
                line,
                field: "day_id",
            })?,
            ts_sec: parse_f(2)?,
            price: parse_f(3)?,
            volume,
            aggressor,
        });
    }
    Ok(trades)
}

pub fn ingest_trades(path: &Path) -> Result<Vec<Trade>, IngestError> {
    read_trades(open(path)?)
}

/// Aggressor (buy, sell) volume per window. Windows without trades get
/// (0, 0); a trade on a boundary belongs to the later window.
pub fn aggregate_flows<T>(
    trades: &[Trade],
    windows: &[IntervalWindow<T>],
    layout: &SessionLayout,
) -> BTreeMap<WindowKey, (f64, f64)> {
    let mut flows: BTreeMap<WindowKey, (f64, f64)> = windows
        .iter()
        .map(|w| (w.key.clone(), (0.0, 0.0)))
        .collect();
    for trade in trades {
        let Some(t) = layout.interval_of(trade.ts_sec) else {
            continue;
        };
        let key = WindowKey::new(trade.stock_id.clone(), trade.day_id, t);
        if let Some(flow) = flows.get_mut(&key) {
            match trade.aggressor {
                Aggressor::Buy => flow.0 += trade.volume,
                Aggressor::Sell => flow.1 += trade.volume,
            }
        }
    }
    flows
}

pub fn assemble_trades<T>(
    path: &Path,
    windows: &[IntervalWindow<T>],
    layout: &SessionLayout,
) -> Result<BTreeMap<WindowKey, (f64, f64)>, IngestError> {
    Ok(aggregate_flows(&ingest_trades(path)?, windows, layout))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "stock_id,day_id,ts_sec,bid_px_1,bid_px_2,bid_px_3,bid_px_4,bid_px_5,bid_qty_1,bid_qty_2,bid_qty_3,bid_qty_4,bid_qty_5,ask_px_1,ask_px_2,ask_px_3,ask_px_4,ask_px_5,ask_qty_1,ask_qty_2,ask_qty_3,ask_qty_4,ask_qty_5";

    fn row(ts: f64, bid: [&str; 5], ask: [&str; 5]) -> String {
        format!(
            "S1,20110104,{ts},{},100,200,300,400,500,{},100,200,300,400,500",
            bid.join(","),
            ask.join(",")
        )
    }

    const BID: [&str; 5] = ["10.00", "9.99", "9.98", "9.97", "9.96"];
    const ASK: [&str; 5] = ["10.01", "10.02", "10.03", "10.04", "10.05"];

    #[test]
    fn clean_rows_are_sorted() {
        let body: Vec<String> = (0..1000)
            .rev()
            .map(|i| row(i as f64 * 10.0, BID, ASK))
            .collect();
        let csv = format!("{HEADER}\n{}\n", body.join("\n"));
        let (snaps, report) = read_snapshots(csv.as_bytes(), &SessionLayout::default()).unwrap();
        assert_eq!(snaps.len(), 1000);
        assert_eq!(report.total_rows, 1000);
        assert!(report.rejections.is_empty());
        assert!(snaps.windows(2).all(|w| w[0].ts_sec() < w[1].ts_sec()));
    }

    #[test]
    fn invalid_rows_are_rejected_with_reason() {
        let rows = [
            row(0.0, BID, ASK),
            row(10.0, ["10.00", "10.01", "9.98", "9.97", "9.96"], ASK),
            row(20.0, ["10.01", "9.99", "9.98", "9.97", "9.96"], ASK),
            row(30.0, BID, ["10.01", "10.02", "x", "10.04", "10.05"]),
            row(99999.0, BID, ASK),
            "S1,20110104,40,10".to_owned(),
        ];
        let csv = format!("{HEADER}\n{}\n", rows.join("\n"));
        let (snaps, report) = read_snapshots(csv.as_bytes(), &SessionLayout::default()).unwrap();
        assert_eq!(snaps.len(), 1);
        let codes: Vec<(u64, String)> = report
            .rejections
            .iter()
            .map(|r| (r.line, r.reason.code()))
            .collect();
        assert_eq!(
            codes,
            vec![
                (3, "NonMonotoneBid".to_owned()),
                (4, "CrossedBook".to_owned()),
                (5, "ParseFailure(ask_px_3)".to_owned()),
                (6, "OutOfSession".to_owned()),
                (7, "WrongFieldCount(4)".to_owned()),
            ]
        );
        assert_eq!(report.accepted + report.rejections.len(), report.total_rows);
    }

    #[test]
    fn header_and_missing_file() {
        let err = read_snapshots("a,b\n".as_bytes(), &SessionLayout::default()).unwrap_err();
        assert!(matches!(err, IngestError::BadHeader { .. }));
        let err = ingest_snapshots(Path::new("/nonexistent/x.csv"), &SessionLayout::default())
            .unwrap_err();
        assert!(matches!(err, IngestError::FileNotFound(_)));
    }

    #[test]
    fn trade_flows_follow_half_open_windows() {
        let csv = "stock_id,day_id,ts_sec,price,volume,aggressor_side\n\
                   S1,1,10,10.01,100,buy\n\
                   S1,1,20.5,10.01,40,buy\n\
                   S1,1,299.9,10.00,30,sell\n\
                   S1,1,300,10.00,7,sell\n";
        let trades = read_trades(csv.as_bytes()).unwrap();
        let windows: Vec<IntervalWindow<f64>> = (1..=3)
            .map(|t| IntervalWindow {
                key: WindowKey::new("S1", 1, t),
                snapshots: Vec::new(),
            })
            .collect();
        let flows = aggregate_flows(&trades, &windows, &SessionLayout::default());
        assert_eq!(flows[&WindowKey::new("S1", 1, 1)], (140.0, 30.0));
        assert_eq!(flows[&WindowKey::new("S1", 1, 2)], (0.0, 7.0));
        assert_eq!(flows[&WindowKey::new("S1", 1, 3)], (0.0, 0.0));
    }

    #[test]
    fn unknown_side_fails() {
        let csv = "stock_id,day_id,ts_sec,price,volume,aggressor_side\nS1,1,10,10.01,100,hold\n";
        assert!(matches!(
            read_trades(csv.as_bytes()),
            Err(IngestError::UnknownSide { line: 2, .. })
        ));
        assert!(matches!(
            read_trades("x\n".as_bytes()),
            Err(IngestError::BadHeader { .. })
        ));
    }
}
