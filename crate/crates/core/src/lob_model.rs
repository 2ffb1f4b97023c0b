//! Order-book snapshots, session windowing, and the per-side deviation curves
//! that feed the power-law fit.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::scalar::Scalar;

/// Quote levels recorded per side.
pub const LEVELS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Bid,
    Ask,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Bid, Side::Ask];

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Bid => "bid",
            Side::Ask => "ask",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bid" => Ok(Side::Bid),
            "ask" => Ok(Side::Ask),
            other => Err(format!("unknown side `{other}`")),
        }
    }
}

/// Identifies one (stock, day, interval) cell of the panel. Orders canonically.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WindowKey {
    pub stock_id: String,
    pub day_id: u32,
    /// Interval index, 1-based.
    pub t: u16,
}

impl WindowKey {
    pub fn new(stock_id: impl Into<String>, day_id: u32, t: u16) -> Self {
        Self {
            stock_id: stock_id.into(),
            day_id,
            t,
        }
    }

    /// Key of the preceding interval on the same day, if any.
    pub fn previous(&self) -> Option<WindowKey> {
        (self.t > 1).then(|| WindowKey::new(self.stock_id.clone(), self.day_id, self.t - 1))
    }
}

/// Reasons a snapshot fails validation. The names double as rejection codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SnapshotError {
    #[error("non-finite price or depth")]
    NonFinite,
    #[error("price must be strictly positive")]
    NonPositivePrice,
    #[error("depth must be strictly positive")]
    NonPositiveDepth,
    #[error("bid quotes must strictly decrease away from the best bid")]
    NonMonotoneBid,
    #[error("ask quotes must strictly increase away from the best ask")]
    NonMonotoneAsk,
    #[error("best bid must be below best ask")]
    CrossedBook,
}

impl SnapshotError {
    pub fn code(self) -> &'static str {
        match self {
            SnapshotError::NonFinite => "NonFinite",
            SnapshotError::NonPositivePrice => "NonPositivePrice",
            SnapshotError::NonPositiveDepth => "NonPositiveDepth",
            SnapshotError::NonMonotoneBid => "NonMonotoneBid",
            SnapshotError::NonMonotoneAsk => "NonMonotoneAsk",
            SnapshotError::CrossedBook => "CrossedBook",
        }
    }
}

/// Validated five-level two-sided book observation.
#[derive(Debug, Clone, PartialEq)]
pub struct BookSnapshot<T> {
    stock_id: String,
    day_id: u32,
    ts_sec: f64,
    bid_quotes: [T; LEVELS],
    bid_depths: [T; LEVELS],
    ask_quotes: [T; LEVELS],
    ask_depths: [T; LEVELS],
}

impl<T: Scalar> BookSnapshot<T> {
    /// Builds a snapshot, enforcing positivity, per-side monotonicity, and an
    /// uncrossed top of book. Quotes are ordered from the best level outward.
    pub fn new(
        stock_id: impl Into<String>,
        day_id: u32,
        ts_sec: f64,
        bid_quotes: [T; LEVELS],
        bid_depths: [T; LEVELS],
        ask_quotes: [T; LEVELS],
        ask_depths: [T; LEVELS],
    ) -> Result<Self, SnapshotError> {
        let all = bid_quotes
            .iter()
            .chain(&bid_depths)
            .chain(&ask_quotes)
            .chain(&ask_depths);
        if !ts_sec.is_finite() || all.clone().any(|v| !v.is_finite()) {
            return Err(SnapshotError::NonFinite);
        }
        if bid_quotes
            .iter()
            .chain(&ask_quotes)
            .any(|&q| q <= T::zero())
        {
            return Err(SnapshotError::NonPositivePrice);
        }
        if bid_depths
            .iter()
            .chain(&ask_depths)
            .any(|&d| d <= T::zero())
        {
            return Err(SnapshotError::NonPositiveDepth);
        }
        if bid_quotes.windows(2).any(|w| w[1] >= w[0]) {
            return Err(SnapshotError::NonMonotoneBid);
        }
        if ask_quotes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SnapshotError::NonMonotoneAsk);
        }
        if bid_quotes[0] >= ask_quotes[0] {
            return Err(SnapshotError::CrossedBook);
        }
        Ok(Self {
            stock_id: stock_id.into(),
            day_id,
            ts_sec,
            bid_quotes,
            bid_depths,
            ask_quotes,
            ask_depths,
        })
    }

    pub fn stock_id(&self) -> &str {
        &self.stock_id
    }

    pub fn day_id(&self) -> u32 {
        self.day_id
    }

    /// Seconds since the session open on the trading clock.
    pub fn ts_sec(&self) -> f64 {
        self.ts_sec
    }

    pub fn quotes(&self, side: Side) -> &[T; LEVELS] {
        match side {
            Side::Bid => &self.bid_quotes,
            Side::Ask => &self.ask_quotes,
        }
    }

    pub fn depths(&self, side: Side) -> &[T; LEVELS] {
        match side {
            Side::Bid => &self.bid_depths,
            Side::Ask => &self.ask_depths,
        }
    }

    pub fn best_bid(&self) -> T {
        self.bid_quotes[0]
    }

    pub fn best_ask(&self) -> T {
        self.ask_quotes[0]
    }
}

/// Arithmetic mean of best bid and best ask.
pub fn mid_quote<T: Scalar>(snapshot: &BookSnapshot<T>) -> T {
    (snapshot.best_bid() + snapshot.best_ask()) / T::lit(2.0)
}

/// One fit point: cumulative depth and absolute log deviation from the mid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint<T> {
    pub depth: T,
    pub deviation: T,
}

/// Cumulative depth and |log q_i - log mid| for each level of one side.
///
/// Levels quoted exactly at the mid carry no shape information and are dropped.
pub fn side_deviations<T: Scalar>(snapshot: &BookSnapshot<T>, side: Side) -> Vec<CurvePoint<T>> {
    level_points(
        mid_quote(snapshot),
        snapshot.quotes(side),
        snapshot.depths(side),
    )
}

/// Deviation points for a ladder of quotes measured against `mid`.
pub fn level_points<T: Scalar>(mid: T, quotes: &[T], depths: &[T]) -> Vec<CurvePoint<T>> {
    let mut cumulative = T::zero();
    let mut points = Vec::with_capacity(quotes.len());
    for (&quote, &depth) in quotes.iter().zip(depths) {
        cumulative = cumulative + depth;
        // ln(q / mid) evaluated as ln_1p of the relative offset keeps precision
        // for quotes a few ticks from the mid.
        let deviation = ((quote - mid) / mid).ln_1p().abs();
        if deviation > T::zero() {
            points.push(CurvePoint {
                depth: cumulative,
                deviation,
            });
        }
    }
    points
}

/// Intraday clock: two equal sessions cut into fixed-length intervals that are
/// sampled on a fixed snapshot grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionLayout {
    pub interval_sec: f64,
    pub spacing_sec: f64,
    pub session_sec: f64,
    /// Session open times in seconds on the trading clock.
    pub session_opens: [f64; 2],
}

impl Default for SessionLayout {
    fn default() -> Self {
        Self {
            interval_sec: 300.0,
            spacing_sec: 10.0,
            session_sec: 7200.0,
            session_opens: [0.0, 7200.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LayoutError {
    #[error("interval, spacing and session lengths must be positive and finite")]
    NonPositive,
    #[error("interval length {interval} is not a multiple of snapshot spacing {spacing}")]
    SpacingMismatch { interval: f64, spacing: f64 },
    #[error("session length {session} is not a multiple of interval length {interval}")]
    IntervalMismatch { session: f64, interval: f64 },
    #[error("sessions overlap")]
    Overlap,
}

fn is_multiple(whole: f64, part: f64) -> bool {
    let ratio = whole / part;
    ratio >= 1.0 && (ratio - ratio.round()).abs() < 1e-9
}

impl SessionLayout {
    pub fn validate(&self) -> Result<(), LayoutError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.interval_sec)
            || !positive(self.spacing_sec)
            || !positive(self.session_sec)
        {
            return Err(LayoutError::NonPositive);
        }
        if !is_multiple(self.interval_sec, self.spacing_sec) {
            return Err(LayoutError::SpacingMismatch {
                interval: self.interval_sec,
                spacing: self.spacing_sec,
            });
        }
        if !is_multiple(self.session_sec, self.interval_sec) {
            return Err(LayoutError::IntervalMismatch {
                session: self.session_sec,
                interval: self.interval_sec,
            });
        }
        if self.session_opens[1] < self.session_opens[0] + self.session_sec {
            return Err(LayoutError::Overlap);
        }
        Ok(())
    }

    pub fn intervals_per_session(&self) -> usize {
        (self.session_sec / self.interval_sec).round() as usize
    }

    pub fn intervals_per_day(&self) -> usize {
        self.intervals_per_session() * self.session_opens.len()
    }

    pub fn snapshots_per_window(&self) -> usize {
        (self.interval_sec / self.spacing_sec).round() as usize
    }

    /// Start time of interval `t` (1-based).
    pub fn interval_start(&self, t: u16) -> f64 {
        let idx = usize::from(t) - 1;
        let per = self.intervals_per_session();
        self.session_opens[idx / per] + (idx % per) as f64 * self.interval_sec
    }

    /// Interval containing `ts`, using half-open `[start, start + length)` bounds.
    pub fn interval_of(&self, ts: f64) -> Option<u16> {
        let per = self.intervals_per_session();
        for (s, &open) in self.session_opens.iter().enumerate() {
            if ts >= open && ts < open + self.session_sec {
                let idx = (((ts - open) / self.interval_sec).floor() as usize).min(per - 1);
                return Some((s * per + idx + 1) as u16);
            }
        }
        None
    }

    /// Interval and nearest grid slot for `ts`.
    pub fn locate(&self, ts: f64) -> Option<(u16, usize)> {
        let t = self.interval_of(ts)?;
        let offset = ts - self.interval_start(t);
        let slot =
            ((offset / self.spacing_sec).round() as usize).min(self.snapshots_per_window() - 1);
        Some((t, slot))
    }
}

/// All snapshots that fall inside one interval of one stock-day, in grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalWindow<T> {
    pub key: WindowKey,
    pub snapshots: Vec<BookSnapshot<T>>,
}

/// Partitions a snapshot stream into interval windows.
///
/// Every (stock, day) that appears yields all intervals of the day, possibly
/// empty, so that downstream code sees missing windows explicitly. Within a
/// window each snapshot is assigned to its nearest grid slot; when two land in
/// the same slot the later one is kept. Snapshots outside both sessions are
/// ignored. Output is sorted by key.
pub fn assemble_windows<T: Scalar>(
    snapshots: impl IntoIterator<Item = BookSnapshot<T>>,
    layout: &SessionLayout,
) -> Vec<IntervalWindow<T>> {
    let mut ordered: Vec<BookSnapshot<T>> = snapshots.into_iter().collect();
    ordered.sort_by(|a, b| {
        (a.stock_id(), a.day_id())
            .cmp(&(b.stock_id(), b.day_id()))
            .then(a.ts_sec().total_cmp(&b.ts_sec()))
    });

    let per_day = layout.intervals_per_day();
    let slots = layout.snapshots_per_window();
    let mut days: BTreeMap<(String, u32), Vec<Vec<Option<BookSnapshot<T>>>>> = BTreeMap::new();
    for snap in ordered {
        let grid = days
            .entry((snap.stock_id().to_owned(), snap.day_id()))
            .or_insert_with(|| vec![vec![None; slots]; per_day]);
        if let Some((t, slot)) = layout.locate(snap.ts_sec()) {
            grid[usize::from(t) - 1][slot] = Some(snap);
        }
    }

    let mut windows = Vec::with_capacity(days.len() * per_day);
    for ((stock_id, day_id), grid) in days {
        for (idx, slots) in grid.into_iter().enumerate() {
            windows.push(IntervalWindow {
                key: WindowKey::new(stock_id.clone(), day_id, (idx + 1) as u16),
                snapshots: slots.into_iter().flatten().collect(),
            });
        }
    }
    windows
}

/// Gates a window must pass before its curve is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CurveConfig {
    pub min_snapshots: usize,
    pub min_points: usize,
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self {
            min_snapshots: 20,
            min_points: 50,
        }
    }
}

/// Pooled fit points for one side of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct SideCurve<T> {
    pub side: Side,
    pub points: Vec<CurvePoint<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum CurveError {
    #[error("insufficient data: {snapshots} snapshots (min {min_snapshots}), {points} points (min {min_points})")]
    InsufficientData {
        snapshots: usize,
        points: usize,
        min_snapshots: usize,
        min_points: usize,
    },
}

/// Pools the deviation points of every snapshot in the window for one side.
pub fn build_side_curve<T: Scalar>(
    window: &IntervalWindow<T>,
    side: Side,
    config: &CurveConfig,
) -> Result<SideCurve<T>, CurveError> {
    pool_side_curve(
        side,
        window.snapshots.iter().map(|s| side_deviations(s, side)),
        config,
    )
}

/// Concatenates per-snapshot point lists in order and applies the gates.
pub fn pool_side_curve<T: Scalar>(
    side: Side,
    per_snapshot: impl IntoIterator<Item = Vec<CurvePoint<T>>>,
    config: &CurveConfig,
) -> Result<SideCurve<T>, CurveError> {
    let mut snapshots = 0;
    let mut points = Vec::new();
    for pts in per_snapshot {
        snapshots += 1;
        points.extend(pts);
    }
    if snapshots < config.min_snapshots || points.len() < config.min_points {
        return Err(CurveError::InsufficientData {
            snapshots,
            points: points.len(),
            min_snapshots: config.min_snapshots,
            min_points: config.min_points,
        });
    }
    Ok(SideCurve { side, points })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snap(ts: f64, bid: [f64; 5], ask: [f64; 5], depth: [f64; 5]) -> BookSnapshot<f64> {
        BookSnapshot::new("S1", 1, ts, bid, depth, ask, depth).unwrap()
    }

    fn ladder(best_bid: f64, best_ask: f64, step: f64) -> ([f64; 5], [f64; 5]) {
        let bid = std::array::from_fn(|i| best_bid - step * i as f64);
        let ask = std::array::from_fn(|i| best_ask + step * i as f64);
        (bid, ask)
    }

    #[test]
    fn mid_is_arithmetic_mean() {
        let (bid, ask) = ladder(10.00, 10.02, 0.01);
        let s = snap(0.0, bid, ask, [100.0; 5]);
        assert!((mid_quote(&s) - 10.01).abs() < 1e-12);
        let (bid, ask) = ladder(9.98, 10.06, 0.01);
        let s = snap(0.0, bid, ask, [100.0; 5]);
        assert!((mid_quote(&s) - 10.02).abs() < 1e-12);
    }

    #[test]
    fn validation_rejects_bad_books() {
        let (bid, ask) = ladder(10.0, 10.02, 0.01);
        let d = [100.0; 5];
        let mut bad_bid = bid;
        bad_bid[1] = 10.005;
        assert_eq!(
            BookSnapshot::new("S", 1, 0.0, bad_bid, d, ask, d).unwrap_err(),
            SnapshotError::NonMonotoneBid
        );
        let mut bad_ask = ask;
        bad_ask[3] = bad_ask[2];
        assert_eq!(
            BookSnapshot::new("S", 1, 0.0, bid, d, bad_ask, d).unwrap_err(),
            SnapshotError::NonMonotoneAsk
        );
        let (cb, ca) = ladder(10.02, 10.02, 0.01);
        assert_eq!(
            BookSnapshot::new("S", 1, 0.0, cb, d, ca, d).unwrap_err(),
            SnapshotError::CrossedBook
        );
        let mut zero = d;
        zero[4] = 0.0;
        assert_eq!(
            BookSnapshot::new("S", 1, 0.0, bid, zero, ask, d).unwrap_err(),
            SnapshotError::NonPositiveDepth
        );
        let mut neg = bid;
        neg[4] = -1.0;
        assert_eq!(
            BookSnapshot::new("S", 1, 0.0, neg, d, ask, d).unwrap_err(),
            SnapshotError::NonPositivePrice
        );
    }

    #[test]
    fn ask_deviation_values() {
        // Oracle values from a 30-digit evaluation of ln(10.02/10.01) and
        // ln(10.03/10.01).
        let bid = [10.00_f64, 9.99, 9.98, 9.97, 9.96];
        let ask = [10.02, 10.03, 10.04, 10.05, 10.06];
        let s = BookSnapshot::new(
            "S",
            1,
            0.0,
            bid,
            [100.0; 5],
            ask,
            [100.0, 200.0, 50.0, 50.0, 50.0],
        )
        .unwrap();
        let pts = side_deviations(&s, Side::Ask);
        assert_eq!(pts.len(), 5);
        assert_eq!(pts[0].depth, 100.0);
        assert_eq!(pts[1].depth, 300.0);
        assert!((pts[0].deviation - 9.985_023_295_895_229e-4).abs() < 1e-15);
        assert!((pts[1].deviation - 1.996_008_646_714_946e-3).abs() < 1e-15);
        assert_eq!(pts[4].depth, 450.0);
    }

    #[test]
    fn symmetric_book_gives_matching_sides() {
        // Quotes mirrored geometrically around m have arithmetic mid
        // m cosh(w1), so each side is offset from the mirror by ln cosh(w1):
        // identical depths, deviations differing by exactly 2 ln cosh(w1).
        let w = [0.001_f64, 0.002, 0.004, 0.007, 0.011];
        let m = 20.0_f64;
        let bid = w.map(|x| m * (-x).exp());
        let ask = w.map(|x| m * x.exp());
        let s = snap(0.0, bid, ask, [10.0, 20.0, 30.0, 40.0, 50.0]);
        let b = side_deviations(&s, Side::Bid);
        let a = side_deviations(&s, Side::Ask);
        let offset = 2.0 * w[0].cosh().ln();
        for (pb, pa) in b.iter().zip(&a) {
            assert_eq!(pb.depth, pa.depth);
            assert!((pb.deviation - pa.deviation - offset).abs() < 1e-14);
        }
    }

    #[test]
    fn deviations_are_price_scale_invariant() {
        let bid = [10.00_f64, 9.99, 9.97, 9.94, 9.90];
        let ask = [10.02_f64, 10.04, 10.05, 10.09, 10.12];
        let d = [300.0, 100.0, 700.0, 200.0, 900.0];
        let base = BookSnapshot::new("S", 1, 0.0, bid, d, ask, d).unwrap();
        for s in [0.5, 2.0, 8.0, 0.125] {
            let scaled =
                BookSnapshot::new("S", 1, 0.0, bid.map(|q| q * s), d, ask.map(|q| q * s), d)
                    .unwrap();
            for side in Side::BOTH {
                assert_eq!(side_deviations(&base, side), side_deviations(&scaled, side));
            }
        }
    }

    #[test]
    fn layout_indexing() {
        let layout = SessionLayout::default();
        layout.validate().unwrap();
        assert_eq!(layout.intervals_per_day(), 48);
        assert_eq!(layout.snapshots_per_window(), 30);
        assert_eq!(layout.interval_of(0.0), Some(1));
        assert_eq!(layout.interval_of(299.999), Some(1));
        assert_eq!(layout.interval_of(300.0), Some(2));
        assert_eq!(layout.interval_of(7199.0), Some(24));
        assert_eq!(layout.interval_of(7200.0), Some(25));
        assert_eq!(layout.interval_of(14399.0), Some(48));
        assert_eq!(layout.interval_of(14400.0), None);
        assert_eq!(layout.interval_of(-1.0), None);
        assert_eq!(layout.interval_start(25), 7200.0);
        assert_eq!(layout.locate(304.0), Some((2, 0)));
        assert_eq!(layout.locate(306.0), Some((2, 1)));
        assert_eq!(layout.locate(598.0), Some((2, 29)));

        let bad = SessionLayout {
            spacing_sec: 7.0,
            ..SessionLayout::default()
        };
        assert!(matches!(
            bad.validate(),
            Err(LayoutError::SpacingMismatch { .. })
        ));
    }

    #[test]
    fn windows_cover_day_and_later_snapshot_wins() {
        let layout = SessionLayout::default();
        let (bid, ask) = ladder(10.0, 10.02, 0.01);
        let (bid2, ask2) = ladder(10.01, 10.03, 0.01);
        let snaps = vec![
            snap(11.0, bid2, ask2, [5.0; 5]),
            snap(9.0, bid, ask, [5.0; 5]),
            snap(20.0, bid, ask, [5.0; 5]),
        ];
        let windows = assemble_windows(snaps, &layout);
        assert_eq!(windows.len(), 48);
        assert_eq!(windows[0].snapshots.len(), 2);
        // 9 s and 11 s both round to the 10 s slot; the 11 s one is later.
        assert_eq!(windows[0].snapshots[0].ts_sec(), 11.0);
        assert!(windows[1..].iter().all(|w| w.snapshots.is_empty()));
        assert_eq!(windows[47].key.t, 48);
    }

    fn full_window(n: usize) -> IntervalWindow<f64> {
        let (bid, ask) = ladder(10.0, 10.02, 0.01);
        IntervalWindow {
            key: WindowKey::new("S1", 1, 1),
            snapshots: (0..n)
                .map(|i| snap(i as f64 * 10.0, bid, ask, [100.0; 5]))
                .collect(),
        }
    }

    #[test]
    fn side_curve_pools_points() {
        let cfg = CurveConfig::default();
        let curve = build_side_curve(&full_window(30), Side::Bid, &cfg).unwrap();
        assert_eq!(curve.points.len(), 150);
        let err = build_side_curve(&full_window(10), Side::Bid, &cfg).unwrap_err();
        assert!(matches!(
            err,
            CurveError::InsufficientData { snapshots: 10, .. }
        ));
    }

    #[test]
    fn side_curve_drops_points_at_mid() {
        // A validated book never quotes at the mid, so drive the level filter
        // with a mid placed on level 3 for the first three snapshots.
        let quotes = [10.02, 10.03, 10.04, 10.05, 10.06];
        let depths = [100.0; 5];
        let cfg = CurveConfig::default();
        let lists = (0..30).map(|i| {
            let mid = if i < 3 { 10.04 } else { 10.01 };
            level_points(mid, &quotes, &depths)
        });
        let curve = pool_side_curve(Side::Ask, lists, &cfg).unwrap();
        assert_eq!(curve.points.len(), 147);
        assert!(curve.points.iter().all(|p| p.deviation > 0.0));
    }
}
