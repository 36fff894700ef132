//! Aggregation of order-flow events into non-overlapping 1-minute bars.
//!
//! Each session minute gets exactly one bar holding side-blind volume
//! totals per aggregation category (trades, limit orders, cancellations),
//! event counts and the closing mid-price. Bars with zero activity are
//! emitted, not dropped, so downstream series keep a regular index.
//! Returns are mid-to-mid log differences within a single date; the first
//! bar of a day yields no return.

use std::io::{BufRead, Write};

use chrono::{Datelike, NaiveDate};
use thiserror::Error;

use crate::lobster::{BookSnapshot, EventType, OrderFlowEvent, TimeNs};

/// Trading-session layout in seconds after midnight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SessionSpec {
    pub open_secs: u32,
    pub close_secs: u32,
    pub bar_secs: u32,
}

impl Default for SessionSpec {
    /// 09:30-16:00 in 1-minute bars: 390 bars per day.
    fn default() -> Self {
        SessionSpec { open_secs: 34_200, close_secs: 57_600, bar_secs: 60 }
    }
}

impl SessionSpec {
    pub fn new(open_secs: u32, close_secs: u32, bar_secs: u32) -> Result<Self, BarsError> {
        let spec = SessionSpec { open_secs, close_secs, bar_secs };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), BarsError> {
        if self.close_secs <= self.open_secs
            || self.bar_secs == 0
            || !(self.close_secs - self.open_secs).is_multiple_of(self.bar_secs)
        {
            return Err(BarsError::InvalidSession {
                open: self.open_secs,
                close: self.close_secs,
                bar: self.bar_secs,
            });
        }
        Ok(())
    }

    pub fn bars_per_day(&self) -> u32 {
        (self.close_secs - self.open_secs) / self.bar_secs
    }

    /// Bucket index for an event time, `None` outside [open, close).
    /// Buckets are half-open: an event exactly at close_secs is outside.
    pub fn bar_of(&self, time: TimeNs) -> Option<u32> {
        let open_ns = self.open_secs as i64 * 1_000_000_000;
        let close_ns = self.close_secs as i64 * 1_000_000_000;
        if time.0 < open_ns || time.0 >= close_ns {
            return None;
        }
        Some(((time.0 - open_ns) / (self.bar_secs as i64 * 1_000_000_000)) as u32)
    }

    /// End-of-bar instant (exclusive for events, inclusive for snapshots).
    pub fn bar_end(&self, bar_index: u32) -> TimeNs {
        TimeNs((self.open_secs as i64 + (bar_index as i64 + 1) * self.bar_secs as i64) * 1_000_000_000)
    }
}

/// Volume aggregation category. Event types map as 1 → LimitOrder,
/// {2,3} → Cancellation, {4,5} → Trade; types 6 and 7 are excluded by
/// default (see [`BarsConfig`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Category {
    Trade,
    LimitOrder,
    Cancellation,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Trade, Category::LimitOrder, Category::Cancellation];

    pub fn name(self) -> &'static str {
        match self {
            Category::Trade => "trade",
            Category::LimitOrder => "limit_order",
            Category::Cancellation => "cancellation",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text.to_ascii_lowercase().as_str() {
            "trade" | "trades" => Some(Category::Trade),
            "limit_order" | "limit" | "limits" => Some(Category::LimitOrder),
            "cancellation" | "cancel" | "cancels" => Some(Category::Cancellation),
            _ => None,
        }
    }
}

/// Per-category totals (shares or counts).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct CategoryTotals {
    pub trade: u64,
    pub limit_order: u64,
    pub cancellation: u64,
}

impl CategoryTotals {
    pub fn get(&self, category: Category) -> u64 {
        match category {
            Category::Trade => self.trade,
            Category::LimitOrder => self.limit_order,
            Category::Cancellation => self.cancellation,
        }
    }

    pub fn add(&mut self, category: Category, amount: u64) {
        match category {
            Category::Trade => self.trade += amount,
            Category::LimitOrder => self.limit_order += amount,
            Category::Cancellation => self.cancellation += amount,
        }
    }
}

/// Aggregation switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BarsConfig {
    /// Count hidden executions (type 5) together with visible ones under Trade.
    pub include_hidden_executions: bool,
    /// Count cross trades (type 6) under Trade. Off by default.
    pub include_cross_trades: bool,
    /// Flag bars at and after a Halt event; flagged bars are excluded from
    /// return and volume samples downstream.
    pub exclude_post_halt: bool,
}

impl Default for BarsConfig {
    fn default() -> Self {
        BarsConfig { include_hidden_executions: true, include_cross_trades: false, exclude_post_halt: true }
    }
}

impl BarsConfig {
    fn category_of(&self, event_type: EventType) -> Option<Category> {
        match event_type {
            EventType::NewLimit => Some(Category::LimitOrder),
            EventType::PartialCancel | EventType::Delete => Some(Category::Cancellation),
            EventType::ExecVisible => Some(Category::Trade),
            EventType::ExecHidden => self.include_hidden_executions.then_some(Category::Trade),
            EventType::CrossTrade => self.include_cross_trades.then_some(Category::Trade),
            EventType::Halt => None,
        }
    }
}

/// One-minute aggregate of order flow.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MinuteBar {
    pub date: NaiveDate,
    pub bar_index: u32,
    /// Side-blind share totals per category.
    pub volumes: CategoryTotals,
    pub event_counts: CategoryTotals,
    /// Mid-price in ticks from the last snapshot at or before bar end,
    /// carried forward within the day; `None` before the first two-sided
    /// snapshot.
    pub close_mid: Option<f64>,
    /// Set on bars at and after a halt when halt exclusion is enabled.
    pub halted: bool,
}

/// Bars for one day plus ingest bookkeeping.
#[derive(Debug, Clone)]
pub struct DayBars {
    pub bars: Vec<MinuteBar>,
    /// Events outside [open, close), dropped with a warning.
    pub dropped_outside_session: u64,
}

#[derive(Debug, Error)]
pub enum BarsError {
    #[error("invalid session: open {open}, close {close}, bar width {bar}")]
    InvalidSession { open: u32, close: u32, bar: u32 },
    #[error("events and snapshots are not row-aligned: {events} events vs {snapshots} snapshots")]
    UnalignedInputs { events: usize, snapshots: usize },
    #[error("bars csv line {line}: {reason}")]
    Csv { line: u64, reason: String },
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

/// Aggregates one day of row-aligned events and snapshots into exactly
/// one bar per session minute.
///
/// An event at time t lands in bucket floor((t - open)/bar_width); events
/// outside the session are dropped and counted. The closing mid of bar i
/// is taken from the last snapshot with time <= bar end.
pub fn build_minute_bars(
    date: NaiveDate,
    events: &[OrderFlowEvent],
    snapshots: &[BookSnapshot],
    session: &SessionSpec,
    config: &BarsConfig,
) -> Result<DayBars, BarsError> {
    session.validate()?;
    if events.len() != snapshots.len() {
        return Err(BarsError::UnalignedInputs { events: events.len(), snapshots: snapshots.len() });
    }

    let n_bars = session.bars_per_day() as usize;
    let mut bars: Vec<MinuteBar> = (0..n_bars)
        .map(|i| MinuteBar {
            date,
            bar_index: i as u32,
            volumes: CategoryTotals::default(),
            event_counts: CategoryTotals::default(),
            close_mid: None,
            halted: false,
        })
        .collect();

    let mut dropped: u64 = 0;
    let mut halt_from: Option<u32> = None;
    for event in events {
        let Some(bucket) = session.bar_of(event.time) else {
            dropped += 1;
            continue;
        };
        if event.event_type == EventType::Halt && config.exclude_post_halt {
            halt_from = Some(halt_from.map_or(bucket, |h| h.min(bucket)));
        }
        if let Some(category) = config.category_of(event.event_type) {
            let bar = &mut bars[bucket as usize];
            bar.volumes.add(category, event.size);
            bar.event_counts.add(category, 1);
        }
    }
    if dropped > 0 {
        log::warn!("{date}: dropped {dropped} events outside the session window");
    }
    if let Some(from) = halt_from {
        for bar in &mut bars[from as usize..] {
            bar.halted = true;
        }
    }

    // Closing mid: walk the snapshot stream once, carrying the last
    // two-sided mid forward.
    let mut snap_iter = snapshots.iter().peekable();
    let mut last_mid: Option<f64> = None;
    for bar in &mut bars {
        let end = session.bar_end(bar.bar_index);
        while let Some(snap) = snap_iter.peek() {
            if snap.time <= end {
                if let Some(mid) = snap.mid_ticks() {
                    last_mid = Some(mid);
                }
                snap_iter.next();
            } else {
                break;
            }
        }
        bar.close_mid = last_mid;
    }

    Ok(DayBars { bars, dropped_outside_session: dropped })
}

/// One point of the mid-price log-return series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnPoint {
    pub date: NaiveDate,
    pub bar_index: u32,
    /// Minute-of-week slot: day_of_week * bars_per_day + bar_index,
    /// Monday = 0.
    pub week_slot: u32,
    pub log_return: f64,
}

/// Tally of bars that produced no return.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct ReturnSummary {
    pub skipped_missing_mid: u64,
    pub skipped_halted: u64,
}

pub fn week_slot(date: NaiveDate, bar_index: u32, bars_per_day: u32) -> u32 {
    date.weekday().num_days_from_monday() * bars_per_day + bar_index
}

/// Builds the log-return series from date-and-index ordered bars.
///
/// Returns never span a date boundary; bars with a missing mid (or
/// flagged as halted) are skipped, counted, and break the chain so the
/// following bar yields no return either.
pub fn log_returns(bars: &[MinuteBar], session: &SessionSpec) -> (Vec<ReturnPoint>, ReturnSummary) {
    let bars_per_day = session.bars_per_day();
    let mut points = Vec::new();
    let mut summary = ReturnSummary::default();
    let mut prev: Option<(NaiveDate, f64)> = None;

    for bar in bars {
        if bar.halted {
            summary.skipped_halted += 1;
            prev = None;
            continue;
        }
        let Some(mid) = bar.close_mid else {
            summary.skipped_missing_mid += 1;
            prev = None;
            continue;
        };
        if let Some((prev_date, prev_mid)) = prev {
            if prev_date == bar.date {
                points.push(ReturnPoint {
                    date: bar.date,
                    bar_index: bar.bar_index,
                    week_slot: week_slot(bar.date, bar.bar_index, bars_per_day),
                    log_return: mid.ln() - prev_mid.ln(),
                });
            }
        }
        prev = Some((bar.date, mid));
    }
    (points, summary)
}

/// Exact decimal form of a mid in ticks: integer or half-integer.
fn format_mid(mid: f64) -> String {
    if mid == mid.trunc() {
        format!("{}", mid as i64)
    } else {
        format!("{mid}")
    }
}

/// Writes bars as CSV: date, bar_index, trade_vol, limit_vol, cancel_vol,
/// trade_count, limit_count, cancel_count, close_mid, halted. A missing
/// mid is an empty field. Mids round-trip exactly (ticks are integers or
/// half-integers).
pub fn write_bars_csv<'a, W: Write, I: IntoIterator<Item = &'a MinuteBar>>(
    bars: I,
    sink: &mut W,
) -> Result<(), BarsError> {
    writeln!(
        sink,
        "date,bar_index,trade_vol,limit_vol,cancel_vol,trade_count,limit_count,cancel_count,close_mid,halted"
    )?;
    for bar in bars {
        let mid = bar.close_mid.map(format_mid).unwrap_or_default();
        writeln!(
            sink,
            "{},{},{},{},{},{},{},{},{},{}",
            bar.date,
            bar.bar_index,
            bar.volumes.trade,
            bar.volumes.limit_order,
            bar.volumes.cancellation,
            bar.event_counts.trade,
            bar.event_counts.limit_order,
            bar.event_counts.cancellation,
            mid,
            bar.halted as u8
        )?;
    }
    Ok(())
}

/// Reads bars back from the CSV written by [`write_bars_csv`].
pub fn read_bars_csv<R: BufRead>(source: R) -> Result<Vec<MinuteBar>, BarsError> {
    let mut bars = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let line_no = idx as u64 + 1;
        if (line_no == 1 && line.starts_with("date,")) || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(BarsError::Csv { line: line_no, reason: format!("expected 10 fields, got {}", fields.len()) });
        }
        let err = |reason: String| BarsError::Csv { line: line_no, reason };
        let date = NaiveDate::parse_from_str(fields[0], "%Y-%m-%d")
            .map_err(|e| err(format!("bad date: {e}")))?;
        let parse_u64 = |s: &str, name: &str| {
            s.parse::<u64>().map_err(|_| BarsError::Csv { line: line_no, reason: format!("bad {name} `{s}`") })
        };
        let close_mid = if fields[8].is_empty() {
            None
        } else {
            Some(fields[8].parse::<f64>().map_err(|e| err(format!("bad close_mid: {e}")))?)
        };
        bars.push(MinuteBar {
            date,
            bar_index: parse_u64(fields[1], "bar_index")? as u32,
            volumes: CategoryTotals {
                trade: parse_u64(fields[2], "trade_vol")?,
                limit_order: parse_u64(fields[3], "limit_vol")?,
                cancellation: parse_u64(fields[4], "cancel_vol")?,
            },
            event_counts: CategoryTotals {
                trade: parse_u64(fields[5], "trade_count")?,
                limit_order: parse_u64(fields[6], "limit_count")?,
                cancellation: parse_u64(fields[7], "cancel_count")?,
            },
            close_mid,
            halted: fields[9] == "1",
        });
    }
    Ok(bars)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lobster::{Side, TimeNs};

    fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 1, 6).unwrap()
    }

    fn event(time_secs: f64, event_type: EventType, size: u64) -> OrderFlowEvent {
        OrderFlowEvent {
            time: TimeNs((time_secs * 1e9) as i64),
            event_type,
            order_id: 1,
            size,
            price: 1_000_000,
            side: Side::Buy,
        }
    }

    fn snapshot(time_secs: f64, bid: i64, ask: i64) -> BookSnapshot {
        BookSnapshot {
            time: TimeNs((time_secs * 1e9) as i64),
            best_ask_price: ask,
            best_ask_size: 10,
            best_bid_price: bid,
            best_bid_size: 10,
        }
    }

    #[test]
    fn session_default_is_390_bars() {
        let s = SessionSpec::default();
        assert_eq!(s.bars_per_day(), 390);
        assert_eq!(s.bar_of(TimeNs::from_secs(34_200)), Some(0));
        assert_eq!(s.bar_of(TimeNs::from_secs(34_260)), Some(1));
        assert_eq!(s.bar_of(TimeNs(34_259_999_999_999)), Some(0));
        // event exactly at close is outside the session
        assert_eq!(s.bar_of(TimeNs::from_secs(57_600)), None);
        assert_eq!(s.bar_of(TimeNs::from_secs(34_199)), None);
    }

    #[test]
    fn invalid_session_rejected() {
        assert!(SessionSpec::new(34_200, 34_200, 60).is_err());
        assert!(SessionSpec::new(34_200, 34_230, 60).is_err());
        assert!(SessionSpec::new(34_200, 57_600, 0).is_err());
    }

    #[test]
    fn single_trade_lands_in_bar_zero() {
        let events = vec![event(34_210.0, EventType::ExecVisible, 100)];
        let snaps = vec![snapshot(34_210.0, 999, 1001)];
        let day = build_minute_bars(date(), &events, &snaps, &SessionSpec::default(), &BarsConfig::default()).unwrap();
        assert_eq!(day.bars.len(), 390);
        assert_eq!(day.bars[0].volumes.trade, 100);
        assert_eq!(day.bars[0].volumes.limit_order, 0);
        assert_eq!(day.bars[0].volumes.cancellation, 0);
        assert_eq!(day.bars[0].event_counts.trade, 1);
        assert_eq!(day.bars[0].close_mid, Some(1000.0));
    }

    #[test]
    fn empty_minute_keeps_carried_mid() {
        // activity in minutes 0 and 8, nothing in minute 7
        let events = vec![
            event(34_210.0, EventType::NewLimit, 10),
            event(34_690.0, EventType::NewLimit, 10),
        ];
        let snaps = vec![snapshot(34_210.0, 999, 1001), snapshot(34_690.0, 1009, 1011)];
        let day = build_minute_bars(date(), &events, &snaps, &SessionSpec::default(), &BarsConfig::default()).unwrap();
        let bar7 = &day.bars[7];
        assert_eq!(bar7.volumes, CategoryTotals::default());
        assert_eq!(bar7.close_mid, Some(1000.0));
        assert_eq!(day.bars[8].close_mid, Some(1010.0));
        // mid missing before the first snapshot would be None; here bar 0 has one
        assert_eq!(day.bars[0].close_mid, Some(1000.0));
    }

    #[test]
    fn category_mapping_and_switches() {
        let mk = |t| event(34_210.0, t, 5);
        let events = vec![
            mk(EventType::NewLimit),
            mk(EventType::PartialCancel),
            mk(EventType::Delete),
            mk(EventType::ExecVisible),
            mk(EventType::ExecHidden),
            mk(EventType::CrossTrade),
        ];
        let snaps = vec![snapshot(34_210.0, 999, 1001); 6];
        let day = build_minute_bars(date(), &events, &snaps, &SessionSpec::default(), &BarsConfig::default()).unwrap();
        let bar = &day.bars[0];
        assert_eq!(bar.volumes.limit_order, 5);
        assert_eq!(bar.volumes.cancellation, 10);
        assert_eq!(bar.volumes.trade, 10); // visible + hidden, cross excluded

        let cfg = BarsConfig { include_hidden_executions: false, include_cross_trades: true, ..Default::default() };
        let day = build_minute_bars(date(), &events, &snaps, &SessionSpec::default(), &cfg).unwrap();
        assert_eq!(day.bars[0].volumes.trade, 10); // visible + cross, hidden excluded
    }

    #[test]
    fn events_outside_session_dropped_and_counted() {
        let events = vec![
            event(34_100.0, EventType::ExecVisible, 100),
            event(34_210.0, EventType::ExecVisible, 50),
            event(57_600.0, EventType::ExecVisible, 25),
        ];
        let snaps = vec![snapshot(34_100.0, 999, 1001); 3];
        let day = build_minute_bars(date(), &events, &snaps, &SessionSpec::default(), &BarsConfig::default()).unwrap();
        assert_eq!(day.dropped_outside_session, 2);
        assert_eq!(day.bars.iter().map(|b| b.volumes.trade).sum::<u64>(), 50);
    }

    #[test]
    fn halt_flags_rest_of_day() {
        let events = vec![
            event(34_210.0, EventType::ExecVisible, 10),
            OrderFlowEvent { price: -1, size: 0, ..event(35_000.0, EventType::Halt, 0) },
            event(35_100.0, EventType::ExecVisible, 10),
        ];
        let snaps = vec![snapshot(34_210.0, 999, 1001); 3];
        let day = build_minute_bars(date(), &events, &snaps, &SessionSpec::default(), &BarsConfig::default()).unwrap();
        let halt_bar = SessionSpec::default().bar_of(TimeNs::from_secs(35_000)).unwrap() as usize;
        assert!(!day.bars[halt_bar - 1].halted);
        assert!(day.bars[halt_bar].halted);
        assert!(day.bars.last().unwrap().halted);

        let cfg = BarsConfig { exclude_post_halt: false, ..Default::default() };
        let day = build_minute_bars(date(), &events, &snaps, &SessionSpec::default(), &cfg).unwrap();
        assert!(day.bars.iter().all(|b| !b.halted));
    }

    #[test]
    fn unaligned_inputs_rejected() {
        let events = vec![event(34_210.0, EventType::ExecVisible, 10)];
        let err = build_minute_bars(date(), &events, &[], &SessionSpec::default(), &BarsConfig::default()).unwrap_err();
        assert!(matches!(err, BarsError::UnalignedInputs { events: 1, snapshots: 0 }));
    }

    fn bar_with_mid(d: NaiveDate, idx: u32, mid: Option<f64>) -> MinuteBar {
        MinuteBar {
            date: d,
            bar_index: idx,
            volumes: CategoryTotals::default(),
            event_counts: CategoryTotals::default(),
            close_mid: mid,
            halted: false,
        }
    }

    #[test]
    fn constant_mid_gives_zero_returns() {
        let session = SessionSpec::default();
        let bars: Vec<MinuteBar> = (0..390).map(|i| bar_with_mid(date(), i, Some(1000.0))).collect();
        let (returns, summary) = log_returns(&bars, &session);
        assert_eq!(returns.len(), 389);
        assert!(returns.iter().all(|r| r.log_return == 0.0));
        assert_eq!(summary, ReturnSummary::default());
    }

    #[test]
    fn return_matches_closed_form() {
        let session = SessionSpec::default();
        let bars = vec![bar_with_mid(date(), 0, Some(10_000.0)), bar_with_mid(date(), 1, Some(10_100.0))];
        let (returns, _) = log_returns(&bars, &session);
        assert_eq!(returns.len(), 1);
        // ln(1.01) evaluated in extended precision; the difference of two
        // f64 logs carries a few ulps of its own
        assert!((returns[0].log_return - 0.009950330853168083).abs() < 1e-14);
        // Monday 2020-01-06, bar 1 -> week slot 1
        assert_eq!(returns[0].week_slot, 1);
    }

    #[test]
    fn returns_never_span_dates_and_missing_mid_breaks_chain() {
        let session = SessionSpec::default();
        let d2 = NaiveDate::from_ymd_opt(2020, 1, 7).unwrap();
        let bars = vec![
            bar_with_mid(date(), 388, Some(1000.0)),
            bar_with_mid(date(), 389, Some(1010.0)),
            bar_with_mid(d2, 0, Some(1020.0)), // no overnight return
            bar_with_mid(d2, 1, None),         // breaks the chain
            bar_with_mid(d2, 2, Some(1040.0)), // no return: predecessor missing
            bar_with_mid(d2, 3, Some(1050.0)),
        ];
        let (returns, summary) = log_returns(&bars, &session);
        assert_eq!(returns.len(), 2);
        assert_eq!((returns[0].date, returns[0].bar_index), (date(), 389));
        assert_eq!((returns[1].date, returns[1].bar_index), (d2, 3));
        assert_eq!(summary.skipped_missing_mid, 1);
        // Tuesday slot offset
        assert_eq!(returns[1].week_slot, 390 + 3);
    }

    #[test]
    fn generator_returns_recovered_from_exact_mids() {
        // mids built by compounding the ledger returns in plain f64: the
        // return series comes back to well under 1e-12
        let spec = crate::synth::SyntheticSpec { n_days: 1, ..Default::default() };
        let ledger = crate::synth::gen_return_series(&spec).unwrap();
        let day = &ledger.days[0];
        let mut mid = 10_000.0f64;
        let bars: Vec<MinuteBar> = day
            .returns
            .iter()
            .enumerate()
            .map(|(b, &r)| {
                mid *= r.exp();
                bar_with_mid(day.date, b as u32, Some(mid))
            })
            .collect();
        let (returns, _) = log_returns(&bars, &SessionSpec::default());
        assert_eq!(returns.len(), 389);
        for point in &returns {
            let truth = day.returns[point.bar_index as usize];
            assert!(
                (point.log_return - truth).abs() < 1e-12,
                "bar {}: {} vs {}",
                point.bar_index,
                point.log_return,
                truth
            );
        }
    }

    #[test]
    fn bars_csv_round_trip() {
        let mut bars: Vec<MinuteBar> = (0..5).map(|i| bar_with_mid(date(), i, Some(1000.5 + i as f64))).collect();
        bars[2].close_mid = None;
        bars[3].halted = true;
        bars[4].volumes = CategoryTotals { trade: 7, limit_order: 8, cancellation: 9 };
        bars[4].event_counts = CategoryTotals { trade: 1, limit_order: 2, cancellation: 3 };
        let mut buf = Vec::new();
        write_bars_csv(&bars, &mut buf).unwrap();
        let back = read_bars_csv(std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(back, bars);
    }
}
