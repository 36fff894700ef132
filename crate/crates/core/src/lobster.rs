//! Readers and writers for LOBSTER-style message and orderbook files.
//!
//! A message file is a headerless 6-column CSV: time (seconds after
//! midnight, decimal), event type (1-7), order id, size, price (integer
//! ticks of 1/10000 currency unit), direction (+1 buy / -1 sell). The
//! orderbook file is row-aligned with the message file and carries
//! 4 columns per book level (ask price, ask size, bid price, bid size);
//! only level 1 is used here.
//!
//! Timestamps are held as integer nanoseconds after midnight so that
//! minute bucketing is exact and write→read round trips are bit-exact.

use std::fmt;
use std::io::{BufRead, Write};

use thiserror::Error;

const NANOS_PER_SEC: i64 = 1_000_000_000;

/// Nanoseconds after midnight. Exact bucket arithmetic, no float drift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub struct TimeNs(pub i64);

impl TimeNs {
    pub fn from_secs(secs: i64) -> Self {
        TimeNs(secs * NANOS_PER_SEC)
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / NANOS_PER_SEC as f64
    }

    /// Parses a decimal seconds-after-midnight stamp. Fractional digits
    /// beyond the ninth (sub-nanosecond) are truncated.
    pub fn parse(text: &str) -> Option<Self> {
        let (int_part, frac_part) = match text.split_once('.') {
            Some((i, f)) => (i, f),
            None => (text, ""),
        };
        if int_part.is_empty() || int_part.starts_with('+') || int_part.starts_with('-') {
            return None;
        }
        let secs: i64 = int_part.parse().ok()?;
        let mut frac_ns: i64 = 0;
        let mut scale = NANOS_PER_SEC / 10;
        for (i, ch) in frac_part.bytes().enumerate() {
            if !ch.is_ascii_digit() {
                return None;
            }
            if i < 9 {
                frac_ns += (ch - b'0') as i64 * scale;
                scale /= 10;
            }
        }
        Some(TimeNs(secs * NANOS_PER_SEC + frac_ns))
    }
}

impl fmt::Display for TimeNs {
    /// Canonical serialization: seconds with exactly 9 fractional digits.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:09}", self.0 / NANOS_PER_SEC, self.0 % NANOS_PER_SEC)
    }
}

/// Order-flow event type, numeric codes per the message-file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum EventType {
    NewLimit = 1,
    PartialCancel = 2,
    Delete = 3,
    ExecVisible = 4,
    ExecHidden = 5,
    CrossTrade = 6,
    Halt = 7,
}

impl EventType {
    pub fn from_code(code: i64) -> Option<Self> {
        match code {
            1 => Some(EventType::NewLimit),
            2 => Some(EventType::PartialCancel),
            3 => Some(EventType::Delete),
            4 => Some(EventType::ExecVisible),
            5 => Some(EventType::ExecHidden),
            6 => Some(EventType::CrossTrade),
            7 => Some(EventType::Halt),
            _ => None,
        }
    }

    pub fn code(self) -> i64 {
        self as i64
    }
}

/// Order side: +1 buy, -1 sell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    pub fn from_code(code: i64) -> Option<Self> {
        match code {
            1 => Some(Side::Buy),
            -1 => Some(Side::Sell),
            _ => None,
        }
    }

    pub fn code(self) -> i64 {
        match self {
            Side::Buy => 1,
            Side::Sell => -1,
        }
    }
}

/// One parsed message-file row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct OrderFlowEvent {
    pub time: TimeNs,
    pub event_type: EventType,
    pub order_id: u64,
    /// Shares. Positive for every type except `Halt` (status rows carry 0).
    pub size: u64,
    /// Integer ticks. Positive for every type except `Halt` (sentinels allowed).
    pub price: i64,
    pub side: Side,
}

/// Level-1 orderbook state paired with a message row.
///
/// A size of 0 marks an empty side; the paired price is then a vendor
/// sentinel and must not be used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct BookSnapshot {
    pub time: TimeNs,
    pub best_ask_price: i64,
    pub best_ask_size: u64,
    pub best_bid_price: i64,
    pub best_bid_size: u64,
}

impl BookSnapshot {
    pub fn has_both_sides(&self) -> bool {
        self.best_ask_size > 0 && self.best_bid_size > 0
    }

    /// Mid-price in ticks, available only when both sides are present.
    pub fn mid_ticks(&self) -> Option<f64> {
        if self.has_both_sides() {
            Some((self.best_ask_price as f64 + self.best_bid_price as f64) / 2.0)
        } else {
            None
        }
    }
}

/// Raw level-1 row from an orderbook file (time comes from row alignment).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BookLevel1 {
    pub best_ask_price: i64,
    pub best_ask_size: u64,
    pub best_bid_price: i64,
    pub best_bid_size: u64,
}

impl BookLevel1 {
    pub fn at(self, time: TimeNs) -> BookSnapshot {
        BookSnapshot {
            time,
            best_ask_price: self.best_ask_price,
            best_ask_size: self.best_ask_size,
            best_bid_price: self.best_bid_price,
            best_bid_size: self.best_bid_size,
        }
    }
}

/// How readers treat bad rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    /// Any malformed or inconsistent row aborts the read.
    #[default]
    Fail,
    /// Bad rows are skipped, counted and logged as warnings.
    SkipAndWarn,
}

#[derive(Debug, Error)]
pub enum LobsterError {
    #[error("line {line}: malformed record: {reason}")]
    MalformedLine { line: u64, reason: String },
    #[error("line {line}: event type {code} outside 1-7")]
    InvalidEventType { line: u64, code: i64 },
    #[error("line {line}: direction {code} must be +1 or -1")]
    InvalidDirection { line: u64, code: i64 },
    #[error("line {line}: non-positive size {size}")]
    NonPositiveSize { line: u64, size: i64 },
    #[error("line {line}: non-positive price {price}")]
    NonPositivePrice { line: u64, price: i64 },
    #[error("line {line}: time {time} decreases below preceding {prev}")]
    NonMonotoneTime { line: u64, time: TimeNs, prev: TimeNs },
    #[error("line {line}: crossed book, ask {ask} <= bid {bid}")]
    CrossedBook { line: u64, ask: i64, bid: i64 },
    #[error("message file has {messages} rows, orderbook file has {snapshots}")]
    UnalignedInputs { messages: u64, snapshots: u64 },
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

impl LobsterError {
    fn with_line(self, line: u64) -> Self {
        match self {
            LobsterError::MalformedLine { reason, .. } => LobsterError::MalformedLine { line, reason },
            LobsterError::InvalidEventType { code, .. } => LobsterError::InvalidEventType { line, code },
            LobsterError::InvalidDirection { code, .. } => LobsterError::InvalidDirection { line, code },
            LobsterError::NonPositiveSize { size, .. } => LobsterError::NonPositiveSize { line, size },
            LobsterError::NonPositivePrice { price, .. } => LobsterError::NonPositivePrice { line, price },
            LobsterError::NonMonotoneTime { time, prev, .. } => LobsterError::NonMonotoneTime { line, time, prev },
            LobsterError::CrossedBook { ask, bid, .. } => LobsterError::CrossedBook { line, ask, bid },
            other => other,
        }
    }
}

fn malformed(reason: impl Into<String>) -> LobsterError {
    LobsterError::MalformedLine { line: 0, reason: reason.into() }
}

fn parse_int(field: &str, name: &str) -> Result<i64, LobsterError> {
    field
        .trim()
        .parse::<i64>()
        .map_err(|_| malformed(format!("non-numeric {name} field `{field}`")))
}

/// Parses one message-file line into an [`OrderFlowEvent`].
///
/// Every line either yields an event or a typed error; there is no
/// silent coercion. Size and price positivity are not enforced for
/// `Halt` rows, which carry status sentinels.
pub fn parse_message_line(line: &str) -> Result<OrderFlowEvent, LobsterError> {
    let mut fields = line.split(',');
    let mut next = |name: &str| {
        fields
            .next()
            .ok_or_else(|| malformed(format!("missing {name} field (expected 6 fields)")))
    };

    let time_field = next("time")?;
    let time = TimeNs::parse(time_field.trim())
        .ok_or_else(|| malformed(format!("non-numeric time field `{time_field}`")))?;
    let type_code = parse_int(next("type")?, "type")?;
    let id_field = next("order id")?;
    let order_id = id_field
        .trim()
        .parse::<u64>()
        .map_err(|_| malformed(format!("non-numeric order id field `{id_field}`")))?;
    let size = parse_int(next("size")?, "size")?;
    let price = parse_int(next("price")?, "price")?;
    let dir = parse_int(next("direction")?, "direction")?;
    if fields.next().is_some() {
        return Err(malformed("more than 6 fields"));
    }

    let event_type =
        EventType::from_code(type_code).ok_or(LobsterError::InvalidEventType { line: 0, code: type_code })?;
    let side = Side::from_code(dir).ok_or(LobsterError::InvalidDirection { line: 0, code: dir })?;
    if event_type != EventType::Halt {
        if size < 1 {
            return Err(LobsterError::NonPositiveSize { line: 0, size });
        }
        if price < 1 {
            return Err(LobsterError::NonPositivePrice { line: 0, price });
        }
    }
    if size < 0 {
        return Err(LobsterError::NonPositiveSize { line: 0, size });
    }

    Ok(OrderFlowEvent { time, event_type, order_id, size: size as u64, price, side })
}

/// Parses the level-1 fields of one orderbook-file line.
///
/// Deeper levels (fields beyond the fourth) are ignored. Crossed books
/// (ask <= bid with both sides present) are rejected.
pub fn parse_orderbook_line(line: &str) -> Result<BookLevel1, LobsterError> {
    let mut fields = line.split(',');
    let mut next = |name: &str| {
        fields
            .next()
            .ok_or_else(|| malformed(format!("missing {name} field (expected at least 4)")))
    };
    let ask_price = parse_int(next("ask price")?, "ask price")?;
    let ask_size = parse_int(next("ask size")?, "ask size")?;
    let bid_price = parse_int(next("bid price")?, "bid price")?;
    let bid_size = parse_int(next("bid size")?, "bid size")?;
    if ask_size < 0 || bid_size < 0 {
        return Err(malformed("negative book size"));
    }
    let row = BookLevel1 {
        best_ask_price: ask_price,
        best_ask_size: ask_size as u64,
        best_bid_price: bid_price,
        best_bid_size: bid_size as u64,
    };
    if row.best_ask_size > 0 && row.best_bid_size > 0 && ask_price <= bid_price {
        return Err(LobsterError::CrossedBook { line: 0, ask: ask_price, bid: bid_price });
    }
    Ok(row)
}

/// Streaming message-file reader: single pass, O(1) memory in file length.
///
/// Verifies timestamps are non-decreasing. Under [`Strictness::SkipAndWarn`]
/// bad rows (including time regressions) are skipped and counted.
pub struct MessageReader<R: BufRead> {
    source: R,
    strictness: Strictness,
    line_no: u64,
    prev_time: Option<TimeNs>,
    skipped: u64,
    buf: String,
}

impl<R: BufRead> MessageReader<R> {
    pub fn new(source: R, strictness: Strictness) -> Self {
        MessageReader { source, strictness, line_no: 0, prev_time: None, skipped: 0, buf: String::new() }
    }

    /// Rows skipped so far under `SkipAndWarn`.
    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    fn parse_current(&mut self) -> Result<OrderFlowEvent, LobsterError> {
        let line = self.buf.trim_end_matches(['\n', '\r']);
        let event = parse_message_line(line).map_err(|e| e.with_line(self.line_no))?;
        if let Some(prev) = self.prev_time {
            if event.time < prev {
                return Err(LobsterError::NonMonotoneTime { line: self.line_no, time: event.time, prev });
            }
        }
        Ok(event)
    }
}

impl<R: BufRead> Iterator for MessageReader<R> {
    type Item = Result<OrderFlowEvent, LobsterError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.source.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            self.line_no += 1;
            if self.buf.trim().is_empty() {
                continue;
            }
            match self.parse_current() {
                Ok(event) => {
                    self.prev_time = Some(event.time);
                    return Some(Ok(event));
                }
                Err(e) => match self.strictness {
                    Strictness::Fail => return Some(Err(e)),
                    Strictness::SkipAndWarn => {
                        self.skipped += 1;
                        log::warn!("skipping message row: {e}");
                    }
                },
            }
        }
    }
}

/// Streaming orderbook-file reader, level-1 rows only.
pub struct OrderbookReader<R: BufRead> {
    source: R,
    strictness: Strictness,
    line_no: u64,
    skipped: u64,
    buf: String,
}

impl<R: BufRead> OrderbookReader<R> {
    pub fn new(source: R, strictness: Strictness) -> Self {
        OrderbookReader { source, strictness, line_no: 0, skipped: 0, buf: String::new() }
    }

    pub fn skipped(&self) -> u64 {
        self.skipped
    }
}

impl<R: BufRead> Iterator for OrderbookReader<R> {
    type Item = Result<BookLevel1, LobsterError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.source.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            self.line_no += 1;
            if self.buf.trim().is_empty() {
                continue;
            }
            let line = self.buf.trim_end_matches(['\n', '\r']);
            match parse_orderbook_line(line) {
                Ok(row) => return Some(Ok(row)),
                Err(e) => match self.strictness {
                    Strictness::Fail => return Some(Err(e.with_line(self.line_no))),
                    Strictness::SkipAndWarn => {
                        self.skipped += 1;
                        log::warn!("skipping orderbook row: {e}", e = e.with_line(self.line_no));
                    }
                },
            }
        }
    }
}

/// Reads a whole message file under the given strictness.
pub fn read_message_file<R: BufRead>(source: R, strictness: Strictness) -> Result<Vec<OrderFlowEvent>, LobsterError> {
    MessageReader::new(source, strictness).collect()
}

/// Reads a whole orderbook file as level-1 rows. Timestamps come from
/// row alignment with the message file; see [`read_day_pair`].
pub fn read_orderbook_file<R: BufRead>(source: R, strictness: Strictness) -> Result<Vec<BookLevel1>, LobsterError> {
    OrderbookReader::new(source, strictness).collect()
}

/// Reads a row-aligned message/orderbook file pair into events plus
/// time-stamped snapshots.
///
/// Row i of each file describes the same instant, so the snapshot takes
/// its time from the message row. Mismatched row counts are an error
/// regardless of strictness; under `SkipAndWarn` a bad row on either
/// side drops the whole pair to preserve alignment.
pub fn read_day_pair<M: BufRead, B: BufRead>(
    messages: M,
    orderbook: B,
    strictness: Strictness,
) -> Result<PairedDay, LobsterError> {
    let mut events = Vec::new();
    let mut snapshots = Vec::new();
    let mut msg_lines = messages.lines();
    let mut book_lines = orderbook.lines();
    let mut line_no: u64 = 0;
    let mut skipped: u64 = 0;
    let mut prev_time: Option<TimeNs> = None;

    loop {
        let msg = msg_lines.next().transpose()?;
        let book = book_lines.next().transpose()?;
        line_no += 1;
        let (msg, book) = match (msg, book) {
            (None, None) => break,
            (Some(m), Some(b)) => (m, b),
            (Some(_), None) => {
                let extra = 1 + msg_lines.count() as u64;
                return Err(LobsterError::UnalignedInputs {
                    messages: line_no - 1 + extra,
                    snapshots: line_no - 1,
                });
            }
            (None, Some(_)) => {
                let extra = 1 + book_lines.count() as u64;
                return Err(LobsterError::UnalignedInputs {
                    messages: line_no - 1,
                    snapshots: line_no - 1 + extra,
                });
            }
        };
        if msg.trim().is_empty() && book.trim().is_empty() {
            continue;
        }

        let parsed = parse_message_line(msg.trim_end_matches('\r'))
            .map_err(|e| e.with_line(line_no))
            .and_then(|event| {
                if let Some(prev) = prev_time {
                    if event.time < prev {
                        return Err(LobsterError::NonMonotoneTime { line: line_no, time: event.time, prev });
                    }
                }
                let row = parse_orderbook_line(book.trim_end_matches('\r')).map_err(|e| e.with_line(line_no))?;
                Ok((event, row))
            });
        match parsed {
            Ok((event, row)) => {
                prev_time = Some(event.time);
                snapshots.push(row.at(event.time));
                events.push(event);
            }
            Err(e) => match strictness {
                Strictness::Fail => return Err(e),
                Strictness::SkipAndWarn => {
                    skipped += 1;
                    log::warn!("skipping row pair: {e}");
                }
            },
        }
    }

    Ok(PairedDay { events, snapshots, skipped_rows: skipped })
}

/// Result of ingesting one aligned message/orderbook file pair.
#[derive(Debug, Clone)]
pub struct PairedDay {
    pub events: Vec<OrderFlowEvent>,
    pub snapshots: Vec<BookSnapshot>,
    pub skipped_rows: u64,
}

/// Serializes one event in canonical message-file form.
pub fn format_message_line(event: &OrderFlowEvent) -> String {
    format!(
        "{},{},{},{},{},{}",
        event.time,
        event.event_type.code(),
        event.order_id,
        event.size,
        event.price,
        event.side.code()
    )
}

/// Writes events as a message file. Output re-parses to an identical
/// event sequence: timestamps are serialized with 9 decimal places.
pub fn write_message_file<'a, W: Write, I: IntoIterator<Item = &'a OrderFlowEvent>>(
    events: I,
    sink: &mut W,
) -> Result<(), LobsterError> {
    for event in events {
        writeln!(sink, "{}", format_message_line(event))?;
    }
    Ok(())
}

/// Writes level-1 snapshots as a 4-column orderbook file.
pub fn write_orderbook_file<'a, W: Write, I: IntoIterator<Item = &'a BookSnapshot>>(
    snapshots: I,
    sink: &mut W,
) -> Result<(), LobsterError> {
    for snap in snapshots {
        writeln!(
            sink,
            "{},{},{},{}",
            snap.best_ask_price, snap.best_ask_size, snap.best_bid_price, snap.best_bid_size
        )?;
    }
    Ok(())
}
