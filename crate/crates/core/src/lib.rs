//! Order-flow analytics for high-frequency market data.
//!
//! The crate covers the full measurement chain for studying anomalous
//! price moves and the trading volume that accompanies them:
//!
//! 1. [`lobster`] — bit-exact readers/writers for LOBSTER-style message
//!    and orderbook CSV files.
//! 2. [`bars`] — aggregation of raw order-flow events into non-overlapping
//!    1-minute volume bars and a mid-price log-return series.
//! 3. [`jump`] — local-volatility-standardized jump detection with Gumbel
//!    critical values and intraweek periodicity filtering.
//! 4. [`tail`] — empirical CCDFs, log-log least-squares power-law tail fits
//!    and variance-boundedness classification.
//! 5. [`synth`] — a seeded synthetic order-flow generator with a
//!    ground-truth ledger, used as the verification oracle for everything
//!    upstream.
//! 6. [`pipeline`] — end-to-end orchestration (ingest → bars → jumps →
//!    regime split → tail fits) with machine-readable outputs.

pub mod bars;
pub mod jump;
pub mod kv;
pub mod lobster;
pub mod numfmt;
pub mod pipeline;
pub mod synth;
pub mod tail;

pub use bars::{build_minute_bars, log_returns, BarsConfig, Category, MinuteBar, ReturnPoint, SessionSpec};
pub use jump::{
    bipower_local_vol, detect_jumps, estimate_periodicity, gumbel_threshold, DetectorConfig,
    JumpTestResult, PeriodicityMode, PeriodicityProfile,
};
pub use lobster::{BookSnapshot, EventType, OrderFlowEvent, Side, Strictness, TimeNs};
pub use synth::{GroundTruthLedger, SyntheticSpec};
pub use tail::{classify_boundedness, eccdf, fit_tail, Boundedness, RegimeSplit, TailFit};
