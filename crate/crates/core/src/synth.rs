//! Synthetic order-flow generation with a ground-truth ledger.
//!
//! Generates per-minute return series (Gaussian body, optional diurnal
//! volatility pattern, Poisson-injected jumps), regime-dependent trading
//! volumes (lognormal body spliced with a Pareto tail), and full
//! message/orderbook file pairs whose per-minute totals match the ledger
//! exactly. The ledger is the verification oracle for every other module.
//!
//! Determinism: one master seed; each day derives independent SplitMix64
//! stream seeds for returns, volumes and file emission, so identical
//! specs produce bit-identical files and day generation can fan out.

use std::collections::HashSet;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use thiserror::Error;

use crate::bars::{week_slot, ReturnPoint, SessionSpec};
use crate::kv::{self, KvError};
use crate::lobster::{
    write_message_file, write_orderbook_file, BookSnapshot, EventType, LobsterError, OrderFlowEvent, Side,
    TimeNs,
};

const RETURNS_STREAM: u64 = 0;
const VOLUMES_STREAM: u64 = 1;
const EMISSION_STREAM: u64 = 2;

/// Trade volume is split across at most this many executions per minute.
const MAX_TRADE_SPLITS: u64 = 8;
/// Limit and cancel volume split across at most this many orders.
const MAX_ORDER_SPLITS: u64 = 6;
/// Log-space volume offset of limit orders relative to the trade body.
const LIMIT_LN_OFFSET: f64 = std::f64::consts::LN_2;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("ledger incomplete for {date}: {missing} not generated yet")]
    LedgerIncomplete { date: NaiveDate, missing: &'static str },
    #[error("spec file: {0}")]
    Kv(#[from] KvError),
    #[error(transparent)]
    Lobster(#[from] LobsterError),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

/// Parameters of the synthetic world.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub n_days: u32,
    /// First trading date; weekends are skipped when laying out days.
    pub start_date: NaiveDate,
    /// Per-minute return volatility of the Gaussian body.
    pub base_vol: f64,
    /// Multiplicative volatility factor per minute of day. The length
    /// sets the number of bars per day (default 390, flat).
    pub diurnal_profile: Vec<f64>,
    /// Expected jumps per day (Poisson).
    pub jump_rate: f64,
    /// Jump magnitude in multiples of the local true sigma.
    pub jump_size_sigmas: f64,
    /// Lognormal body location (mean of ln volume).
    pub volume_body_location: f64,
    /// Lognormal body scale (sd of ln volume).
    pub volume_body_scale: f64,
    /// CCDF tail exponent of non-jump minute volumes.
    pub nonjump_tail_exponent: f64,
    /// CCDF tail exponent of jump minute volumes.
    pub jump_tail_exponent: f64,
    /// Quantile where the Pareto tail replaces the lognormal body.
    pub tail_splice_quantile: f64,
    /// Opening mid in ticks for the first day.
    pub start_price_ticks: i64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            seed: 42,
            n_days: 250,
            start_date: NaiveDate::from_ymd_opt(2020, 1, 6).unwrap(),
            base_vol: 5e-4,
            diurnal_profile: vec![1.0; 390],
            jump_rate: 1.0,
            jump_size_sigmas: 10.0,
            volume_body_location: 6.9,
            volume_body_scale: 0.6,
            nonjump_tail_exponent: 3.2,
            jump_tail_exponent: 1.6,
            tail_splice_quantile: 0.90,
            start_price_ticks: 5_000_000,
        }
    }
}

impl SyntheticSpec {
    pub fn bars_per_day(&self) -> u32 {
        self.diurnal_profile.len() as u32
    }

    /// Session implied by the profile length: 1-minute bars from 09:30.
    pub fn session(&self) -> SessionSpec {
        SessionSpec { open_secs: 34_200, close_secs: 34_200 + 60 * self.bars_per_day(), bar_secs: 60 }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |msg: String| Err(SynthError::InvalidSpec(msg));
        if self.n_days == 0 {
            return fail("n_days must be positive".into());
        }
        if self.diurnal_profile.len() < 2 {
            return fail("diurnal_profile needs at least 2 bars".into());
        }
        if self.diurnal_profile.iter().any(|&f| !f.is_finite() || f <= 0.0) {
            return fail("diurnal_profile factors must be positive".into());
        }
        if !self.base_vol.is_finite() || self.base_vol < 0.0 {
            return fail(format!("base_vol {} must be non-negative", self.base_vol));
        }
        if !self.jump_rate.is_finite() || self.jump_rate < 0.0 {
            return fail(format!("jump_rate {} must be non-negative", self.jump_rate));
        }
        if [self.nonjump_tail_exponent, self.jump_tail_exponent]
            .iter()
            .any(|&mu| !mu.is_finite() || mu <= 0.0)
        {
            return fail("tail exponents must be positive".into());
        }
        if !self.tail_splice_quantile.is_finite()
            || self.tail_splice_quantile <= 0.0
            || self.tail_splice_quantile >= 1.0
        {
            return fail(format!("tail_splice_quantile {} outside (0,1)", self.tail_splice_quantile));
        }
        if !self.volume_body_scale.is_finite() || self.volume_body_scale <= 0.0 {
            return fail("volume_body_scale must be positive".into());
        }
        if self.start_price_ticks < 100 {
            return fail("start_price_ticks too small for a tick grid".into());
        }
        Ok(())
    }

    /// Loads a spec from `key = value` text. Unknown keys are rejected.
    /// `diurnal_profile` accepts a single factor (flat), a comma list, or
    /// run-length segments like `2.0x30,1.0x360`.
    pub fn from_kv_str(text: &str) -> Result<Self, SynthError> {
        let map = kv::parse_kv(text)?;
        let mut spec = SyntheticSpec::default();
        let mut profile_value: Option<String> = None;
        for (key, value) in &map {
            match key.as_str() {
                "seed" => spec.seed = kv::parse_typed(key, value)?,
                "n_days" => spec.n_days = kv::parse_typed(key, value)?,
                "start_date" => {
                    spec.start_date = NaiveDate::parse_from_str(value, "%Y-%m-%d")
                        .map_err(|e| kv::bad_value(key, format!("bad date: {e}")))?;
                }
                "base_vol" => spec.base_vol = kv::parse_typed(key, value)?,
                "diurnal_profile" => profile_value = Some(value.clone()),
                "jump_rate" => spec.jump_rate = kv::parse_typed(key, value)?,
                "jump_size_sigmas" => spec.jump_size_sigmas = kv::parse_typed(key, value)?,
                "volume_body_location" => spec.volume_body_location = kv::parse_typed(key, value)?,
                "volume_body_scale" => spec.volume_body_scale = kv::parse_typed(key, value)?,
                "nonjump_tail_exponent" => spec.nonjump_tail_exponent = kv::parse_typed(key, value)?,
                "jump_tail_exponent" => spec.jump_tail_exponent = kv::parse_typed(key, value)?,
                "tail_splice_quantile" => spec.tail_splice_quantile = kv::parse_typed(key, value)?,
                "start_price_ticks" => spec.start_price_ticks = kv::parse_typed(key, value)?,
                _ => return Err(KvError::UnknownKey { key: key.clone() }.into()),
            }
        }
        if let Some(value) = profile_value {
            spec.diurnal_profile = parse_profile(&value, spec.diurnal_profile.len())?;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_kv_file(path: &Path) -> Result<Self, SynthError> {
        Self::from_kv_str(&std::fs::read_to_string(path)?)
    }

    /// Trading dates: `n_days` weekdays starting at `start_date`.
    pub fn trading_dates(&self) -> Vec<NaiveDate> {
        let mut dates = Vec::with_capacity(self.n_days as usize);
        let mut date = self.start_date;
        while dates.len() < self.n_days as usize {
            if date.weekday().num_days_from_monday() < 5 {
                dates.push(date);
            }
            date = date.succ_opt().expect("date overflow");
        }
        dates
    }
}

fn parse_profile(value: &str, default_len: usize) -> Result<Vec<f64>, SynthError> {
    let mut profile = Vec::new();
    for segment in value.split(',') {
        let segment = segment.trim();
        if let Some((factor, count)) = segment.split_once('x') {
            let f: f64 = kv::parse_typed("diurnal_profile", factor.trim())?;
            let c: usize = kv::parse_typed("diurnal_profile", count.trim())?;
            profile.extend(std::iter::repeat_n(f, c));
        } else {
            profile.push(kv::parse_typed("diurnal_profile", segment)?);
        }
    }
    // a single bare factor means a flat profile of the default length
    if profile.len() == 1 {
        return Ok(vec![profile[0]; default_len]);
    }
    Ok(profile)
}

/// One injected jump.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct JumpInjection {
    pub bar_index: u32,
    /// +1 or -1.
    pub sign: i8,
    /// The exact return written into the series.
    pub size_return: f64,
}

/// Ground truth for one trading day.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DayLedger {
    pub date: NaiveDate,
    /// One return per bar. Index 0 is the overnight gap applied to the
    /// day's opening mid; it is not recoverable from intraday mids.
    pub returns: Vec<f64>,
    pub jumps: Vec<JumpInjection>,
    pub trade_volumes: Option<Vec<u64>>,
    pub limit_volumes: Option<Vec<u64>>,
    pub cancel_volumes: Option<Vec<u64>>,
}

/// Exact record of everything the generator emitted.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GroundTruthLedger {
    pub bars_per_day: u32,
    pub base_vol: f64,
    /// The diurnal factors used, one per bar.
    pub true_periodicity: Vec<f64>,
    pub days: Vec<DayLedger>,
}

impl GroundTruthLedger {
    pub fn jump_minutes(&self) -> HashSet<(NaiveDate, u32)> {
        self.days
            .iter()
            .flat_map(|d| d.jumps.iter().map(move |j| (d.date, j.bar_index)))
            .collect()
    }

    /// The exact generated return series as chained points (all bars,
    /// including the index-0 overnight gap).
    pub fn return_points(&self) -> Vec<ReturnPoint> {
        let bpd = self.bars_per_day;
        let mut points = Vec::with_capacity(self.days.len() * bpd as usize);
        for day in &self.days {
            for (b, &r) in day.returns.iter().enumerate() {
                points.push(ReturnPoint {
                    date: day.date,
                    bar_index: b as u32,
                    week_slot: week_slot(day.date, b as u32, bpd),
                    log_return: r,
                });
            }
        }
        points
    }

    pub fn total_trade_volume(&self, date: NaiveDate) -> Option<u64> {
        self.days
            .iter()
            .find(|d| d.date == date)
            .and_then(|d| d.trade_volumes.as_ref())
            .map(|v| v.iter().sum())
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn day_rng(seed: u64, day_index: u64, stream: u64) -> ChaCha8Rng {
    let derived = splitmix64(splitmix64(seed) ^ splitmix64(day_index.wrapping_mul(3).wrapping_add(stream)));
    ChaCha8Rng::seed_from_u64(derived)
}

/// Standard normal quantile (Acklam's rational approximation, relative
/// error below ~1.2e-9). Good enough to shape the synthetic volume body.
fn inv_norm_cdf(p: f64) -> f64 {
    const A: [f64; 6] = [
        -39.696_830_286_653_76,
        220.946_098_424_520_5,
        -275.928_510_446_968_7,
        138.357_751_867_269,
        -30.664_798_066_147_16,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -54.476_098_798_224_06,
        161.585_836_858_040_9,
        -155.698_979_859_886_6,
        66.801_311_887_719_72,
        -13.280_681_552_885_72,
    ];
    const C: [f64; 6] = [
        -0.007_784_894_002_430_293,
        -0.322_396_458_041_136_5,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        0.007_784_695_709_041_462,
        0.322_467_129_070_039_8,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;

    debug_assert!(p > 0.0 && p < 1.0);
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -((((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0))
    }
}

/// Pareto quantile: x(u) = x_min * u^(-1/mu) for u in (0, 1].
pub fn pareto_inverse(mu: f64, x_min: f64, u: f64) -> f64 {
    x_min * u.powf(-1.0 / mu)
}

/// Exact Pareto CCDF: P(X > x) = (x/x_min)^(-mu) for x >= x_min.
pub fn pareto_ccdf(mu: f64, x_min: f64, x: f64) -> f64 {
    if x < x_min {
        1.0
    } else {
        (x / x_min).powf(-mu)
    }
}

/// Inverse-transform Pareto draws with CCDF exponent `mu`.
pub fn pareto_sample(mu: f64, x_min: f64, n: usize, seed: u64) -> Result<Vec<f64>, SynthError> {
    if !mu.is_finite() || mu <= 0.0 || !x_min.is_finite() || x_min <= 0.0 {
        return Err(SynthError::DomainError(format!("pareto needs mu > 0 and x_min > 0, got {mu}, {x_min}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let u: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]
            pareto_inverse(mu, x_min, u)
        })
        .collect())
}

/// Generates the per-minute return series and jump injections.
///
/// Draw order per day: one Gaussian per bar, the Poisson jump count,
/// then per jump a bar index (rejection-sampled to distinctness) and a
/// sign. Jumps land on bars 1..bars_per_day, never on the index-0
/// overnight gap, so a file-based pipeline can recover them.
pub fn gen_return_series(spec: &SyntheticSpec) -> Result<GroundTruthLedger, SynthError> {
    spec.validate()?;
    let bpd = spec.bars_per_day() as usize;
    let mut days = Vec::with_capacity(spec.n_days as usize);
    for (day_index, date) in spec.trading_dates().into_iter().enumerate() {
        let mut rng = day_rng(spec.seed, day_index as u64, RETURNS_STREAM);
        let returns: Vec<f64> = (0..bpd)
            .map(|b| rng.sample::<f64, _>(StandardNormal) * spec.base_vol * spec.diurnal_profile[b])
            .collect();
        let mut day = DayLedger {
            date,
            returns,
            jumps: Vec::new(),
            trade_volumes: None,
            limit_volumes: None,
            cancel_volumes: None,
        };
        if spec.jump_rate > 0.0 {
            let poisson = Poisson::new(spec.jump_rate)
                .map_err(|e| SynthError::DomainError(format!("jump rate: {e}")))?;
            let count = (poisson.sample(&mut rng) as usize).min(bpd - 1);
            let mut used = HashSet::new();
            for _ in 0..count {
                let bar = loop {
                    let candidate = rng.gen_range(1..bpd as u32);
                    if used.insert(candidate) {
                        break candidate;
                    }
                };
                let sign: i8 = if rng.gen::<f64>() < 0.5 { 1 } else { -1 };
                apply_jump(&mut day, bar, sign, spec.jump_size_sigmas, spec.base_vol, &spec.diurnal_profile);
            }
            day.jumps.sort_by_key(|j| j.bar_index);
        }
        days.push(day);
    }
    Ok(GroundTruthLedger {
        bars_per_day: bpd as u32,
        base_vol: spec.base_vol,
        true_periodicity: spec.diurnal_profile.clone(),
        days,
    })
}

fn apply_jump(day: &mut DayLedger, bar_index: u32, sign: i8, sigmas: f64, base_vol: f64, profile: &[f64]) {
    let size_return = sign as f64 * sigmas * base_vol * profile[bar_index as usize];
    day.returns[bar_index as usize] = size_return;
    day.jumps.push(JumpInjection { bar_index, sign, size_return });
}

/// Replaces the return at (day, bar) with a jump of `sigmas` local
/// standard deviations and records it in the ledger. Call before
/// [`gen_volume_series`] so the volume regime follows the injection.
pub fn inject_jump(
    ledger: &mut GroundTruthLedger,
    day_index: usize,
    bar_index: u32,
    sign: i8,
    sigmas: f64,
) -> Result<(), SynthError> {
    if day_index >= ledger.days.len() || bar_index as usize >= ledger.true_periodicity.len() {
        return Err(SynthError::DomainError(format!("no minute ({day_index}, {bar_index}) in the ledger")));
    }
    let base_vol = ledger.base_vol;
    let profile = ledger.true_periodicity.clone();
    let day = &mut ledger.days[day_index];
    apply_jump(day, bar_index, sign, sigmas, base_vol, &profile);
    day.jumps.sort_by_key(|j| j.bar_index);
    Ok(())
}

/// Spliced volume draw: lognormal body below the splice quantile, Pareto
/// tail with CCDF exponent `mu` above it. A single uniform per minute.
fn spliced_volume(spec: &SyntheticSpec, mu: f64, u: f64) -> u64 {
    let q = spec.tail_splice_quantile;
    let u = u.max(1e-12); // uniform draws are already < 1
    let v = if u <= q {
        (spec.volume_body_location + spec.volume_body_scale * inv_norm_cdf(u)).exp()
    } else {
        let x_q = (spec.volume_body_location + spec.volume_body_scale * inv_norm_cdf(q)).exp();
        let w = (1.0 - u) / (1.0 - q); // uniform in (0, 1)
        pareto_inverse(mu, x_q, w)
    };
    (v.ceil() as u64).max(1)
}

/// Generates per-minute Trade volumes for every day in the ledger.
/// Jump minutes use the jump tail exponent, all others the non-jump one;
/// volumes are rounded up to integer shares >= 1.
pub fn gen_volume_series(spec: &SyntheticSpec, ledger: &mut GroundTruthLedger) -> Result<(), SynthError> {
    spec.validate()?;
    let bpd = spec.bars_per_day() as usize;
    for (day_index, day) in ledger.days.iter_mut().enumerate() {
        let mut rng = day_rng(spec.seed, day_index as u64, VOLUMES_STREAM);
        let jump_bars: HashSet<u32> = day.jumps.iter().map(|j| j.bar_index).collect();
        let volumes: Vec<u64> = (0..bpd)
            .map(|b| {
                let mu = if jump_bars.contains(&(b as u32)) {
                    spec.jump_tail_exponent
                } else {
                    spec.nonjump_tail_exponent
                };
                spliced_volume(spec, mu, rng.gen::<f64>())
            })
            .collect();
        day.trade_volumes = Some(volumes);
    }
    Ok(())
}

/// Splits `total` into `parts` positive integers that sum to it exactly.
fn split_volume(rng: &mut ChaCha8Rng, total: u64, parts: u64) -> Vec<u64> {
    let mut out = Vec::with_capacity(parts as usize);
    let mut remaining = total;
    for i in 0..parts.saturating_sub(1) {
        let reserve = parts - 1 - i; // one share for each remaining part
        let take = rng.gen_range(1..=remaining - reserve);
        out.push(take);
        remaining -= take;
    }
    out.push(remaining);
    out
}

struct PendingEvent {
    event_type: EventType,
    size: u64,
    price: i64,
    side: Side,
}

/// Emits one day as a message/orderbook file pair.
///
/// Per-minute Trade/LimitOrder/Cancellation totals equal the ledger
/// exactly; limit and cancel totals are drawn here and recorded back into
/// the ledger. The mid path comes from the cumulated exact returns
/// rounded half-even onto the tick grid, so minute-close mids reproduce
/// the ledger returns to within tick rounding. The book around every
/// event in minute b is (mid_b - 1, mid_b + 1).
pub fn gen_lobster_day<W1: Write, W2: Write>(
    spec: &SyntheticSpec,
    ledger: &mut GroundTruthLedger,
    day_index: usize,
    msg_sink: &mut W1,
    book_sink: &mut W2,
) -> Result<(), SynthError> {
    spec.validate()?;
    let bpd = spec.bars_per_day() as usize;
    let session = spec.session();
    let date = ledger.days[day_index].date;

    let trade_volumes = ledger.days[day_index]
        .trade_volumes
        .clone()
        .ok_or(SynthError::LedgerIncomplete { date, missing: "trade volumes" })?;
    let prior_log: f64 = ledger.days[..day_index].iter().map(|d| d.returns.iter().sum::<f64>()).sum();
    let returns = ledger.days[day_index].returns.clone();

    let mut rng = day_rng(spec.seed, day_index as u64, EMISSION_STREAM);
    let mut log_mid = (spec.start_price_ticks as f64).ln() + prior_log;
    let mut order_id: u64 = 1;
    let mut limit_totals = vec![0u64; bpd];
    let mut cancel_totals = vec![0u64; bpd];
    let mut events: Vec<OrderFlowEvent> = Vec::new();
    let mut snapshots: Vec<BookSnapshot> = Vec::new();

    let bar_ns = session.bar_secs as i64 * 1_000_000_000;
    let open_ns = session.open_secs as i64 * 1_000_000_000;

    for b in 0..bpd {
        log_mid += returns[b];
        let mid = log_mid.exp().round_ties_even() as i64;
        debug_assert!(mid > 1, "mid collapsed to the tick floor");

        let mut pending: Vec<PendingEvent> = Vec::new();
        let side = |rng: &mut ChaCha8Rng| if rng.gen::<f64>() < 0.5 { Side::Buy } else { Side::Sell };

        // trades: the ledger volume split across a random number of executions
        let v_trade = trade_volumes[b];
        let k = rng.gen_range(1..=v_trade.min(MAX_TRADE_SPLITS));
        for size in split_volume(&mut rng, v_trade, k) {
            let s = side(&mut rng);
            let price = if s == Side::Buy { mid + 1 } else { mid - 1 };
            pending.push(PendingEvent { event_type: EventType::ExecVisible, size, price, side: s });
        }

        // limit orders
        let v_limit = {
            let u: f64 = rng.gen::<f64>();
            let z = inv_norm_cdf(u.clamp(1e-12, 1.0 - 1e-12));
            ((spec.volume_body_location + LIMIT_LN_OFFSET + spec.volume_body_scale * z).exp().ceil() as u64)
                .max(1)
        };
        let k = rng.gen_range(1..=v_limit.min(MAX_ORDER_SPLITS));
        for size in split_volume(&mut rng, v_limit, k) {
            let s = side(&mut rng);
            let offset = rng.gen_range(0..5);
            let price = if s == Side::Buy { (mid - 1 - offset).max(1) } else { mid + 1 + offset };
            pending.push(PendingEvent { event_type: EventType::NewLimit, size, price, side: s });
        }
        limit_totals[b] = v_limit;

        // cancellations, randomly partial or full
        let v_cancel = {
            let u: f64 = rng.gen::<f64>();
            let z = inv_norm_cdf(u.clamp(1e-12, 1.0 - 1e-12));
            ((spec.volume_body_location + spec.volume_body_scale * z).exp().ceil() as u64).max(1)
        };
        let k = rng.gen_range(1..=v_cancel.min(MAX_ORDER_SPLITS));
        for size in split_volume(&mut rng, v_cancel, k) {
            let event_type = if rng.gen::<f64>() < 0.5 { EventType::PartialCancel } else { EventType::Delete };
            let s = side(&mut rng);
            let offset = rng.gen_range(0..5);
            let price = if s == Side::Buy { (mid - 1 - offset).max(1) } else { mid + 1 + offset };
            pending.push(PendingEvent { event_type, size, price, side: s });
        }
        cancel_totals[b] = v_cancel;

        // time offsets inside the minute, sorted so the file stays ordered
        let mut offsets: Vec<i64> = (0..pending.len()).map(|_| rng.gen_range(0..bar_ns)).collect();
        offsets.sort_unstable();
        let bar_start = open_ns + b as i64 * bar_ns;
        for (event, offset) in pending.into_iter().zip(offsets) {
            let time = TimeNs(bar_start + offset);
            events.push(OrderFlowEvent {
                time,
                event_type: event.event_type,
                order_id,
                size: event.size,
                price: event.price,
                side: event.side,
            });
            snapshots.push(BookSnapshot {
                time,
                best_ask_price: mid + 1,
                best_ask_size: rng.gen_range(1..=200),
                best_bid_price: mid - 1,
                best_bid_size: rng.gen_range(1..=200),
            });
            order_id += 1;
        }
    }

    write_message_file(events.iter(), msg_sink)?;
    write_orderbook_file(snapshots.iter(), book_sink)?;

    let day = &mut ledger.days[day_index];
    day.limit_volumes = Some(limit_totals);
    day.cancel_volumes = Some(cancel_totals);
    Ok(())
}

/// Paths of an emitted dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub ledger: GroundTruthLedger,
    pub message_paths: Vec<PathBuf>,
    pub orderbook_paths: Vec<PathBuf>,
    pub ledger_path: PathBuf,
}

/// Full generation: returns, volumes, one file pair per day plus
/// `ledger.json`, all under `out_dir`.
pub fn gen_dataset(spec: &SyntheticSpec, out_dir: &Path) -> Result<Dataset, SynthError> {
    std::fs::create_dir_all(out_dir)?;
    let mut ledger = gen_return_series(spec)?;
    gen_volume_series(spec, &mut ledger)?;

    let mut message_paths = Vec::new();
    let mut orderbook_paths = Vec::new();
    for day_index in 0..ledger.days.len() {
        let date = ledger.days[day_index].date;
        let msg_path = out_dir.join(format!("synth_{date}_message.csv"));
        let book_path = out_dir.join(format!("synth_{date}_orderbook.csv"));
        let mut msg = BufWriter::new(std::fs::File::create(&msg_path)?);
        let mut book = BufWriter::new(std::fs::File::create(&book_path)?);
        gen_lobster_day(spec, &mut ledger, day_index, &mut msg, &mut book)?;
        msg.flush()?;
        book.flush()?;
        message_paths.push(msg_path);
        orderbook_paths.push(book_path);
    }

    let ledger_path = out_dir.join("ledger.json");
    let file = std::fs::File::create(&ledger_path)?;
    serde_json::to_writer_pretty(BufWriter::new(file), &ledger)
        .map_err(|e| SynthError::Io(std::io::Error::other(e)))?;
    Ok(Dataset { ledger, message_paths, orderbook_paths, ledger_path })
}
