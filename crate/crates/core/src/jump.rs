//! Nonparametric detection of anomalous 1-minute price jumps.
//!
//! The test statistic standardizes each return by a jump-robust local
//! volatility estimate built from products of adjacent absolute returns
//! (bipower variation) and, optionally, by a minute-of-week periodicity
//! factor. Under the null the maximum of the standardized statistics
//! follows a Gumbel law, which supplies the critical value at a chosen
//! significance level.
//!
//! Periodicity factors are estimated robustly: returns are standardized
//! by their day's bipower volatility, each slot's scale starts from the
//! shortest-half estimator and is refined once by a weighted standard
//! deviation with a hard chi-square cutoff, and the factors are
//! normalized to unit mean square.

use std::io::{BufRead, Write};

use chrono::NaiveDate;
use thiserror::Error;

use crate::bars::ReturnPoint;
use crate::numfmt::fmt_sig12;

/// Shortest-half scale consistency factor (Gaussian).
const SHORTH_CONSISTENCY: f64 = 0.7413;
/// Weighted-standard-deviation consistency factor.
const WSD_CONSISTENCY: f64 = 1.081;
/// Hard weight cutoff: 99% chi-square(1) quantile.
const WSD_CUTOFF: f64 = 6.635;

/// Which periodicity pattern the detector removes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum PeriodicityMode {
    /// No filtering: f = 1 everywhere.
    Off,
    /// One factor per minute of day, pooled across weekdays (S = 390).
    IntradayOnly,
    /// One factor per minute of week (S = 1950).
    #[default]
    Intraweek,
}

impl PeriodicityMode {
    pub fn parse(text: &str) -> Option<Self> {
        match text.to_ascii_lowercase().as_str() {
            "off" | "none" => Some(PeriodicityMode::Off),
            "intraday" | "intraday_only" | "intradayonly" => Some(PeriodicityMode::IntradayOnly),
            "intraweek" => Some(PeriodicityMode::Intraweek),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PeriodicityMode::Off => "off",
            PeriodicityMode::IntradayOnly => "intraday_only",
            PeriodicityMode::Intraweek => "intraweek",
        }
    }
}

/// Multiplicative volatility factors per minute-of-week (or minute-of-day)
/// slot, normalized so the mean square over slots is 1.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PeriodicityProfile {
    pub mode: PeriodicityMode,
    pub factors: Vec<f64>,
    pub sample_counts: Vec<u64>,
}

impl PeriodicityProfile {
    /// The no-op profile used when filtering is off.
    pub fn flat() -> Self {
        PeriodicityProfile { mode: PeriodicityMode::Off, factors: Vec::new(), sample_counts: Vec::new() }
    }

    pub fn factor_for(&self, point: &ReturnPoint) -> Result<f64, JumpError> {
        let slot = match self.mode {
            PeriodicityMode::Off => return Ok(1.0),
            PeriodicityMode::IntradayOnly => point.bar_index as usize,
            PeriodicityMode::Intraweek => point.week_slot as usize,
        };
        self.factors
            .get(slot)
            .copied()
            .ok_or(JumpError::SlotOutOfRange { slot, len: self.factors.len() })
    }

    /// Checks positivity and the unit mean-square normalization (1e-9).
    pub fn validate(&self) -> Result<(), JumpError> {
        if self.mode == PeriodicityMode::Off {
            return Ok(());
        }
        if self.factors.iter().any(|&f| !f.is_finite() || f <= 0.0) {
            return Err(JumpError::InvalidProfile("non-positive factor".into()));
        }
        let ms = self.factors.iter().map(|f| f * f).sum::<f64>() / self.factors.len() as f64;
        if (ms - 1.0).abs() > 1e-9 {
            return Err(JumpError::InvalidProfile(format!("mean square {ms} != 1")));
        }
        Ok(())
    }
}

/// Detector settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    /// Local volatility window in bars (K).
    pub window: usize,
    /// Significance level of the Gumbel test.
    pub alpha: f64,
    pub periodicity: PeriodicityMode,
    /// Minimum observations per slot before the fallback cascade kicks in.
    pub min_slot_obs: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig { window: 390, alpha: 0.01, periodicity: PeriodicityMode::Intraweek, min_slot_obs: 10 }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), JumpError> {
        if self.window < 3 {
            return Err(JumpError::InvalidConfig(format!("window {} < 3", self.window)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(JumpError::InvalidConfig(format!("alpha {} outside (0,1)", self.alpha)));
        }
        Ok(())
    }
}

/// Sign of the return behind a test result. A zero return is reported as
/// Positive; it can never exceed the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ReturnSign {
    Positive,
    Negative,
}

impl ReturnSign {
    pub fn code(self) -> i64 {
        match self {
            ReturnSign::Positive => 1,
            ReturnSign::Negative => -1,
        }
    }
}

/// Jump test outcome for one tested minute.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpTestResult {
    pub date: NaiveDate,
    pub bar_index: u32,
    /// r_i / sigma_i, NaN when the statistic is undefined.
    pub raw_stat: f64,
    /// r_i / (f_s * sigma_i), NaN when undefined.
    pub filtered_stat: f64,
    /// Critical value C_n + S_n * beta*.
    pub threshold: f64,
    pub is_jump: bool,
    pub return_sign: ReturnSign,
    /// Set when every return in the local window was zero.
    pub undefined: bool,
}

/// Gumbel location/scale constants and the significance offset.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GumbelThreshold {
    pub c_n: f64,
    pub s_n: f64,
    pub beta_star: f64,
}

impl GumbelThreshold {
    pub fn critical_value(&self) -> f64 {
        self.c_n + self.s_n * self.beta_star
    }
}

/// Full detection pass output.
#[derive(Debug, Clone)]
pub struct Detection {
    pub results: Vec<JumpTestResult>,
    pub n_tested: usize,
    /// `None` when fewer than 2 observations were testable.
    pub threshold: Option<GumbelThreshold>,
}

#[derive(Debug, Error)]
pub enum JumpError {
    #[error("invalid detector config: {0}")]
    InvalidConfig(String),
    #[error("window too short: index {index} < window {window}")]
    WindowTooShort { index: usize, window: usize },
    #[error("gumbel threshold needs n >= 2, got {n}")]
    DomainError { n: usize },
    #[error("slot {slot} has {count} observations, below the minimum even after fallback")]
    InsufficientData { slot: usize, count: usize },
    #[error("slot {slot} outside profile of length {len}")]
    SlotOutOfRange { slot: usize, len: usize },
    #[error("profile mode {profile:?} does not match detector mode {config:?}")]
    ProfileMismatch { profile: PeriodicityMode, config: PeriodicityMode },
    #[error("invalid periodicity profile: {0}")]
    InvalidProfile(String),
    #[error("jumps csv line {line}: {reason}")]
    Csv { line: u64, reason: String },
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

/// Jump-robust local volatility at index `i` over a backward window of
/// `k` bars:
///
/// sigma_i^2 = (1/(k-2)) * sum_{j=i-k+2}^{i-1} |r_j| * |r_{j-1}|
///
/// Uses only returns strictly before `i`, so a jump at `i` does not
/// contaminate its own estimate. Zero when every window return is zero;
/// the statistic at `i` is then undefined.
pub fn bipower_local_vol(returns: &[f64], i: usize, k: usize) -> Result<f64, JumpError> {
    if k < 3 {
        return Err(JumpError::InvalidConfig(format!("window {k} < 3")));
    }
    if i < k || i >= returns.len() {
        return Err(JumpError::WindowTooShort { index: i, window: k });
    }
    let mut sum = 0.0;
    for j in (i - k + 2)..i {
        sum += returns[j].abs() * returns[j - 1].abs();
    }
    Ok((sum / (k - 2) as f64).sqrt())
}

/// Gumbel constants for the maximum of `n` standardized statistics at
/// significance `alpha`, with c = sqrt(2/pi):
///
/// C_n = sqrt(2 ln n)/c - (ln pi + ln ln n) / (2c sqrt(2 ln n))
/// S_n = 1 / (c sqrt(2 ln n))
/// beta* = -ln(-ln(1 - alpha))
pub fn gumbel_threshold(n: usize, alpha: f64) -> Result<GumbelThreshold, JumpError> {
    if n < 2 {
        return Err(JumpError::DomainError { n });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(JumpError::InvalidConfig(format!("alpha {alpha} outside (0,1)")));
    }
    let c = (2.0 / std::f64::consts::PI).sqrt();
    let ln_n = (n as f64).ln();
    let root = (2.0 * ln_n).sqrt();
    let c_n = root / c - (std::f64::consts::PI.ln() + ln_n.ln()) / (2.0 * c * root);
    let s_n = 1.0 / (c * root);
    let beta_star = -(-(1.0 - alpha).ln()).ln();
    Ok(GumbelThreshold { c_n, s_n, beta_star })
}

/// Shortest-half scale with one weighted-standard-deviation refinement.
/// `None` when the slot is too small or degenerate (ties at the half
/// width, or no surviving weight).
fn robust_slot_scale(xs: &mut [f64]) -> Option<f64> {
    let m = xs.len();
    if m < 3 {
        return None;
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = m / 2 + 1;
    let mut shortest = f64::INFINITY;
    for i in 0..(m - h) {
        let width = xs[i + h] - xs[i];
        if width < shortest {
            shortest = width;
        }
    }
    let shorth = SHORTH_CONSISTENCY * shortest;
    if !shorth.is_finite() || shorth <= 0.0 {
        return None;
    }
    let mut weighted_sum = 0.0;
    let mut weight_count = 0usize;
    for &x in xs.iter() {
        let z = x / shorth;
        if z * z <= WSD_CUTOFF {
            weighted_sum += x * x;
            weight_count += 1;
        }
    }
    if weight_count == 0 {
        return None;
    }
    let wsd = (WSD_CONSISTENCY * weighted_sum / weight_count as f64).sqrt();
    (wsd > 0.0).then_some(wsd)
}

/// Per-day bipower volatility used to standardize returns before slot
/// scales are estimated.
fn day_bipower_scale(day: &[f64]) -> Option<f64> {
    if day.len() < 2 {
        return None;
    }
    let sum: f64 = day.windows(2).map(|w| w[0].abs() * w[1].abs()).sum();
    let var = std::f64::consts::FRAC_PI_2 * sum / (day.len() - 1) as f64;
    let scale = var.sqrt();
    (scale > 0.0).then_some(scale)
}

/// Estimates the periodicity profile from a chained return series.
///
/// Slots with fewer than `min_slot_obs` observations borrow the pooled
/// minute-of-day estimate; slots with no observations anywhere (possible
/// by construction, e.g. the first minute of a day when returns come from
/// intraday mids) are set to the neutral factor 1. A slot that has data
/// but stays below the minimum even after the fallback is an error.
pub fn estimate_periodicity(
    returns: &[ReturnPoint],
    mode: PeriodicityMode,
    min_slot_obs: usize,
    bars_per_day: u32,
) -> Result<PeriodicityProfile, JumpError> {
    if mode == PeriodicityMode::Off {
        return Ok(PeriodicityProfile::flat());
    }
    let bpd = bars_per_day as usize;
    let n_slots = match mode {
        PeriodicityMode::IntradayOnly => bpd,
        PeriodicityMode::Intraweek => 5 * bpd,
        PeriodicityMode::Off => unreachable!(),
    };

    let mut slot_xs: Vec<Vec<f64>> = vec![Vec::new(); n_slots];
    let mut pooled_xs: Vec<Vec<f64>> = vec![Vec::new(); if mode == PeriodicityMode::Intraweek { bpd } else { 0 }];

    let mut start = 0;
    while start < returns.len() {
        let date = returns[start].date;
        let mut end = start;
        while end < returns.len() && returns[end].date == date {
            end += 1;
        }
        let day = &returns[start..end];
        let day_returns: Vec<f64> = day.iter().map(|p| p.log_return).collect();
        if let Some(scale) = day_bipower_scale(&day_returns) {
            for point in day {
                let slot = match mode {
                    PeriodicityMode::IntradayOnly => point.bar_index as usize,
                    PeriodicityMode::Intraweek => point.week_slot as usize,
                    PeriodicityMode::Off => unreachable!(),
                };
                if slot >= n_slots {
                    return Err(JumpError::SlotOutOfRange { slot, len: n_slots });
                }
                let x = point.log_return / scale;
                slot_xs[slot].push(x);
                if mode == PeriodicityMode::Intraweek {
                    pooled_xs[point.bar_index as usize].push(x);
                }
            }
        }
        start = end;
    }

    let scale_of = |xs: &mut Vec<f64>, min: usize| -> Option<f64> {
        if xs.len() < min {
            None
        } else {
            robust_slot_scale(xs)
        }
    };
    let pooled_scales: Vec<Option<f64>> =
        pooled_xs.iter_mut().map(|xs| scale_of(xs, min_slot_obs)).collect();

    let sample_counts: Vec<u64> = slot_xs.iter().map(|xs| xs.len() as u64).collect();
    let mut factors: Vec<Option<f64>> = Vec::with_capacity(n_slots);
    for (slot, xs) in slot_xs.iter_mut().enumerate() {
        let count = xs.len();
        if let Some(own) = scale_of(xs, min_slot_obs) {
            factors.push(Some(own));
            continue;
        }
        if mode == PeriodicityMode::Intraweek {
            if let Some(borrowed) = pooled_scales[slot % bpd] {
                factors.push(Some(borrowed));
                continue;
            }
        }
        let pooled_count = if mode == PeriodicityMode::Intraweek { pooled_xs[slot % bpd].len() } else { count };
        if count == 0 && pooled_count == 0 {
            factors.push(None); // structurally empty slot, neutral fill below
        } else {
            return Err(JumpError::InsufficientData { slot, count });
        }
    }

    let usable: Vec<f64> = factors.iter().filter_map(|&f| f).collect();
    if usable.is_empty() {
        return Err(JumpError::InsufficientData { slot: 0, count: 0 });
    }
    let fill = (usable.iter().map(|f| f * f).sum::<f64>() / usable.len() as f64).sqrt();
    let mut factors: Vec<f64> = factors.into_iter().map(|f| f.unwrap_or(fill)).collect();
    let norm = (factors.iter().map(|f| f * f).sum::<f64>() / n_slots as f64).sqrt();
    for f in &mut factors {
        *f /= norm;
    }

    let profile = PeriodicityProfile { mode, factors, sample_counts };
    profile.validate()?;
    Ok(profile)
}

/// Runs the jump test over a chained return series.
///
/// The first `window` returns are burn-in and never tested; the local
/// window runs over the concatenated series, skipping across day
/// boundaries. The critical value is global, from `n` = number of
/// testable observations. Deterministic: identical inputs give identical
/// output.
pub fn detect_jumps(
    returns: &[ReturnPoint],
    profile: &PeriodicityProfile,
    config: &DetectorConfig,
) -> Result<Detection, JumpError> {
    config.validate()?;
    if config.periodicity != PeriodicityMode::Off {
        if profile.mode != config.periodicity {
            return Err(JumpError::ProfileMismatch { profile: profile.mode, config: config.periodicity });
        }
        profile.validate()?;
    }

    let n = returns.len();
    let k = config.window;
    if n <= k || n - k < 2 {
        return Ok(Detection { results: Vec::new(), n_tested: 0, threshold: None });
    }
    let n_tested = n - k;
    let threshold = gumbel_threshold(n_tested, config.alpha)?;
    let critical = threshold.critical_value();

    // prefix[j] = sum_{u=1..j} |r_u||r_{u-1}|, so the window sum at i is
    // prefix[i-1] - prefix[i-k+1].
    let mut prefix = vec![0.0f64; n];
    for j in 1..n {
        prefix[j] = prefix[j - 1] + returns[j].log_return.abs() * returns[j - 1].log_return.abs();
    }

    let inv_km2 = 1.0 / (k - 2) as f64;
    let mut results = Vec::with_capacity(n_tested);
    for (i, point) in returns.iter().enumerate().skip(k) {
        let window_sum = (prefix[i - 1] - prefix[i - k + 1]).max(0.0);
        let sigma = (window_sum * inv_km2).sqrt();
        let factor = if config.periodicity == PeriodicityMode::Off { 1.0 } else { profile.factor_for(point)? };
        let r = point.log_return;
        let return_sign = if r < 0.0 { ReturnSign::Negative } else { ReturnSign::Positive };
        let (raw_stat, filtered_stat, is_jump, undefined) = if sigma > 0.0 {
            let raw = r / sigma;
            let filtered = r / (factor * sigma);
            (raw, filtered, filtered.abs() > critical, false)
        } else {
            (f64::NAN, f64::NAN, false, true)
        };
        results.push(JumpTestResult {
            date: point.date,
            bar_index: point.bar_index,
            raw_stat,
            filtered_stat,
            threshold: critical,
            is_jump,
            return_sign,
            undefined,
        });
    }
    Ok(Detection { results, n_tested, threshold: Some(threshold) })
}

/// Writes results as CSV: date, bar_index, raw_stat, filtered_stat,
/// threshold, is_jump (0/1), return_sign (1/-1). Undefined statistics
/// serialize as `nan`.
pub fn write_jumps_csv<'a, W: Write, I: IntoIterator<Item = &'a JumpTestResult>>(
    results: I,
    sink: &mut W,
) -> Result<(), JumpError> {
    writeln!(sink, "date,bar_index,raw_stat,filtered_stat,threshold,is_jump,return_sign")?;
    for r in results {
        writeln!(
            sink,
            "{},{},{},{},{},{},{}",
            r.date,
            r.bar_index,
            fmt_sig12(r.raw_stat),
            fmt_sig12(r.filtered_stat),
            fmt_sig12(r.threshold),
            r.is_jump as u8,
            r.return_sign.code()
        )?;
    }
    Ok(())
}

/// Reads results back from the CSV written by [`write_jumps_csv`].
pub fn read_jumps_csv<R: BufRead>(source: R) -> Result<Vec<JumpTestResult>, JumpError> {
    let mut results = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let line_no = idx as u64 + 1;
        if (line_no == 1 && line.starts_with("date,")) || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(JumpError::Csv { line: line_no, reason: format!("expected 7 fields, got {}", fields.len()) });
        }
        let err = |reason: String| JumpError::Csv { line: line_no, reason };
        let date = NaiveDate::parse_from_str(fields[0], "%Y-%m-%d").map_err(|e| err(format!("bad date: {e}")))?;
        let bar_index = fields[1].parse::<u32>().map_err(|e| err(format!("bad bar_index: {e}")))?;
        let parse_f = |s: &str, name: &str| {
            s.parse::<f64>().map_err(|_| JumpError::Csv { line: line_no, reason: format!("bad {name} `{s}`") })
        };
        let raw_stat = parse_f(fields[2], "raw_stat")?;
        let filtered_stat = parse_f(fields[3], "filtered_stat")?;
        let threshold = parse_f(fields[4], "threshold")?;
        let is_jump = match fields[5] {
            "0" => false,
            "1" => true,
            other => return Err(err(format!("bad is_jump `{other}`"))),
        };
        let return_sign = match fields[6] {
            "1" => ReturnSign::Positive,
            "-1" => ReturnSign::Negative,
            other => return Err(err(format!("bad return_sign `{other}`"))),
        };
        results.push(JumpTestResult {
            date,
            bar_index,
            raw_stat,
            filtered_stat,
            threshold,
            is_jump,
            return_sign,
            undefined: raw_stat.is_nan(),
        });
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bars::week_slot;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn points_from(returns: &[f64]) -> Vec<ReturnPoint> {
        // synthetic chain over consecutive weekdays, 390 bars a day
        let mut out = Vec::with_capacity(returns.len());
        let mut date = NaiveDate::from_ymd_opt(2020, 1, 6).unwrap();
        let mut bar = 0u32;
        for &r in returns {
            out.push(ReturnPoint { date, bar_index: bar, week_slot: week_slot(date, bar, 390), log_return: r });
            bar += 1;
            if bar == 390 {
                bar = 0;
                date = date.succ_opt().unwrap();
                while date.weekday().num_days_from_monday() >= 5 {
                    date = date.succ_opt().unwrap();
                }
            }
        }
        out
    }

    use chrono::Datelike;

    #[test]
    fn bipower_constant_window_closed_form() {
        let c = 3.5e-4;
        let returns = vec![c; 500];
        // all window returns equal c -> sigma^2 = (k-2) c^2 / (k-2) = c^2
        let sigma = bipower_local_vol(&returns, 400, 390).unwrap();
        assert!((sigma - c).abs() < 1e-18);
    }

    #[test]
    fn bipower_zero_window_is_zero() {
        let returns = vec![0.0; 500];
        assert_eq!(bipower_local_vol(&returns, 400, 390).unwrap(), 0.0);
    }

    #[test]
    fn bipower_window_bounds() {
        let returns = vec![1.0; 100];
        assert!(matches!(
            bipower_local_vol(&returns, 50, 60),
            Err(JumpError::WindowTooShort { index: 50, window: 60 })
        ));
        assert!(matches!(bipower_local_vol(&returns, 100, 60), Err(JumpError::WindowTooShort { .. })));
    }

    #[test]
    fn bipower_matches_brute_force_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let returns: Vec<f64> = (0..2000).map(|_| rng.sample::<f64, _>(StandardNormal) * 1e-3).collect();
        for &(i, k) in &[(400usize, 390usize), (1999, 390), (500, 17), (60, 60)] {
            let got = bipower_local_vol(&returns, i, k).unwrap();
            // independent accumulation in reverse order
            let mut sum = 0.0;
            for j in ((i - k + 2)..i).rev() {
                sum += returns[j].abs() * returns[j - 1].abs();
            }
            let want = (sum / (k - 2) as f64).sqrt();
            assert!((got - want).abs() <= 1e-12 * want.max(1.0), "i={i} k={k}: {got} vs {want}");
        }
    }

    #[test]
    fn detect_stat_matches_bipower_op() {
        // the rolling pass inside detect_jumps must agree with the
        // documented per-index operation
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let returns: Vec<f64> = (0..1200).map(|_| rng.sample::<f64, _>(StandardNormal) * 2e-4).collect();
        let points = points_from(&returns);
        let config = DetectorConfig { window: 390, periodicity: PeriodicityMode::Off, ..Default::default() };
        let detection = detect_jumps(&points, &PeriodicityProfile::flat(), &config).unwrap();
        for res in detection.results.iter().step_by(97) {
            let i = points
                .iter()
                .position(|p| p.date == res.date && p.bar_index == res.bar_index)
                .unwrap();
            let sigma = bipower_local_vol(&returns, i, config.window).unwrap();
            let want = returns[i] / sigma;
            assert!(
                (res.raw_stat - want).abs() <= 1e-12 * want.abs().max(1.0),
                "{} vs {want}",
                res.raw_stat
            );
        }
    }

    #[test]
    fn gumbel_known_values() {
        let t = gumbel_threshold(97_500, 0.01).unwrap();
        // high-precision reference evaluation
        assert!((t.beta_star - 4.60014922677658).abs() < 1e-10);
        assert!((t.c_n - 5.538619553575398).abs() < 1e-10);
        assert!((t.s_n - 0.2614749830187157).abs() < 1e-10);

        let t2 = gumbel_threshold(1000, 0.01).unwrap();
        assert!((t2.c_n - 4.139639022926506).abs() < 1e-10);
        assert!((t2.s_n - 0.3371913840637393).abs() < 1e-10);

        // alpha = 1 - e^{-1}  ->  beta* = 0
        let t3 = gumbel_threshold(1000, 1.0 - (-1.0f64).exp()).unwrap();
        assert!(t3.beta_star.abs() < 1e-12);
    }

    #[test]
    fn gumbel_domain_and_monotonicity() {
        assert!(matches!(gumbel_threshold(1, 0.01), Err(JumpError::DomainError { n: 1 })));
        assert!(gumbel_threshold(2, 0.01).is_ok());
        assert!(matches!(gumbel_threshold(100, 0.0), Err(JumpError::InvalidConfig(_))));

        // beta* strictly decreasing in alpha
        let mut prev = f64::INFINITY;
        for alpha in [0.001, 0.01, 0.05, 0.1, 0.5, 0.9] {
            let b = gumbel_threshold(100, alpha).unwrap().beta_star;
            assert!(b < prev);
            prev = b;
        }
        // C_n increasing in n, all constants positive
        let mut prev_c = 0.0;
        for n in [2usize, 10, 100, 10_000, 1_000_000] {
            let t = gumbel_threshold(n, 0.01).unwrap();
            assert!(t.c_n > prev_c && t.s_n > 0.0);
            prev_c = t.c_n;
        }
    }

    #[test]
    fn flat_null_gives_unit_factors() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n_days = 250;
        let returns: Vec<f64> =
            (0..n_days * 390).map(|_| rng.sample::<f64, _>(StandardNormal) * 3e-4).collect();
        let points = points_from(&returns);

        let intraday = estimate_periodicity(&points, PeriodicityMode::IntradayOnly, 10, 390).unwrap();
        let rmse = |profile: &PeriodicityProfile| {
            (profile.factors.iter().map(|f| (f - 1.0) * (f - 1.0)).sum::<f64>() / profile.factors.len() as f64)
                .sqrt()
        };
        assert!(rmse(&intraday) < 0.06, "intraday rmse {}", rmse(&intraday));

        let intraweek = estimate_periodicity(&points, PeriodicityMode::Intraweek, 10, 390).unwrap();
        assert_eq!(intraweek.factors.len(), 1950);
        assert!(rmse(&intraweek) < 0.15, "intraweek rmse {}", rmse(&intraweek));
        intraweek.validate().unwrap();
    }

    #[test]
    fn periodicity_recovers_morning_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut returns = Vec::new();
        for _ in 0..250 {
            for b in 0..390 {
                let scale = if b < 30 { 2.0 } else { 1.0 };
                returns.push(rng.sample::<f64, _>(StandardNormal) * 3e-4 * scale);
            }
        }
        let points = points_from(&returns);
        let profile = estimate_periodicity(&points, PeriodicityMode::IntradayOnly, 10, 390).unwrap();
        let early: f64 = profile.factors[..30].iter().sum::<f64>() / 30.0;
        let midday: f64 = profile.factors[180..210].iter().sum::<f64>() / 30.0;
        let ratio = early / midday;
        assert!((ratio - 2.0).abs() < 0.2, "recovered ratio {ratio}");
    }

    #[test]
    fn single_outlier_barely_moves_slot_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let clean: Vec<f64> = (0..120 * 390).map(|_| rng.sample::<f64, _>(StandardNormal) * 3e-4).collect();
        let mut dirty = clean.clone();
        // one return at 100x its slot scale, mid-sample
        dirty[60 * 390 + 200] = 3e-4 * 100.0;

        let p_clean =
            estimate_periodicity(&points_from(&clean), PeriodicityMode::IntradayOnly, 10, 390).unwrap();
        let p_dirty =
            estimate_periodicity(&points_from(&dirty), PeriodicityMode::IntradayOnly, 10, 390).unwrap();
        let rel = (p_dirty.factors[200] - p_clean.factors[200]).abs() / p_clean.factors[200];
        assert!(rel < 0.05, "outlier moved factor by {rel}");
    }

    #[test]
    fn empty_slots_fall_back_to_neutral() {
        // strip bar 0 from every day: its slots have no observations, as
        // happens when returns come from intraday mids
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let returns: Vec<f64> = (0..60 * 390).map(|_| rng.sample::<f64, _>(StandardNormal) * 3e-4).collect();
        let points: Vec<ReturnPoint> =
            points_from(&returns).into_iter().filter(|p| p.bar_index != 0).collect();
        let profile = estimate_periodicity(&points, PeriodicityMode::Intraweek, 10, 390).unwrap();
        profile.validate().unwrap();
        for wd in 0..5 {
            assert_eq!(profile.sample_counts[wd * 390], 0);
            let f = profile.factors[wd * 390];
            assert!((f - 1.0).abs() < 0.05, "neutral slot factor {f}");
        }
    }

    #[test]
    fn sparse_slots_borrow_intraday_estimate() {
        // 12 weekdays: intraweek slots see only 2-3 observations each,
        // below the minimum, while pooled intraday slots have 12
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let returns: Vec<f64> = (0..12 * 390).map(|_| rng.sample::<f64, _>(StandardNormal) * 3e-4).collect();
        let points = points_from(&returns);
        let profile = estimate_periodicity(&points, PeriodicityMode::Intraweek, 10, 390).unwrap();
        profile.validate().unwrap();
        // borrowed from the pooled estimate: same factor across weekdays
        assert!((profile.factors[5] - profile.factors[390 + 5]).abs() < 1e-12);
    }

    #[test]
    fn insufficient_data_detected() {
        let returns: Vec<f64> = (0..390).map(|i| (i as f64 * 0.7).sin() * 1e-4).collect();
        let points = points_from(&returns);
        // a single day: every intraday slot has exactly 1 observation
        let err = estimate_periodicity(&points, PeriodicityMode::IntradayOnly, 10, 390).unwrap_err();
        assert!(matches!(err, JumpError::InsufficientData { .. }));
    }

    #[test]
    fn all_zero_returns_no_jumps() {
        let points = points_from(&vec![0.0; 2 * 390]);
        let config = DetectorConfig { periodicity: PeriodicityMode::Off, ..Default::default() };
        let detection = detect_jumps(&points, &PeriodicityProfile::flat(), &config).unwrap();
        assert_eq!(detection.n_tested, 390);
        assert!(detection.results.iter().all(|r| !r.is_jump && r.undefined));
    }

    #[test]
    fn off_mode_filtered_equals_raw_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let returns: Vec<f64> = (0..3 * 390).map(|_| rng.sample::<f64, _>(StandardNormal) * 3e-4).collect();
        let points = points_from(&returns);
        let config = DetectorConfig { periodicity: PeriodicityMode::Off, ..Default::default() };
        let detection = detect_jumps(&points, &PeriodicityProfile::flat(), &config).unwrap();
        assert!(detection.results.iter().all(|r| r.undefined || r.filtered_stat == r.raw_stat));
    }

    #[test]
    fn ten_sigma_jump_is_flagged_with_sign() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let sigma = 3e-4;
        let mut returns: Vec<f64> = (0..5 * 390).map(|_| rng.sample::<f64, _>(StandardNormal) * sigma).collect();
        let target = 3 * 390 + 17;
        returns[target] = -10.0 * sigma;
        let points = points_from(&returns);
        let config = DetectorConfig { periodicity: PeriodicityMode::Off, ..Default::default() };
        let detection = detect_jumps(&points, &PeriodicityProfile::flat(), &config).unwrap();
        let hit = detection
            .results
            .iter()
            .find(|r| r.date == points[target].date && r.bar_index == points[target].bar_index)
            .unwrap();
        assert!(hit.is_jump);
        assert_eq!(hit.return_sign, ReturnSign::Negative);
        assert!((hit.filtered_stat.abs() - 10.0 / (2.0 / std::f64::consts::PI).sqrt()).abs() < 2.0);
    }

    #[test]
    fn increasing_magnitude_never_unflags() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let sigma = 3e-4;
        let mut returns: Vec<f64> = (0..3 * 390).map(|_| rng.sample::<f64, _>(StandardNormal) * sigma).collect();
        let target = 2 * 390 + 100;
        let config = DetectorConfig { periodicity: PeriodicityMode::Off, ..Default::default() };
        let mut was_jump = false;
        for mult in [1.0, 8.0, 20.0, 100.0] {
            returns[target] = mult * sigma;
            let points = points_from(&returns);
            let detection = detect_jumps(&points, &PeriodicityProfile::flat(), &config).unwrap();
            let hit = detection
                .results
                .iter()
                .find(|r| r.bar_index == points[target].bar_index && r.date == points[target].date)
                .unwrap();
            assert!(!was_jump || hit.is_jump, "jump unflagged at multiplier {mult}");
            was_jump = hit.is_jump;
        }
        assert!(was_jump);
    }

    #[test]
    fn short_series_yields_no_tests() {
        let points = points_from(&vec![1e-4; 100]);
        let config = DetectorConfig { periodicity: PeriodicityMode::Off, ..Default::default() };
        let detection = detect_jumps(&points, &PeriodicityProfile::flat(), &config).unwrap();
        assert_eq!(detection.n_tested, 0);
        assert!(detection.results.is_empty());
        assert!(detection.threshold.is_none());
    }

    #[test]
    fn profile_mode_mismatch_rejected() {
        let points = points_from(&vec![1e-4; 900]);
        let config = DetectorConfig { periodicity: PeriodicityMode::Intraweek, ..Default::default() };
        let err = detect_jumps(&points, &PeriodicityProfile::flat(), &config).unwrap_err();
        assert!(matches!(err, JumpError::ProfileMismatch { .. }));
    }

    #[test]
    fn jumps_csv_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let returns: Vec<f64> = (0..2 * 390 + 50).map(|_| rng.sample::<f64, _>(StandardNormal) * 3e-4).collect();
        let points = points_from(&returns);
        let config = DetectorConfig { periodicity: PeriodicityMode::Off, ..Default::default() };
        let detection = detect_jumps(&points, &PeriodicityProfile::flat(), &config).unwrap();
        let mut buf = Vec::new();
        write_jumps_csv(&detection.results, &mut buf).unwrap();
        let back = read_jumps_csv(std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(back.len(), detection.results.len());
        for (a, b) in back.iter().zip(&detection.results) {
            assert_eq!((a.date, a.bar_index, a.is_jump, a.return_sign), (b.date, b.bar_index, b.is_jump, b.return_sign));
            assert!((a.raw_stat - b.raw_stat).abs() <= 1e-11 * b.raw_stat.abs().max(1.0));
        }
    }
}
