//! Power-law tail fits of per-minute volume distributions.
//!
//! The tail of the empirical complementary cumulative distribution
//! function (CCDF) is fit by ordinary least squares on the log-log data
//! over a quantile window, [90%, 99.9%] by default; the top of the sample
//! is excluded to reduce fitting noise and finite-size effects. The decay
//! exponent decides boundedness: a CCDF exponent <= 2 means the variance
//! of the underlying distribution is not defined.

use std::collections::HashMap;
use std::io::Write;

use chrono::NaiveDate;
use thiserror::Error;

use crate::bars::{Category, MinuteBar};
use crate::jump::{JumpTestResult, ReturnSign};
use crate::numfmt::fmt_sig12;

/// Whether the fitted tail admits a finite second moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Boundedness {
    /// CCDF exponent <= 2: sample variance diverges with sample size.
    UnboundedVariance,
    /// CCDF exponent > 2: well-defined variance.
    BoundedVariance,
}

/// CCDF-convention classification; the boundary exponent 2 is assigned
/// to the unbounded side (the variance diverges there).
pub fn classify_boundedness(exponent: f64) -> Boundedness {
    if exponent <= 2.0 {
        Boundedness::UnboundedVariance
    } else {
        Boundedness::BoundedVariance
    }
}

/// Empirical CCDF over the distinct sample values.
#[derive(Debug, Clone)]
pub struct Eccdf {
    /// (x, p) with x ascending and p = (#samples > x)/N strictly
    /// decreasing; the maximum (p = 0) is excluded.
    pub points: Vec<(f64, f64)>,
    pub n_samples: usize,
    pub zeros_dropped: u64,
}

/// Fitted power-law tail.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TailFit {
    /// Magnitude of the log-log CCDF slope.
    pub exponent: f64,
    /// Log-space offset of the fit line.
    pub intercept: f64,
    pub stderr_exponent: f64,
    pub r_squared: f64,
    pub q_lo: f64,
    pub q_hi: f64,
    /// Distinct CCDF points inside the quantile window.
    pub n_points: usize,
    pub classification: Boundedness,
}

/// Per-minute volumes split by detection regime.
#[derive(Debug, Clone, Default)]
pub struct RegimeSplit {
    pub jump: Vec<f64>,
    pub nonjump: Vec<f64>,
    pub jump_positive: Vec<f64>,
    pub jump_negative: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum TailError {
    #[error("no positive samples")]
    EmptyInput,
    #[error("only {available} distinct tail points in the quantile window, need at least {min}")]
    InsufficientTail { available: usize, min: usize },
    #[error("degenerate tail: no spread in ln x over the window")]
    DegenerateTail,
    #[error("tail does not decay: log-log slope {slope} >= 0")]
    NonDecayingTail { slope: f64 },
    #[error("invalid quantile window [{q_lo}, {q_hi}]")]
    InvalidWindow { q_lo: f64, q_hi: f64 },
    #[error("invalid ccdf points: {0}")]
    InvalidPoints(String),
    #[error("jump result at {date} bar {bar_index} has no matching bar")]
    JoinMismatch { date: NaiveDate, bar_index: u32 },
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

/// Minimum distinct points for a fit.
pub const MIN_TAIL_POINTS: usize = 10;

/// Empirical CCDF of a positive sample. Zero (and negative) samples are
/// dropped and counted; the remaining values must be nonempty.
pub fn eccdf(samples: &[f64]) -> Result<Eccdf, TailError> {
    let mut values: Vec<f64> = samples.iter().copied().filter(|&x| x > 0.0).collect();
    let zeros_dropped = (samples.len() - values.len()) as u64;
    if values.is_empty() {
        return Err(TailError::EmptyInput);
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    let mut points = Vec::new();
    let mut i = 0;
    while i < n {
        let x = values[i];
        let mut run_end = i + 1;
        while run_end < n && values[run_end] == x {
            run_end += 1;
        }
        let above = n - run_end;
        if above > 0 {
            points.push((x, above as f64 / n as f64));
        }
        i = run_end;
    }
    Ok(Eccdf { points, n_samples: n, zeros_dropped })
}

/// Least-squares power-law fit over CCDF points whose empirical quantile
/// 1 - p lies in [q_lo, q_hi].
///
/// Points must have strictly increasing x and strictly decreasing p in
/// (0, 1]. The fit regresses ln p on ln x; the exponent is the negated
/// slope.
pub fn fit_tail_points(points: &[(f64, f64)], q_lo: f64, q_hi: f64) -> Result<TailFit, TailError> {
    if !(0.0..1.0).contains(&q_lo) || !(q_hi > q_lo && q_hi <= 1.0) {
        return Err(TailError::InvalidWindow { q_lo, q_hi });
    }
    for pair in points.windows(2) {
        if pair[1].0 <= pair[0].0 || pair[1].1 >= pair[0].1 {
            return Err(TailError::InvalidPoints("x must increase and p must decrease strictly".into()));
        }
    }
    if points.iter().any(|&(x, p)| !x.is_finite() || x <= 0.0 || !p.is_finite() || p <= 0.0 || p > 1.0) {
        return Err(TailError::InvalidPoints("need x > 0 and p in (0, 1]".into()));
    }

    let window: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(_, p)| {
            let q = 1.0 - p;
            q >= q_lo && q <= q_hi
        })
        .collect();
    if window.len() < MIN_TAIL_POINTS {
        return Err(TailError::InsufficientTail { available: window.len(), min: MIN_TAIL_POINTS });
    }

    let n = window.len() as f64;
    let logs: Vec<(f64, f64)> = window.iter().map(|&(x, p)| (x.ln(), p.ln())).collect();
    let mean_x = logs.iter().map(|&(x, _)| x).sum::<f64>() / n;
    let mean_y = logs.iter().map(|&(_, y)| y).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for &(x, y) in &logs {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx <= 0.0 {
        return Err(TailError::DegenerateTail);
    }
    let slope = sxy / sxx;
    if slope >= 0.0 {
        return Err(TailError::NonDecayingTail { slope });
    }
    let intercept = mean_y - slope * mean_x;
    let sse = (syy - slope * sxy).max(0.0);
    let stderr_exponent = (sse / (n - 2.0) / sxx).sqrt();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let exponent = -slope;

    Ok(TailFit {
        exponent,
        intercept,
        stderr_exponent,
        r_squared,
        q_lo,
        q_hi,
        n_points: window.len(),
        classification: classify_boundedness(exponent),
    })
}

/// Builds the empirical CCDF of `samples` and fits its tail over the
/// quantile window.
pub fn fit_tail(samples: &[f64], q_lo: f64, q_hi: f64) -> Result<TailFit, TailError> {
    let dist = eccdf(samples)?;
    fit_tail_points(&dist.points, q_lo, q_hi)
}

/// Splits per-minute volumes of `category` into jump and non-jump
/// regimes, with jump minutes further split by return sign.
///
/// Only testable minutes (those carrying a detection result) participate.
/// Every result must join a bar on (date, bar_index).
pub fn split_by_jump(
    bars: &[MinuteBar],
    results: &[JumpTestResult],
    category: Category,
) -> Result<RegimeSplit, TailError> {
    let by_key: HashMap<(NaiveDate, u32), &MinuteBar> =
        bars.iter().map(|b| ((b.date, b.bar_index), b)).collect();
    let mut split = RegimeSplit::default();
    for result in results {
        let bar = by_key
            .get(&(result.date, result.bar_index))
            .ok_or(TailError::JoinMismatch { date: result.date, bar_index: result.bar_index })?;
        let volume = bar.volumes.get(category) as f64;
        if result.is_jump {
            split.jump.push(volume);
            match result.return_sign {
                ReturnSign::Positive => split.jump_positive.push(volume),
                ReturnSign::Negative => split.jump_negative.push(volume),
            }
        } else {
            split.nonjump.push(volume);
        }
    }
    Ok(split)
}

/// Writes an empirical CCDF as a two-column CSV for external plotting.
pub fn write_ccdf_csv<W: Write>(dist: &Eccdf, sink: &mut W) -> Result<(), TailError> {
    writeln!(sink, "x,p")?;
    for &(x, p) in &dist.points {
        writeln!(sink, "{},{}", fmt_sig12(x), fmt_sig12(p))?;
    }
    Ok(())
}
