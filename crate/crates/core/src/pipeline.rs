//! End-to-end orchestration: ingest → bars → jump detection → regime
//! split → tail fits, with machine-readable outputs.
//!
//! Artifacts written to the output directory: `bars.csv`, `jumps.csv`,
//! `periodicity.csv` (when filtering is on), one `ccdf_<regime>.csv` per
//! nonempty regime, and `report.json`. Every stage is also exposed on its
//! own so the pipeline can be driven through intermediate files; the
//! stage-by-stage route produces the same report as [`run_pipeline`]
//! (modulo the timestamp).
//!
//! Numeric report fields are quantized to 12 significant digits for
//! cross-run diffing. Warnings (skipped minutes, empty regimes) never
//! fail a run; malformed inputs and bad configuration do.

use std::collections::BTreeMap;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use thiserror::Error;

use crate::bars::{
    build_minute_bars, log_returns, read_bars_csv, write_bars_csv, BarsConfig, BarsError, Category,
    MinuteBar, SessionSpec,
};
use crate::jump::{
    detect_jumps, estimate_periodicity, read_jumps_csv, write_jumps_csv, DetectorConfig, JumpError,
    JumpTestResult, PeriodicityMode, PeriodicityProfile, ReturnSign,
};
use crate::kv::KvError;
use crate::lobster::{read_day_pair, BookSnapshot, LobsterError, OrderFlowEvent, Strictness};
use crate::numfmt::sig12;
use crate::synth::{gen_dataset, gen_lobster_day, gen_return_series, gen_volume_series, SynthError, SyntheticSpec};
use crate::tail::{eccdf, fit_tail, write_ccdf_csv, TailError, TailFit};

/// Where the pipeline reads its order flow from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InputSource {
    /// Message-file pattern; `*` matches within the file name. The paired
    /// orderbook file is found by replacing `message` with `orderbook`,
    /// and the date comes from a `YYYY-MM-DD` substring of the name.
    Files { message_pattern: String },
    /// Generate a synthetic dataset from a key=value spec file and run
    /// on it in memory.
    Synthetic { spec_path: PathBuf },
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub input: InputSource,
    pub session: SessionSpec,
    pub bars: BarsConfig,
    pub detector: DetectorConfig,
    pub q_lo: f64,
    pub q_hi: f64,
    pub category: Category,
    pub strictness: Strictness,
    /// When set, artifacts are written here.
    pub out_dir: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn new(input: InputSource) -> Self {
        PipelineConfig {
            input,
            session: SessionSpec::default(),
            bars: BarsConfig::default(),
            detector: DetectorConfig::default(),
            q_lo: 0.90,
            q_hi: 0.999,
            category: Category::Trade,
            strictness: Strictness::Fail,
            out_dir: None,
        }
    }
}

/// Tail fit outcome for one regime. Empty or too-thin regimes are
/// reported, not failed.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RegimeFit {
    pub status: String,
    pub n_samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<TailFit>,
}

/// Machine-readable pipeline result.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PipelineReport {
    /// RFC 3339 stamp; the only field allowed to differ between
    /// otherwise identical runs.
    pub generated_at: String,
    pub days: usize,
    pub bars_processed: usize,
    pub bars_halted: usize,
    pub returns_built: usize,
    pub returns_skipped_missing_mid: u64,
    pub returns_skipped_halted: u64,
    pub n_tested: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critical_value: Option<f64>,
    pub jumps_total: usize,
    pub jumps_positive: usize,
    pub jumps_negative: usize,
    pub category: String,
    pub q_lo: f64,
    pub q_hi: f64,
    pub fits: BTreeMap<String, RegimeFit>,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("config file: {0}")]
    Kv(#[from] KvError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Lobster(#[from] LobsterError),
    #[error(transparent)]
    Bars(#[from] BarsError),
    #[error(transparent)]
    Jump(#[from] JumpError),
    #[error(transparent)]
    Tail(#[from] TailError),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl PipelineError {
    /// Process exit code: 0 success, 2 config error, 3 parse error,
    /// 4 computation error.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::Kv(_) => 2,
            PipelineError::Synth(e) => match e {
                SynthError::InvalidSpec(_) | SynthError::Kv(_) => 2,
                SynthError::Lobster(_) => 3,
                _ => 4,
            },
            PipelineError::Lobster(e) => match e {
                LobsterError::Io(_) => 4,
                _ => 3,
            },
            PipelineError::Bars(e) => match e {
                BarsError::Csv { .. } => 3,
                BarsError::InvalidSession { .. } => 2,
                _ => 4,
            },
            PipelineError::Jump(e) => match e {
                JumpError::InvalidConfig(_) => 2,
                JumpError::Csv { .. } => 3,
                _ => 4,
            },
            PipelineError::Tail(TailError::InvalidWindow { .. }) => 2,
            _ => 4,
        }
    }
}

/// One ingested day.
pub struct DayInput {
    pub date: NaiveDate,
    pub events: Vec<OrderFlowEvent>,
    pub snapshots: Vec<BookSnapshot>,
    pub skipped_rows: u64,
}

fn wildcard_match(pattern: &str, name: &str) -> bool {
    // segment-wise greedy match; '*' matches any run of characters
    let segments: Vec<&str> = pattern.split('*').collect();
    if segments.len() == 1 {
        return pattern == name;
    }
    let mut rest = name;
    for (i, segment) in segments.iter().enumerate() {
        if segment.is_empty() {
            continue;
        }
        if i == 0 {
            match rest.strip_prefix(segment) {
                Some(r) => rest = r,
                None => return false,
            }
        } else if i == segments.len() - 1 {
            return rest.ends_with(segment);
        } else {
            match rest.find(segment) {
                Some(pos) => rest = &rest[pos + segment.len()..],
                None => return false,
            }
        }
    }
    segments.last().map(|s| s.is_empty()).unwrap_or(false) || pattern.ends_with('*')
}

fn extract_date(name: &str) -> Option<NaiveDate> {
    for start in 0..name.len().saturating_sub(9) {
        if let Some(w) = name.get(start..start + 10) {
            if let Ok(date) = NaiveDate::parse_from_str(w, "%Y-%m-%d") {
                return Some(date);
            }
        }
    }
    None
}

/// Finds message files matching the pattern and pairs each with its
/// orderbook file.
pub fn discover_file_pairs(pattern: &str) -> Result<Vec<(NaiveDate, PathBuf, PathBuf)>, PipelineError> {
    let path = Path::new(pattern);
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let file_pattern = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| PipelineError::Config(format!("bad input pattern `{pattern}`")))?;

    let mut names: Vec<String> = Vec::new();
    if file_pattern.contains('*') {
        for entry in std::fs::read_dir(&dir)
            .map_err(|e| PipelineError::Config(format!("cannot list `{}`: {e}", dir.display())))?
        {
            let entry = entry?;
            if let Some(name) = entry.file_name().to_str() {
                if wildcard_match(file_pattern, name) {
                    names.push(name.to_string());
                }
            }
        }
        names.sort();
    } else {
        names.push(file_pattern.to_string());
    }
    if names.is_empty() {
        return Err(PipelineError::Config(format!("no files match `{pattern}`")));
    }

    let mut pairs = Vec::new();
    for name in names {
        let date = extract_date(&name)
            .ok_or_else(|| PipelineError::Config(format!("no YYYY-MM-DD date in file name `{name}`")))?;
        if !name.contains("message") {
            return Err(PipelineError::Config(format!("`{name}` has no `message` marker to pair on")));
        }
        let book_name = name.replace("message", "orderbook");
        let msg_path = dir.join(&name);
        let book_path = dir.join(&book_name);
        if !book_path.exists() {
            return Err(PipelineError::Config(format!("missing orderbook pair `{}`", book_path.display())));
        }
        pairs.push((date, msg_path, book_path));
    }
    pairs.sort_by_key(|(date, _, _)| *date);
    for w in pairs.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(PipelineError::Config(format!("two input pairs share the date {}", w[0].0)));
        }
    }
    Ok(pairs)
}

fn ingest_files(pattern: &str, strictness: Strictness) -> Result<Vec<DayInput>, PipelineError> {
    let mut days = Vec::new();
    for (date, msg_path, book_path) in discover_file_pairs(pattern)? {
        let msg = BufReader::new(std::fs::File::open(&msg_path)?);
        let book = BufReader::new(std::fs::File::open(&book_path)?);
        let paired = read_day_pair(msg, book, strictness)?;
        days.push(DayInput { date, events: paired.events, snapshots: paired.snapshots, skipped_rows: paired.skipped_rows });
    }
    Ok(days)
}

fn ingest_synthetic(spec_path: &Path) -> Result<(Vec<DayInput>, SessionSpec), PipelineError> {
    let spec = SyntheticSpec::from_kv_file(spec_path)?;
    let mut ledger = gen_return_series(&spec)?;
    gen_volume_series(&spec, &mut ledger)?;
    let mut days = Vec::new();
    for day_index in 0..ledger.days.len() {
        let mut msg = Vec::new();
        let mut book = Vec::new();
        gen_lobster_day(&spec, &mut ledger, day_index, &mut msg, &mut book)?;
        let paired = read_day_pair(
            std::io::Cursor::new(&msg),
            std::io::Cursor::new(&book),
            Strictness::Fail,
        )?;
        days.push(DayInput {
            date: ledger.days[day_index].date,
            events: paired.events,
            snapshots: paired.snapshots,
            skipped_rows: paired.skipped_rows,
        });
    }
    Ok((days, spec.session()))
}

fn fit_or_status(samples: &[f64], q_lo: f64, q_hi: f64) -> Result<RegimeFit, PipelineError> {
    let n_samples = samples.len();
    match fit_tail(samples, q_lo, q_hi) {
        Ok(fit) => Ok(RegimeFit { status: "ok".into(), n_samples, fit: Some(round_fit(fit)) }),
        Err(TailError::EmptyInput) => Ok(RegimeFit { status: "empty".into(), n_samples, fit: None }),
        Err(TailError::InsufficientTail { .. }) => {
            Ok(RegimeFit { status: "insufficient_tail".into(), n_samples, fit: None })
        }
        Err(TailError::DegenerateTail) | Err(TailError::NonDecayingTail { .. }) => {
            Ok(RegimeFit { status: "degenerate".into(), n_samples, fit: None })
        }
        Err(e) => Err(e.into()),
    }
}

fn round_fit(fit: TailFit) -> TailFit {
    TailFit {
        exponent: sig12(fit.exponent),
        intercept: sig12(fit.intercept),
        stderr_exponent: sig12(fit.stderr_exponent),
        r_squared: sig12(fit.r_squared),
        ..fit
    }
}

/// Regime samples of the selected category, keyed by regime name.
fn regime_samples(
    bars: &[MinuteBar],
    results: &[JumpTestResult],
    category: Category,
) -> Result<BTreeMap<&'static str, Vec<f64>>, PipelineError> {
    let split = crate::tail::split_by_jump(bars, results, category)?;
    let all: Vec<f64> = bars.iter().filter(|b| !b.halted).map(|b| b.volumes.get(category) as f64).collect();
    let merged: Vec<f64> = split.jump.iter().chain(split.nonjump.iter()).copied().collect();
    let mut map = BTreeMap::new();
    map.insert("all", all);
    map.insert("jump", split.jump);
    map.insert("nonjump", split.nonjump);
    map.insert("jump_positive", split.jump_positive);
    map.insert("jump_negative", split.jump_negative);
    map.insert("jump_plus_nonjump_merged", merged);
    Ok(map)
}

/// Builds the report from bars and detection results. Used by both the
/// one-shot pipeline and the stage-by-stage route, so the two agree.
fn assemble_report(
    bars: &[MinuteBar],
    results: &[JumpTestResult],
    session: &SessionSpec,
    q_lo: f64,
    q_hi: f64,
    category: Category,
) -> Result<PipelineReport, PipelineError> {
    if !(0.0..1.0).contains(&q_lo) || !(q_hi > q_lo && q_hi <= 1.0) {
        return Err(PipelineError::Config(format!("invalid quantile window [{q_lo}, {q_hi}]")));
    }
    let (returns, summary) = log_returns(bars, session);
    let mut fits = BTreeMap::new();
    for (name, samples) in regime_samples(bars, results, category)? {
        fits.insert(name.to_string(), fit_or_status(&samples, q_lo, q_hi)?);
    }
    let jumps: Vec<&JumpTestResult> = results.iter().filter(|r| r.is_jump).collect();
    let jumps_positive = jumps.iter().filter(|r| r.return_sign == ReturnSign::Positive).count();
    let mut dates: Vec<NaiveDate> = bars.iter().map(|b| b.date).collect();
    dates.dedup();

    Ok(PipelineReport {
        generated_at: now_rfc3339(),
        days: dates.len(),
        bars_processed: bars.len(),
        bars_halted: bars.iter().filter(|b| b.halted).count(),
        returns_built: returns.len(),
        returns_skipped_missing_mid: summary.skipped_missing_mid,
        returns_skipped_halted: summary.skipped_halted,
        n_tested: results.len(),
        critical_value: results.first().map(|r| sig12(r.threshold)),
        jumps_total: jumps.len(),
        jumps_positive,
        jumps_negative: jumps.len() - jumps_positive,
        category: category.name().to_string(),
        q_lo,
        q_hi,
        fits,
    })
}

fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let file = std::fs::File::create(path)?;
    let mut writer = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut writer, value)?;
    writer.write_all(b"\n")?;
    Ok(())
}

fn write_artifacts(
    dir: &Path,
    bars: &[MinuteBar],
    results: &[JumpTestResult],
    profile: Option<&PeriodicityProfile>,
    report: &PipelineReport,
    category: Category,
) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir)?;
    let mut bars_file = BufWriter::new(std::fs::File::create(dir.join("bars.csv"))?);
    write_bars_csv(bars.iter(), &mut bars_file)?;
    bars_file.flush()?;

    let mut jumps_file = BufWriter::new(std::fs::File::create(dir.join("jumps.csv"))?);
    write_jumps_csv(results.iter(), &mut jumps_file)?;
    jumps_file.flush()?;

    if let Some(profile) = profile {
        if profile.mode != PeriodicityMode::Off {
            write_periodicity_csv(&dir.join("periodicity.csv"), profile)?;
        }
    }

    for (name, samples) in regime_samples(bars, results, category)? {
        if let Ok(dist) = eccdf(&samples) {
            let mut f = BufWriter::new(std::fs::File::create(dir.join(format!("ccdf_{name}.csv")))?);
            write_ccdf_csv(&dist, &mut f)?;
            f.flush()?;
        }
    }

    write_json(&dir.join("report.json"), report)?;
    Ok(())
}

fn write_periodicity_csv(path: &Path, profile: &PeriodicityProfile) -> Result<(), PipelineError> {
    let mut f = BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "slot,factor,sample_count")?;
    for (slot, (factor, count)) in profile.factors.iter().zip(&profile.sample_counts).enumerate() {
        writeln!(f, "{},{},{}", slot, crate::numfmt::fmt_sig12(*factor), count)?;
    }
    f.flush()?;
    Ok(())
}

/// Runs the whole measurement chain and returns the report. With an
/// output directory configured, also writes all artifacts.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineReport, PipelineError> {
    config.session.validate()?;
    config.detector.validate()?;
    if !(0.0..1.0).contains(&config.q_lo) || !(config.q_hi > config.q_lo && config.q_hi <= 1.0) {
        return Err(PipelineError::Config(format!(
            "invalid quantile window [{}, {}]",
            config.q_lo, config.q_hi
        )));
    }

    let (days, session) = match &config.input {
        InputSource::Files { message_pattern } => {
            (ingest_files(message_pattern, config.strictness)?, config.session)
        }
        InputSource::Synthetic { spec_path } => {
            let (days, session) = ingest_synthetic(spec_path)?;
            if session != config.session {
                log::info!("session taken from the synthetic spec: {session:?}");
            }
            (days, session)
        }
    };

    let mut bars: Vec<MinuteBar> = Vec::new();
    let mut dropped_events: u64 = 0;
    let mut skipped_rows: u64 = 0;
    for day in &days {
        let day_bars = build_minute_bars(day.date, &day.events, &day.snapshots, &session, &config.bars)?;
        dropped_events += day_bars.dropped_outside_session;
        skipped_rows += day.skipped_rows;
        bars.extend(day_bars.bars);
    }
    if dropped_events > 0 || skipped_rows > 0 {
        log::warn!("{dropped_events} events outside session, {skipped_rows} unparseable row pairs skipped");
    }

    let (returns, _) = log_returns(&bars, &session);
    let profile = match config.detector.periodicity {
        PeriodicityMode::Off => PeriodicityProfile::flat(),
        mode => estimate_periodicity(&returns, mode, config.detector.min_slot_obs, session.bars_per_day())?,
    };
    let detection = detect_jumps(&returns, &profile, &config.detector)?;

    let report = assemble_report(&bars, &detection.results, &session, config.q_lo, config.q_hi, config.category)?;
    if let Some(dir) = &config.out_dir {
        write_artifacts(dir, &bars, &detection.results, Some(&profile), &report, config.category)?;
    }
    Ok(report)
}

/// `simulate` stage: emit a synthetic dataset with its ledger.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SimulateSummary {
    pub days: usize,
    pub out_dir: PathBuf,
    pub ledger_path: PathBuf,
}

pub fn run_simulate(spec_path: &Path, out_dir: &Path) -> Result<SimulateSummary, PipelineError> {
    let spec = SyntheticSpec::from_kv_file(spec_path)?;
    let dataset = gen_dataset(&spec, out_dir)?;
    Ok(SimulateSummary {
        days: dataset.ledger.days.len(),
        out_dir: out_dir.to_path_buf(),
        ledger_path: dataset.ledger_path,
    })
}

/// `ingest` stage: validate input pairs and summarize them.
#[derive(Debug, Clone, serde::Serialize)]
pub struct IngestSummary {
    pub files: usize,
    pub events: u64,
    pub skipped_rows: u64,
    pub first_date: Option<NaiveDate>,
    pub last_date: Option<NaiveDate>,
}

pub fn run_ingest(pattern: &str, strictness: Strictness) -> Result<IngestSummary, PipelineError> {
    let days = ingest_files(pattern, strictness)?;
    Ok(IngestSummary {
        files: days.len(),
        events: days.iter().map(|d| d.events.len() as u64).sum(),
        skipped_rows: days.iter().map(|d| d.skipped_rows).sum(),
        first_date: days.first().map(|d| d.date),
        last_date: days.last().map(|d| d.date),
    })
}

/// `bars` stage: ingest and write `bars.csv`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BarsSummary {
    pub days: usize,
    pub bars: usize,
    pub dropped_events_outside_session: u64,
}

pub fn run_bars(
    pattern: &str,
    session: &SessionSpec,
    bars_config: &BarsConfig,
    strictness: Strictness,
    out_dir: &Path,
) -> Result<BarsSummary, PipelineError> {
    let days = ingest_files(pattern, strictness)?;
    let mut bars = Vec::new();
    let mut dropped = 0;
    for day in &days {
        let day_bars = build_minute_bars(day.date, &day.events, &day.snapshots, session, bars_config)?;
        dropped += day_bars.dropped_outside_session;
        bars.extend(day_bars.bars);
    }
    std::fs::create_dir_all(out_dir)?;
    let mut f = BufWriter::new(std::fs::File::create(out_dir.join("bars.csv"))?);
    write_bars_csv(bars.iter(), &mut f)?;
    f.flush()?;
    Ok(BarsSummary { days: days.len(), bars: bars.len(), dropped_events_outside_session: dropped })
}

/// `jumps` stage: read `bars.csv`, detect, write `jumps.csv` and
/// `periodicity.csv`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct JumpsSummary {
    pub returns: usize,
    pub n_tested: usize,
    pub jumps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critical_value: Option<f64>,
}

pub fn run_jumps(
    bars_csv: &Path,
    session: &SessionSpec,
    detector: &DetectorConfig,
    out_dir: &Path,
) -> Result<JumpsSummary, PipelineError> {
    let bars = read_bars_csv(BufReader::new(std::fs::File::open(bars_csv)?))?;
    let (returns, _) = log_returns(&bars, session);
    let profile = match detector.periodicity {
        PeriodicityMode::Off => PeriodicityProfile::flat(),
        mode => estimate_periodicity(&returns, mode, detector.min_slot_obs, session.bars_per_day())?,
    };
    let detection = detect_jumps(&returns, &profile, detector)?;
    std::fs::create_dir_all(out_dir)?;
    let mut f = BufWriter::new(std::fs::File::create(out_dir.join("jumps.csv"))?);
    write_jumps_csv(detection.results.iter(), &mut f)?;
    f.flush()?;
    if profile.mode != PeriodicityMode::Off {
        write_periodicity_csv(&out_dir.join("periodicity.csv"), &profile)?;
    }
    Ok(JumpsSummary {
        returns: returns.len(),
        n_tested: detection.n_tested,
        jumps: detection.results.iter().filter(|r| r.is_jump).count(),
        critical_value: detection.threshold.map(|t| sig12(t.critical_value())),
    })
}

/// `tails` stage: read `bars.csv` and `jumps.csv`, fit every regime and
/// write the report plus CCDF exports.
pub fn run_tails(
    bars_csv: &Path,
    jumps_csv: &Path,
    session: &SessionSpec,
    q_lo: f64,
    q_hi: f64,
    category: Category,
    out_dir: &Path,
) -> Result<PipelineReport, PipelineError> {
    let bars = read_bars_csv(BufReader::new(std::fs::File::open(bars_csv)?))?;
    let results = read_jumps_csv(BufReader::new(std::fs::File::open(jumps_csv)?))?;
    let report = assemble_report(&bars, &results, session, q_lo, q_hi, category)?;
    write_artifacts(out_dir, &bars, &results, None, &report, category)?;
    Ok(report)
}
