//! Command-line entry point for the order-flow analysis pipeline.
//!
//! Subcommands mirror the pipeline stages so each can be exercised on its
//! own: `simulate`, `ingest`, `bars`, `jumps`, `tails`, and the one-shot
//! `pipeline`. Exit codes: 0 success, 2 config error, 3 parse error,
//! 4 computation error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use flashvol::bars::{BarsConfig, Category, SessionSpec};
use flashvol::jump::{DetectorConfig, PeriodicityMode};
use flashvol::kv;
use flashvol::lobster::Strictness;
use flashvol::pipeline::{
    run_bars, run_ingest, run_jumps, run_pipeline, run_simulate, run_tails, InputSource,
    PipelineConfig, PipelineError,
};

#[derive(Parser)]
#[command(name = "flashvol", version, about = "Order-flow ingestion, jump detection and volume tail fitting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default, Clone)]
struct SessionArgs {
    /// Session open, seconds after midnight (default 34200 = 09:30)
    #[arg(long)]
    session_open: Option<u32>,
    /// Session close, seconds after midnight (default 57600 = 16:00)
    #[arg(long)]
    session_close: Option<u32>,
    /// Bar width in seconds (default 60)
    #[arg(long)]
    bar_secs: Option<u32>,
}

impl SessionArgs {
    fn build(&self) -> Result<SessionSpec, PipelineError> {
        let d = SessionSpec::default();
        Ok(SessionSpec::new(
            self.session_open.unwrap_or(d.open_secs),
            self.session_close.unwrap_or(d.close_secs),
            self.bar_secs.unwrap_or(d.bar_secs),
        )?)
    }
}

#[derive(Args, Default, Clone)]
struct DetectorArgs {
    /// Local volatility window in bars (default 390)
    #[arg(long)]
    window: Option<usize>,
    /// Jump test significance level (default 0.01)
    #[arg(long)]
    alpha: Option<f64>,
    /// Periodicity filtering: off, intraday or intraweek (default)
    #[arg(long)]
    periodicity: Option<String>,
    /// Minimum observations per periodicity slot (default 10)
    #[arg(long)]
    min_slot_obs: Option<usize>,
}

impl DetectorArgs {
    fn build(&self) -> Result<DetectorConfig, PipelineError> {
        let d = DetectorConfig::default();
        let periodicity = match &self.periodicity {
            None => d.periodicity,
            Some(text) => PeriodicityMode::parse(text)
                .ok_or_else(|| PipelineError::Config(format!("unknown periodicity mode `{text}`")))?,
        };
        Ok(DetectorConfig {
            window: self.window.unwrap_or(d.window),
            alpha: self.alpha.unwrap_or(d.alpha),
            periodicity,
            min_slot_obs: self.min_slot_obs.unwrap_or(d.min_slot_obs),
        })
    }
}

fn parse_strictness(text: &str) -> Result<Strictness, PipelineError> {
    match text.to_ascii_lowercase().as_str() {
        "fail" => Ok(Strictness::Fail),
        "skip" | "skip_and_warn" => Ok(Strictness::SkipAndWarn),
        other => Err(PipelineError::Config(format!("unknown strictness `{other}`"))),
    }
}

fn parse_category(text: &str) -> Result<Category, PipelineError> {
    Category::parse(text).ok_or_else(|| PipelineError::Config(format!("unknown category `{text}`")))
}

fn parse_bool(key: &str, text: &str) -> Result<bool, PipelineError> {
    match text {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        other => Err(PipelineError::Config(format!("key `{key}`: expected bool, got `{other}`"))),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (message/orderbook pairs + ledger.json)
    Simulate {
        /// Synthetic spec as a key=value file
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Validate message/orderbook pairs and print a summary
    Ingest {
        /// Message file pattern, e.g. 'data/*_message.csv'
        #[arg(long)]
        messages: String,
        /// fail (default) or skip
        #[arg(long)]
        strictness: Option<String>,
    },
    /// Aggregate order flow into 1-minute bars (writes bars.csv)
    Bars {
        #[arg(long)]
        messages: String,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        session: SessionArgs,
        #[arg(long)]
        strictness: Option<String>,
        /// Exclude hidden executions (type 5) from the Trade category
        #[arg(long)]
        no_hidden_executions: bool,
        /// Count cross trades (type 6) under Trade
        #[arg(long)]
        include_cross_trades: bool,
        /// Keep bars after a trading halt in all samples
        #[arg(long)]
        no_halt_exclusion: bool,
    },
    /// Detect jumps from bars.csv (writes jumps.csv, periodicity.csv)
    Jumps {
        #[arg(long)]
        bars: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        session: SessionArgs,
        #[command(flatten)]
        detector: DetectorArgs,
    },
    /// Fit regime volume tails from bars.csv + jumps.csv (writes report.json)
    Tails {
        #[arg(long)]
        bars: PathBuf,
        #[arg(long)]
        jumps: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        session: SessionArgs,
        #[arg(long)]
        q_lo: Option<f64>,
        #[arg(long)]
        q_hi: Option<f64>,
        /// trade (default), limit or cancel
        #[arg(long)]
        category: Option<String>,
    },
    /// Full chain: ingest -> bars -> jumps -> regime tail fits
    Pipeline {
        /// Message file pattern (exactly one of --messages/--synthetic)
        #[arg(long)]
        messages: Option<String>,
        /// Synthetic spec file; the dataset is generated in memory
        #[arg(long)]
        synthetic: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        /// key=value config file; explicit flags override it
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        session: SessionArgs,
        #[command(flatten)]
        detector: DetectorArgs,
        #[arg(long)]
        q_lo: Option<f64>,
        #[arg(long)]
        q_hi: Option<f64>,
        #[arg(long)]
        category: Option<String>,
        #[arg(long)]
        strictness: Option<String>,
        #[arg(long)]
        no_hidden_executions: bool,
        #[arg(long)]
        include_cross_trades: bool,
        #[arg(long)]
        no_halt_exclusion: bool,
    },
}

/// Pipeline settings after merging defaults, the config file and flags
/// (flags win).
#[derive(Default)]
struct PipelineSettings {
    messages: Option<String>,
    synthetic: Option<PathBuf>,
    session_open: Option<u32>,
    session_close: Option<u32>,
    bar_secs: Option<u32>,
    window: Option<usize>,
    alpha: Option<f64>,
    periodicity: Option<String>,
    min_slot_obs: Option<usize>,
    q_lo: Option<f64>,
    q_hi: Option<f64>,
    category: Option<String>,
    strictness: Option<String>,
    include_hidden_executions: Option<bool>,
    include_cross_trades: Option<bool>,
    exclude_post_halt: Option<bool>,
}

impl PipelineSettings {
    fn from_config_file(path: &PathBuf) -> Result<Self, PipelineError> {
        let map = kv::parse_kv(&std::fs::read_to_string(path)?)?;
        let mut s = PipelineSettings::default();
        for (key, value) in &map {
            match key.as_str() {
                "messages" => s.messages = Some(value.clone()),
                "synthetic" => s.synthetic = Some(PathBuf::from(value)),
                "session_open" => s.session_open = Some(kv::parse_typed(key, value)?),
                "session_close" => s.session_close = Some(kv::parse_typed(key, value)?),
                "bar_secs" => s.bar_secs = Some(kv::parse_typed(key, value)?),
                "window" => s.window = Some(kv::parse_typed(key, value)?),
                "alpha" => s.alpha = Some(kv::parse_typed(key, value)?),
                "periodicity" => s.periodicity = Some(value.clone()),
                "min_slot_obs" => s.min_slot_obs = Some(kv::parse_typed(key, value)?),
                "q_lo" => s.q_lo = Some(kv::parse_typed(key, value)?),
                "q_hi" => s.q_hi = Some(kv::parse_typed(key, value)?),
                "category" => s.category = Some(value.clone()),
                "strictness" => s.strictness = Some(value.clone()),
                "include_hidden_executions" => {
                    s.include_hidden_executions = Some(parse_bool(key, value)?)
                }
                "include_cross_trades" => s.include_cross_trades = Some(parse_bool(key, value)?),
                "exclude_post_halt" => s.exclude_post_halt = Some(parse_bool(key, value)?),
                other => return Err(PipelineError::Config(format!("unknown config key `{other}`"))),
            }
        }
        Ok(s)
    }

    /// Overlays `flags` on top of `self` (flags win).
    fn overridden_by(mut self, flags: PipelineSettings) -> Self {
        macro_rules! take {
            ($field:ident) => {
                if flags.$field.is_some() {
                    self.$field = flags.$field;
                }
            };
        }
        take!(messages);
        take!(synthetic);
        take!(session_open);
        take!(session_close);
        take!(bar_secs);
        take!(window);
        take!(alpha);
        take!(periodicity);
        take!(min_slot_obs);
        take!(q_lo);
        take!(q_hi);
        take!(category);
        take!(strictness);
        take!(include_hidden_executions);
        take!(include_cross_trades);
        take!(exclude_post_halt);
        self
    }

    fn into_config(self, out_dir: PathBuf) -> Result<PipelineConfig, PipelineError> {
        let input = match (self.messages, self.synthetic) {
            (Some(pattern), None) => InputSource::Files { message_pattern: pattern },
            (None, Some(path)) => InputSource::Synthetic { spec_path: path },
            (None, None) => {
                return Err(PipelineError::Config("exactly one of --messages/--synthetic is required".into()))
            }
            (Some(_), Some(_)) => {
                return Err(PipelineError::Config("--messages and --synthetic are mutually exclusive".into()))
            }
        };
        let session_default = SessionSpec::default();
        let session = SessionSpec::new(
            self.session_open.unwrap_or(session_default.open_secs),
            self.session_close.unwrap_or(session_default.close_secs),
            self.bar_secs.unwrap_or(session_default.bar_secs),
        )?;
        let detector_default = DetectorConfig::default();
        let periodicity = match self.periodicity {
            None => detector_default.periodicity,
            Some(text) => PeriodicityMode::parse(&text)
                .ok_or_else(|| PipelineError::Config(format!("unknown periodicity mode `{text}`")))?,
        };
        let bars_default = BarsConfig::default();
        let mut config = PipelineConfig::new(input);
        config.session = session;
        config.detector = DetectorConfig {
            window: self.window.unwrap_or(detector_default.window),
            alpha: self.alpha.unwrap_or(detector_default.alpha),
            periodicity,
            min_slot_obs: self.min_slot_obs.unwrap_or(detector_default.min_slot_obs),
        };
        config.bars = BarsConfig {
            include_hidden_executions: self
                .include_hidden_executions
                .unwrap_or(bars_default.include_hidden_executions),
            include_cross_trades: self.include_cross_trades.unwrap_or(bars_default.include_cross_trades),
            exclude_post_halt: self.exclude_post_halt.unwrap_or(bars_default.exclude_post_halt),
        };
        config.q_lo = self.q_lo.unwrap_or(0.90);
        config.q_hi = self.q_hi.unwrap_or(0.999);
        config.category = match self.category {
            None => Category::Trade,
            Some(text) => parse_category(&text)?,
        };
        config.strictness = match self.strictness {
            None => Strictness::Fail,
            Some(text) => parse_strictness(&text)?,
        };
        config.out_dir = Some(out_dir);
        Ok(config)
    }
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable summary"));
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Simulate { spec, out_dir } => {
            let summary = run_simulate(&spec, &out_dir)?;
            print_json(&summary);
        }
        Command::Ingest { messages, strictness } => {
            let strictness = parse_strictness(strictness.as_deref().unwrap_or("fail"))?;
            let summary = run_ingest(&messages, strictness)?;
            print_json(&summary);
        }
        Command::Bars {
            messages,
            out_dir,
            session,
            strictness,
            no_hidden_executions,
            include_cross_trades,
            no_halt_exclusion,
        } => {
            let config = BarsConfig {
                include_hidden_executions: !no_hidden_executions,
                include_cross_trades,
                exclude_post_halt: !no_halt_exclusion,
            };
            let strictness = parse_strictness(strictness.as_deref().unwrap_or("fail"))?;
            let summary = run_bars(&messages, &session.build()?, &config, strictness, &out_dir)?;
            print_json(&summary);
        }
        Command::Jumps { bars, out_dir, session, detector } => {
            let summary = run_jumps(&bars, &session.build()?, &detector.build()?, &out_dir)?;
            print_json(&summary);
        }
        Command::Tails { bars, jumps, out_dir, session, q_lo, q_hi, category } => {
            let category = match category {
                None => Category::Trade,
                Some(text) => parse_category(&text)?,
            };
            let report = run_tails(
                &bars,
                &jumps,
                &session.build()?,
                q_lo.unwrap_or(0.90),
                q_hi.unwrap_or(0.999),
                category,
                &out_dir,
            )?;
            print_json(&report);
        }
        Command::Pipeline {
            messages,
            synthetic,
            out_dir,
            config,
            session,
            detector,
            q_lo,
            q_hi,
            category,
            strictness,
            no_hidden_executions,
            include_cross_trades,
            no_halt_exclusion,
        } => {
            let flags = PipelineSettings {
                messages,
                synthetic,
                session_open: session.session_open,
                session_close: session.session_close,
                bar_secs: session.bar_secs,
                window: detector.window,
                alpha: detector.alpha,
                periodicity: detector.periodicity,
                min_slot_obs: detector.min_slot_obs,
                q_lo,
                q_hi,
                category,
                strictness,
                include_hidden_executions: no_hidden_executions.then_some(false),
                include_cross_trades: include_cross_trades.then_some(true),
                exclude_post_halt: no_halt_exclusion.then_some(false),
            };
            let base = match config {
                Some(path) => PipelineSettings::from_config_file(&path)?,
                None => PipelineSettings::default(),
            };
            let pipeline_config = base.overridden_by(flags).into_config(out_dir)?;
            let report = run_pipeline(&pipeline_config)?;
            print_json(&report);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
