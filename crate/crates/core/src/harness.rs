//! Seeded Monte-Carlo runner, sweeps, aggregation and table output.
//!
//! Realization `r` of a run with seed `s` draws its channel from ChaCha stream
//! `2r` and its selection from stream `2r + 1`, both keyed by `s`. Neither
//! depends on the sweep point, so every point of a sweep sees the same
//! channels (common random numbers) and results do not depend on how
//! realizations are scheduled across workers.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{realize_channel, ChannelError, ChannelRealization};
use crate::config::{ConfigError, ScenarioConfig};
use crate::metrics::{relative_rate, BinResponses, LinkMetrics, MetricsError};
use crate::selection::{SelectionError, SelectionMethod};
use crate::synthesis::{composite_response, RisProgram, SpectralBasis, SynthesisError};

pub const CSV_HEADER: &str = "method,K,N,sel_size,realizations,finite_count,inf_count,mean_si_db,std_si_db,mean_rate_bps,mean_coh_rate_bps,mean_rel_rate_pct,std_rel_rate_pct,seed";

/// Reference cap on Monte-Carlo realizations per sweep point.
pub const DEFAULT_REALIZATIONS: usize = 5000;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("invalid experiment: {0}")]
    Experiment(String),
    #[error("malformed results table: {0}")]
    Table(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("thread pool: {0}")]
    Pool(String),
}

const CHANNEL_STREAM: u64 = 0;
const SELECTION_STREAM: u64 = 1;

fn stream(seed: u64, realization: u64, substream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(realization.wrapping_mul(2).wrapping_add(substream));
    rng
}

/// Everything produced for one realization.
#[derive(Debug, Clone)]
pub struct RealizationOutcome {
    pub channel: ChannelRealization,
    pub program: RisProgram,
    pub metrics: LinkMetrics,
}

/// A validated scenario with its DFT plans, reusable across realizations.
#[derive(Debug, Clone)]
pub struct Simulator {
    cfg: ScenarioConfig,
    basis: SpectralBasis,
}

impl Simulator {
    pub fn new(cfg: ScenarioConfig) -> Result<Self, HarnessError> {
        cfg.validate()?;
        let basis = SpectralBasis::new(cfg.num_subcarriers);
        Ok(Simulator { cfg, basis })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn basis(&self) -> &SpectralBasis {
        &self.basis
    }

    pub fn run_detailed(&self, method: SelectionMethod, sel_size: usize, index: u64) -> Result<RealizationOutcome, HarnessError> {
        let cfg = &self.cfg;
        let k = cfg.num_subcarriers;
        let channel = realize_channel(&mut stream(cfg.seed, index, CHANNEL_STREAM), cfg)?;
        let sel = method.draw(&mut stream(cfg.seed, index, SELECTION_STREAM), sel_size, k)?;
        let program = RisProgram::new(&sel, cfg.num_reflectors(), &self.basis)?;
        let h_c = composite_response(&channel.composite, &program)?;
        let bins = BinResponses::new(&self.basis, &channel.direct, &h_c, &sel)?;
        let metrics = relative_rate(&bins, &sel, channel.channel_len, cfg)?;
        Ok(RealizationOutcome { channel, program, metrics })
    }

    pub fn run(&self, method: SelectionMethod, sel_size: usize, index: u64) -> Result<LinkMetrics, HarnessError> {
        self.run_detailed(method, sel_size, index).map(|o| o.metrics)
    }

    /// Runs realizations `0..count` (in parallel on the current rayon pool)
    /// and aggregates them in index order.
    pub fn aggregate(&self, method: SelectionMethod, sel_size: usize, count: usize) -> Result<AggregateRecord, HarnessError> {
        if count == 0 {
            return Err(HarnessError::Experiment("realizations must be at least 1".into()));
        }
        let samples = (0..count as u64)
            .into_par_iter()
            .map(|r| self.run(method, sel_size, r))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(AggregateRecord::from_samples(&self.cfg, method, sel_size, &samples))
    }
}

/// One realization of the scenario `cfg`; a pure function of its arguments.
pub fn run_realization(
    cfg: &ScenarioConfig,
    method: SelectionMethod,
    sel_size: usize,
    index: u64,
) -> Result<LinkMetrics, HarnessError> {
    Simulator::new(cfg.clone())?.run(method, sel_size, index)
}

/// Monte-Carlo statistics of one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRecord {
    pub method: SelectionMethod,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub sel_size: usize,
    pub realizations: usize,
    pub finite_count: usize,
    pub inf_count: usize,
    /// dB of the linear mean over finite S/I samples.
    pub mean_si_db: Option<f64>,
    /// Standard deviation of the per-sample S/I in dB, finite samples only.
    pub std_si_db: Option<f64>,
    pub mean_rate_bps: f64,
    pub mean_coh_rate_bps: f64,
    pub mean_rel_rate_pct: Option<f64>,
    pub std_rel_rate_pct: Option<f64>,
    pub seed: u64,
}

fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (Some(mean), Some(var.sqrt()))
}

impl AggregateRecord {
    pub fn from_samples(cfg: &ScenarioConfig, method: SelectionMethod, sel_size: usize, samples: &[LinkMetrics]) -> Self {
        let finite: Vec<f64> = samples.iter().filter_map(|m| m.s_over_i.finite()).collect();
        let (mean_si, _) = mean_std(&finite);
        let si_db: Vec<f64> = finite.iter().map(|&x| 10.0 * x.log10()).collect();
        let (_, std_si_db) = mean_std(&si_db);
        let rel: Vec<f64> = samples.iter().filter_map(|m| m.relative_rate).collect();
        let (mean_rel, std_rel) = mean_std(&rel);
        let n = samples.len() as f64;
        AggregateRecord {
            method,
            k: cfg.num_subcarriers,
            n: cfg.num_reflectors(),
            sel_size,
            realizations: samples.len(),
            finite_count: finite.len(),
            inf_count: samples.len() - finite.len(),
            mean_si_db: mean_si.map(|m| 10.0 * m.log10()),
            std_si_db,
            mean_rate_bps: samples.iter().map(|m| m.rate).sum::<f64>() / n,
            mean_coh_rate_bps: samples.iter().map(|m| m.coherent_rate).sum::<f64>() / n,
            mean_rel_rate_pct: mean_rel,
            std_rel_rate_pct: std_rel,
            seed: cfg.seed,
        }
    }

    /// Mean S/I in dB with an all-unbounded point ranked as `+inf`.
    pub fn si_rank_db(&self) -> f64 {
        match self.mean_si_db {
            Some(v) => v,
            None if self.inf_count > 0 => f64::INFINITY,
            None => f64::NAN,
        }
    }
}

/// What a sweep varies.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    /// Surface sizes `N`; a perfect square becomes a square array, anything
    /// else a single row.
    RisSize(Vec<usize>),
    /// Requested selection sizes `|I|`.
    SelectionSize(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub base: ScenarioConfig,
    pub axis: SweepAxis,
    pub methods: Vec<SelectionMethod>,
    /// Selection sizes for a surface-size sweep; ignored otherwise.
    pub sel_sizes: Vec<usize>,
    pub realizations: usize,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl ExperimentSpec {
    fn validate(&self) -> Result<(), HarnessError> {
        self.base.validate()?;
        if self.realizations == 0 {
            return Err(HarnessError::Experiment("realizations must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(HarnessError::Experiment("no selection methods given".into()));
        }
        let empty_axis = match &self.axis {
            SweepAxis::RisSize(v) => v.is_empty() || self.sel_sizes.is_empty(),
            SweepAxis::SelectionSize(v) => v.is_empty(),
        };
        if empty_axis {
            return Err(HarnessError::Experiment("empty sweep list".into()));
        }
        Ok(())
    }
}

/// `(n_row, n_col)` for a surface of `n` reflectors.
pub fn surface_shape(n: usize) -> (usize, usize) {
    let side = (n as f64).sqrt().round() as usize;
    if side * side == n {
        (side, side)
    } else {
        (1, n)
    }
}

fn with_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T, HarnessError> {
    match threads {
        None => Ok(job()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| HarnessError::Pool(e.to_string()))?;
            Ok(pool.install(job))
        }
    }
}

/// One record per `(N, |I|, method)`, in that nesting order.
pub fn sweep_ris_size(spec: &ExperimentSpec) -> Result<Vec<AggregateRecord>, HarnessError> {
    spec.validate()?;
    let SweepAxis::RisSize(sizes) = &spec.axis else {
        return Err(HarnessError::Experiment("expected a surface-size sweep".into()));
    };
    with_pool(spec.threads, || {
        let mut records = Vec::new();
        for &n in sizes {
            let (n_row, n_col) = surface_shape(n);
            let sim = Simulator::new(ScenarioConfig {
                n_row,
                n_col,
                ..spec.base.clone()
            })?;
            for &size in &spec.sel_sizes {
                for &method in &spec.methods {
                    records.push(sim.aggregate(method, size, spec.realizations)?);
                }
            }
        }
        Ok(records)
    })?
}

/// One record per `(|I|, method)` on the base surface.
pub fn sweep_selection_size(spec: &ExperimentSpec) -> Result<Vec<AggregateRecord>, HarnessError> {
    spec.validate()?;
    let SweepAxis::SelectionSize(sizes) = &spec.axis else {
        return Err(HarnessError::Experiment("expected a selection-size sweep".into()));
    };
    with_pool(spec.threads, || {
        let sim = Simulator::new(spec.base.clone())?;
        let mut records = Vec::new();
        for &size in sizes {
            for &method in &spec.methods {
                records.push(sim.aggregate(method, size, spec.realizations)?);
            }
        }
        Ok(records)
    })?
}

pub fn run_sweep(spec: &ExperimentSpec) -> Result<Vec<AggregateRecord>, HarnessError> {
    match spec.axis {
        SweepAxis::RisSize(_) => sweep_ris_size(spec),
        SweepAxis::SelectionSize(_) => sweep_selection_size(spec),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(HarnessError::Experiment(format!("unknown output format `{other}`"))),
        }
    }
}

/// Nine significant digits.
fn fmt_real(x: f64) -> String {
    format!("{x:.8e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_real).unwrap_or_default()
}

fn round_sig(x: f64) -> f64 {
    // the formatted value always parses back
    fmt_real(x).parse().unwrap_or(x)
}

pub fn to_csv_string(records: &[AggregateRecord]) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.method,
            r.k,
            r.n,
            r.sel_size,
            r.realizations,
            r.finite_count,
            r.inf_count,
            fmt_opt(r.mean_si_db),
            fmt_opt(r.std_si_db),
            fmt_real(r.mean_rate_bps),
            fmt_real(r.mean_coh_rate_bps),
            fmt_opt(r.mean_rel_rate_pct),
            fmt_opt(r.std_rel_rate_pct),
            r.seed
        );
    }
    out
}

pub fn to_json_string(records: &[AggregateRecord]) -> Result<String, HarnessError> {
    let rounded: Vec<AggregateRecord> = records
        .iter()
        .map(|r| AggregateRecord {
            mean_si_db: r.mean_si_db.map(round_sig),
            std_si_db: r.std_si_db.map(round_sig),
            mean_rate_bps: round_sig(r.mean_rate_bps),
            mean_coh_rate_bps: round_sig(r.mean_coh_rate_bps),
            mean_rel_rate_pct: r.mean_rel_rate_pct.map(round_sig),
            std_rel_rate_pct: r.std_rel_rate_pct.map(round_sig),
            ..r.clone()
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&rounded)?;
    s.push('\n');
    Ok(s)
}

pub fn render(records: &[AggregateRecord], format: OutputFormat) -> Result<String, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::Experiment("no records to emit".into()));
    }
    match format {
        OutputFormat::Csv => Ok(to_csv_string(records)),
        OutputFormat::Json => to_json_string(records),
    }
}

/// Writes the records as CSV or JSON to `path`.
pub fn emit(records: &[AggregateRecord], format: OutputFormat, path: impl AsRef<Path>) -> Result<(), HarnessError> {
    fs::write(path, render(records, format)?)?;
    Ok(())
}

fn parse_field<T: FromStr>(row: &csv::StringRecord, idx: usize, name: &str) -> Result<T, HarnessError> {
    row.get(idx)
        .ok_or_else(|| HarnessError::Table(format!("missing column `{name}`")))?
        .parse()
        .map_err(|_| HarnessError::Table(format!("bad value in column `{name}`: `{}`", &row[idx])))
}

fn parse_opt(row: &csv::StringRecord, idx: usize, name: &str) -> Result<Option<f64>, HarnessError> {
    match row.get(idx) {
        Some("") => Ok(None),
        Some(_) => parse_field(row, idx, name).map(Some),
        None => Err(HarnessError::Table(format!("missing column `{name}`"))),
    }
}

/// Parses a table produced by [`to_csv_string`].
pub fn parse_csv(text: &str) -> Result<Vec<AggregateRecord>, HarnessError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let expected: Vec<&str> = CSV_HEADER.split(',').collect();
    if header != expected {
        return Err(HarnessError::Table(format!("header `{}` does not match the schema", header.join(","))));
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        let method: String = parse_field(&row, 0, "method")?;
        out.push(AggregateRecord {
            method: method.parse()?,
            k: parse_field(&row, 1, "K")?,
            n: parse_field(&row, 2, "N")?,
            sel_size: parse_field(&row, 3, "sel_size")?,
            realizations: parse_field(&row, 4, "realizations")?,
            finite_count: parse_field(&row, 5, "finite_count")?,
            inf_count: parse_field(&row, 6, "inf_count")?,
            mean_si_db: parse_opt(&row, 7, "mean_si_db")?,
            std_si_db: parse_opt(&row, 8, "std_si_db")?,
            mean_rate_bps: parse_field(&row, 9, "mean_rate_bps")?,
            mean_coh_rate_bps: parse_field(&row, 10, "mean_coh_rate_bps")?,
            mean_rel_rate_pct: parse_opt(&row, 11, "mean_rel_rate_pct")?,
            std_rel_rate_pct: parse_opt(&row, 12, "std_rel_rate_pct")?,
            seed: parse_field(&row, 13, "seed")?,
        });
    }
    Ok(out)
}
