//! Run directories on disk.
//!
//! A run directory holds:
//!
//! * `ticks.csv`: `time,price_ticks,pnl_s_quanta,pnl_sstar_quanta,diff_quanta`
//! * `phases.csv`: `phase,end_time,q_delayed,diff_quanta,lower_bound_quanta,n_delayed`
//!   where `q_delayed` is the cumulative delayed quantity at the phase end and
//!   `n_delayed` the number of orders delayed within the phase
//! * `delayed_orders.csv`: `order_id,sign,qty,t_delay,p_delay_ticks,t_exec,p_exec_ticks,gap_ticks`
//! * `summary.json`: config, seeds, summary statistics with currency
//!   renderings, orders still queued at the end, and verdicts
//!
//! Nothing in a run directory depends on wall-clock time or the output path,
//! so the same config and seed always produce the same bytes.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::audit::Verdict;
use crate::config::RunConfig;
use crate::dominance::{DelayQueueEntry, DelayedOrderRecord, PhaseReport};
use crate::error::{Error, Result};
use crate::market::Tick;
use crate::sim::{run_simulation_with, RunOptions, RunReport, RunSummary, TickRow, TickSink};

pub const TICKS_FILE: &str = "ticks.csv";
pub const PHASES_FILE: &str = "phases.csv";
pub const DELAYED_FILE: &str = "delayed_orders.csv";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub phase: u64,
    pub end_time: u64,
    pub q_delayed: u64,
    pub diff_quanta: i128,
    pub lower_bound_quanta: i128,
    pub n_delayed: u64,
}

impl From<&PhaseReport> for PhaseRow {
    fn from(p: &PhaseReport) -> Self {
        PhaseRow {
            phase: p.phase_index,
            end_time: p.end_time,
            q_delayed: p.delayed_quantity,
            diff_quanta: p.pnl_diff.0,
            lower_bound_quanta: p.lower_bound.0,
            n_delayed: p.records.len() as u64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayedRow {
    pub order_id: u64,
    pub sign: i64,
    pub qty: u64,
    pub t_delay: u64,
    pub p_delay_ticks: Tick,
    pub t_exec: u64,
    pub p_exec_ticks: Tick,
    pub gap_ticks: i64,
}

impl From<&DelayedOrderRecord> for DelayedRow {
    fn from(r: &DelayedOrderRecord) -> Self {
        DelayedRow {
            order_id: r.order_id,
            sign: r.sign(),
            qty: r.quantity,
            t_delay: r.delay_time,
            p_delay_ticks: r.base_fill_price,
            t_exec: r.execution_time,
            p_exec_ticks: r.execution_price,
            gap_ticks: r.gap_ticks(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingRow {
    pub order_id: u64,
    pub sign: i64,
    pub qty: u64,
    pub t_delay: u64,
    pub p_delay_ticks: Tick,
}

impl From<&DelayQueueEntry> for PendingRow {
    fn from(e: &DelayQueueEntry) -> Self {
        PendingRow {
            order_id: e.order_id,
            sign: e.sign(),
            qty: e.quantity,
            t_delay: e.delay_time,
            p_delay_ticks: e.base_fill_price,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurrencySummary {
    pub final_price: Decimal,
    pub final_pnl_s: Decimal,
    pub final_pnl_sstar: Decimal,
    pub final_diff: Decimal,
    pub max_drawdown_s: Decimal,
    pub max_drawdown_sstar: Decimal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryDoc {
    pub config: RunConfig,
    pub replication: u64,
    pub seed: u64,
    pub summary: RunSummary,
    pub currency: CurrencySummary,
    pub pending_delayed: Vec<PendingRow>,
    pub verdicts: Vec<Verdict>,
}

impl SummaryDoc {
    pub fn from_report(report: &RunReport) -> Result<Self> {
        let instrument = report.config.instrument()?;
        let s = &report.summary;
        let mut config = report.config.clone();
        config.run.output_dir = PathBuf::new();
        Ok(SummaryDoc {
            config,
            replication: report.replication,
            seed: report.seed,
            summary: s.clone(),
            currency: CurrencySummary {
                final_price: instrument.price_to_currency(s.final_price)?,
                final_pnl_s: s.final_pnl_s.to_currency(&instrument),
                final_pnl_sstar: s.final_pnl_sstar.to_currency(&instrument),
                final_diff: s.final_diff.to_currency(&instrument),
                max_drawdown_s: s.max_drawdown_s.to_currency(&instrument),
                max_drawdown_sstar: s.max_drawdown_sstar.to_currency(&instrument),
            },
            pending_delayed: report.pending.iter().map(PendingRow::from).collect(),
            verdicts: report.verdicts.clone(),
        })
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(BufWriter::new(File::create(path)?));
    writer.write_record(header)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader
        .deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

pub const TICKS_HEADER: [&str; 5] = ["time", "price_ticks", "pnl_s_quanta", "pnl_sstar_quanta", "diff_quanta"];
pub const PHASES_HEADER: [&str; 6] = ["phase", "end_time", "q_delayed", "diff_quanta", "lower_bound_quanta", "n_delayed"];
pub const DELAYED_HEADER: [&str; 8] = [
    "order_id", "sign", "qty", "t_delay", "p_delay_ticks", "t_exec", "p_exec_ticks", "gap_ticks",
];

/// Streams tick rows straight into `ticks.csv`.
pub struct CsvTickSink {
    writer: csv::Writer<BufWriter<File>>,
}

impl CsvTickSink {
    pub fn create(path: &Path) -> Result<Self> {
        let mut writer = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(BufWriter::new(File::create(path)?));
        writer.write_record(TICKS_HEADER)?;
        Ok(CsvTickSink { writer })
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}

impl TickSink for CsvTickSink {
    fn push(&mut self, row: TickRow) -> Result<()> {
        self.writer.serialize(row)?;
        Ok(())
    }
}

/// Runs one replication and writes its full run directory, streaming the
/// tick series to disk as it is produced. The returned report carries no
/// tick rows.
pub fn simulate_to_dir(config: &RunConfig, replication: u64, dir: &Path) -> Result<RunReport> {
    fs::create_dir_all(dir)?;
    let mut sink = CsvTickSink::create(&dir.join(TICKS_FILE))?;
    let options = RunOptions {
        record_ticks: true,
        ..RunOptions::default()
    };
    let report = run_simulation_with(config, replication, &options, &mut sink)?;
    sink.finish()?;
    write_run(&report, dir)?;
    Ok(report)
}

/// Directory name for replication `index` of a multi-replication run.
pub fn replication_dir(root: &Path, index: u64) -> PathBuf {
    root.join(format!("rep-{index:03}"))
}

/// Writes `report` into `dir`, creating it if needed. `ticks.csv` is only
/// written when the report holds the series.
pub fn write_run(report: &RunReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    if !report.ticks.is_empty() {
        write_csv(&dir.join(TICKS_FILE), &report.ticks, &TICKS_HEADER)?;
    }
    let phases: Vec<PhaseRow> = report.phases.iter().map(PhaseRow::from).collect();
    write_csv(&dir.join(PHASES_FILE), &phases, &PHASES_HEADER)?;
    let delayed: Vec<DelayedRow> = report.records.iter().map(DelayedRow::from).collect();
    write_csv(&dir.join(DELAYED_FILE), &delayed, &DELAYED_HEADER)?;
    write_summary(&SummaryDoc::from_report(report)?, dir)
}

pub fn write_summary(doc: &SummaryDoc, dir: &Path) -> Result<()> {
    let mut file = BufWriter::new(File::create(dir.join(SUMMARY_FILE))?);
    serde_json::to_writer_pretty(&mut file, doc)?;
    file.write_all(b"\n")?;
    file.flush()?;
    Ok(())
}

/// Everything the offline audit needs, from memory or from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub tau: i64,
    pub gamma: i64,
    pub queue_cap: usize,
    pub half_spread: i64,
    pub commission_per_unit: i64,
    pub ticks: Option<Vec<TickRow>>,
    pub phases: Vec<PhaseRow>,
    pub delayed: Vec<DelayedRow>,
    pub pending: Vec<PendingRow>,
    pub final_diff: Option<i128>,
}

impl RunArtifacts {
    pub fn from_report(report: &RunReport) -> Self {
        let c = &report.config;
        RunArtifacts {
            tau: c.dominance.tau,
            gamma: c.dominance.gamma,
            queue_cap: c.dominance.queue_cap,
            half_spread: c.run.half_spread,
            commission_per_unit: c.run.commission_per_unit,
            ticks: (!report.ticks.is_empty()).then(|| report.ticks.clone()),
            phases: report.phases.iter().map(PhaseRow::from).collect(),
            delayed: report.records.iter().map(DelayedRow::from).collect(),
            pending: report.pending.iter().map(PendingRow::from).collect(),
            final_diff: Some(report.summary.final_diff.0),
        }
    }

    /// Loads a run directory including the full tick series.
    pub fn load(dir: &Path) -> Result<Self> {
        let mut artifacts = Self::load_records(dir)?;
        let ticks_path = dir.join(TICKS_FILE);
        if ticks_path.exists() {
            artifacts.ticks = Some(read_csv(&ticks_path)?);
        }
        Ok(artifacts)
    }

    /// Loads everything but the tick series.
    pub fn load_records(dir: &Path) -> Result<Self> {
        let summary_path = dir.join(SUMMARY_FILE);
        let text = fs::read_to_string(&summary_path).map_err(|e| Error::Artifact {
            path: summary_path.display().to_string(),
            detail: e.to_string(),
        })?;
        let doc: SummaryDoc = serde_json::from_str(&text)?;
        let c = &doc.config;
        Ok(RunArtifacts {
            tau: c.dominance.tau,
            gamma: c.dominance.gamma,
            queue_cap: c.dominance.queue_cap,
            half_spread: c.run.half_spread,
            commission_per_unit: c.run.commission_per_unit,
            ticks: None,
            phases: read_csv(&dir.join(PHASES_FILE))?,
            delayed: read_csv(&dir.join(DELAYED_FILE))?,
            pending: doc.pending_delayed,
            final_diff: Some(doc.summary.final_diff.0),
        })
    }

    /// Streams `ticks.csv` from `dir` row by row.
    pub fn tick_rows(dir: &Path) -> Result<impl Iterator<Item = Result<TickRow>>> {
        let reader = csv::Reader::from_path(dir.join(TICKS_FILE))?;
        Ok(reader.into_deserialize().map(|row| row.map_err(Error::from)))
    }

    /// Writes the CSV files back, e.g. after a deliberate corruption in tests.
    pub fn write_csvs(&self, dir: &Path) -> Result<()> {
        if let Some(ticks) = &self.ticks {
            write_csv(&dir.join(TICKS_FILE), ticks, &TICKS_HEADER)?;
        }
        write_csv(&dir.join(PHASES_FILE), &self.phases, &PHASES_HEADER)?;
        write_csv(&dir.join(DELAYED_FILE), &self.delayed, &DELAYED_HEADER)
    }
}
