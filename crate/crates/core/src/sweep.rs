//! Parameter sweeps over the dominance knobs.
//!
//! A grid is written `tau=10,25;gamma=25,50;delay_probability=1/2;queue_cap=1,3`.
//! Keys left out keep the base config's value. Every cell reuses the base
//! config's replication seeds, so cells differ only in the swept parameters
//! and a one-cell grid reproduces a plain run exactly.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::rng::Ratio;
use crate::sim::{run_simulation, RunOptions, RunSummary};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepGrid {
    pub tau: Vec<i64>,
    pub gamma: Vec<i64>,
    pub delay_probability: Vec<Ratio>,
    pub queue_cap: Vec<usize>,
}

fn parse_values<T: FromStr>(key: &str, values: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    let parsed = values
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| {
            v.parse::<T>()
                .map_err(|e| Error::config(format!("grid value {key}={v}: {e}")))
        })
        .collect::<Result<Vec<T>>>()?;
    if parsed.is_empty() {
        return Err(Error::config(format!("grid key {key} has no values")));
    }
    Ok(parsed)
}

impl FromStr for SweepGrid {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        let mut grid = SweepGrid::default();
        for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, values) = part
                .split_once('=')
                .ok_or_else(|| Error::config(format!("grid entry {part:?} is not key=values")))?;
            let key = key.trim();
            match key {
                "tau" => grid.tau = parse_values(key, values)?,
                "gamma" => grid.gamma = parse_values(key, values)?,
                "delay_probability" => grid.delay_probability = parse_values(key, values)?,
                "queue_cap" => grid.queue_cap = parse_values(key, values)?,
                other => {
                    return Err(Error::config(format!(
                        "unknown grid key {other:?} (expected tau, gamma, delay_probability, queue_cap)"
                    )))
                }
            }
        }
        Ok(grid)
    }
}

/// One parameter combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub tau: i64,
    pub gamma: i64,
    pub delay_probability: Ratio,
    pub queue_cap: usize,
}

impl SweepGrid {
    /// Cartesian product in key order tau, gamma, delay_probability,
    /// queue_cap (last key varies fastest).
    pub fn cells(&self, base: &RunConfig) -> Vec<SweepCell> {
        let d = &base.dominance;
        let or = |v: &Vec<i64>, x: i64| if v.is_empty() { vec![x] } else { v.clone() };
        let taus = or(&self.tau, d.tau);
        let gammas = or(&self.gamma, d.gamma);
        let probs = if self.delay_probability.is_empty() {
            vec![d.delay_probability]
        } else {
            self.delay_probability.clone()
        };
        let caps = if self.queue_cap.is_empty() { vec![d.queue_cap] } else { self.queue_cap.clone() };
        let mut cells = Vec::new();
        for &tau in &taus {
            for &gamma in &gammas {
                for &delay_probability in &probs {
                    for &queue_cap in &caps {
                        cells.push(SweepCell { tau, gamma, delay_probability, queue_cap });
                    }
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    /// The cell's parameters failed validation; nothing was run.
    Skipped,
    /// The run aborted, e.g. on stranded orders.
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub cell: usize,
    pub tau: i64,
    pub gamma: i64,
    pub delay_probability: Ratio,
    pub queue_cap: usize,
    pub replication: u64,
    pub seed: u64,
    pub status: CellStatus,
    pub final_diff_quanta: Option<i128>,
    pub phases: Option<u64>,
    pub q_delayed: Option<u64>,
    pub mean_gap_ticks: Option<f64>,
    pub min_gap_ticks: Option<i64>,
    /// Every delayed order's gap exceeded `tau + gamma`.
    pub gap_ok: Option<bool>,
    pub verdicts_passed: Option<bool>,
    pub note: String,
}

impl SweepRow {
    /// A row counts as failing if it ran and any verdict failed or it errored.
    pub fn is_failure(&self) -> bool {
        match self.status {
            CellStatus::Ok => self.verdicts_passed != Some(true),
            CellStatus::Skipped => false,
            CellStatus::Error => true,
        }
    }
}

fn cell_config(base: &RunConfig, cell: &SweepCell) -> RunConfig {
    let mut config = base.clone();
    config.dominance.tau = cell.tau;
    config.dominance.gamma = cell.gamma;
    config.dominance.delay_probability = cell.delay_probability;
    config.dominance.queue_cap = cell.queue_cap;
    config
}

fn row_for(index: usize, cell: &SweepCell, replication: u64, seed: u64, status: CellStatus) -> SweepRow {
    SweepRow {
        cell: index,
        tau: cell.tau,
        gamma: cell.gamma,
        delay_probability: cell.delay_probability,
        queue_cap: cell.queue_cap,
        replication,
        seed,
        status,
        final_diff_quanta: None,
        phases: None,
        q_delayed: None,
        mean_gap_ticks: None,
        min_gap_ticks: None,
        gap_ok: None,
        verdicts_passed: None,
        note: String::new(),
    }
}

fn fill_summary(row: &mut SweepRow, summary: &RunSummary, threshold: i64, passed: bool) {
    row.final_diff_quanta = Some(summary.final_diff.0);
    row.phases = Some(summary.phases);
    row.q_delayed = Some(summary.delayed_quantity);
    row.mean_gap_ticks = summary.mean_gap_ticks;
    row.min_gap_ticks = summary.min_gap_ticks;
    row.gap_ok = Some(summary.min_gap_ticks.is_none_or(|g| g > threshold));
    row.verdicts_passed = Some(passed);
}

/// Runs every cell for every replication of `base`. Rows come back ordered by
/// cell, then replication, regardless of scheduling.
pub fn sweep(base: &RunConfig, grid: &SweepGrid) -> Result<Vec<SweepRow>> {
    base.validate()?;
    let cells = grid.cells(base);
    let reps = base.run.replications;
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| (0..reps).map(move |r| (c, r)))
        .collect();
    let rows = jobs
        .into_par_iter()
        .map(|(index, replication)| {
            let cell = &cells[index];
            let config = cell_config(base, cell);
            let seed = crate::sim::replication_seed(config.run.master_seed, replication);
            if let Err(e) = config.validate() {
                let mut row = row_for(index, cell, replication, seed, CellStatus::Skipped);
                row.note = e.to_string();
                return row;
            }
            match run_simulation(&config, replication, &RunOptions::default()) {
                Ok(report) => {
                    let mut row = row_for(index, cell, replication, seed, CellStatus::Ok);
                    fill_summary(&mut row, &report.summary, cell.tau + cell.gamma, report.passed());
                    row.note = report
                        .verdicts
                        .iter()
                        .filter(|v| !v.passed)
                        .map(|v| v.clause.as_str())
                        .collect::<Vec<_>>()
                        .join(" ");
                    row
                }
                Err(e) => {
                    let mut row = row_for(index, cell, replication, seed, CellStatus::Error);
                    row.note = e.to_string();
                    row
                }
            }
        })
        .collect();
    Ok(rows)
}

pub const SWEEP_HEADER: [&str; 16] = [
    "cell",
    "tau",
    "gamma",
    "delay_probability",
    "queue_cap",
    "replication",
    "seed",
    "status",
    "final_diff_quanta",
    "phases",
    "q_delayed",
    "mean_gap_ticks",
    "min_gap_ticks",
    "gap_ok",
    "verdicts_passed",
    "note",
];

pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    writer.write_record(SWEEP_HEADER)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}
