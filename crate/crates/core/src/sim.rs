//! Side-by-side simulation of the baseline and the delayed-execution strategy.
//!
//! Each tick, in order:
//! 1. the price process moves to the new mid price;
//! 2. the baseline's order from the previous tick fills at the side-adjusted
//!    price and is handed to the engine (mirror, enqueue or forced fill);
//! 3. the engine scans its queue and may execute delayed orders and close a
//!    phase;
//! 4. the baseline decides on its next order from market data only;
//! 5. both PnLs are marked at the mid price.
//!
//! Every proof obligation is checked while running; failures stop the run and
//! show up as failed verdicts.

use serde::{Deserialize, Serialize};

use crate::audit::Verdict;
use crate::config::{RunConfig, StopRule};
use crate::dominance::{
    phase_pnl_diff_check, BernoulliDelay, DelayDraw, DelayQueueEntry, DelayedOrderRecord,
    DominanceEngine, NeverDelay, PhaseReport,
};
use crate::error::{Error, Result};
use crate::market::{Money, Order, Tick};
use crate::pnl::FillLedger;
use crate::price::PricePathState;
use crate::rng::{derive_seed, substream, BASELINE_STREAM, DELAY_STREAM};
use crate::strategy::baseline_on_tick;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickRow {
    pub time: u64,
    pub price_ticks: Tick,
    pub pnl_s_quanta: i128,
    pub pnl_sstar_quanta: i128,
    pub diff_quanta: i128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub ticks: u64,
    pub final_price: Tick,
    pub final_pnl_s: Money,
    pub final_pnl_sstar: Money,
    pub final_diff: Money,
    pub phases: u64,
    pub delayed_quantity: u64,
    pub delayed_orders: u64,
    pub mean_gap_ticks: Option<f64>,
    pub min_gap_ticks: Option<i64>,
    pub max_drawdown_s: Money,
    pub max_drawdown_sstar: Money,
    pub base_fills: u64,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Keep the per-tick series in the report.
    pub record_ticks: bool,
    /// Keep both fill histories in the report.
    pub record_fills: bool,
    /// Replaces the configured delay coin.
    pub force_no_delay: bool,
}

impl RunOptions {
    pub fn full() -> Self {
        RunOptions {
            record_ticks: true,
            record_fills: true,
            force_no_delay: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub config: RunConfig,
    pub replication: u64,
    pub seed: u64,
    pub ticks: Vec<TickRow>,
    pub phases: Vec<PhaseReport>,
    /// Executed delayed orders, in execution order.
    pub records: Vec<DelayedOrderRecord>,
    /// Orders still queued when the run stopped.
    pub pending: Vec<DelayQueueEntry>,
    pub base_fills: Vec<Order>,
    pub dominant_fills: Vec<Order>,
    pub summary: RunSummary,
    pub verdicts: Vec<Verdict>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn phase_diffs(&self) -> Vec<Money> {
        self.phases.iter().map(|p| p.pnl_diff).collect()
    }
}

/// Seed of replication `index` under `master_seed`.
pub fn replication_seed(master_seed: u64, index: u64) -> u64 {
    derive_seed(master_seed, index)
}

const PER_ORDER_GAP: usize = 0;
const DELTA_SIGNS: usize = 1;
const QUEUE_CAP: usize = 2;
const TICK_RECONCILIATION: usize = 3;
const PHASE_CLAUSES: [usize; 5] = [4, 5, 6, 7, 8];

/// In-run verdict accumulator, indexed by clause position.
struct Checks {
    counts: [u64; 9],
    failures: [Vec<String>; 9],
    failed: bool,
}

impl Checks {
    const CLAUSES: [&'static str; 9] = [
        "per_order_gap",
        "delta_signs",
        "queue_cap",
        "tick_reconciliation",
        "phase_identity",
        "phase_positions_equal",
        "phase_lower_bound",
        "phase_positive",
        "phase_monotone",
    ];

    fn new() -> Self {
        Checks {
            counts: [0; 9],
            failures: Default::default(),
            failed: false,
        }
    }

    #[inline]
    fn check(&mut self, clause: usize, ok: bool, detail: impl FnOnce() -> String) {
        self.counts[clause] += 1;
        if !ok {
            self.failed = true;
            if self.failures[clause].len() < 5 {
                self.failures[clause].push(detail());
            }
        }
    }

    fn fail_with(&mut self, err: Error) {
        match err {
            Error::Invariant { clause, .. } => {
                let index = Self::CLAUSES
                    .iter()
                    .position(|c| *c == clause)
                    .unwrap_or_else(|| panic!("unknown clause {clause}"));
                let detail = err.to_string();
                self.check(index, false, || detail);
            }
            other => panic!("non-invariant error routed to checks: {other}"),
        }
    }

    fn pass(&mut self, clauses: &[usize]) {
        for &clause in clauses {
            self.counts[clause] += 1;
        }
    }

    fn verdicts(&self) -> Vec<Verdict> {
        Self::CLAUSES
            .iter()
            .enumerate()
            .map(|(i, clause)| Verdict {
                clause: clause.to_string(),
                passed: self.failures[i].is_empty(),
                checks: self.counts[i],
                detail: self.failures[i].join("; "),
            })
            .collect()
    }
}

struct Drawdown {
    peak: Option<Money>,
    max: Money,
}

impl Drawdown {
    fn new() -> Self {
        Drawdown { peak: None, max: Money::ZERO }
    }

    fn observe(&mut self, value: Money) {
        let peak = self.peak.map_or(value, |p| p.max(value));
        self.peak = Some(peak);
        self.max = self.max.max(peak - value);
    }
}

/// Receives the per-tick series as it is produced.
pub trait TickSink {
    fn push(&mut self, row: TickRow) -> Result<()>;
}

impl TickSink for Vec<TickRow> {
    fn push(&mut self, row: TickRow) -> Result<()> {
        Vec::push(self, row);
        Ok(())
    }
}

/// Runs replication `replication` of `config`. With `record_ticks` the
/// series ends up in [`RunReport::ticks`].
pub fn run_simulation(config: &RunConfig, replication: u64, options: &RunOptions) -> Result<RunReport> {
    let mut ticks = Vec::new();
    let mut report = run_simulation_with(config, replication, options, &mut ticks)?;
    report.ticks = ticks;
    Ok(report)
}

/// Like [`run_simulation`] but streams the tick series into `sink` (when
/// `record_ticks` is set) instead of keeping it, for runs too long to hold.
pub fn run_simulation_with(
    config: &RunConfig,
    replication: u64,
    options: &RunOptions,
    sink: &mut dyn TickSink,
) -> Result<RunReport> {
    config.validate()?;
    let stop = config.stop_rule()?;
    let seed = replication_seed(config.run.master_seed, replication);
    let params = config.dominance.clone();
    let sigma = config.run.half_spread;
    let commission = config.commission_per_unit();
    let instrument = config.instrument()?;

    let mut price = PricePathState::new(&config.price, seed);
    let mut baseline_rng = substream(seed, BASELINE_STREAM);
    let delay: Box<dyn DelayDraw> = if options.force_no_delay || config.run.force_no_delay {
        Box::new(NeverDelay)
    } else {
        Box::new(BernoulliDelay::new(params.delay_probability, substream(seed, DELAY_STREAM)))
    };
    let mut engine = DominanceEngine::new(
        params.clone(),
        sigma,
        config.price.grid_min,
        config.price.grid_max,
        delay,
    )?;

    let mut base = FillLedger::new();
    let mut dominant = FillLedger::new();
    let mut checks = Checks::new();
    let mut records: Vec<DelayedOrderRecord> = Vec::new();
    let mut phases: Vec<PhaseReport> = Vec::new();
    let mut dd_base = Drawdown::new();
    let mut dd_dominant = Drawdown::new();
    let threshold = params.tau + params.gamma;

    let mut mid = price.current_price;
    let mut next_id: u64 = 0;
    let mut pending = baseline_on_tick(&config.strategy, mid, 0, &mut baseline_rng);
    let mut time: u64 = 0;
    if options.record_ticks {
        sink.push(TickRow {
            time: 0,
            price_ticks: mid,
            pnl_s_quanta: 0,
            pnl_sstar_quanta: 0,
            diff_quanta: 0,
        })?;
    }
    dd_base.observe(Money::ZERO);
    dd_dominant.observe(Money::ZERO);

    loop {
        let done = match stop {
            StopRule::Ticks(n) => time >= n,
            StopRule::Phases(n) => phases.len() as u64 >= n,
        };
        if done || checks.failed {
            break;
        }

        time += 1;
        mid = price.step(&config.price);

        if let Some(intent) = pending.take() {
            next_id += 1;
            let side = intent.side;
            let fill = Order::on_grid(&instrument, next_id, time, side, mid - side.sign() * sigma, intent.quantity)?;
            let fee = Money(commission.0 * intent.quantity as i128);
            base.record(fill, fee);
            let (_, own) = engine.on_base_fill(&fill, mid);
            if let Some(order) = own {
                dominant.record(order, fee);
            }
            let len = engine.queue().len();
            checks.check(QUEUE_CAP, len <= params.queue_cap, || {
                format!("queue length {len} above cap {} at t={time}", params.queue_cap)
            });
        }

        let outcome = engine.on_tick(time, mid)?;
        for (record, fill) in outcome.executed {
            let fee = Money(commission.0 * fill.quantity as i128);
            dominant.record(fill, fee);
            let gap = record.gap_ticks();
            checks.check(PER_ORDER_GAP, gap > threshold, || {
                format!("order {}: gap {gap} not above {threshold}", record.order_id)
            });
            checks.check(
                DELTA_SIGNS,
                record.delta_t_at_delay.is_negative() && record.delta_g_at_execution.is_positive(),
                || {
                    format!(
                        "order {}: delta_T {} delta_G {}",
                        record.order_id, record.delta_t_at_delay, record.delta_g_at_execution
                    )
                },
            );
            records.push(record);
        }

        let pnl_base = base.net_pnl_at(mid);
        let pnl_dominant = dominant.net_pnl_at(mid);
        let diff = pnl_dominant - pnl_base;

        // diff = executed gains - queued orders' open contribution + their unpaid fees
        let mut reconciled = engine.delayed_gain();
        for entry in engine.queue() {
            let q = entry.quantity as i128;
            reconciled -= Money(entry.sign() as i128 * (entry.base_fill_price - mid) as i128 * q);
            reconciled += Money(commission.0 * q);
        }
        checks.check(TICK_RECONCILIATION, diff == reconciled, || {
            format!("t={time}: diff {diff} vs reconstructed {reconciled}")
        });

        if let Some(closed) = outcome.phase_closed {
            let q_d = engine.delayed_quantity();
            let report = PhaseReport {
                phase_index: closed.phase_index,
                end_time: closed.end_time,
                delayed_quantity: q_d,
                pnl_diff: diff,
                lower_bound: Money(q_d as i128 * threshold as i128),
                records: closed.records,
            };
            let previous = phases.last().map_or(Money::ZERO, |p: &PhaseReport| p.pnl_diff);
            match phase_pnl_diff_check(
                &report,
                base.orders(),
                dominant.orders(),
                base.commissions(),
                dominant.commissions(),
                mid,
                &records,
                &params,
                previous,
            ) {
                Ok(()) => checks.pass(&PHASE_CLAUSES),
                Err(err) => checks.fail_with(err),
            }
            phases.push(report);
        }

        pending = baseline_on_tick(&config.strategy, mid, time, &mut baseline_rng);

        dd_base.observe(pnl_base);
        dd_dominant.observe(pnl_dominant);
        if options.record_ticks {
            sink.push(TickRow {
                time,
                price_ticks: mid,
                pnl_s_quanta: pnl_base.0,
                pnl_sstar_quanta: pnl_dominant.0,
                diff_quanta: diff.0,
            })?;
        }
    }

    let gaps: Vec<i64> = records.iter().map(DelayedOrderRecord::gap_ticks).collect();
    let final_pnl_s = base.net_pnl_at(mid);
    let final_pnl_sstar = dominant.net_pnl_at(mid);
    let summary = RunSummary {
        ticks: time,
        final_price: mid,
        final_pnl_s,
        final_pnl_sstar,
        final_diff: final_pnl_sstar - final_pnl_s,
        phases: phases.len() as u64,
        delayed_quantity: records.iter().map(|r| r.quantity).sum(),
        delayed_orders: records.len() as u64,
        mean_gap_ticks: (!gaps.is_empty())
            .then(|| gaps.iter().sum::<i64>() as f64 / gaps.len() as f64),
        min_gap_ticks: gaps.iter().copied().min(),
        max_drawdown_s: dd_base.max,
        max_drawdown_sstar: dd_dominant.max,
        base_fills: base.orders().len() as u64,
    };

    Ok(RunReport {
        config: config.clone(),
        replication,
        seed,
        ticks: Vec::new(),
        phases,
        records,
        pending: engine.queue().iter().cloned().collect(),
        base_fills: if options.record_fills { base.orders().to_vec() } else { Vec::new() },
        dominant_fills: if options.record_fills { dominant.orders().to_vec() } else { Vec::new() },
        summary,
        verdicts: checks.verdicts(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short_config() -> RunConfig {
        let mut c = RunConfig::default();
        c.run.target_phases = Some(3);
        c.run.master_seed = 42;
        c
    }

    #[test]
    fn default_profile_passes_in_run_checks() {
        let report = run_simulation(&short_config(), 0, &RunOptions::full()).unwrap();
        assert!(report.passed(), "{:?}", report.verdicts);
        assert_eq!(report.phases.len(), 3);
        assert!(report.summary.final_diff > Money::ZERO);
        assert_eq!(report.ticks.len() as u64, report.summary.ticks + 1);
        assert_eq!(report.ticks.last().unwrap().diff_quanta, report.summary.final_diff.0);
    }

    #[test]
    fn total_ticks_stop_rule() {
        let mut c = RunConfig::default();
        c.run.target_phases = None;
        c.run.total_ticks = Some(5_000);
        let report = run_simulation(&c, 0, &RunOptions::default()).unwrap();
        assert_eq!(report.summary.ticks, 5_000);
        assert!(report.ticks.is_empty());
        assert!(report.passed());
    }

    #[test]
    fn drawdown_tracks_peak_to_trough() {
        let mut dd = Drawdown::new();
        for v in [0, 10, 4, 12, 1, 5] {
            dd.observe(Money(v));
        }
        assert_eq!(dd.max, Money(11));
    }

    #[test]
    fn no_delay_control_run() {
        let mut c = short_config();
        c.run.target_phases = None;
        c.run.total_ticks = Some(20_000);
        c.run.force_no_delay = true;
        let report = run_simulation(&c, 0, &RunOptions::full()).unwrap();
        assert!(report.ticks.iter().all(|t| t.diff_quanta == 0));
        assert_eq!(report.base_fills, report.dominant_fills);
    }
}
