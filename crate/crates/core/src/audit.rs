//! Offline re-audit of a finished run from its recorded artifacts.
//!
//! Only the CSV rows and the handful of parameters in the summary are used.
//! Nothing is taken from the engine's own bookkeeping, so this is an
//! independent second check of the in-run verdicts.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::artifacts::{DelayedRow, RunArtifacts, TICKS_FILE};
use crate::error::Result;
use crate::sim::TickRow;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub clause: String,
    pub passed: bool,
    /// Number of individual checks evaluated for this clause.
    pub checks: u64,
    pub detail: String,
}

#[derive(Default)]
struct Clause {
    name: &'static str,
    checks: u64,
    failures: Vec<String>,
}

impl Clause {
    fn new(name: &'static str) -> Self {
        Clause { name, ..Default::default() }
    }

    fn check(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok && self.failures.len() < 5 {
            self.failures.push(detail());
        }
    }

    fn verdict(self) -> Verdict {
        Verdict {
            clause: self.name.to_string(),
            passed: self.failures.is_empty(),
            checks: self.checks,
            detail: self.failures.join("; "),
        }
    }
}

fn gain(row: &DelayedRow) -> i128 {
    row.sign as i128 * (row.p_exec_ticks - row.p_delay_ticks) as i128 * row.qty as i128
}

/// Re-evaluates every recorded-data invariant. One verdict per clause.
pub fn audit(a: &RunArtifacts) -> Vec<Verdict> {
    let mut verdicts = audit_records(a);
    if let Some(ticks) = &a.ticks {
        let tick_verdicts = audit_ticks(a, ticks.iter().copied().map(Ok))
            .expect("in-memory rows cannot fail to read");
        verdicts.extend(tick_verdicts);
    }
    verdicts
}

/// Clauses over phases and delayed orders only.
pub fn audit_records(a: &RunArtifacts) -> Vec<Verdict> {
    let threshold = a.tau + a.gamma;

    let mut gap = Clause::new("per_order_gap");
    for row in &a.delayed {
        let recomputed = row.sign * (row.p_exec_ticks - row.p_delay_ticks);
        gap.check(
            recomputed == row.gap_ticks && recomputed > threshold && row.t_exec >= row.t_delay,
            || {
                format!(
                    "order {}: sign*(p_exec - p_delay) = {recomputed} (recorded {}), needs > {threshold}",
                    row.order_id, row.gap_ticks
                )
            },
        );
    }

    // occupancy at each enqueue instant; an order executed at tick t was still
    // queued when that tick's base fill arrived
    let mut cap = Clause::new("queue_cap");
    let intervals: Vec<(u64, u64, u64)> = a
        .delayed
        .iter()
        .map(|r| (r.order_id, r.t_delay, r.t_exec))
        .chain(a.pending.iter().map(|p| (p.order_id, p.t_delay, u64::MAX)))
        .collect();
    for &(id, t, _) in &intervals {
        let occupancy = intervals
            .iter()
            .filter(|&&(_, start, end)| start <= t && t <= end)
            .count();
        cap.check(occupancy <= a.queue_cap, || {
            format!("order {id}: {occupancy} queued orders at t={t}, cap {}", a.queue_cap)
        });
    }

    let mut identity = Clause::new("phase_identity");
    let mut bound = Clause::new("phase_lower_bound");
    let mut positive = Clause::new("phase_positive");
    let mut monotone = Clause::new("phase_monotone");
    let mut membership = Clause::new("phase_membership");
    let mut previous: Option<(u64, u64, i128)> = None;
    for (k, phase) in a.phases.iter().enumerate() {
        let done: Vec<&DelayedRow> = a.delayed.iter().filter(|r| r.t_exec <= phase.end_time).collect();
        let telescoped: i128 = done.iter().map(|r| gain(r)).sum();
        identity.check(phase.diff_quanta == telescoped, || {
            format!("phase {}: diff {} vs delayed-order sum {telescoped}", phase.phase, phase.diff_quanta)
        });

        let q_d: u64 = done.iter().map(|r| r.qty).sum();
        let expected_bound = q_d as i128 * threshold as i128;
        bound.check(
            phase.q_delayed == q_d
                && phase.lower_bound_quanta == expected_bound
                && phase.diff_quanta >= expected_bound,
            || {
                format!(
                    "phase {}: diff {} vs bound {expected_bound} (recorded Q_D {}, bound {})",
                    phase.phase, phase.diff_quanta, phase.q_delayed, phase.lower_bound_quanta
                )
            },
        );
        positive.check(q_d == 0 || phase.diff_quanta > 0, || {
            format!("phase {}: diff {} with Q_D {q_d}", phase.phase, phase.diff_quanta)
        });

        let (prev_index, prev_end, prev_diff) = previous.unwrap_or((0, 0, 0));
        let ordered = k == 0 || (phase.phase == prev_index + 1 && phase.end_time > prev_end);
        let grows = if phase.n_delayed > 0 {
            phase.diff_quanta > prev_diff
        } else {
            phase.diff_quanta >= prev_diff
        };
        monotone.check(ordered && grows, || {
            format!(
                "phase {}: diff {} after phase {prev_index} diff {prev_diff}",
                phase.phase, phase.diff_quanta
            )
        });

        let start = if k == 0 { None } else { Some(prev_end) };
        let in_phase: Vec<&DelayedRow> = a
            .delayed
            .iter()
            .filter(|r| r.t_exec <= phase.end_time && start.is_none_or(|s| r.t_exec > s))
            .collect();
        let straddling = a
            .delayed
            .iter()
            .filter(|r| r.t_delay <= phase.end_time && r.t_exec > phase.end_time)
            .count()
            + a.pending.iter().filter(|p| p.t_delay <= phase.end_time).count();
        let delayed_inside = in_phase.iter().all(|r| start.is_none_or(|s| r.t_delay > s));
        membership.check(
            in_phase.len() as u64 == phase.n_delayed && straddling == 0 && delayed_inside,
            || {
                format!(
                    "phase {}: {} orders executed inside, {} recorded, {straddling} still queued at the end",
                    phase.phase,
                    in_phase.len(),
                    phase.n_delayed
                )
            },
        );
        previous = Some((phase.phase, phase.end_time, phase.diff_quanta));
    }

    vec![
        gap.verdict(),
        cap.verdict(),
        identity.verdict(),
        bound.verdict(),
        positive.verdict(),
        monotone.verdict(),
        membership.verdict(),
    ]
}

/// Per-tick reconciliation of the diff series against the delayed orders,
/// consuming the rows as a stream.
pub fn audit_ticks<I>(a: &RunArtifacts, ticks: I) -> Result<Vec<Verdict>>
where
    I: IntoIterator<Item = Result<TickRow>>,
{
    let mut clause = Clause::new("tick_reconciliation");
    let mut ordering = Clause::new("tick_series");

    struct Span {
        sign: i64,
        qty: u64,
        price: i64,
        start: u64,
        end: u64,
        gain: i128,
    }
    let mut spans: Vec<Span> = a
        .delayed
        .iter()
        .map(|r| Span {
            sign: r.sign,
            qty: r.qty,
            price: r.p_delay_ticks,
            start: r.t_delay,
            end: r.t_exec,
            gain: gain(r),
        })
        .chain(a.pending.iter().map(|p| Span {
            sign: p.sign,
            qty: p.qty,
            price: p.p_delay_ticks,
            start: p.t_delay,
            end: u64::MAX,
            gain: 0,
        }))
        .collect();
    spans.sort_by_key(|s| s.start);

    let mut next = 0;
    let mut active: Vec<&Span> = Vec::new();
    let mut executed: i128 = 0;
    let fee = a.commission_per_unit as i128;
    let mut last: Option<TickRow> = None;
    for row in ticks {
        let row = row?;
        let t = row.time;
        let expected_time = last.map_or(0, |r| r.time + 1);
        ordering.check(t == expected_time, || format!("tick {t} follows {}", expected_time.wrapping_sub(1)));
        last = Some(row);
        while next < spans.len() && spans[next].start <= t {
            active.push(&spans[next]);
            next += 1;
        }
        active.retain(|s| {
            if s.end <= t {
                executed += s.gain;
                false
            } else {
                true
            }
        });
        let open: i128 = active
            .iter()
            .map(|s| s.sign as i128 * (s.price - row.price_ticks) as i128 * s.qty as i128 - fee * s.qty as i128)
            .sum();
        let expected = executed - open;
        clause.check(
            row.diff_quanta == expected && row.diff_quanta == row.pnl_sstar_quanta - row.pnl_s_quanta,
            || format!("t={t}: diff {} vs reconstructed {expected}", row.diff_quanta),
        );
    }

    let mut summary = Clause::new("summary_consistency");
    if let (Some(last), Some(final_diff)) = (last, a.final_diff) {
        summary.check(last.diff_quanta == final_diff, || {
            format!("final diff {final_diff} vs last tick {}", last.diff_quanta)
        });
    }
    Ok(vec![clause.verdict(), ordering.verdict(), summary.verdict()])
}

/// Loads the run directory at `dir` and audits it, streaming `ticks.csv`
/// when present.
pub fn verify_run(dir: &Path) -> Result<Vec<Verdict>> {
    let artifacts = RunArtifacts::load_records(dir)?;
    let mut verdicts = audit_records(&artifacts);
    if dir.join(TICKS_FILE).exists() {
        verdicts.extend(audit_ticks(&artifacts, RunArtifacts::tick_rows(dir)?)?);
    }
    Ok(verdicts)
}

pub fn all_passed(verdicts: &[Verdict]) -> bool {
    verdicts.iter().all(|v| v.passed)
}
