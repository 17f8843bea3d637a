//! The delayed-execution strategy.
//!
//! The engine runs next to a baseline strategy and receives each of the
//! baseline's fills. Time is split into phases. A phase opens with a mirror
//! stage, which copies the baseline's fills one for one until
//! `stage1_fill_count` fills have been mirrored. The delay stage follows. Each
//! incoming order gets one Bernoulli draw. When the draw succeeds and the price
//! sits more than `tau` ticks on the adverse side of the engine's own gravity
//! center, the order is parked in a bounded queue instead of filled. A parked
//! order is released once the price clears the gain threshold: `gamma` ticks
//! past the less favourable of the current gravity center and the one frozen at
//! delay time. The phase closes when the queue drains after at least one delay.
//!
//! Between them the two conditions guarantee `sign * (p_exec - p_delay) >
//! tau + gamma` for every delayed order. Every other fill is shared with the
//! baseline, so at each phase end the PnL difference is exactly the sum of
//! those gaps times quantity.
//!
//! Decisions use the mid price of each tick and a gravity center built from
//! mid prices. Fills carry the half spread, which cancels from every gap. This
//! keeps the engine's decisions identical under any constant spread.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::cloud::{CloudStats, RationalPrice};
use crate::error::{Error, Result};
use crate::market::{Money, Order, Side, Tick};
use crate::pnl::pnl_direct;
use crate::rng::{Bernoulli, Ratio, StreamRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DominanceParams {
    /// Tolerance, in ticks.
    pub tau: i64,
    /// Gain, in ticks.
    pub gamma: i64,
    pub delay_probability: Ratio,
    pub queue_cap: usize,
    /// Minimum spacing between a candidate and every queued order, in ticks.
    /// Disabled when absent.
    pub min_distance: Option<i64>,
    pub stage1_fill_count: u64,
    pub max_phase_ticks: u64,
}

impl Default for DominanceParams {
    fn default() -> Self {
        DominanceParams {
            tau: 25,
            gamma: 25,
            delay_probability: Ratio::new(1, 2).unwrap(),
            queue_cap: 3,
            min_distance: None,
            stage1_fill_count: 5,
            max_phase_ticks: 200_000_000,
        }
    }
}

impl DominanceParams {
    /// Checks ranges and that `tau + gamma` is below half the grid width.
    pub fn validate(&self, grid_min: Tick, grid_max: Tick) -> Result<()> {
        if self.tau < 1 {
            return Err(Error::config("dominance.tau must be at least 1 tick"));
        }
        if self.gamma < 1 {
            return Err(Error::config("dominance.gamma must be at least 1 tick"));
        }
        if self.delay_probability.is_zero() || !self.delay_probability.le_one() {
            return Err(Error::config("dominance.delay_probability must be in (0, 1]"));
        }
        if self.queue_cap < 1 {
            return Err(Error::config("dominance.queue_cap must be at least 1"));
        }
        if self.min_distance.is_some_and(|d| d < 0) {
            return Err(Error::config("dominance.min_distance must be non-negative"));
        }
        if self.stage1_fill_count < 1 {
            return Err(Error::config("dominance.stage1_fill_count must be at least 1"));
        }
        if self.max_phase_ticks < 1 {
            return Err(Error::config("dominance.max_phase_ticks must be positive"));
        }
        if 2 * (self.tau + self.gamma) >= grid_max - grid_min {
            return Err(Error::config(format!(
                "tau + gamma = {} must be strictly less than half the grid width {}",
                self.tau + self.gamma,
                grid_max - grid_min
            )));
        }
        Ok(())
    }
}

/// `(x + y) / 2 + sign * |x - y| / 2`: the max of `x`, `y` for a sell, the
/// min for a buy.
pub fn minmax(sign: i64, x: RationalPrice, y: RationalPrice) -> RationalPrice {
    // picking by exact comparison gives the same value without the arithmetic
    if (x >= y) == (sign > 0) {
        x
    } else {
        y
    }
}

/// Signed distance from the price to the tolerance threshold `C - s*tau`.
pub fn delta_tolerance(price: Tick, gravity: RationalPrice, sign: i64, tau: i64) -> RationalPrice {
    let threshold = gravity - RationalPrice::from_tick(sign * tau);
    (RationalPrice::from_tick(price) - threshold).scale(sign as i128)
}

/// Signed distance from the price to the gain threshold
/// `minmax(C_now, C_delay) + s*gamma`.
pub fn delta_gain(
    price: Tick,
    gravity_now: RationalPrice,
    gravity_at_delay: RationalPrice,
    sign: i64,
    gamma: i64,
) -> RationalPrice {
    let threshold =
        minmax(sign, gravity_now, gravity_at_delay) + RationalPrice::from_tick(sign * gamma);
    (RationalPrice::from_tick(price) - threshold).scale(sign as i128)
}

/// `s * (C - P) > tau`. Never true while the gravity center is undefined.
pub fn delay_eligible(price: Tick, gravity: Option<RationalPrice>, sign: i64, tau: i64) -> bool {
    let Some(c) = gravity else { return false };
    (c - RationalPrice::from_tick(price))
        .scale(sign as i128)
        .cmp_tick(tau)
        .is_gt()
}

/// `s * (P - minmax_s(C_now, C_delay)) > gamma`.
pub fn execution_ready(
    price: Tick,
    gravity_now: RationalPrice,
    gravity_at_delay: RationalPrice,
    sign: i64,
    gamma: i64,
) -> bool {
    (RationalPrice::from_tick(price) - minmax(sign, gravity_now, gravity_at_delay))
        .scale(sign as i128)
        .cmp_tick(gamma)
        .is_gt()
}

/// Most favourable integer price at which [`execution_ready`] first holds:
/// the smallest such price for a sell, the largest for a buy.
fn execution_trigger(now: RationalPrice, at_delay: RationalPrice, sign: i64, gamma: i64) -> Tick {
    let level = minmax(sign, now, at_delay) + RationalPrice::from_tick(sign * gamma);
    if sign > 0 {
        level.floor() + 1
    } else {
        level.ceil() - 1
    }
}

/// Source of the per-order delay coin.
pub trait DelayDraw: Send {
    fn draw(&mut self) -> bool;
}

pub struct BernoulliDelay {
    coin: Bernoulli,
    rng: StreamRng,
}

impl BernoulliDelay {
    pub fn new(probability: Ratio, rng: StreamRng) -> Self {
        BernoulliDelay {
            coin: Bernoulli::from_ratio(probability),
            rng,
        }
    }
}

impl DelayDraw for BernoulliDelay {
    fn draw(&mut self) -> bool {
        self.coin.draw(&mut self.rng)
    }
}

/// Coin that always lands on zero; the engine then behaves exactly like the
/// baseline.
#[derive(Debug, Default, Clone, Copy)]
pub struct NeverDelay;

impl DelayDraw for NeverDelay {
    fn draw(&mut self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Mirror,
    Delay,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayQueueEntry {
    pub order_id: u64,
    pub side: Side,
    pub quantity: u64,
    pub delay_time: u64,
    /// Price at which the baseline filled.
    pub base_fill_price: Tick,
    /// Mid price at delay time.
    pub reference_price: Tick,
    pub gravity_at_delay: RationalPrice,
}

impl DelayQueueEntry {
    pub fn sign(&self) -> i64 {
        self.side.sign()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayedOrderRecord {
    pub phase: u64,
    pub order_id: u64,
    pub side: Side,
    pub quantity: u64,
    pub delay_time: u64,
    pub base_fill_price: Tick,
    pub execution_time: u64,
    pub execution_price: Tick,
    pub delta_t_at_delay: RationalPrice,
    pub delta_g_at_execution: RationalPrice,
}

impl DelayedOrderRecord {
    pub fn sign(&self) -> i64 {
        self.side.sign()
    }

    /// `sign * (p_exec - p_delay)`, in ticks.
    pub fn gap_ticks(&self) -> i64 {
        self.sign() * (self.execution_price - self.base_fill_price)
    }

    /// `sign * (p_exec - p_delay) * quantity`, in quanta.
    pub fn gain(&self) -> Money {
        Money(self.gap_ticks() as i128 * self.quantity as i128)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub phase_index: u64,
    pub end_time: u64,
    /// Total quantity delayed since the start of the run.
    pub delayed_quantity: u64,
    pub pnl_diff: Money,
    pub lower_bound: Money,
    /// Orders delayed and executed within this phase.
    pub records: Vec<DelayedOrderRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FillAction {
    /// Filled exactly like the baseline.
    Mirror,
    /// Parked in the delay queue.
    Enqueue,
    /// The delay event held but the order was filled anyway because the
    /// spacing filter or the in-grid gain level check rejected it.
    ForcedFill,
}

#[derive(Debug, Clone, Default)]
pub struct TickOutcome {
    /// Delayed orders executed at this tick, with the engine's fills.
    pub executed: Vec<(DelayedOrderRecord, Order)>,
    /// Set when this tick closed a phase.
    pub phase_closed: Option<ClosedPhase>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosedPhase {
    pub phase_index: u64,
    pub end_time: u64,
    pub records: Vec<DelayedOrderRecord>,
}

/// State of the delayed-execution strategy.
pub struct DominanceEngine {
    params: DominanceParams,
    half_spread: i64,
    grid_min: Tick,
    grid_max: Tick,
    delay: Box<dyn DelayDraw>,
    cloud: CloudStats,
    gravity: Option<RationalPrice>,
    queue: VecDeque<DelayQueueEntry>,
    // per queued entry, the first mid price that satisfies the execution event
    // under the current gravity center; recomputed whenever the cloud moves
    triggers: VecDeque<Tick>,
    stage: Stage,
    phase_index: u64,
    phase_start: u64,
    phase_mirrored: u64,
    phase_delays: u64,
    phase_records: Vec<DelayedOrderRecord>,
    delayed_quantity: u64,
    delayed_gain: Money,
}

impl DominanceEngine {
    pub fn new(
        params: DominanceParams,
        half_spread: i64,
        grid_min: Tick,
        grid_max: Tick,
        delay: Box<dyn DelayDraw>,
    ) -> Result<Self> {
        params.validate(grid_min, grid_max)?;
        if half_spread < 0 {
            return Err(Error::config("half spread must be non-negative"));
        }
        Ok(DominanceEngine {
            params,
            half_spread,
            grid_min,
            grid_max,
            delay,
            cloud: CloudStats::new(),
            gravity: None,
            queue: VecDeque::new(),
            triggers: VecDeque::new(),
            stage: Stage::Mirror,
            phase_index: 0,
            phase_start: 0,
            phase_mirrored: 0,
            phase_delays: 0,
            phase_records: Vec::new(),
            delayed_quantity: 0,
            delayed_gain: Money::ZERO,
        })
    }

    pub fn params(&self) -> &DominanceParams {
        &self.params
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn phase_index(&self) -> u64 {
        self.phase_index
    }

    pub fn queue(&self) -> &VecDeque<DelayQueueEntry> {
        &self.queue
    }

    pub fn cloud(&self) -> &CloudStats {
        &self.cloud
    }

    pub fn gravity_center(&self) -> Option<RationalPrice> {
        self.gravity
    }

    /// Total quantity delayed so far, queued or executed.
    pub fn delayed_quantity(&self) -> u64 {
        self.delayed_quantity
    }

    /// Sum of `sign * (p_exec - p_delay) * q` over executed delayed orders.
    pub fn delayed_gain(&self) -> Money {
        self.delayed_gain
    }

    fn fill_price(&self, side: Side, mid: Tick) -> Tick {
        mid - side.sign() * self.half_spread
    }

    fn absorb(&mut self, side: Side, quantity: u64, time: u64, mid: Tick, id: u64) {
        let reference = Order {
            id,
            time,
            side,
            price: mid,
            quantity,
        };
        self.cloud = self.cloud.update(&reference);
        self.gravity = self.cloud.gravity_center();
        if let Some(now) = self.gravity {
            let gamma = self.params.gamma;
            for (entry, trigger) in self.queue.iter().zip(self.triggers.iter_mut()) {
                *trigger = execution_trigger(now, entry.gravity_at_delay, entry.sign(), gamma);
            }
        }
    }

    fn gain_level_in_grid(&self, gravity: RationalPrice, sign: i64) -> bool {
        let level = gravity + RationalPrice::from_tick(sign * self.params.gamma);
        if sign > 0 {
            level.cmp_tick(self.grid_max).is_lt()
        } else {
            level.cmp_tick(self.grid_min).is_gt()
        }
    }

    fn spacing_ok(&self, sign: i64, candidate: Tick) -> bool {
        match self.params.min_distance {
            None => true,
            Some(d) => self
                .queue
                .iter()
                .all(|e| sign * (e.reference_price - candidate) > d),
        }
    }

    /// Handles one fill of the baseline. `base` carries the baseline's fill
    /// price; `mid` is the tick's mid price. Mirrored fills are returned as the
    /// engine's own order.
    pub fn on_base_fill(&mut self, base: &Order, mid: Tick) -> (FillAction, Option<Order>) {
        let sign = base.sign();
        let action = match self.stage {
            Stage::Mirror => FillAction::Mirror,
            Stage::Delay => {
                let coin = self.delay.draw();
                let gravity = self.gravity;
                if self.queue.len() >= self.params.queue_cap {
                    FillAction::Mirror
                } else if coin && delay_eligible(mid, gravity, sign, self.params.tau) {
                    let gravity = gravity.expect("eligible implies defined");
                    if self.spacing_ok(sign, mid) && self.gain_level_in_grid(gravity, sign) {
                        self.triggers
                            .push_back(execution_trigger(gravity, gravity, sign, self.params.gamma));
                        self.queue.push_back(DelayQueueEntry {
                            order_id: base.id,
                            side: base.side,
                            quantity: base.quantity,
                            delay_time: base.time,
                            base_fill_price: base.price,
                            reference_price: mid,
                            gravity_at_delay: gravity,
                        });
                        self.phase_delays += 1;
                        self.delayed_quantity += base.quantity;
                        FillAction::Enqueue
                    } else {
                        FillAction::ForcedFill
                    }
                } else {
                    FillAction::Mirror
                }
            }
        };

        if action == FillAction::Enqueue {
            return (action, None);
        }
        self.absorb(base.side, base.quantity, base.time, mid, base.id);
        if self.stage == Stage::Mirror {
            self.phase_mirrored += 1;
            if self.phase_mirrored >= self.params.stage1_fill_count {
                self.stage = Stage::Delay;
            }
        }
        (action, Some(*base))
    }

    /// Scans the queue at a new tick and closes the phase when it drains.
    pub fn on_tick(&mut self, time: u64, mid: Tick) -> Result<TickOutcome> {
        let mut outcome = TickOutcome::default();
        let mut i = 0;
        while i < self.queue.len() {
            let entry = &self.queue[i];
            let sign = entry.sign();
            if sign * (mid - self.triggers[i]) < 0 {
                i += 1;
                continue;
            }
            let now = self.gravity.expect("queued orders imply a defined gravity center");
            if !execution_ready(mid, now, entry.gravity_at_delay, sign, self.params.gamma) {
                return Err(Error::invariant(
                    "delta_signs",
                    format!("order {}: cached trigger disagrees with the exact check", entry.order_id),
                ));
            }
            let entry = self.queue.remove(i).expect("index in range");
            self.triggers.remove(i);
            let execution_price = self.fill_price(entry.side, mid);
            let record = DelayedOrderRecord {
                phase: self.phase_index,
                order_id: entry.order_id,
                side: entry.side,
                quantity: entry.quantity,
                delay_time: entry.delay_time,
                base_fill_price: entry.base_fill_price,
                execution_time: time,
                execution_price,
                delta_t_at_delay: delta_tolerance(
                    entry.reference_price,
                    entry.gravity_at_delay,
                    sign,
                    self.params.tau,
                ),
                delta_g_at_execution: delta_gain(
                    mid,
                    now,
                    entry.gravity_at_delay,
                    sign,
                    self.params.gamma,
                ),
            };
            let fill = Order {
                id: entry.order_id,
                time,
                side: entry.side,
                price: execution_price,
                quantity: entry.quantity,
            };
            self.absorb(entry.side, entry.quantity, time, mid, entry.order_id);
            self.delayed_gain += record.gain();
            self.phase_records.push(record.clone());
            outcome.executed.push((record, fill));
        }

        if self.phase_delays > 0 && self.queue.is_empty() {
            outcome.phase_closed = Some(ClosedPhase {
                phase_index: self.phase_index,
                end_time: time,
                records: std::mem::take(&mut self.phase_records),
            });
            self.phase_index += 1;
            self.phase_start = time;
            self.phase_mirrored = 0;
            self.phase_delays = 0;
            self.stage = Stage::Mirror;
        } else if !self.queue.is_empty() && time - self.phase_start > self.params.max_phase_ticks {
            let entries = self
                .queue
                .iter()
                .map(|e| {
                    format!(
                        "order {} ({} x{} delayed at t={} mid {}, gravity {})",
                        e.order_id, e.side, e.quantity, e.delay_time, e.reference_price, e.gravity_at_delay
                    )
                })
                .collect::<Vec<_>>()
                .join("; ");
            return Err(Error::StrandedOrders {
                phase: self.phase_index,
                limit: self.params.max_phase_ticks,
                entries,
            });
        }
        Ok(outcome)
    }
}

/// Checks the phase-end proof obligations against full fill histories.
///
/// `previous_diff` is the diff at the previous phase end (zero before the
/// first). `delayed` holds every executed delayed order up to this phase end.
#[allow(clippy::too_many_arguments)]
pub fn phase_pnl_diff_check(
    report: &PhaseReport,
    base_orders: &[Order],
    dominant_orders: &[Order],
    base_commissions: Money,
    dominant_commissions: Money,
    price: Tick,
    delayed: &[DelayedOrderRecord],
    params: &DominanceParams,
    previous_diff: Money,
) -> Result<()> {
    let fail = |clause: &'static str, detail: String| Error::Invariant {
        clause,
        phase: Some(report.phase_index),
        order_id: None,
        detail,
    };

    let gross = pnl_direct(dominant_orders, price) - pnl_direct(base_orders, price);
    let net = gross - (dominant_commissions - base_commissions);
    let telescoped: Money = delayed.iter().map(DelayedOrderRecord::gain).sum();
    if gross != telescoped || net != telescoped || report.pnl_diff != telescoped {
        return Err(fail(
            "phase_identity",
            format!(
                "gross diff {gross}, net diff {net}, reported {}, delayed-order sum {telescoped}",
                report.pnl_diff
            ),
        ));
    }
    let pos = |orders: &[Order]| crate::pnl::signed_open_position(orders);
    if pos(base_orders) != pos(dominant_orders) {
        return Err(fail(
            "phase_positions_equal",
            format!("positions {} vs {}", pos(base_orders), pos(dominant_orders)),
        ));
    }
    let q_d: u64 = delayed.iter().map(|r| r.quantity).sum();
    let bound = Money(q_d as i128 * (params.tau + params.gamma) as i128);
    if q_d != report.delayed_quantity || bound != report.lower_bound {
        return Err(fail(
            "phase_lower_bound",
            format!(
                "reported Q_D {} / bound {} disagree with records ({q_d} / {bound})",
                report.delayed_quantity, report.lower_bound
            ),
        ));
    }
    if report.pnl_diff < bound {
        return Err(fail(
            "phase_lower_bound",
            format!("diff {} below bound {bound}", report.pnl_diff),
        ));
    }
    if q_d >= 1 && report.pnl_diff <= Money::ZERO {
        return Err(fail("phase_positive", format!("diff {} with Q_D {q_d}", report.pnl_diff)));
    }
    let delayed_here = !report.records.is_empty();
    if report.pnl_diff < previous_diff || (delayed_here && report.pnl_diff == previous_diff) {
        return Err(fail(
            "phase_monotone",
            format!("diff {} after previous {previous_diff}", report.pnl_diff),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(t: Tick) -> RationalPrice {
        RationalPrice::from_tick(t)
    }

    fn engine(params: DominanceParams, delay: Box<dyn DelayDraw>) -> DominanceEngine {
        DominanceEngine::new(params, 0, 9_000, 11_000, delay).unwrap()
    }

    struct AlwaysDelay;
    impl DelayDraw for AlwaysDelay {
        fn draw(&mut self) -> bool {
            true
        }
    }

    #[test]
    fn minmax_cases() {
        assert_eq!(minmax(1, r(2), r(7)), r(7));
        assert_eq!(minmax(-1, r(2), r(7)), r(2));
        for s in [1, -1] {
            assert_eq!(minmax(s, r(5), r(5)), r(5));
        }
        let a = RationalPrice::new(10_001, 3);
        let b = RationalPrice::new(20_001, 6);
        assert_eq!(minmax(1, a, b), a.max(b));
        assert_eq!(minmax(-1, a, b), a.min(b));
        // the closed form (x + y)/2 + s|x - y|/2
        for (x, y) in [(a, b), (b, a), (r(3), RationalPrice::new(7, 2))] {
            let half_gap = if x >= y { x - y } else { y - x }.halve();
            for s in [1, -1] {
                assert_eq!(minmax(s, x, y), (x + y).halve() + half_gap.scale(s as i128));
            }
        }
    }

    #[test]
    fn delay_eligibility() {
        assert!(!delay_eligible(9_925, None, 1, 50));
        assert!(delay_eligible(9_925, Some(r(10_000)), 1, 50));
        assert!(!delay_eligible(10_025, Some(r(10_000)), -1, 50));
        // strict at the boundary
        assert!(!delay_eligible(9_950, Some(r(10_000)), 1, 50));
        // equivalent to a negative tolerance distance
        for p in 9_900..10_100 {
            for s in [1, -1] {
                let c = RationalPrice::new(30_001, 3);
                assert_eq!(
                    delay_eligible(p, Some(c), s, 50),
                    delta_tolerance(p, c, s, 50).is_negative()
                );
            }
        }
    }

    #[test]
    fn trigger_matches_exact_readiness() {
        let gravities = [r(10_003), RationalPrice::new(29_999, 3), RationalPrice::new(60_001, 6)];
        for &now in &gravities {
            for &then in &gravities {
                for s in [1, -1] {
                    let trigger = execution_trigger(now, then, s, 40);
                    for p in 9_900..10_100 {
                        assert_eq!(s * (p - trigger) >= 0, execution_ready(p, now, then, s, 40));
                    }
                }
            }
        }
    }

    #[test]
    fn execution_readiness() {
        assert!(execution_ready(10_050, r(9_960), r(10_000), 1, 40));
        assert!(!execution_ready(10_040, r(9_960), r(10_000), 1, 40));
        assert!(execution_ready(9_950, r(10_000), r(10_000), -1, 40));
        for p in 9_900..10_100 {
            for s in [1, -1] {
                let (a, b) = (RationalPrice::new(29_999, 3), r(10_003));
                assert_eq!(
                    execution_ready(p, a, b, s, 40),
                    delta_gain(p, a, b, s, 40).is_positive()
                );
            }
        }
    }

    fn base(id: u64, time: u64, side: Side, price: Tick) -> Order {
        Order::new(id, time, side, price, 2).unwrap()
    }

    fn tau_gamma(tau: i64, gamma: i64) -> DominanceParams {
        DominanceParams {
            tau,
            gamma,
            stage1_fill_count: 1,
            ..DominanceParams::default()
        }
    }

    #[test]
    fn stage_one_mirrors() {
        let mut e = engine(DominanceParams::default(), Box::new(AlwaysDelay));
        for i in 1..=5 {
            let (action, fill) = e.on_base_fill(&base(i, i, Side::Sell, 9_000 + i as i64), 10_000);
            assert_eq!(action, FillAction::Mirror);
            assert!(fill.is_some());
            assert!(e.queue().is_empty());
        }
        assert_eq!(e.stage(), Stage::Delay);
    }

    #[test]
    fn delay_then_execute_composes_the_examples() {
        let mut e = engine(tau_gamma(50, 40), Box::new(AlwaysDelay));
        e.on_base_fill(&base(1, 1, Side::Buy, 10_000), 10_000);
        assert_eq!(e.gravity_center(), Some(r(10_000)));
        let (action, fill) = e.on_base_fill(&base(2, 2, Side::Sell, 9_925), 9_925);
        assert_eq!(action, FillAction::Enqueue);
        assert!(fill.is_none());
        assert!(e.on_tick(2, 9_925).unwrap().executed.is_empty());
        assert!(e.on_tick(3, 10_040).unwrap().executed.is_empty());
        let out = e.on_tick(4, 10_050).unwrap();
        assert_eq!(out.executed.len(), 1);
        let rec = &out.executed[0].0;
        assert_eq!(rec.gap_ticks(), 125);
        assert!(rec.gap_ticks() > 90);
        assert_eq!(rec.gain(), Money(250));
        assert!(rec.delta_t_at_delay.is_negative());
        assert!(rec.delta_g_at_execution.is_positive());
        let closed = out.phase_closed.unwrap();
        assert_eq!(closed.phase_index, 0);
        assert_eq!(e.phase_index(), 1);
        assert_eq!(e.stage(), Stage::Mirror);
    }

    #[test]
    fn full_queue_mirrors() {
        let params = DominanceParams {
            queue_cap: 1,
            ..tau_gamma(50, 40)
        };
        let mut e = engine(params, Box::new(AlwaysDelay));
        e.on_base_fill(&base(1, 1, Side::Buy, 10_000), 10_000);
        assert_eq!(e.on_base_fill(&base(2, 2, Side::Sell, 9_925), 9_925).0, FillAction::Enqueue);
        assert_eq!(e.on_base_fill(&base(3, 3, Side::Sell, 9_900), 9_900).0, FillAction::Mirror);
        assert_eq!(e.queue().len(), 1);
    }

    #[test]
    fn never_delay_always_mirrors() {
        let mut e = engine(tau_gamma(50, 40), Box::new(NeverDelay));
        e.on_base_fill(&base(1, 1, Side::Buy, 10_000), 10_000);
        let (action, _) = e.on_base_fill(&base(2, 2, Side::Sell, 9_925), 9_925);
        assert_eq!(action, FillAction::Mirror);
    }

    #[test]
    fn spacing_filter_forces_fill() {
        let params = DominanceParams {
            min_distance: Some(10),
            ..tau_gamma(50, 40)
        };
        let mut e = engine(params, Box::new(AlwaysDelay));
        e.on_base_fill(&base(1, 1, Side::Buy, 10_000), 10_000);
        assert_eq!(e.on_base_fill(&base(2, 2, Side::Sell, 9_925), 9_925).0, FillAction::Enqueue);
        // 9925 - 9920 = 5, not more than 10
        assert_eq!(e.on_base_fill(&base(3, 3, Side::Sell, 9_920), 9_920).0, FillAction::ForcedFill);
        assert_eq!(e.on_base_fill(&base(4, 4, Side::Sell, 9_900), 9_900).0, FillAction::Enqueue);
    }

    #[test]
    fn unreachable_gain_level_forces_fill() {
        let mut e = DominanceEngine::new(tau_gamma(5, 5), 0, 0, 100, Box::new(AlwaysDelay)).unwrap();
        e.on_base_fill(&base(1, 1, Side::Buy, 97), 97);
        // sell at 90 is 7 below C = 97, but C + gamma = 102 is off the grid
        assert_eq!(e.on_base_fill(&base(2, 2, Side::Sell, 90), 90).0, FillAction::ForcedFill);
    }

    #[test]
    fn stranded_orders_abort() {
        let params = DominanceParams {
            max_phase_ticks: 10,
            ..tau_gamma(50, 40)
        };
        let mut e = engine(params, Box::new(AlwaysDelay));
        e.on_base_fill(&base(1, 1, Side::Buy, 10_000), 10_000);
        e.on_base_fill(&base(2, 2, Side::Sell, 9_925), 9_925);
        assert!(e.on_tick(5, 9_925).is_ok());
        match e.on_tick(11, 9_925) {
            Err(Error::StrandedOrders { entries, .. }) => assert!(entries.contains("order 2")),
            other => panic!("expected stranded error, got {other:?}"),
        }
    }

    #[test]
    fn empty_queue_tick_is_quiet() {
        let mut e = engine(DominanceParams::default(), Box::new(AlwaysDelay));
        let out = e.on_tick(1, 10_000).unwrap();
        assert!(out.executed.is_empty() && out.phase_closed.is_none());
    }

    #[test]
    fn params_validation() {
        assert!(DominanceParams::default().validate(9_000, 11_000).is_ok());
        let wide = DominanceParams { tau: 500, gamma: 500, ..DominanceParams::default() };
        assert!(wide.validate(9_000, 11_000).is_err());
        let zero = DominanceParams { tau: 0, ..DominanceParams::default() };
        assert!(zero.validate(9_000, 11_000).is_err());
        let p0 = DominanceParams { delay_probability: Ratio::ZERO, ..DominanceParams::default() };
        assert!(p0.validate(9_000, 11_000).is_err());
    }

    #[test]
    fn phase_check_on_single_delayed_sell() {
        let params = tau_gamma(50, 40);
        let mut e = engine(params.clone(), Box::new(AlwaysDelay));
        let b1 = base(1, 1, Side::Buy, 10_000);
        let b2 = base(2, 2, Side::Sell, 9_925);
        let mut dominant = vec![e.on_base_fill(&b1, 10_000).1.unwrap()];
        e.on_base_fill(&b2, 9_925);
        let out = e.on_tick(4, 10_050).unwrap();
        dominant.push(out.executed[0].1);
        let records: Vec<_> = out.executed.iter().map(|(r, _)| r.clone()).collect();
        let report = PhaseReport {
            phase_index: 0,
            end_time: 4,
            delayed_quantity: 2,
            pnl_diff: Money(250),
            lower_bound: Money(180),
            records: records.clone(),
        };
        let base_orders = [b1, b2];
        phase_pnl_diff_check(&report, &base_orders, &dominant, Money(0), Money(0), 10_050, &records, &params, Money::ZERO)
            .unwrap();
        // commissions on identical quantities cancel
        phase_pnl_diff_check(&report, &base_orders, &dominant, Money(1000), Money(1000), 10_050, &records, &params, Money::ZERO)
            .unwrap();

        let bad = PhaseReport { pnl_diff: Money(251), ..report.clone() };
        let err = phase_pnl_diff_check(&bad, &base_orders, &dominant, Money(0), Money(0), 10_050, &records, &params, Money::ZERO)
            .unwrap_err();
        assert!(matches!(err, Error::Invariant { clause: "phase_identity", .. }));
        let err = phase_pnl_diff_check(&report, &base_orders, &dominant, Money(0), Money(0), 10_050, &records, &params, Money(250))
            .unwrap_err();
        assert!(matches!(err, Error::Invariant { clause: "phase_monotone", .. }));
    }
}
