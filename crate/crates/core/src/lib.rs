//! Deterministic tick-grid simulation of a baseline strategy and a
//! delayed-execution variant that uses its own trading history, with exact
//! integer bookkeeping and machine-checked dominance verdicts.
//!
//! Prices are integer ticks and money is integer quanta (one tick on one unit),
//! so every comparison the verdicts rely on is exact.

pub mod artifacts;
pub mod audit;
pub mod cloud;
pub mod config;
pub mod dominance;
pub mod error;
pub mod market;
pub mod pnl;
pub mod price;
pub mod rng;
pub mod sim;
pub mod strategy;
pub mod sweep;

pub use audit::{audit, verify_run, Verdict};
pub use cloud::{cloud_update, gravity_center, CloudStats, RationalPrice};
pub use config::{RunConfig, StopRule};
pub use dominance::{
    delay_eligible, execution_ready, minmax, DelayedOrderRecord, DominanceEngine, DominanceParams,
    PhaseReport,
};
pub use error::{Error, Result};
pub use market::{side_sign, Instrument, Money, Order, Side, Tick};
pub use pnl::{match_lots, pnl_decomposed, pnl_direct, pnl_via_position, MatchMethod};
pub use price::{estimate_hitting_time, next_price, PricePathState, PriceProcessConfig};
pub use sim::{run_simulation, RunOptions, RunReport, RunSummary};
pub use strategy::{baseline_on_tick, BaselineConfig, OrderIntent};
