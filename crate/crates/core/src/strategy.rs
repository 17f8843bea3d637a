//! Baseline strategies that trade on market data only.
//!
//! A baseline sees the price path, the clock and its own random stream. It is
//! never handed any fill history, which is what makes it blind to its own
//! trading record.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{Side, Tick};
use crate::rng::{Bernoulli, Ratio};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OrderIntent {
    pub side: Side,
    pub quantity: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    BernoulliTrader,
    PeriodicAlternator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub kind: BaselineKind,
    pub order_probability: Ratio,
    pub period: u64,
    pub quantity: u64,
}

fn default_order_probability() -> Ratio {
    Ratio::new(1, 50).unwrap()
}

fn default_period() -> u64 {
    50
}

fn default_quantity() -> u64 {
    1
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            kind: BaselineKind::BernoulliTrader,
            order_probability: default_order_probability(),
            period: default_period(),
            quantity: default_quantity(),
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.quantity == 0 {
            return Err(Error::config("strategy.quantity must be at least 1"));
        }
        match self.kind {
            BaselineKind::BernoulliTrader => {
                if self.order_probability.is_zero() || !self.order_probability.le_one() {
                    return Err(Error::config("strategy.order_probability must be in (0, 1]"));
                }
            }
            BaselineKind::PeriodicAlternator => {
                if self.period == 0 {
                    return Err(Error::config("strategy.period must be positive"));
                }
            }
        }
        Ok(())
    }
}

/// Decides whether the baseline places an order at `time`.
///
/// The bernoulli trader draws the side on every tick, fired or not, so its
/// stream position depends on the clock alone.
pub fn baseline_on_tick<R: RngCore>(
    config: &BaselineConfig,
    _price: Tick,
    time: u64,
    rng: &mut R,
) -> Option<OrderIntent> {
    match config.kind {
        BaselineKind::BernoulliTrader => {
            let fire = Bernoulli::from_ratio(config.order_probability).draw(rng);
            let sell = rng.next_u64() & 1 == 1;
            fire.then_some(OrderIntent {
                side: if sell { Side::Sell } else { Side::Buy },
                quantity: config.quantity,
            })
        }
        BaselineKind::PeriodicAlternator => {
            if time == 0 || !time.is_multiple_of(config.period) {
                return None;
            }
            let k = time / config.period;
            Some(OrderIntent {
                side: if k % 2 == 1 { Side::Buy } else { Side::Sell },
                quantity: config.quantity,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, BASELINE_STREAM};

    #[test]
    fn alternator_alternates() {
        let cfg = BaselineConfig {
            kind: BaselineKind::PeriodicAlternator,
            period: 10,
            ..BaselineConfig::default()
        };
        let mut rng = substream(0, BASELINE_STREAM);
        assert_eq!(baseline_on_tick(&cfg, 0, 10, &mut rng).unwrap().side, Side::Buy);
        assert_eq!(baseline_on_tick(&cfg, 0, 20, &mut rng).unwrap().side, Side::Sell);
        assert_eq!(baseline_on_tick(&cfg, 0, 15, &mut rng), None);
        assert_eq!(baseline_on_tick(&cfg, 0, 0, &mut rng), None);
    }

    #[test]
    fn certain_trader_fires_every_tick() {
        let cfg = BaselineConfig {
            order_probability: Ratio::ONE,
            ..BaselineConfig::default()
        };
        let mut rng = substream(1, BASELINE_STREAM);
        assert!((1..1000).all(|t| baseline_on_tick(&cfg, 0, t, &mut rng).is_some()));
    }

    #[test]
    fn intent_rate_matches_probability() {
        let cfg = BaselineConfig::default();
        let mut rng = substream(2, BASELINE_STREAM);
        let n = 1_000_000u64;
        let mut hits = 0u64;
        let mut sells = 0u64;
        for t in 1..=n {
            if let Some(intent) = baseline_on_tick(&cfg, 0, t, &mut rng) {
                hits += 1;
                sells += (intent.side == Side::Sell) as u64;
            }
        }
        let p = cfg.order_probability.to_f64();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - p).abs() < 4.0 * se);
        let se_side = (0.25 / hits as f64).sqrt();
        assert!((sells as f64 / hits as f64 - 0.5).abs() < 4.0 * se_side);
    }

    #[test]
    fn validation() {
        assert!(BaselineConfig::default().validate().is_ok());
        let bad = BaselineConfig { quantity: 0, ..BaselineConfig::default() };
        assert!(bad.validate().is_err());
        let bad = BaselineConfig { order_probability: Ratio::ZERO, ..BaselineConfig::default() };
        assert!(bad.validate().is_err());
        let bad = BaselineConfig {
            kind: BaselineKind::PeriodicAlternator,
            period: 0,
            ..BaselineConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
