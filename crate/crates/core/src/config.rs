//! Run configuration, read from TOML.
//!
//! ```toml
//! [instrument]
//! symbol = "SIM"
//! multiplier = "1"
//! tick_size = "0.01"
//!
//! [price]
//! kind = "reflecting_walk"      # or "mean_reverting_walk"
//! grid_min = 9000
//! grid_max = 11000
//! start_price = 10000
//! stay_probability = "1/2"
//!
//! [strategy]
//! kind = "bernoulli_trader"     # or "periodic_alternator"
//! order_probability = "1/50"
//! quantity = 1
//!
//! [dominance]
//! tau = 25
//! gamma = 25
//! delay_probability = "1/2"
//! queue_cap = 3
//! stage1_fill_count = 5
//! max_phase_ticks = 200000000
//!
//! [run]
//! target_phases = 20            # or total_ticks, exactly one
//! master_seed = 1
//! half_spread = 0
//! commission_per_unit = 0
//! output_dir = "run-output"
//! replications = 1
//! ```
//!
//! Every section may be omitted, in which case the defaults above apply.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use rust_decimal::Decimal;
use serde::{Deserialize, Deserializer, Serialize};

use crate::dominance::DominanceParams;
use crate::error::{Error, Result};
use crate::market::{Instrument, Money, Tick};
use crate::price::PriceProcessConfig;
use crate::strategy::BaselineConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstrumentSection {
    #[serde(default = "default_symbol")]
    pub symbol: String,
    #[serde(default = "one", deserialize_with = "decimal_any")]
    pub multiplier: Decimal,
    #[serde(default = "cent", deserialize_with = "decimal_any")]
    pub tick_size: Decimal,
    /// Defaults to the price grid widened by the half spread.
    #[serde(default)]
    pub grid_min: Option<Tick>,
    #[serde(default)]
    pub grid_max: Option<Tick>,
}

fn default_symbol() -> String {
    "SIM".to_string()
}

fn one() -> Decimal {
    Decimal::ONE
}

fn cent() -> Decimal {
    Decimal::new(1, 2)
}

fn decimal_any<'de, D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Decimal, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(i64),
        Float(f64),
        Text(String),
    }
    let text = match Raw::deserialize(deserializer)? {
        Raw::Int(n) => return Ok(Decimal::from(n)),
        Raw::Float(x) => x.to_string(),
        Raw::Text(s) => s,
    };
    Decimal::from_str(text.trim()).map_err(serde::de::Error::custom)
}

impl Default for InstrumentSection {
    fn default() -> Self {
        InstrumentSection {
            symbol: default_symbol(),
            multiplier: one(),
            tick_size: cent(),
            grid_min: None,
            grid_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub total_ticks: Option<u64>,
    #[serde(default)]
    pub target_phases: Option<u64>,
    #[serde(default)]
    pub master_seed: u64,
    /// Buys fill at mid + half_spread, sells at mid - half_spread (ticks).
    #[serde(default)]
    pub half_spread: i64,
    /// Commission per unit of quantity, in quanta.
    #[serde(default)]
    pub commission_per_unit: i64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_replications")]
    pub replications: u64,
    /// Control run: the delay coin never fires, so both strategies coincide.
    #[serde(default)]
    pub force_no_delay: bool,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("run-output")
}

fn default_replications() -> u64 {
    1
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            total_ticks: None,
            target_phases: Some(20),
            master_seed: 1,
            half_spread: 0,
            commission_per_unit: 0,
            output_dir: default_output_dir(),
            replications: 1,
            force_no_delay: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopRule {
    Ticks(u64),
    Phases(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub instrument: InstrumentSection,
    #[serde(default)]
    pub price: PriceProcessConfig,
    #[serde(default)]
    pub strategy: BaselineConfig,
    #[serde(default)]
    pub dominance: DominanceParams,
    #[serde(default)]
    pub run: RunSection,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn stop_rule(&self) -> Result<StopRule> {
        match (self.run.total_ticks, self.run.target_phases) {
            (Some(t), None) => Ok(StopRule::Ticks(t)),
            (None, Some(p)) => Ok(StopRule::Phases(p)),
            _ => Err(Error::config(
                "exactly one of run.total_ticks and run.target_phases must be set",
            )),
        }
    }

    pub fn commission_per_unit(&self) -> Money {
        Money(self.run.commission_per_unit as i128)
    }

    pub fn instrument(&self) -> Result<Instrument> {
        let sigma = self.run.half_spread;
        let grid_min = self.instrument.grid_min.unwrap_or(self.price.grid_min - sigma);
        let grid_max = self.instrument.grid_max.unwrap_or(self.price.grid_max + sigma);
        Instrument::new(
            self.instrument.symbol.clone(),
            self.instrument.multiplier,
            self.instrument.tick_size,
            grid_min,
            grid_max,
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.stop_rule()?;
        if self.run.replications < 1 {
            return Err(Error::config("run.replications must be at least 1"));
        }
        if self.run.half_spread < 0 {
            return Err(Error::config("run.half_spread must be non-negative"));
        }
        if self.run.commission_per_unit < 0 {
            return Err(Error::config("run.commission_per_unit must be non-negative"));
        }
        self.price.validate()?;
        self.strategy.validate()?;
        self.dominance.validate(self.price.grid_min, self.price.grid_max)?;
        let instrument = self.instrument()?;
        let sigma = self.run.half_spread;
        if !instrument.contains(self.price.grid_min - sigma) || !instrument.contains(self.price.grid_max + sigma) {
            return Err(Error::config(format!(
                "instrument grid [{}, {}] must contain every fill price in [{}, {}]",
                instrument.grid_min,
                instrument.grid_max,
                self.price.grid_min - sigma,
                self.price.grid_max + sigma
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::price::ProcessKind;
    use crate::rng::Ratio;
    use crate::strategy::BaselineKind;

    #[test]
    fn default_profile() {
        let c = RunConfig::from_toml_str("").unwrap();
        assert_eq!(c.instrument.tick_size, Decimal::new(1, 2));
        assert_eq!((c.price.grid_min, c.price.grid_max, c.price.start_price), (9_000, 11_000, 10_000));
        assert_eq!(c.price.kind, ProcessKind::ReflectingWalk);
        assert_eq!(c.price.stay_probability, Ratio::new(1, 2).unwrap());
        assert_eq!((c.dominance.tau, c.dominance.gamma), (25, 25));
        assert_eq!(c.dominance.delay_probability, Ratio::new(1, 2).unwrap());
        assert_eq!(c.dominance.queue_cap, 3);
        assert_eq!(c.dominance.stage1_fill_count, 5);
        assert_eq!(c.strategy.kind, BaselineKind::BernoulliTrader);
        assert_eq!(c.strategy.order_probability, Ratio::new(1, 50).unwrap());
        assert_eq!(c.strategy.quantity, 1);
        assert_eq!(c.stop_rule().unwrap(), StopRule::Phases(20));
        assert_eq!(c.instrument().unwrap().price_to_currency(9_000).unwrap(), Decimal::new(9000, 2));
    }

    #[test]
    fn sections_parse() {
        let c = RunConfig::from_toml_str(
            r#"
            [instrument]
            symbol = "ES"
            multiplier = 50
            tick_size = 0.25
            [strategy]
            kind = "periodic_alternator"
            period = 7
            [run]
            total_ticks = 1000
            master_seed = 9
            half_spread = 2
            "#,
        )
        .unwrap();
        assert_eq!(c.instrument.multiplier, Decimal::from(50));
        assert_eq!(c.instrument.tick_size, Decimal::new(25, 2));
        assert_eq!(c.strategy.period, 7);
        assert_eq!(c.stop_rule().unwrap(), StopRule::Ticks(1000));
        assert_eq!(c.instrument().unwrap().grid_max, 11_002);
    }

    #[test]
    fn stop_rule_must_be_unique() {
        let err = RunConfig::from_toml_str("[run]\ntotal_ticks = 5\ntarget_phases = 2\n");
        assert!(err.is_err());
        assert!(RunConfig::from_toml_str("[run]\nmaster_seed = 5\n").is_err());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::from_toml_str("[dominance]\ntau = 600\ngamma = 500\ndelay_probability = 1\nqueue_cap = 1\nstage1_fill_count = 1\nmax_phase_ticks = 5\n").is_err());
        assert!(RunConfig::from_toml_str("[run]\ntarget_phases = 1\nreplications = 0\n").is_err());
        assert!(RunConfig::from_toml_str("[price]\nkind = \"reflecting_walk\"\ngrid_min = 0\ngrid_max = 10\nstart_price = 50\nstay_probability = 0\n").is_err());
        assert!(RunConfig::from_toml_str("[bogus]\nx = 1\n").is_err());
        assert!(RunConfig::from_toml_str("[instrument]\ngrid_min = 9500\n").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
    }
}
