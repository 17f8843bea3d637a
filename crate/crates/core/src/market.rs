//! Instruments, tick-grid prices, orders and exact money.
//!
//! Every price handled by the engine is an integer tick index. Money is an
//! integer count of quanta, where one quantum is one tick of price movement on
//! one unit of quantity. Conversion to currency (`quanta * multiplier *
//! tick_size`) only happens when rendering reports.

use std::fmt;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer tick index on the price grid.
pub type Tick = i64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    /// PnL-contribution sign: `+1` for a sell, `-1` for a buy.
    pub fn sign(self) -> i64 {
        side_sign(self)
    }

    pub fn from_sign(sign: i64) -> Option<Side> {
        match sign {
            1 => Some(Side::Sell),
            -1 => Some(Side::Buy),
            _ => None,
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Buy => Side::Sell,
            Side::Sell => Side::Buy,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Buy => f.write_str("buy"),
            Side::Sell => f.write_str("sell"),
        }
    }
}

pub fn side_sign(side: Side) -> i64 {
    match side {
        Side::Sell => 1,
        Side::Buy => -1,
    }
}

/// Exact signed amount in quanta (one tick on one unit of quantity).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Money(pub i128);

impl Money {
    pub const ZERO: Money = Money(0);

    pub fn quanta(self) -> i128 {
        self.0
    }

    /// Currency value of this amount for `instrument`.
    pub fn to_currency(self, instrument: &Instrument) -> Decimal {
        Decimal::from_i128_with_scale(self.0, 0) * instrument.multiplier * instrument.tick_size
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
    }
}

impl SubAssign for Money {
    fn sub_assign(&mut self, rhs: Money) {
        self.0 -= rhs.0;
    }
}

impl Neg for Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money(-self.0)
    }
}

impl std::iter::Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, Add::add)
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A tradable instrument with a finite tick grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instrument {
    pub symbol: String,
    /// Currency per price point per unit of quantity.
    pub multiplier: Decimal,
    /// Currency per tick.
    pub tick_size: Decimal,
    pub grid_min: Tick,
    pub grid_max: Tick,
}

impl Instrument {
    pub fn new(
        symbol: impl Into<String>,
        multiplier: Decimal,
        tick_size: Decimal,
        grid_min: Tick,
        grid_max: Tick,
    ) -> Result<Self> {
        let instrument = Instrument {
            symbol: symbol.into(),
            multiplier,
            tick_size,
            grid_min,
            grid_max,
        };
        instrument.validate()?;
        Ok(instrument)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tick_size <= Decimal::ZERO {
            return Err(Error::config("instrument.tick_size must be positive"));
        }
        if self.multiplier <= Decimal::ZERO {
            return Err(Error::config("instrument.multiplier must be positive"));
        }
        if self.grid_min >= self.grid_max {
            return Err(Error::config("instrument.grid_min must be below grid_max"));
        }
        Ok(())
    }

    pub fn contains(&self, price: Tick) -> bool {
        (self.grid_min..=self.grid_max).contains(&price)
    }

    pub fn check_price(&self, price: Tick) -> Result<()> {
        if self.contains(price) {
            Ok(())
        } else {
            Err(Error::OffGrid {
                price,
                min: self.grid_min,
                max: self.grid_max,
            })
        }
    }

    pub fn price_to_currency(&self, price: Tick) -> Result<Decimal> {
        self.check_price(price)?;
        Ok(Decimal::from(price) * self.tick_size)
    }

    /// Inverse of [`Instrument::price_to_currency`]. Rejects amounts that are
    /// not an exact multiple of the tick size.
    pub fn currency_to_price(&self, amount: Decimal) -> Result<Tick> {
        let ticks = amount / self.tick_size;
        if ticks.fract() != Decimal::ZERO {
            return Err(Error::config(format!(
                "{amount} is not a multiple of tick size {}",
                self.tick_size
            )));
        }
        let price: Tick = ticks
            .trunc()
            .try_into()
            .map_err(|_| Error::config(format!("price {amount} does not fit a tick index")))?;
        self.check_price(price)?;
        Ok(price)
    }
}

/// One fill: `(id, time, side, price, quantity)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Order {
    pub id: u64,
    pub time: u64,
    pub side: Side,
    pub price: Tick,
    pub quantity: u64,
}

impl Order {
    pub fn new(id: u64, time: u64, side: Side, price: Tick, quantity: u64) -> Result<Self> {
        if id == 0 {
            return Err(Error::InvalidOrder("id must be positive".into()));
        }
        if quantity == 0 {
            return Err(Error::InvalidOrder(format!("order {id} has zero quantity")));
        }
        Ok(Order {
            id,
            time,
            side,
            price,
            quantity,
        })
    }

    /// Same as [`Order::new`] but also checks the price against `instrument`.
    pub fn on_grid(
        instrument: &Instrument,
        id: u64,
        time: u64,
        side: Side,
        price: Tick,
        quantity: u64,
    ) -> Result<Self> {
        instrument.check_price(price)?;
        Order::new(id, time, side, price, quantity)
    }

    pub fn sign(&self) -> i64 {
        self.side.sign()
    }

    /// `sign * price * quantity`, the order's contribution to the signed value sum.
    pub fn signed_value(&self) -> i128 {
        self.sign() as i128 * self.price as i128 * self.quantity as i128
    }
}
