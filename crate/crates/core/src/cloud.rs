//! Order-cloud statistics and the gravity center.
//!
//! The gravity center is the quantity-weighted mean price of every fill so
//! far. It is rarely on the tick grid, so it is carried as an exact rational
//! and compared against tick prices by cross-multiplication.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::market::{Order, Side, Tick};

/// Exact rational price, `numerator / denominator` ticks.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RationalPrice {
    numerator: i128,
    denominator: i128,
}

impl RationalPrice {
    /// Panics if `denominator` is zero.
    pub fn new(numerator: i128, denominator: i128) -> Self {
        assert!(denominator != 0, "zero denominator");
        let sign = denominator.signum();
        let g = numerator.gcd(&denominator).max(1);
        RationalPrice {
            numerator: sign * numerator / g,
            denominator: sign * denominator / g,
        }
    }

    pub fn from_tick(tick: Tick) -> Self {
        RationalPrice {
            numerator: tick as i128,
            denominator: 1,
        }
    }

    pub fn numerator(&self) -> i128 {
        self.numerator
    }

    pub fn denominator(&self) -> i128 {
        self.denominator
    }

    pub fn is_integer(&self) -> bool {
        self.denominator == 1
    }

    pub fn scale(self, k: i128) -> Self {
        RationalPrice::new(self.numerator * k, self.denominator)
    }

    pub fn halve(self) -> Self {
        RationalPrice::new(self.numerator, self.denominator * 2)
    }

    pub fn is_positive(&self) -> bool {
        self.numerator > 0
    }

    pub fn is_negative(&self) -> bool {
        self.numerator < 0
    }

    /// Largest tick not above this value.
    pub fn floor(&self) -> Tick {
        self.numerator.div_euclid(self.denominator) as Tick
    }

    /// Smallest tick not below this value.
    pub fn ceil(&self) -> Tick {
        -(RationalPrice::new(-self.numerator, self.denominator).floor())
    }

    pub fn cmp_tick(&self, tick: Tick) -> Ordering {
        self.numerator.cmp(&(tick as i128 * self.denominator))
    }

    pub fn to_f64(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }
}

impl PartialEq for RationalPrice {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for RationalPrice {}

impl PartialOrd for RationalPrice {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for RationalPrice {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.numerator * other.denominator).cmp(&(other.numerator * self.denominator))
    }
}

impl Add for RationalPrice {
    type Output = RationalPrice;
    fn add(self, rhs: Self) -> Self {
        RationalPrice::new(
            self.numerator * rhs.denominator + rhs.numerator * self.denominator,
            self.denominator * rhs.denominator,
        )
    }
}

impl Sub for RationalPrice {
    type Output = RationalPrice;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Neg for RationalPrice {
    type Output = RationalPrice;
    fn neg(self) -> Self {
        RationalPrice {
            numerator: -self.numerator,
            denominator: self.denominator,
        }
    }
}

impl From<Tick> for RationalPrice {
    fn from(tick: Tick) -> Self {
        RationalPrice::from_tick(tick)
    }
}

impl fmt::Display for RationalPrice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denominator == 1 {
            write!(f, "{}", self.numerator)
        } else {
            write!(f, "{}/{}", self.numerator, self.denominator)
        }
    }
}

/// Running totals over a strategy's fills.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CloudStats {
    pub fill_count: u64,
    pub qty_sell: u64,
    pub qty_buy: u64,
    pub weighted_sum_sell: i128,
    pub weighted_sum_buy: i128,
    pub min_fill_price: Option<Tick>,
    pub max_fill_price: Option<Tick>,
}

impl CloudStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_fills<'a>(fills: impl IntoIterator<Item = &'a Order>) -> Self {
        fills.into_iter().fold(CloudStats::new(), |s, o| s.update(o))
    }

    #[must_use]
    pub fn update(mut self, fill: &Order) -> Self {
        let weighted = fill.price as i128 * fill.quantity as i128;
        match fill.side {
            Side::Sell => {
                self.qty_sell += fill.quantity;
                self.weighted_sum_sell += weighted;
            }
            Side::Buy => {
                self.qty_buy += fill.quantity;
                self.weighted_sum_buy += weighted;
            }
        }
        self.fill_count += 1;
        self.min_fill_price = Some(self.min_fill_price.map_or(fill.price, |m| m.min(fill.price)));
        self.max_fill_price = Some(self.max_fill_price.map_or(fill.price, |m| m.max(fill.price)));
        self
    }

    pub fn total_quantity(&self) -> u64 {
        self.qty_sell + self.qty_buy
    }

    /// `None` until the first fill.
    pub fn gravity_center(&self) -> Option<RationalPrice> {
        if self.fill_count == 0 {
            return None;
        }
        Some(RationalPrice::new(
            self.weighted_sum_sell + self.weighted_sum_buy,
            self.total_quantity() as i128,
        ))
    }

    /// Quantity-weighted mean price of sells, when any.
    pub fn mean_sell_price(&self) -> Option<RationalPrice> {
        (self.qty_sell > 0)
            .then(|| RationalPrice::new(self.weighted_sum_sell, self.qty_sell as i128))
    }

    pub fn mean_buy_price(&self) -> Option<RationalPrice> {
        (self.qty_buy > 0).then(|| RationalPrice::new(self.weighted_sum_buy, self.qty_buy as i128))
    }
}

pub fn cloud_update(stats: CloudStats, fill: &Order) -> CloudStats {
    stats.update(fill)
}

pub fn gravity_center(stats: &CloudStats) -> Option<RationalPrice> {
    stats.gravity_center()
}
