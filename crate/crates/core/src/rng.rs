//! Deterministic random substreams and exact-rational Bernoulli draws.
//!
//! Every replication gets a seed derived from the master seed. Within a
//! replication, each consumer reads its own ChaCha stream of that seed:
//!
//! | stream | consumer                          |
//! |--------|-----------------------------------|
//! | 0      | price process                     |
//! | 1      | baseline strategy                 |
//! | 2      | delay Bernoulli draws             |
//!
//! so the baseline's order flow never depends on what the delay engine does.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rust_decimal::Decimal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const PRICE_STREAM: u64 = 0;
pub const BASELINE_STREAM: u64 = 1;
pub const DELAY_STREAM: u64 = 2;

pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finalizer; maps `(seed, index)` to a well-mixed child seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn substream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Non-negative exact rational, `numerator / denominator`.
///
/// Reads from config as `"1/50"`, `"0.02"`, an integer, or a float literal
/// (taken as its shortest decimal rendering).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Ratio {
    numerator: u64,
    denominator: u64,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Ratio {
    pub const ZERO: Ratio = Ratio { numerator: 0, denominator: 1 };
    pub const ONE: Ratio = Ratio { numerator: 1, denominator: 1 };

    pub fn new(numerator: u64, denominator: u64) -> Result<Self> {
        if denominator == 0 {
            return Err(Error::config("ratio with zero denominator"));
        }
        let g = gcd(numerator, denominator).max(1);
        Ok(Ratio {
            numerator: numerator / g,
            denominator: denominator / g,
        })
    }

    pub fn numerator(&self) -> u64 {
        self.numerator
    }

    pub fn denominator(&self) -> u64 {
        self.denominator
    }

    pub fn is_zero(&self) -> bool {
        self.numerator == 0
    }

    pub fn is_one(&self) -> bool {
        self.numerator == self.denominator
    }

    pub fn le_one(&self) -> bool {
        self.numerator <= self.denominator
    }

    pub fn lt_one(&self) -> bool {
        self.numerator < self.denominator
    }

    pub fn to_f64(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }
}

impl FromStr for Ratio {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let parse = |x: &str| {
                x.trim()
                    .parse::<u64>()
                    .map_err(|_| Error::config(format!("bad ratio `{s}`")))
            };
            return Ratio::new(parse(n)?, parse(d)?);
        }
        let dec = Decimal::from_str(s).map_err(|_| Error::config(format!("bad ratio `{s}`")))?;
        if dec.is_sign_negative() {
            return Err(Error::config(format!("negative ratio `{s}`")));
        }
        let scale = dec.scale();
        let numerator: u64 = dec
            .mantissa()
            .try_into()
            .map_err(|_| Error::config(format!("ratio `{s}` out of range")))?;
        let denominator = 10u64
            .checked_pow(scale)
            .ok_or_else(|| Error::config(format!("ratio `{s}` has too many decimals")))?;
        Ratio::new(numerator, denominator)
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Float(f64),
            Text(String),
        }
        let parsed = match Raw::deserialize(deserializer)? {
            Raw::Int(n) => Ratio::new(n, 1),
            Raw::Float(x) => Ratio::from_str(&x.to_string()),
            Raw::Text(s) => Ratio::from_str(&s),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

/// Exact Bernoulli trial with rational success probability `num / den`.
#[derive(Debug, Clone, Copy)]
pub struct Bernoulli {
    numerator: u64,
    denominator: u64,
}

/// Hands out random bits a few at a time, so coins with power-of-two
/// denominators don't each burn a whole 64-bit draw.
#[derive(Debug, Clone)]
pub struct BitStream<R> {
    rng: R,
    buffer: u64,
    available: u32,
}

impl<R: RngCore> BitStream<R> {
    pub fn new(rng: R) -> Self {
        BitStream { rng, buffer: 0, available: 0 }
    }

    /// The next `k` bits, `1 <= k <= 63`. Leftover bits are discarded when
    /// the buffer runs short.
    #[inline]
    pub fn bits(&mut self, k: u32) -> u64 {
        debug_assert!((1..64).contains(&k));
        if self.available < k {
            self.buffer = self.rng.next_u64();
            self.available = 64;
        }
        let out = self.buffer & ((1u64 << k) - 1);
        self.buffer >>= k;
        self.available -= k;
        out
    }

    pub fn inner(&mut self) -> &mut R {
        &mut self.rng
    }
}

impl Bernoulli {
    /// Panics if `num > den` or `den == 0`.
    pub fn new(numerator: u64, denominator: u64) -> Self {
        assert!(denominator > 0 && numerator <= denominator);
        Bernoulli {
            numerator,
            denominator,
        }
    }

    pub fn from_ratio(p: Ratio) -> Self {
        Bernoulli::new(p.numerator(), p.denominator())
    }

    #[inline]
    pub fn draw<R: RngCore>(&self, rng: &mut R) -> bool {
        if self.numerator == 0 {
            return false;
        }
        if self.numerator == self.denominator {
            return true;
        }
        if self.denominator.is_power_of_two() {
            return (rng.next_u64() & (self.denominator - 1)) < self.numerator;
        }
        rng.random_range(0..self.denominator) < self.numerator
    }

    /// Same distribution as [`Bernoulli::draw`], taking only
    /// `log2(denominator)` bits when the denominator is a power of two.
    #[inline]
    pub fn draw_bits<R: RngCore>(&self, bits: &mut BitStream<R>) -> bool {
        if self.numerator == 0 {
            return false;
        }
        if self.numerator == self.denominator {
            return true;
        }
        if self.denominator.is_power_of_two() {
            return bits.bits(self.denominator.trailing_zeros()) < self.numerator;
        }
        bits.inner().random_range(0..self.denominator) < self.numerator
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_parsing() {
        assert_eq!("1/50".parse::<Ratio>().unwrap(), Ratio::new(1, 50).unwrap());
        assert_eq!("0.02".parse::<Ratio>().unwrap(), Ratio::new(1, 50).unwrap());
        assert_eq!("1".parse::<Ratio>().unwrap(), Ratio::ONE);
        assert_eq!("2/4".parse::<Ratio>().unwrap().to_string(), "1/2");
        assert!("1/0".parse::<Ratio>().is_err());
        assert!("-0.5".parse::<Ratio>().is_err());
        assert!("abc".parse::<Ratio>().is_err());
    }

    #[test]
    fn ratio_from_toml_forms() {
        #[derive(Deserialize)]
        struct T {
            a: Ratio,
            b: Ratio,
            c: Ratio,
        }
        let t: T = toml::from_str("a = \"1/3\"\nb = 0.25\nc = 1").unwrap();
        assert_eq!(t.a, Ratio::new(1, 3).unwrap());
        assert_eq!(t.b, Ratio::new(1, 4).unwrap());
        assert_eq!(t.c, Ratio::ONE);
    }

    #[test]
    fn streams_are_disjoint_and_reproducible() {
        let mut a = substream(7, PRICE_STREAM);
        let mut b = substream(7, BASELINE_STREAM);
        let mut a2 = substream(7, PRICE_STREAM);
        let xs: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        let xs2: Vec<u64> = (0..8).map(|_| a2.next_u64()).collect();
        assert_eq!(xs, xs2);
        assert_ne!(xs, ys);
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
    }

    #[test]
    fn bernoulli_frequency() {
        for (n, d) in [(1u64, 2u64), (1, 50), (2, 3)] {
            let b = Bernoulli::new(n, d);
            let mut rng = substream(11, DELAY_STREAM);
            let trials = 200_000;
            let hits = (0..trials).filter(|_| b.draw(&mut rng)).count() as f64;
            let p = n as f64 / d as f64;
            let se = (p * (1.0 - p) / trials as f64).sqrt();
            assert!((hits / trials as f64 - p).abs() < 4.0 * se, "{n}/{d}");
        }
        let mut rng = substream(1, 0);
        assert!(!Bernoulli::new(0, 5).draw(&mut rng));
        assert!(Bernoulli::new(5, 5).draw(&mut rng));
    }

    #[test]
    fn bit_buffered_frequency() {
        // 3/8 spends three bits, so buffer refills fall mid-word
        for (n, d) in [(1u64, 2u64), (3, 8), (1, 50)] {
            let b = Bernoulli::new(n, d);
            let mut bits = BitStream::new(substream(12, PRICE_STREAM));
            let trials = 200_000;
            let hits = (0..trials).filter(|_| b.draw_bits(&mut bits)).count() as f64;
            let p = n as f64 / d as f64;
            let se = (p * (1.0 - p) / trials as f64).sqrt();
            assert!((hits / trials as f64 - p).abs() < 4.0 * se, "{n}/{d}");
        }
    }

    #[test]
    fn bit_stream_slices_words_in_order() {
        let mut reference = substream(5, PRICE_STREAM);
        let word = reference.next_u64();
        let mut bits = BitStream::new(substream(5, PRICE_STREAM));
        assert_eq!(bits.bits(1), word & 1);
        assert_eq!(bits.bits(3), (word >> 1) & 0b111);
        assert_eq!(bits.bits(60), word >> 4);
        assert_eq!(bits.bits(1), reference.next_u64() & 1);
    }
}
