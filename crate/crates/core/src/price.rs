//! Positively recurrent price processes on a finite tick grid.
//!
//! Both generators move at most one tick per clock step and reflect at the
//! grid edges, so the chain is finite and irreducible. Hitting-time estimation
//! checks the above/below threshold recurrence empirically.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::Tick;
use crate::rng::{derive_seed, substream, Bernoulli, BitStream, Ratio, StreamRng, PRICE_STREAM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessKind {
    ReflectingWalk,
    MeanRevertingWalk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriceProcessConfig {
    pub kind: ProcessKind,
    pub grid_min: Tick,
    pub grid_max: Tick,
    pub start_price: Tick,
    pub stay_probability: Ratio,
    /// Pull toward the grid center, mean-reverting walk only. At most 1.
    pub reversion_strength: Ratio,
}

impl Default for PriceProcessConfig {
    fn default() -> Self {
        PriceProcessConfig {
            kind: ProcessKind::ReflectingWalk,
            grid_min: 9_000,
            grid_max: 11_000,
            start_price: 10_000,
            stay_probability: Ratio::new(1, 2).unwrap(),
            reversion_strength: Ratio::ZERO,
        }
    }
}

impl PriceProcessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_min >= self.grid_max {
            return Err(Error::config("price.grid_min must be below price.grid_max"));
        }
        if !(self.grid_min..=self.grid_max).contains(&self.start_price) {
            return Err(Error::config(format!(
                "price.start_price {} outside [{}, {}]",
                self.start_price, self.grid_min, self.grid_max
            )));
        }
        if !self.stay_probability.lt_one() {
            return Err(Error::config("price.stay_probability must be below 1"));
        }
        if !self.reversion_strength.le_one() {
            return Err(Error::config("price.reversion_strength must be at most 1"));
        }
        Ok(())
    }

    pub fn width(&self) -> Tick {
        self.grid_max - self.grid_min
    }

    pub fn contains(&self, price: Tick) -> bool {
        (self.grid_min..=self.grid_max).contains(&price)
    }

    /// Up-move probability at `price` given that the price moves, as an exact
    /// fraction `(numerator, denominator)`.
    pub fn up_probability(&self, price: Tick) -> (u64, u64) {
        match self.kind {
            ProcessKind::ReflectingWalk => (1, 2),
            ProcessKind::MeanRevertingWalk => {
                // 1/2 + k * (center - P) / range, center = (min + max) / 2
                let kn = self.reversion_strength.numerator() as i128;
                let kd = self.reversion_strength.denominator() as i128;
                let range = self.width() as i128;
                let den = 2 * kd * range;
                let num = kd * range + kn * (self.grid_min as i128 + self.grid_max as i128 - 2 * price as i128);
                (num.clamp(0, den) as u64, den as u64)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct PricePathState {
    pub current_price: Tick,
    pub time: u64,
    rng: BitStream<StreamRng>,
}

impl PricePathState {
    pub fn new(config: &PriceProcessConfig, seed: u64) -> Self {
        Self::with_rng(config.start_price, substream(seed, PRICE_STREAM))
    }

    pub fn with_rng(start_price: Tick, rng: StreamRng) -> Self {
        PricePathState {
            current_price: start_price,
            time: 0,
            rng: BitStream::new(rng),
        }
    }

    /// Advances the clock by one tick and returns the new price.
    pub fn step(&mut self, config: &PriceProcessConfig) -> Tick {
        self.current_price = step_price(self.current_price, config, &mut self.rng);
        self.time += 1;
        self.current_price
    }
}

pub fn next_price(mut state: PricePathState, config: &PriceProcessConfig) -> PricePathState {
    state.step(config);
    state
}

#[inline]
fn step_price<R: RngCore>(price: Tick, config: &PriceProcessConfig, rng: &mut BitStream<R>) -> Tick {
    let stay = Bernoulli::from_ratio(config.stay_probability);
    if stay.draw_bits(rng) {
        return price;
    }
    let (n, d) = config.up_probability(price);
    let up = Bernoulli::new(n, d).draw_bits(rng);
    let next = if up { price + 1 } else { price - 1 };
    if next > config.grid_max {
        config.grid_max - 1
    } else if next < config.grid_min {
        config.grid_min + 1
    } else {
        next
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Above,
    Below,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingSummary {
    pub samples: u64,
    pub count_finite: u64,
    /// Mean over finite hitting times; `None` if none hit.
    pub mean: Option<f64>,
    pub max: Option<u64>,
}

/// First-passage times from `start` to strictly beyond `start ± xi`.
///
/// Each replication `i` uses its own seed `derive_seed(seed, i)`; results are
/// combined in replication order.
pub fn estimate_hitting_time(
    config: &PriceProcessConfig,
    start: Tick,
    xi: Tick,
    direction: Direction,
    samples: u64,
    cap: u64,
    seed: u64,
) -> Result<HittingSummary> {
    config.validate()?;
    if xi < 1 {
        return Err(Error::config("threshold must be at least one tick"));
    }
    if !config.contains(start) {
        return Err(Error::config(format!("start price {start} outside grid")));
    }
    let reachable = match direction {
        Direction::Above => start + xi < config.grid_max,
        Direction::Below => start - xi > config.grid_min,
    };
    if !reachable {
        return Err(Error::config(format!(
            "threshold {start} {} {xi} cannot be strictly crossed inside [{}, {}]",
            if direction == Direction::Above { "+" } else { "-" },
            config.grid_min,
            config.grid_max
        )));
    }

    let times: Vec<Option<u64>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = BitStream::new(substream(derive_seed(seed, i), PRICE_STREAM));
            first_passage(config, start, xi, direction, cap, &mut rng)
        })
        .collect();

    let finite: Vec<u64> = times.iter().flatten().copied().collect();
    let mean = (!finite.is_empty())
        .then(|| finite.iter().map(|&t| t as f64).sum::<f64>() / finite.len() as f64);
    Ok(HittingSummary {
        samples,
        count_finite: finite.len() as u64,
        mean,
        max: finite.iter().copied().max(),
    })
}

fn first_passage<R: RngCore>(
    config: &PriceProcessConfig,
    start: Tick,
    xi: Tick,
    direction: Direction,
    cap: u64,
    rng: &mut BitStream<R>,
) -> Option<u64> {
    let mut price = start;
    for u in 1..=cap {
        price = step_price(price, config, rng);
        let hit = match direction {
            Direction::Above => price > start + xi,
            Direction::Below => price < start - xi,
        };
        if hit {
            return Some(u);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn walk(stay: Ratio) -> PriceProcessConfig {
        PriceProcessConfig {
            stay_probability: stay,
            ..PriceProcessConfig::default()
        }
    }

    #[test]
    fn reflects_at_top() {
        let cfg = PriceProcessConfig {
            start_price: 11_000,
            stay_probability: Ratio::ZERO,
            ..PriceProcessConfig::default()
        };
        for seed in 0..50 {
            let s = next_price(PricePathState::new(&cfg, seed), &cfg);
            assert!(s.current_price <= cfg.grid_max);
            assert_eq!(s.current_price, cfg.grid_max - 1);
            assert_eq!(s.time, 1);
        }
    }

    #[test]
    fn forced_step_moves_one_tick() {
        let cfg = walk(Ratio::ZERO);
        let mut s = PricePathState::new(&cfg, 3);
        let mut prev = s.current_price;
        for _ in 0..10_000 {
            let p = s.step(&cfg);
            if p != cfg.grid_min && p != cfg.grid_max && prev != cfg.grid_min && prev != cfg.grid_max {
                assert_eq!((p - prev).abs(), 1);
            }
            prev = p;
        }
    }

    #[test]
    fn mean_reverting_up_probability() {
        let cfg = PriceProcessConfig {
            kind: ProcessKind::MeanRevertingWalk,
            reversion_strength: Ratio::ONE,
            ..PriceProcessConfig::default()
        };
        assert_eq!(cfg.up_probability(10_000), (2000, 4000));
        // at the floor, 1/2 + 1 * 1000/2000 = 1
        let (n, d) = cfg.up_probability(9_000);
        assert_eq!(n, d);
        assert_eq!(cfg.up_probability(11_000).0, 0);
    }

    #[test]
    fn mean_reverting_mean_near_center() {
        // Stationary law of a birth-death chain is computable exactly; the
        // oracle here is its mean, evaluated by the detailed-balance product.
        let cfg = PriceProcessConfig {
            kind: ProcessKind::MeanRevertingWalk,
            grid_min: 0,
            grid_max: 200,
            start_price: 100,
            stay_probability: Ratio::ZERO,
            reversion_strength: Ratio::new(1, 2).unwrap(),
        };
        let mut weights = vec![1.0f64];
        for p in cfg.grid_min..cfg.grid_max {
            let up = |x: Tick| {
                let (n, d) = cfg.up_probability(x);
                n as f64 / d as f64
            };
            // reflecting edges: at min the walk always goes up, at max always down
            let forward = if p == cfg.grid_min { 1.0 } else { up(p) };
            let backward = if p + 1 == cfg.grid_max { 1.0 } else { 1.0 - up(p + 1) };
            weights.push(weights.last().unwrap() * forward / backward);
        }
        let z: f64 = weights.iter().sum();
        let oracle_mean: f64 = weights.iter().enumerate().map(|(i, w)| i as f64 * w / z).sum();
        assert!((oracle_mean - 100.0).abs() < 1e-6);

        let n = 1_000_000;
        let mut s = PricePathState::new(&cfg, 99);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let p = s.step(&cfg) as f64;
            sum += p;
            sum_sq += p * p;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        // autocorrelated path: the drift 2k(c - P)/range per step gives an
        // AR(1)-like relaxation time of range / (2k) steps
        let tau = cfg.width() as f64 / (2.0 * cfg.reversion_strength.to_f64());
        let se = (var * 2.0 * tau / n as f64).sqrt();
        assert!((mean - oracle_mean).abs() < 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn one_tick_threshold_needs_a_step() {
        let cfg = walk(Ratio::ZERO);
        let s = estimate_hitting_time(&cfg, 10_000, 1, Direction::Above, 200, 10_000_000, 5).unwrap();
        assert_eq!(s.count_finite, 200);
        assert!(s.max.unwrap() >= 2);
        let s = estimate_hitting_time(&cfg, 10_000, 1, Direction::Below, 200, 10_000_000, 5).unwrap();
        assert!(s.mean.unwrap() >= 1.0);
    }

    #[test]
    fn unreachable_threshold_rejected() {
        let cfg = walk(Ratio::ZERO);
        assert!(estimate_hitting_time(&cfg, 10_900, 100, Direction::Above, 1, 10, 0).is_err());
        assert!(estimate_hitting_time(&cfg, 9_100, 100, Direction::Below, 1, 10, 0).is_err());
        assert!(estimate_hitting_time(&cfg, 10_000, 0, Direction::Below, 1, 10, 0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(PriceProcessConfig::default().validate().is_ok());
        assert!(walk(Ratio::ONE).validate().is_err());
        let bad = PriceProcessConfig { start_price: 8_000, ..PriceProcessConfig::default() };
        assert!(bad.validate().is_err());
        let bad = PriceProcessConfig {
            reversion_strength: Ratio::new(3, 2).unwrap(),
            ..PriceProcessConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn paths_stay_on_grid(
            lo in -50i64..50, width in 2i64..40, start_off in 0i64..40,
            stay_n in 0u64..4, rev_n in 0u64..5, mean_rev in any::<bool>(), seed in any::<u64>(),
        ) {
            let cfg = PriceProcessConfig {
                kind: if mean_rev { ProcessKind::MeanRevertingWalk } else { ProcessKind::ReflectingWalk },
                grid_min: lo,
                grid_max: lo + width,
                start_price: lo + start_off.min(width),
                stay_probability: Ratio::new(stay_n, 4).unwrap(),
                reversion_strength: Ratio::new(rev_n, 4).unwrap(),
            };
            let mut a = PricePathState::new(&cfg, seed);
            let mut b = PricePathState::new(&cfg, seed);
            for _ in 0..5_000 {
                let p = a.step(&cfg);
                prop_assert!(cfg.contains(p));
                prop_assert_eq!(p, b.step(&cfg));
            }
        }
    }
}
