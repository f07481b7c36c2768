//! Adaptive frequency model over a small alphabet.

use std::hash::{Hash, Hasher};

use super::range::{RangeDecoder, RangeEncoder};
use crate::error::Result;

pub const INCREMENT: u32 = 32;
/// Frequencies are halved once the total exceeds this.
pub const RESCALE_LIMIT: u32 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AdaptiveModel {
    freqs: Vec<u32>,
    total: u32,
}

impl AdaptiveModel {
    pub fn new(alphabet: usize) -> Self {
        assert!(
            (1..=256).contains(&alphabet),
            "alphabet size {alphabet} outside [1, 256]"
        );
        Self {
            freqs: vec![1; alphabet],
            total: alphabet as u32,
        }
    }

    pub fn alphabet(&self) -> usize {
        self.freqs.len()
    }

    pub fn total(&self) -> u32 {
        self.total
    }

    pub fn freq(&self, symbol: usize) -> u32 {
        self.freqs[symbol]
    }

    /// Probability the model currently assigns to `symbol`.
    pub fn probability(&self, symbol: usize) -> f64 {
        f64::from(self.freqs[symbol]) / f64::from(self.total)
    }

    fn cum(&self, symbol: usize) -> u32 {
        self.freqs[..symbol].iter().sum()
    }

    pub fn update(&mut self, symbol: usize) {
        self.freqs[symbol] += INCREMENT;
        self.total += INCREMENT;
        if self.total > RESCALE_LIMIT {
            self.total = 0;
            for f in &mut self.freqs {
                *f = f.div_ceil(2);
                self.total += *f;
            }
        }
    }

    pub fn encode(&mut self, enc: &mut RangeEncoder, symbol: usize) {
        enc.encode(self.cum(symbol), self.freqs[symbol], self.total);
        self.update(symbol);
    }

    pub fn decode(&mut self, dec: &mut RangeDecoder<'_>) -> Result<usize> {
        let target = dec.target(self.total)?;
        let mut cum = 0;
        let mut symbol = 0;
        while cum + self.freqs[symbol] <= target {
            cum += self.freqs[symbol];
            symbol += 1;
        }
        dec.consume(cum, self.freqs[symbol])?;
        self.update(symbol);
        Ok(symbol)
    }

    /// Stable digest of the model state, for lockstep checks.
    pub fn digest(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.hash(&mut h);
        h.finish()
    }
}
