//! PPM with two-dimensional contexts for label grids.
//!
//! The context of a grid cell is formed by its causal neighbours, tried from
//! the longest available context down: (left, above, above-left), then
//! (left, above), then (left), then the empty context, then a uniform
//! fallback. Neighbours outside the grid shorten the chain. Escapes use the
//! PPM-C estimate (escape count = number of distinct symbols seen in the
//! context) without exclusions; every context on the chain is updated after
//! each symbol.

use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use super::range::{RangeDecoder, RangeEncoder};
use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 3;

/// Counts are halved once a context's total exceeds this.
const RESCALE_LIMIT: u32 = 1 << 16;

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
struct ContextStats {
    /// (symbol, count) in first-seen order.
    symbols: Vec<(u16, u32)>,
    total: u32,
}

impl ContextStats {
    fn escape(&self) -> u32 {
        self.symbols.len() as u32
    }

    fn update(&mut self, symbol: u16) {
        match self.symbols.iter_mut().find(|(s, _)| *s == symbol) {
            Some((_, n)) => *n += 1,
            None => self.symbols.push((symbol, 1)),
        }
        self.total += 1;
        if self.total > RESCALE_LIMIT {
            self.total = 0;
            for (_, n) in &mut self.symbols {
                *n = n.div_ceil(2);
                self.total += *n;
            }
        }
    }
}

/// Context tables shared (by construction) between encoder and decoder.
#[derive(Debug, Clone)]
pub struct PpmModel {
    alphabet: u16,
    contexts: HashMap<u32, ContextStats>,
}

/// Causal neighbours of a cell; `None` when outside the grid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Neighbours {
    pub left: Option<u16>,
    pub above: Option<u16>,
    pub above_left: Option<u16>,
}

impl Neighbours {
    /// Neighbours of cell `(row, col)` in a row-major grid of `cols` columns.
    pub fn of(labels: &[u16], cols: usize, row: usize, col: usize) -> Self {
        let at = |r: usize, c: usize| labels[r * cols + c];
        Self {
            left: (col > 0).then(|| at(row, col - 1)),
            above: (row > 0).then(|| at(row - 1, col)),
            above_left: (row > 0 && col > 0).then(|| at(row - 1, col - 1)),
        }
    }

    /// Context keys from the highest available order down to order 0.
    fn chain(&self) -> ([u32; MAX_ORDER + 1], usize) {
        let available: Vec<(u32, u16)> = [(1u32, self.left), (2, self.above), (4, self.above_left)]
            .into_iter()
            .filter_map(|(tag, v)| v.map(|v| (tag, v)))
            .collect();
        let mut keys = [0u32; MAX_ORDER + 1];
        let mut n = 0;
        for order in (1..=available.len()).rev() {
            let mut tag = 0;
            let mut key = 0u32;
            for &(t, v) in &available[..order] {
                tag |= t;
                key = (key << 8) | u32::from(v);
            }
            keys[n] = (tag << 24) | key;
            n += 1;
        }
        keys[n] = 0;
        (keys, n + 1)
    }
}

impl PpmModel {
    pub fn new(alphabet: usize) -> Self {
        assert!(
            (1..=256).contains(&alphabet),
            "alphabet size {alphabet} outside [1, 256]"
        );
        Self {
            alphabet: alphabet as u16,
            contexts: HashMap::new(),
        }
    }

    pub fn encode(&mut self, enc: &mut RangeEncoder, ctx: Neighbours, symbol: u16) {
        debug_assert!(symbol < self.alphabet);
        let (keys, n) = ctx.chain();
        let mut coded = false;
        for key in &keys[..n] {
            let Some(stats) = self.contexts.get(key) else { continue };
            let total = stats.total + stats.escape();
            let mut cum = 0;
            let hit = stats.symbols.iter().find_map(|&(s, c)| {
                if s == symbol {
                    Some(c)
                } else {
                    cum += c;
                    None
                }
            });
            match hit {
                Some(count) => {
                    enc.encode(cum, count, total);
                    coded = true;
                    break;
                }
                None => enc.encode(stats.total, stats.escape(), total),
            }
        }
        if !coded {
            enc.encode(u32::from(symbol), 1, u32::from(self.alphabet));
        }
        self.update(&keys[..n], symbol);
    }

    pub fn decode(&mut self, dec: &mut RangeDecoder<'_>, ctx: Neighbours) -> Result<u16> {
        let (keys, n) = ctx.chain();
        let mut found = None;
        for key in &keys[..n] {
            let Some(stats) = self.contexts.get(key) else { continue };
            let total = stats.total + stats.escape();
            let t = dec.target(total)?;
            if t >= stats.total {
                dec.consume(stats.total, stats.escape())?;
                continue;
            }
            let mut cum = 0;
            for &(s, c) in &stats.symbols {
                if t < cum + c {
                    dec.consume(cum, c)?;
                    found = Some(s);
                    break;
                }
                cum += c;
            }
            break;
        }
        let symbol = match found {
            Some(s) => s,
            None => {
                let s = dec.target(u32::from(self.alphabet))?;
                dec.consume(s, 1)?;
                s as u16
            }
        };
        if symbol >= self.alphabet {
            return Err(Error::corrupt(dec.offset(), "decoded label outside alphabet"));
        }
        self.update(&keys[..n], symbol);
        Ok(symbol)
    }

    fn update(&mut self, keys: &[u32], symbol: u16) {
        for key in keys {
            self.contexts.entry(*key).or_default().update(symbol);
        }
    }

    /// Stable digest of all context tables.
    pub fn digest(&self) -> u64 {
        let mut keys: Vec<&u32> = self.contexts.keys().collect();
        keys.sort_unstable();
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.alphabet.hash(&mut h);
        for k in keys {
            k.hash(&mut h);
            self.contexts[k].hash(&mut h);
        }
        h.finish()
    }
}
