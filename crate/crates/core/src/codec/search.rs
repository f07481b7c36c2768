//! Budget-constrained search over grid spacing and level count.
//!
//! Every candidate is encoded for real (without tonal optimisation); those
//! over budget are discarded and the lowest-error survivor wins. The winner's
//! spacing is then refined by geometric bisection against its neighbours on
//! the coarse grid.

use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;

use crate::error::Result;
use crate::mask::{fixed_to_h, h_to_fixed};

/// Where to look.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub h_min: f64,
    pub h_max: f64,
    /// Geometrically spaced coarse samples of `h`.
    pub h_samples: usize,
    /// Level counts for scalar groups.
    pub q_values: Vec<u16>,
    /// Codebook sizes for vector mode.
    pub k_values: Vec<u16>,
    /// Bisection rounds on `h` around the coarse winner.
    pub refine_steps: usize,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            h_min: 1.5,
            h_max: 32.0,
            h_samples: 12,
            q_values: vec![2, 4, 8, 16, 32, 64, 128, 256],
            k_values: vec![4, 8, 16, 32, 64, 128, 256],
            refine_steps: 3,
        }
    }
}

impl SearchSpace {
    /// Coarse `h` samples in fixed point, clipped to what the image allows.
    pub fn h_grid(&self, width: usize, height: usize) -> Vec<u16> {
        let limit = width.min(height) as f64;
        let hi = self.h_max.min(limit).max(1.0);
        let lo = self.h_min.min(hi).max(1.0);
        let n = self.h_samples.max(1);
        let mut out: Vec<u16> = (0..n)
            .map(|i| {
                let t = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
                let h = lo * (hi / lo).powf(t);
                clamp_fixed(h_to_fixed(h), limit)
            })
            .collect();
        out.dedup();
        out
    }
}

fn clamp_fixed(h: u16, limit: f64) -> u16 {
    h.clamp(h_to_fixed(1.0), h_to_fixed(limit.min(255.0)))
}

/// Outcome of encoding one candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    /// Bytes this candidate adds to the file, compared against the budget.
    pub size: usize,
    /// Squared error in the group's own channels.
    pub sse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateRecord {
    pub h_fixed: u16,
    pub param: u16,
    pub eval: Evaluation,
}

impl CandidateRecord {
    pub fn h(&self) -> f64 {
        fixed_to_h(self.h_fixed)
    }
}

/// Memoised candidate evaluations, shared between searches over the same group.
#[derive(Debug, Default)]
pub struct Memo {
    seen: Mutex<HashMap<(u16, u16), Evaluation>>,
}

impl Memo {
    pub fn new() -> Self {
        Self::default()
    }

    fn get(&self, key: (u16, u16)) -> Option<Evaluation> {
        self.seen.lock().expect("memo lock").get(&key).copied()
    }

    fn put(&self, key: (u16, u16), eval: Evaluation) {
        self.seen.lock().expect("memo lock").insert(key, eval);
    }

    /// Every evaluation so far, sorted by `(h, param)`.
    pub fn records(&self) -> Vec<CandidateRecord> {
        let mut out: Vec<CandidateRecord> = self
            .seen
            .lock()
            .expect("memo lock")
            .iter()
            .map(|(&(h_fixed, param), &eval)| CandidateRecord { h_fixed, param, eval })
            .collect();
        out.sort_by_key(|r| (r.h_fixed, r.param));
        out
    }
}

/// Strict total order used to pick winners deterministically.
fn better(a: &CandidateRecord, b: &CandidateRecord) -> bool {
    a.eval
        .sse
        .total_cmp(&b.eval.sse)
        .then(a.eval.size.cmp(&b.eval.size))
        .then(b.h_fixed.cmp(&a.h_fixed))
        .then(a.param.cmp(&b.param))
        .is_lt()
}

fn evaluate_all<F>(keys: &[(u16, u16)], memo: &Memo, eval: &F) -> Result<Vec<CandidateRecord>>
where
    F: Fn(u16, u16) -> Result<Evaluation> + Sync,
{
    let missing: Vec<(u16, u16)> = keys.iter().copied().filter(|&k| memo.get(k).is_none()).collect();
    let fresh: Vec<((u16, u16), Evaluation)> = missing
        .par_iter()
        .map(|&(h, p)| eval(h, p).map(|e| ((h, p), e)))
        .collect::<Result<_>>()?;
    for (k, e) in fresh {
        memo.put(k, e);
    }
    Ok(keys
        .iter()
        .map(|&(h_fixed, param)| CandidateRecord {
            h_fixed,
            param,
            eval: memo.get((h_fixed, param)).expect("just evaluated"),
        })
        .collect())
}

fn best_feasible(records: &[CandidateRecord], budget: usize) -> Option<CandidateRecord> {
    records
        .iter()
        .filter(|r| r.eval.size <= budget)
        .fold(None, |best: Option<CandidateRecord>, r| match best {
            Some(b) if !better(r, &b) => Some(b),
            _ => Some(*r),
        })
}

fn geometric_mid(a: u16, b: u16) -> u16 {
    h_to_fixed((fixed_to_h(a) * fixed_to_h(b)).sqrt())
}

/// Coarse grid search followed by bisection on `h`. Returns `None` when no
/// candidate fits the budget.
pub fn grid_search<F>(
    h_grid: &[u16],
    params: &[u16],
    budget: usize,
    refine_steps: usize,
    memo: &Memo,
    eval: &F,
) -> Result<Option<CandidateRecord>>
where
    F: Fn(u16, u16) -> Result<Evaluation> + Sync,
{
    let keys: Vec<(u16, u16)> = h_grid
        .iter()
        .flat_map(|&h| params.iter().map(move |&p| (h, p)))
        .collect();
    let coarse = evaluate_all(&keys, memo, eval)?;
    let Some(mut best) = best_feasible(&coarse, budget) else {
        return Ok(None);
    };
    let idx = h_grid.iter().position(|&h| h == best.h_fixed).expect("winner on grid");
    let mut lo = h_grid[idx.saturating_sub(1)];
    let mut hi = h_grid[(idx + 1).min(h_grid.len() - 1)];
    for _ in 0..refine_steps {
        let m1 = geometric_mid(lo, best.h_fixed);
        let m2 = geometric_mid(best.h_fixed, hi);
        let probes: Vec<(u16, u16)> = [m1, m2]
            .into_iter()
            .filter(|&m| m != best.h_fixed && m != lo && m != hi)
            .map(|m| (m, best.param))
            .collect();
        if probes.is_empty() {
            break;
        }
        let found = evaluate_all(&probes, memo, eval)?;
        let prev = best.h_fixed;
        if let Some(c) = best_feasible(&found, budget).filter(|c| better(c, &best)) {
            best = c;
        }
        if best.h_fixed == m1 && m1 != prev {
            hi = prev;
        } else if best.h_fixed == m2 && m2 != prev {
            lo = prev;
        } else {
            lo = m1.max(lo);
            hi = m2.min(hi);
        }
    }
    Ok(Some(best))
}
