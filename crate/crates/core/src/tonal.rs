//! Tonal optimisation: adjusting stored mask values (not positions) to lower
//! the reconstruction error.
//!
//! Because the kernel is truncated, changing the value at mask pixel `i` only
//! affects pixels inside its window. For a change `d` of that value, a
//! non-mask pixel `j` moves by `d * w_ij / W_j`, so the local squared error is
//! a quadratic in `d` and its minimiser has a closed form:
//!
//! ```text
//! u_new = u_old + sum_j (w_ij/W_j) (f_j - v_j/W_j) / sum_j (w_ij/W_j)^2
//! ```
//!
//! The direct optimiser first solves the problem over the reals and rounds
//! the result to admissible values (kept only if it helps), then runs
//! coordinate descent. Each step minimises this error plus the pixel's own squared
//! error, whose curvature is the same in every channel, so projecting the
//! minimiser onto the nearest level or codebook centre is exact. Moves are
//! kept only if the error strictly drops. The random
//! walk baseline instead tries neighbouring quantisation levels.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::PixelCoord;
use crate::inpaint::{AccumulatorField, ShepardWeights, Window, FALLBACK};
use crate::quantize::{assign_nearest, Codebook, UniformQuantizer};

/// Default sweep cap.
pub const DEFAULT_MAX_SWEEPS: usize = 30;

/// Moves must lower the squared error by more than this to count.
const MIN_GAIN: f64 = 1e-9;

/// Values a mask pixel may hold.
#[derive(Debug, Clone)]
pub enum Admissible {
    /// Unconstrained reals.
    Reals,
    /// Per-channel levels of a uniform quantiser.
    Scalar {
        quantizer: UniformQuantizer,
        levels: Vec<Vec<u16>>,
    },
    /// One palette index per mask pixel; requires three channels.
    Vector { codebook: Codebook, labels: Vec<usize> },
}

/// Stored values, their target image and the Shepard accumulator that links them.
#[derive(Debug, Clone)]
pub struct TonalProblem {
    width: usize,
    height: usize,
    positions: Vec<PixelCoord>,
    values: Vec<Vec<f64>>,
    target: Vec<Vec<f64>>,
    weights: ShepardWeights,
    admissible: Admissible,
    acc: AccumulatorField,
    is_mask: Vec<bool>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TonalReport {
    pub sweeps: usize,
    pub accepted: usize,
    /// Squared error before the first sweep and after each sweep.
    pub sse_history: Vec<f64>,
}

impl TonalProblem {
    fn build(
        width: usize,
        height: usize,
        positions: Vec<PixelCoord>,
        values: Vec<Vec<f64>>,
        target: Vec<Vec<f64>>,
        weights: ShepardWeights,
        admissible: Admissible,
    ) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::contract("tonal problem needs mask pixels"));
        }
        if values.len() != target.len() || values.iter().any(|v| v.len() != positions.len()) {
            return Err(Error::contract("values must have one entry per channel and mask pixel"));
        }
        if target.iter().any(|t| t.len() != width * height) {
            return Err(Error::contract("target planes must cover the image"));
        }
        let mut is_mask = vec![false; width * height];
        for p in &positions {
            if p.x >= width || p.y >= height {
                return Err(Error::contract(format!("mask pixel {p:?} out of bounds")));
            }
            let idx = p.y * width + p.x;
            if is_mask[idx] {
                return Err(Error::contract(format!("duplicate mask pixel {p:?}")));
            }
            is_mask[idx] = true;
        }
        let mut problem = Self {
            width,
            height,
            positions,
            values,
            acc: AccumulatorField::new(width, height, target.len()),
            target,
            weights,
            admissible,
            is_mask,
        };
        problem.rebuild_accumulator();
        Ok(problem)
    }

    /// Unconstrained values.
    pub fn reals(
        width: usize,
        height: usize,
        positions: Vec<PixelCoord>,
        values: Vec<Vec<f64>>,
        target: Vec<Vec<f64>>,
        weights: ShepardWeights,
    ) -> Result<Self> {
        Self::build(width, height, positions, values, target, weights, Admissible::Reals)
    }

    /// Scalar levels, `levels[c][i]` for channel `c` of mask pixel `i`.
    pub fn scalar(
        width: usize,
        height: usize,
        positions: Vec<PixelCoord>,
        levels: Vec<Vec<u16>>,
        quantizer: UniformQuantizer,
        target: Vec<Vec<f64>>,
        weights: ShepardWeights,
    ) -> Result<Self> {
        if levels.iter().flatten().any(|&l| l >= quantizer.levels()) {
            return Err(Error::contract("level outside quantiser range"));
        }
        let values = levels
            .iter()
            .map(|ch| ch.iter().map(|&l| quantizer.value_of(l)).collect())
            .collect();
        Self::build(
            width,
            height,
            positions,
            values,
            target,
            weights,
            Admissible::Scalar { quantizer, levels },
        )
    }

    /// Palette labels against a three-channel target.
    pub fn vector(
        width: usize,
        height: usize,
        positions: Vec<PixelCoord>,
        labels: Vec<usize>,
        codebook: Codebook,
        target: Vec<Vec<f64>>,
        weights: ShepardWeights,
    ) -> Result<Self> {
        if target.len() != 3 {
            return Err(Error::contract("vector mode needs three channels"));
        }
        if labels.len() != positions.len() || labels.iter().any(|&l| l >= codebook.len()) {
            return Err(Error::contract(
                "labels must align with positions and index the codebook",
            ));
        }
        let values = (0..3)
            .map(|c| labels.iter().map(|&l| codebook.center(l)[c]).collect())
            .collect();
        Self::build(
            width,
            height,
            positions,
            values,
            target,
            weights,
            Admissible::Vector { codebook, labels },
        )
    }

    pub fn channels(&self) -> usize {
        self.target.len()
    }

    pub fn positions(&self) -> &[PixelCoord] {
        &self.positions
    }

    /// Current stored values, channel-major.
    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn admissible(&self) -> &Admissible {
        &self.admissible
    }

    pub fn accumulator(&self) -> &AccumulatorField {
        &self.acc
    }

    pub fn weights(&self) -> &ShepardWeights {
        &self.weights
    }

    /// Recomputes the accumulator from the stored values.
    pub fn rebuild_accumulator(&mut self) {
        let mut acc = AccumulatorField::new(self.width, self.height, self.channels());
        let mut value = vec![0.0; self.channels()];
        for (i, &p) in self.positions.iter().enumerate() {
            for (c, v) in value.iter_mut().enumerate() {
                *v = self.values[c][i];
            }
            acc.add_known_pixel(p, &value, &self.weights);
        }
        self.acc = acc;
    }

    /// Reconstruction of every channel from the current values.
    pub fn reconstruction(&self) -> Vec<Vec<f64>> {
        let mut planes: Vec<Vec<f64>> = (0..self.channels())
            .map(|c| {
                self.acc
                    .numerator(c)
                    .iter()
                    .zip(self.acc.denominator())
                    .map(|(&v, &w)| if w > 0.0 { v / w } else { FALLBACK })
                    .collect()
            })
            .collect();
        for (i, p) in self.positions.iter().enumerate() {
            for (c, plane) in planes.iter_mut().enumerate() {
                plane[p.y * self.width + p.x] = self.values[c][i];
            }
        }
        planes
    }

    /// Squared error over every pixel and channel.
    pub fn sse(&self) -> f64 {
        self.reconstruction()
            .iter()
            .zip(&self.target)
            .map(|(r, f)| crate::image::plane_sse(r, f))
            .sum()
    }

    pub fn mse(&self) -> f64 {
        self.sse() / (self.channels() * self.width * self.height) as f64
    }

    /// Window sums for mask pixel `i`: `A1[c] = sum a_j r_jc` and `A2 = sum a_j^2`,
    /// where `a_j = w_ij / W_j` and `r_j` is the current residual at non-mask `j`.
    fn window_sums(&self, i: usize, a1: &mut [f64]) -> f64 {
        let p = self.positions[i];
        let r = self.weights.radius();
        let win = Window::around(p, r, self.width, self.height);
        a1.iter_mut().for_each(|s| *s = 0.0);
        let mut a2 = 0.0;
        let den = self.acc.denominator();
        for y in win.y0..=win.y1 {
            let row = self.weights.row(y as i64 - p.y as i64);
            let base = y * self.width;
            for x in win.x0..=win.x1 {
                let w = row[x + r - p.x];
                let j = base + x;
                if w == 0.0 || self.is_mask[j] || den[j] <= 0.0 {
                    continue;
                }
                let a = w / den[j];
                a2 += a * a;
                for (c, s) in a1.iter_mut().enumerate() {
                    let resid = self.acc.numerator(c)[j] / den[j] - self.target[c][j];
                    *s += a * resid;
                }
            }
        }
        a2
    }

    /// Unconstrained minimiser of the window error for pixel `i`, all channels.
    pub fn optimal_values(&self, i: usize) -> Vec<f64> {
        let mut a1 = vec![0.0; self.channels()];
        let a2 = self.window_sums(i, &mut a1);
        (0..self.channels())
            .map(|c| {
                let old = self.values[c][i];
                if a2 > 0.0 {
                    old - a1[c] / a2
                } else {
                    old
                }
            })
            .collect()
    }

    /// Unconstrained minimiser of the window error for pixel `i`, channel `c`.
    pub fn optimal_value(&self, i: usize, channel: usize) -> f64 {
        self.optimal_values(i)[channel]
    }

    /// Error change (window plus the pixel itself) if channel `c` of pixel `i` moves by `d`.
    fn gain(&self, i: usize, c: usize, d: f64, a1: &[f64], a2: f64) -> f64 {
        let idx = self.positions[i].y * self.width + self.positions[i].x;
        let old = self.values[c][i] - self.target[c][idx];
        let new = old + d;
        2.0 * d * a1[c] + d * d * a2 + new * new - old * old
    }

    fn apply(&mut self, i: usize, delta: &[f64]) {
        for (c, d) in delta.iter().enumerate() {
            self.values[c][i] += d;
        }
        let p = self.positions[i];
        self.acc.shift_numerator(p, delta, &self.weights);
    }
}

impl TonalProblem {
    /// Solves the unconstrained problem, then rounds every value to its nearest
    /// admissible one. Kept only if that lowers the error. Returns whether it was kept.
    fn relaxed_start(&mut self, max_sweeps: usize) -> bool {
        if matches!(self.admissible, Admissible::Reals) {
            return false;
        }
        let mut relaxed = self.clone();
        relaxed.admissible = Admissible::Reals;
        tonal_optimize_local(&mut relaxed, max_sweeps);
        let mut candidate = self.clone();
        match &mut candidate.admissible {
            Admissible::Reals => unreachable!(),
            Admissible::Scalar { quantizer, levels } => {
                for (c, ch) in levels.iter_mut().enumerate() {
                    for (i, l) in ch.iter_mut().enumerate() {
                        *l = quantizer.level_of(relaxed.values[c][i]);
                        candidate.values[c][i] = quantizer.value_of(*l);
                    }
                }
            }
            Admissible::Vector { codebook, labels } => {
                for (i, l) in labels.iter_mut().enumerate() {
                    *l = assign_nearest(
                        [relaxed.values[0][i], relaxed.values[1][i], relaxed.values[2][i]],
                        codebook,
                    );
                    let centre = codebook.center(*l);
                    for (plane, v) in candidate.values.iter_mut().zip(centre) {
                        plane[i] = v;
                    }
                }
            }
        }
        candidate.rebuild_accumulator();
        if candidate.sse() < self.sse() - MIN_GAIN {
            *self = candidate;
            true
        } else {
            false
        }
    }
}

/// Direct tonal optimisation: a relaxed warm start (solve over the reals,
/// round to admissible values) followed by [`tonal_optimize_local`].
pub fn tonal_optimize_direct(problem: &mut TonalProblem, max_sweeps: usize) -> TonalReport {
    let before = problem.sse();
    let warm = problem.relaxed_start(max_sweeps);
    let mut report = tonal_optimize_local(problem, max_sweeps);
    if warm {
        report.sse_history.insert(0, before);
        report.accepted += 1;
    }
    report
}

/// Closed-form coordinate descent with projection onto the admissible set.
pub fn tonal_optimize_local(problem: &mut TonalProblem, max_sweeps: usize) -> TonalReport {
    let channels = problem.channels();
    let mut report = TonalReport {
        sse_history: vec![problem.sse()],
        ..TonalReport::default()
    };
    let mut a1 = vec![0.0; channels];
    let mut delta = vec![0.0; channels];
    for _ in 0..max_sweeps {
        let mut changed = 0;
        for i in 0..problem.positions.len() {
            let a2 = problem.window_sums(i, &mut a1);
            let p = problem.positions[i];
            let own = p.y * problem.width + p.x;
            // the pixel's own error adds 1 to the curvature, equally in every channel
            let optimum: Vec<f64> = (0..channels)
                .map(|c| {
                    let u = problem.values[c][i];
                    u - (a1[c] + u - problem.target[c][own]) / (a2 + 1.0)
                })
                .collect();
            match &problem.admissible {
                Admissible::Reals => {
                    for c in 0..channels {
                        delta[c] = optimum[c] - problem.values[c][i];
                        if problem.gain(i, c, delta[c], &a1, a2) >= -MIN_GAIN {
                            delta[c] = 0.0;
                        }
                    }
                    if delta.iter().any(|&d| d != 0.0) {
                        problem.apply(i, &delta);
                        changed += 1;
                    }
                }
                Admissible::Scalar { quantizer, .. } => {
                    let quantizer = *quantizer;
                    let mut moved = false;
                    for c in 0..channels {
                        let level = quantizer.level_of(optimum[c]);
                        delta[c] = quantizer.value_of(level) - problem.values[c][i];
                        if delta[c] != 0.0 && problem.gain(i, c, delta[c], &a1, a2) < -MIN_GAIN {
                            if let Admissible::Scalar { levels, .. } = &mut problem.admissible {
                                levels[c][i] = level;
                            }
                            moved = true;
                        } else {
                            delta[c] = 0.0;
                        }
                    }
                    if moved {
                        problem.apply(i, &delta);
                        changed += 1;
                    }
                }
                Admissible::Vector { codebook, labels } => {
                    let target = [optimum[0], optimum[1], optimum[2]];
                    let label = assign_nearest(target, codebook);
                    if label == labels[i] {
                        continue;
                    }
                    let centre = codebook.center(label);
                    let mut total = 0.0;
                    for c in 0..3 {
                        delta[c] = centre[c] - problem.values[c][i];
                        total += problem.gain(i, c, delta[c], &a1, a2);
                    }
                    if total < -MIN_GAIN {
                        if let Admissible::Vector { labels, .. } = &mut problem.admissible {
                            labels[i] = label;
                        }
                        problem.apply(i, &delta);
                        changed += 1;
                    }
                }
            }
        }
        report.sweeps += 1;
        report.accepted += changed;
        report.sse_history.push(problem.sse());
        if changed == 0 {
            break;
        }
    }
    report
}

/// Baseline: seeded random passes over every (pixel, channel) pair, trying
/// the neighbouring quantisation levels and keeping strict improvements.
pub fn tonal_optimize_random_walk(problem: &mut TonalProblem, seed: u64, max_sweeps: usize) -> Result<TonalReport> {
    let quantizer = match &problem.admissible {
        Admissible::Scalar { quantizer, .. } => *quantizer,
        _ => return Err(Error::contract("random-walk tonal optimisation needs scalar levels")),
    };
    let channels = problem.channels();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<(usize, usize)> = (0..problem.positions.len())
        .flat_map(|i| (0..channels).map(move |c| (i, c)))
        .collect();
    let mut report = TonalReport {
        sse_history: vec![problem.sse()],
        ..TonalReport::default()
    };
    let mut a1 = vec![0.0; channels];
    let mut delta = vec![0.0; channels];
    for _ in 0..max_sweeps {
        order.shuffle(&mut rng);
        let mut changed = 0;
        for &(i, c) in &order {
            let level = match &problem.admissible {
                Admissible::Scalar { levels, .. } => levels[c][i],
                _ => unreachable!(),
            };
            let a2 = problem.window_sums(i, &mut a1);
            let mut best: Option<(u16, f64, f64)> = None;
            for cand in [
                level.checked_sub(1),
                level.checked_add(1).filter(|&l| l < quantizer.levels()),
            ]
            .into_iter()
            .flatten()
            {
                let d = quantizer.value_of(cand) - problem.values[c][i];
                let g = problem.gain(i, c, d, &a1, a2);
                if g < -MIN_GAIN && best.is_none_or(|b| g < b.2) {
                    best = Some((cand, d, g));
                }
            }
            if let Some((cand, d, _)) = best {
                delta.iter_mut().for_each(|x| *x = 0.0);
                delta[c] = d;
                if let Admissible::Scalar { levels, .. } = &mut problem.admissible {
                    levels[c][i] = cand;
                }
                problem.apply(i, &delta);
                changed += 1;
            }
        }
        report.sweeps += 1;
        report.accepted += changed;
        report.sse_history.push(problem.sse());
        if changed == 0 {
            break;
        }
    }
    Ok(report)
}
