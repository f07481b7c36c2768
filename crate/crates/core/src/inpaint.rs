//! Shepard interpolation with a truncated Gaussian kernel.
//!
//! Reconstruction is a normalised weighted average of the known pixels. The
//! numerator and denominator live in an [`AccumulatorField`] so that points can
//! be added one at a time during progressive decoding.

use crate::error::{Error, Result};
use crate::image::PixelCoord;

/// Value used where no known pixel reaches.
pub const FALLBACK: f64 = 128.0;

/// Kernel support in units of sigma.
pub const TRUNCATION_SIGMAS: f64 = 4.0;

/// `sqrt(w*h / (pi*|K|))`.
pub fn compute_sigma(width: usize, height: usize, mask_size: usize) -> Result<f64> {
    if mask_size == 0 {
        return Err(Error::contract("sigma needs at least one mask pixel"));
    }
    Ok(((width * height) as f64 / (std::f64::consts::PI * mask_size as f64)).sqrt())
}

/// Truncated Gaussian weights, tabulated on the integer offset lattice.
#[derive(Debug, Clone)]
pub struct ShepardWeights {
    sigma: f64,
    radius: usize,
    side: usize,
    table: Vec<f64>,
}

impl ShepardWeights {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::contract(format!("sigma must be positive, got {sigma}")));
        }
        let cutoff = TRUNCATION_SIGMAS * sigma;
        let radius = cutoff.ceil() as usize;
        let side = 2 * radius + 1;
        let mut table = vec![0.0; side * side];
        let r = radius as i64;
        let two_var = 2.0 * sigma * sigma;
        for dy in -r..=r {
            for dx in -r..=r {
                let d2 = (dx * dx + dy * dy) as f64;
                if d2.sqrt() <= cutoff {
                    table[((dy + r) as usize) * side + (dx + r) as usize] = (-d2 / two_var).exp();
                }
            }
        }
        Ok(Self {
            sigma,
            radius,
            side,
            table,
        })
    }

    /// Weights for the sigma implied by the mask density.
    pub fn for_mask(width: usize, height: usize, mask_size: usize) -> Result<Self> {
        Self::new(compute_sigma(width, height, mask_size)?)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn truncation_radius(&self) -> f64 {
        TRUNCATION_SIGMAS * self.sigma
    }

    /// Half-width of the tabulated window in pixels.
    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Weight at integer offset `(dx, dy)`; zero outside the truncation radius.
    pub fn weight(&self, dx: i64, dy: i64) -> f64 {
        let r = self.radius as i64;
        if dx.abs() > r || dy.abs() > r {
            return 0.0;
        }
        self.table[((dy + r) as usize) * self.side + (dx + r) as usize]
    }

    /// One row of the table, offset `dy`, covering `dx` in `-radius..=radius`.
    pub(crate) fn row(&self, dy: i64) -> &[f64] {
        let start = ((dy + self.radius as i64) as usize) * self.side;
        &self.table[start..start + self.side]
    }
}

/// Window of pixels a kernel centred at `p` can touch, clipped to the image.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Window {
    pub x0: usize,
    pub x1: usize,
    pub y0: usize,
    pub y1: usize,
}

impl Window {
    pub fn around(p: PixelCoord, radius: usize, width: usize, height: usize) -> Self {
        Self {
            x0: p.x.saturating_sub(radius),
            x1: (p.x + radius).min(width - 1),
            y0: p.y.saturating_sub(radius),
            y1: (p.y + radius).min(height - 1),
        }
    }
}

/// Known pixel positions with channel-major values.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownPixels {
    positions: Vec<PixelCoord>,
    values: Vec<Vec<f64>>,
}

impl KnownPixels {
    /// `values[c][i]` is channel `c` at `positions[i]`.
    pub fn new(positions: Vec<PixelCoord>, values: Vec<Vec<f64>>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::contract("known pixel set is empty"));
        }
        if values.is_empty() || values.iter().any(|v| v.len() != positions.len()) {
            return Err(Error::contract("value lists must align with positions"));
        }
        let mut sorted = positions.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::contract("duplicate known positions"));
        }
        Ok(Self { positions, values })
    }

    pub fn positions(&self) -> &[PixelCoord] {
        &self.positions
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn channels(&self) -> usize {
        self.values.len()
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn value(&self, i: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[i]).collect()
    }
}

/// Shepard numerators `v` (one plane per channel) and the shared denominator `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct AccumulatorField {
    width: usize,
    height: usize,
    v: Vec<Vec<f64>>,
    w: Vec<f64>,
}

impl AccumulatorField {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            v: vec![vec![0.0; n]; channels],
            w: vec![0.0; n],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.v.len()
    }

    pub fn numerator(&self, c: usize) -> &[f64] {
        &self.v[c]
    }

    pub fn denominator(&self) -> &[f64] {
        &self.w
    }

    /// Adds a known pixel's kernel contribution over its window.
    pub fn add_known_pixel(&mut self, pos: PixelCoord, value: &[f64], weights: &ShepardWeights) {
        debug_assert_eq!(value.len(), self.v.len());
        self.add_scaled(pos, value, 1.0, weights);
    }

    /// Adds `value * w(. - pos)` to the numerators only.
    pub(crate) fn shift_numerator(&mut self, pos: PixelCoord, delta: &[f64], weights: &ShepardWeights) {
        self.add_scaled(pos, delta, 0.0, weights);
    }

    fn add_scaled(&mut self, pos: PixelCoord, value: &[f64], weight_gain: f64, weights: &ShepardWeights) {
        let r = weights.radius();
        let win = Window::around(pos, r, self.width, self.height);
        for y in win.y0..=win.y1 {
            let row = weights.row(y as i64 - pos.y as i64);
            let k0 = win.x0 + r - pos.x;
            let ks = &row[k0..k0 + (win.x1 - win.x0 + 1)];
            let base = y * self.width;
            if weight_gain != 0.0 {
                for (acc, &k) in self.w[base + win.x0..=base + win.x1].iter_mut().zip(ks) {
                    *acc += k;
                }
            }
            for (plane, &val) in self.v.iter_mut().zip(value) {
                if val == 0.0 {
                    continue;
                }
                for (acc, &k) in plane[base + win.x0..=base + win.x1].iter_mut().zip(ks) {
                    *acc += k * val;
                }
            }
        }
    }

    /// `v/W` per channel, or [`FALLBACK`] where `W = 0`.
    pub fn predict_at(&self, pos: PixelCoord) -> Vec<f64> {
        let mut out = vec![0.0; self.v.len()];
        self.predict_into(pos.y * self.width + pos.x, &mut out);
        out
    }

    pub(crate) fn predict_into(&self, idx: usize, out: &mut [f64]) {
        let w = self.w[idx];
        for (o, plane) in out.iter_mut().zip(&self.v) {
            *o = if w > 0.0 { plane[idx] / w } else { FALLBACK };
        }
    }

    /// Full reconstruction: known pixels copied, the rest `v/W`.
    pub fn reconstruct(&self, known: &KnownPixels) -> Vec<Vec<f64>> {
        let mut planes: Vec<Vec<f64>> = self
            .v
            .iter()
            .map(|plane| {
                plane
                    .iter()
                    .zip(&self.w)
                    .map(|(&v, &w)| if w > 0.0 { v / w } else { FALLBACK })
                    .collect()
            })
            .collect();
        for (i, p) in known.positions().iter().enumerate() {
            let idx = p.y * self.width + p.x;
            for (c, plane) in planes.iter_mut().enumerate() {
                plane[idx] = known.values()[c][i];
            }
        }
        planes
    }
}

/// Batch Shepard inpainting. Returns one plane per channel of `known`.
pub fn shepard_inpaint(
    known: &KnownPixels,
    width: usize,
    height: usize,
    weights: &ShepardWeights,
) -> Result<Vec<Vec<f64>>> {
    if known.is_empty() {
        return Err(Error::contract("empty mask"));
    }
    if let Some(p) = known.positions().iter().find(|p| p.x >= width || p.y >= height) {
        return Err(Error::contract(format!("known pixel {p:?} out of bounds")));
    }
    let mut acc = AccumulatorField::new(width, height, known.channels());
    let mut value = vec![0.0; known.channels()];
    for (i, &p) in known.positions().iter().enumerate() {
        for (c, v) in value.iter_mut().enumerate() {
            *v = known.values()[c][i];
        }
        acc.add_known_pixel(p, &value, weights);
    }
    Ok(acc.reconstruct(known))
}
