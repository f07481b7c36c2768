//! Regular-grid masks and their canonical (row-major) coding order.

use crate::error::{Error, Result};
use crate::image::PixelCoord;

/// Fractional bits of the stored grid spacing.
pub const H_FRAC_BITS: u32 = 8;
const H_SCALE: f64 = (1u32 << H_FRAC_BITS) as f64;

/// A regular grid with real spacing `h`, anchored at the origin.
///
/// `h` is held in 8.8 fixed point so that an encoder and a decoder reading the
/// header agree on it exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RegularGrid {
    width: usize,
    height: usize,
    h_fixed: u16,
}

impl RegularGrid {
    /// Rounds `h` to the nearest representable spacing and validates it.
    pub fn new(width: usize, height: usize, h: f64) -> Result<Self> {
        if !h.is_finite() || !(1.0..=255.0).contains(&h) {
            return Err(Error::contract(format!("grid spacing {h} not representable")));
        }
        Self::from_fixed(width, height, h_to_fixed(h))
    }

    pub fn from_fixed(width: usize, height: usize, h_fixed: u16) -> Result<Self> {
        let h = fixed_to_h(h_fixed);
        let limit = width.min(height) as f64;
        if width == 0 || height == 0 || h < 1.0 || h > limit {
            return Err(Error::contract(format!(
                "grid spacing {h} outside [1, {limit}] for a {width}x{height} image"
            )));
        }
        Ok(Self { width, height, h_fixed })
    }

    pub fn h(&self) -> f64 {
        fixed_to_h(self.h_fixed)
    }

    pub fn h_fixed(&self) -> u16 {
        self.h_fixed
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cols(&self) -> usize {
        axis_count(self.width, self.h())
    }

    pub fn rows(&self) -> usize {
        axis_count(self.height, self.h())
    }

    pub fn len(&self) -> usize {
        self.rows() * self.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid points in row-major order; entry `r * cols + c` sits at grid cell `(r, c)`.
    pub fn points(&self) -> Vec<PixelCoord> {
        let h = self.h();
        let xs: Vec<usize> = axis_positions(self.width, h).collect();
        let mut out = Vec::with_capacity(self.len());
        for y in axis_positions(self.height, h) {
            out.extend(xs.iter().map(|&x| PixelCoord::new(x, y)));
        }
        out
    }
}

pub fn h_to_fixed(h: f64) -> u16 {
    (h * H_SCALE).round().clamp(0.0, f64::from(u16::MAX)) as u16
}

pub fn fixed_to_h(h_fixed: u16) -> f64 {
    f64::from(h_fixed) / H_SCALE
}

fn axis_positions(n: usize, h: f64) -> impl Iterator<Item = usize> {
    (0..)
        .map(move |i| (i as f64 * h).round() as usize)
        .take_while(move |&p| p < n)
}

fn axis_count(n: usize, h: f64) -> usize {
    // round(i*h) <= n-1  <=>  i*h < n - 0.5 (ties round up)
    let bound = n as f64 - 0.5;
    let mut count = (bound / h).ceil() as usize;
    while count > 0 && ((count - 1) as f64 * h).round() as usize >= n {
        count -= 1;
    }
    while ((count as f64) * h).round() < n as f64 {
        count += 1;
    }
    count
}

/// Ordered grid points for spacing `h` (rounded to the stored precision).
pub fn build_regular_mask(width: usize, height: usize, h: f64) -> Result<Vec<PixelCoord>> {
    Ok(RegularGrid::new(width, height, h)?.points())
}

/// `build_regular_mask(..).len()` without building the list.
pub fn mask_size_for(width: usize, height: usize, h: f64) -> Result<usize> {
    Ok(RegularGrid::new(width, height, h)?.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use std::collections::HashSet;

    #[test]
    fn unit_spacing_covers_everything() {
        let pts = build_regular_mask(5, 3, 1.0).unwrap();
        assert_eq!(pts.len(), 15);
        assert_eq!(mask_size_for(5, 3, 1.0).unwrap(), 15);
    }

    #[test]
    fn four_by_four_h2() {
        let pts = build_regular_mask(4, 4, 2.0).unwrap();
        let want = [(0, 0), (2, 0), (0, 2), (2, 2)].map(|(x, y)| PixelCoord::new(x, y));
        assert_eq!(pts, want);
    }

    #[test]
    fn out_of_range_h() {
        assert!(build_regular_mask(4, 4, 0.5).is_err());
        assert!(build_regular_mask(4, 4, 4.5).is_err());
        assert!(build_regular_mask(4, 8, f64::NAN).is_err());
        assert!(build_regular_mask(4, 4, 4.0).is_ok());
    }

    #[test]
    fn size_matches_enumeration() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let w = rng.gen_range(1..200);
            let hgt = rng.gen_range(1..200);
            let h = rng.gen_range(1.0..=w.min(hgt) as f64);
            let Ok(grid) = RegularGrid::new(w, hgt, h) else {
                continue;
            };
            // enumeration oracle: every (i, j) with in-bounds rounded coordinates
            let hq = grid.h();
            let mut set = HashSet::new();
            for j in 0..=hgt {
                for i in 0..=w {
                    let (x, y) = ((i as f64 * hq).round() as usize, (j as f64 * hq).round() as usize);
                    if x < w && y < hgt {
                        set.insert((x, y));
                    }
                }
            }
            let pts = grid.points();
            assert_eq!(pts.len(), set.len());
            assert_eq!(grid.len(), set.len());
            assert_eq!(pts.iter().collect::<HashSet<_>>().len(), pts.len());
        }
    }

    #[test]
    fn largest_spacing() {
        // h = min dim on a 7x5 image: x in {0, 5}, y in {0}
        assert_eq!(mask_size_for(7, 5, 5.0).unwrap(), 2);
        assert_eq!(mask_size_for(10, 10, 10.0).unwrap(), 1);
        assert_eq!(mask_size_for(2, 2, 2.0).unwrap(), 1);
    }

    #[test]
    fn size_non_increasing_in_h() {
        let mut last = usize::MAX;
        let mut h = 1.0;
        while h <= 64.0 {
            let n = mask_size_for(100, 64, h).unwrap();
            assert!(n <= last, "h={h}");
            last = n;
            h += 1.0 / 64.0;
        }
    }

    #[test]
    fn fixed_point_roundtrip() {
        for raw in 256..=u16::MAX {
            assert_eq!(h_to_fixed(fixed_to_h(raw)), raw);
        }
    }

    #[test]
    fn row_major_order() {
        let grid = RegularGrid::new(10, 7, 3.0).unwrap();
        let pts = grid.points();
        assert_eq!((grid.rows(), grid.cols()), (3, 4));
        assert_eq!(pts[grid.cols()], PixelCoord::new(0, 3));
        assert!(pts.windows(2).all(|w| (w[0].y, w[0].x) < (w[1].y, w[1].x)));
    }
}
