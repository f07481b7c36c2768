//! Raster images, binary PPM I/O, BT.601 colour conversion and error metrics.
//!
//! Samples are kept as `f64` in `[0, 255]`. Rounding to integers only happens
//! when writing files or quantising.

use std::collections::HashSet;
use std::sync::OnceLock;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColorSpace {
    Rgb,
    YCbCr,
}

/// A pixel position. `x` is the column, `y` the row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PixelCoord {
    pub x: usize,
    pub y: usize,
}

impl PixelCoord {
    pub fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

/// Three planes of row-major tonal values plus a colour-space tag.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    planes: [Vec<f64>; 3],
    space: ColorSpace,
}

impl RasterImage {
    /// Builds an image, checking plane lengths and the sample range.
    pub fn new(width: usize, height: usize, planes: [Vec<f64>; 3], space: ColorSpace) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::contract("image dimensions must be positive"));
        }
        let n = width * height;
        for (c, p) in planes.iter().enumerate() {
            if p.len() != n {
                return Err(Error::contract(format!(
                    "plane {c} has {} samples, expected {n}",
                    p.len()
                )));
            }
            if let Some(v) = p.iter().find(|v| !(0.0..=255.0).contains(*v)) {
                return Err(Error::contract(format!("plane {c} sample {v} outside [0, 255]")));
            }
        }
        Ok(Self {
            width,
            height,
            planes,
            space,
        })
    }

    /// A constant image, mostly useful in tests.
    pub fn filled(width: usize, height: usize, color: [f64; 3], space: ColorSpace) -> Result<Self> {
        let n = width * height;
        Self::new(
            width,
            height,
            [vec![color[0]; n], vec![color[1]; n], vec![color[2]; n]],
            space,
        )
    }

    /// Builds an RGB image from interleaved 8-bit samples.
    pub fn from_rgb8(width: usize, height: usize, data: &[u8]) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::contract("interleaved buffer length mismatch"));
        }
        let mut planes = [
            Vec::with_capacity(width * height),
            Vec::with_capacity(width * height),
            Vec::with_capacity(width * height),
        ];
        for px in data.chunks_exact(3) {
            for c in 0..3 {
                planes[c].push(f64::from(px[c]));
            }
        }
        Self::new(width, height, planes, ColorSpace::Rgb)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn space(&self) -> ColorSpace {
        self.space
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        &self.planes[c]
    }

    pub fn planes(&self) -> &[Vec<f64>; 3] {
        &self.planes
    }

    pub fn into_planes(self) -> [Vec<f64>; 3] {
        self.planes
    }

    pub fn index(&self, p: PixelCoord) -> usize {
        p.y * self.width + p.x
    }

    pub fn pixel(&self, p: PixelCoord) -> [f64; 3] {
        let i = self.index(p);
        [self.planes[0][i], self.planes[1][i], self.planes[2][i]]
    }

    /// Interleaved samples rounded to the nearest integer.
    pub fn to_rgb8(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.len() * 3);
        for i in 0..self.len() {
            for c in 0..3 {
                out.push(to_u8(self.planes[c][i]));
            }
        }
        out
    }

    /// Number of distinct 8-bit colour triples after rounding.
    pub fn distinct_colors(&self) -> usize {
        let mut seen = HashSet::with_capacity(self.len());
        for i in 0..self.len() {
            let key = u32::from(to_u8(self.planes[0][i])) << 16
                | u32::from(to_u8(self.planes[1][i])) << 8
                | u32::from(to_u8(self.planes[2][i]));
            seen.insert(key);
        }
        seen.len()
    }
}

pub(crate) fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Parses a binary P6 PPM with maxval 255.
pub fn load_ppm(bytes: &[u8]) -> Result<RasterImage> {
    let mut pos = 0;
    if bytes.len() < 2 || &bytes[..2] != b"P6" {
        return Err(Error::Parse {
            offset: 0,
            msg: "missing P6 magic".into(),
        });
    }
    pos += 2;
    let (width, _) = read_header_int(bytes, &mut pos)?;
    let (height, _) = read_header_int(bytes, &mut pos)?;
    let (maxval, maxval_at) = read_header_int(bytes, &mut pos)?;
    if maxval != 255 {
        return Err(Error::Parse {
            offset: maxval_at,
            msg: format!("unsupported maxval {maxval}"),
        });
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => {
            return Err(Error::Parse {
                offset: pos,
                msg: "expected whitespace after maxval".into(),
            })
        }
    }
    if width == 0 || height == 0 {
        return Err(Error::Parse {
            offset: pos,
            msg: "zero image dimension".into(),
        });
    }
    let need = width * height * 3;
    let have = bytes.len() - pos;
    if have < need {
        return Err(Error::Parse {
            offset: bytes.len(),
            msg: format!("truncated payload: {have} of {need} bytes"),
        });
    }
    RasterImage::from_rgb8(width, height, &bytes[pos..pos + need])
}

/// Reads one decimal field, returning it with its starting offset.
fn read_header_int(bytes: &[u8], pos: &mut usize) -> Result<(usize, usize)> {
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            }
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            _ => break,
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(u8::is_ascii_digit) {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Parse {
            offset: start,
            msg: "expected a decimal header field".into(),
        });
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .map(|v| (v, start))
        .ok_or_else(|| Error::Parse {
            offset: start,
            msg: "header field out of range".into(),
        })
}

/// Serialises as `P6\n<w> <h>\n255\n` followed by rounded samples.
pub fn save_ppm(img: &RasterImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.to_rgb8());
    out
}

const RGB_TO_YCBCR: [[f64; 3]; 3] = [
    [0.299, 0.587, 0.114],
    [-0.168736, -0.331264, 0.5],
    [0.5, -0.418688, -0.081312],
];

fn ycbcr_to_rgb_matrix() -> &'static [[f64; 3]; 3] {
    static INV: OnceLock<[[f64; 3]; 3]> = OnceLock::new();
    INV.get_or_init(|| invert3(&RGB_TO_YCBCR))
}

fn invert3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let mut inv = [[0.0; 3]; 3];
    for (r, row) in inv.iter_mut().enumerate() {
        for (c, out) in row.iter_mut().enumerate() {
            let (r0, r1) = ((c + 1) % 3, (c + 2) % 3);
            let (c0, c1) = ((r + 1) % 3, (r + 2) % 3);
            *out = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / det;
        }
    }
    inv
}

/// Full-range BT.601 (JPEG) forward transform of one triple, clamped.
pub fn rgb_to_ycbcr_pixel(rgb: [f64; 3]) -> [f64; 3] {
    let m = &RGB_TO_YCBCR;
    let offs = [0.0, 128.0, 128.0];
    std::array::from_fn(|r| (offs[r] + m[r][0] * rgb[0] + m[r][1] * rgb[1] + m[r][2] * rgb[2]).clamp(0.0, 255.0))
}

/// Exact matrix inverse of [`rgb_to_ycbcr_pixel`], clamped.
pub fn ycbcr_to_rgb_pixel(ycc: [f64; 3]) -> [f64; 3] {
    let m = ycbcr_to_rgb_matrix();
    let d = [ycc[0], ycc[1] - 128.0, ycc[2] - 128.0];
    std::array::from_fn(|r| (m[r][0] * d[0] + m[r][1] * d[1] + m[r][2] * d[2]).clamp(0.0, 255.0))
}

fn convert(img: &RasterImage, from: ColorSpace, to: ColorSpace, f: fn([f64; 3]) -> [f64; 3]) -> Result<RasterImage> {
    if img.space != from {
        return Err(Error::contract(format!("expected {from:?} input, got {:?}", img.space)));
    }
    let n = img.len();
    let mut planes = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for i in 0..n {
        let out = f([img.planes[0][i], img.planes[1][i], img.planes[2][i]]);
        for (plane, v) in planes.iter_mut().zip(out) {
            plane[i] = v;
        }
    }
    Ok(RasterImage {
        width: img.width,
        height: img.height,
        planes,
        space: to,
    })
}

pub fn rgb_to_ycbcr(img: &RasterImage) -> Result<RasterImage> {
    convert(img, ColorSpace::Rgb, ColorSpace::YCbCr, rgb_to_ycbcr_pixel)
}

pub fn ycbcr_to_rgb(img: &RasterImage) -> Result<RasterImage> {
    convert(img, ColorSpace::YCbCr, ColorSpace::Rgb, ycbcr_to_rgb_pixel)
}

/// Mean squared error over all `3·w·h` RGB samples.
pub fn mse(a: &RasterImage, b: &RasterImage) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::contract(format!(
            "dimension mismatch: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    if a.space != ColorSpace::Rgb || b.space != ColorSpace::Rgb {
        return Err(Error::contract("mse is defined on RGB images"));
    }
    let sum: f64 = (0..3)
        .map(|c| {
            a.planes[c]
                .iter()
                .zip(&b.planes[c])
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
        })
        .sum();
    Ok(sum / (3 * a.len()) as f64)
}

/// Sum of squared differences between two planes.
pub(crate) fn plane_sse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;

    #[test]
    fn single_pixel_ppm() {
        let bytes = b"P6\n1 1\n255\n\x0a\x14\x1e";
        let img = load_ppm(bytes).unwrap();
        assert_eq!(img.plane(0), &[10.0]);
        assert_eq!(img.plane(1), &[20.0]);
        assert_eq!(img.plane(2), &[30.0]);
        assert_eq!(save_ppm(&img), bytes.to_vec());
    }

    #[test]
    fn truncated_payload_is_reported() {
        let mut bytes = b"P6\n2 2\n255\n".to_vec();
        bytes.extend([0u8; 11]);
        match load_ppm(&bytes) {
            Err(Error::Parse { offset, msg }) => {
                assert_eq!(offset, bytes.len());
                assert!(msg.contains("truncated"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_errors_name_offsets() {
        assert!(matches!(
            load_ppm(b"P5\n1 1\n255\n\0"),
            Err(Error::Parse { offset: 0, .. })
        ));
        assert!(matches!(
            load_ppm(b"P6\n1 1\n65535\n\0\0"),
            Err(Error::Parse { offset: 7, .. })
        ));
        assert!(matches!(
            load_ppm(b"P6\nx 1\n255\n"),
            Err(Error::Parse { offset: 3, .. })
        ));
    }

    #[test]
    fn comments_in_header() {
        let img = load_ppm(b"P6\n# made by hand\n1 1\n255\n\x01\x02\x03").unwrap();
        assert_eq!(img.pixel(PixelCoord::new(0, 0)), [1.0, 2.0, 3.0]);
    }

    #[test]
    fn grey_is_fixed_point() {
        let ycc = rgb_to_ycbcr_pixel([128.0; 3]);
        for v in ycc {
            assert!((v - 128.0).abs() < 1e-9);
        }
    }

    #[test]
    fn pure_red() {
        let ycc = rgb_to_ycbcr_pixel([255.0, 0.0, 0.0]);
        assert!((ycc[0] - 76.245).abs() < 1e-9);
        assert!((ycc[1] - 84.972_32).abs() < 1e-6);
        assert_eq!(ycc[2], 255.0);
    }

    #[test]
    fn inverse_matrix_is_exact() {
        let inv = ycbcr_to_rgb_matrix();
        for r in 0..3 {
            for c in 0..3 {
                let v: f64 = (0..3).map(|k| inv[r][k] * RGB_TO_YCBCR[k][c]).sum();
                let want = if r == c { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-12);
            }
        }
        // familiar JPEG constants
        assert!((inv[0][2] - 1.402).abs() < 1e-5);
        assert!((inv[2][1] - 1.772).abs() < 1e-5);
    }

    fn max_roundtrip_error(step: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for r in (0..256).step_by(step) {
            for g in (0..256).step_by(step) {
                for b in (0..256).step_by(step) {
                    let rgb = [r as f64, g as f64, b as f64];
                    let back = ycbcr_to_rgb_pixel(rgb_to_ycbcr_pixel(rgb));
                    for c in 0..3 {
                        worst = worst.max((back[c] - rgb[c]).abs());
                    }
                }
            }
        }
        worst
    }

    #[test]
    fn conversion_roundtrip_sampled_grid() {
        // 64^3 triples, including the extremes
        assert!(max_roundtrip_error(4) <= 1.0);
        assert!(max_roundtrip_error(255) <= 1.0);
    }

    #[test]
    #[ignore = "exhaustive sweep over all 2^24 triples"]
    fn conversion_roundtrip_exhaustive() {
        assert!(max_roundtrip_error(1) <= 1.0);
    }

    #[test]
    fn conversion_checks_space() {
        let img = RasterImage::filled(1, 1, [1.0, 2.0, 3.0], ColorSpace::Rgb).unwrap();
        assert!(ycbcr_to_rgb(&img).is_err());
        let ycc = rgb_to_ycbcr(&img).unwrap();
        assert_eq!(ycc.space(), ColorSpace::YCbCr);
        assert!(rgb_to_ycbcr(&ycc).is_err());
        assert_eq!(ycbcr_to_rgb(&ycc).unwrap().space(), ColorSpace::Rgb);
    }

    #[test]
    fn mse_hand_values() {
        let a = RasterImage::filled(1, 1, [10.0, 10.0, 10.0], ColorSpace::Rgb).unwrap();
        let b = RasterImage::filled(1, 1, [13.0, 10.0, 10.0], ColorSpace::Rgb).unwrap();
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        assert_eq!(mse(&a, &b).unwrap(), 3.0);
        let c = RasterImage::filled(2, 1, [0.0; 3], ColorSpace::Rgb).unwrap();
        assert!(mse(&a, &c).is_err());
    }

    #[test]
    fn mse_matches_double_loop() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut gen = || -> RasterImage {
            let data: Vec<u8> = (0..8 * 8 * 3).map(|_| rng.gen()).collect();
            RasterImage::from_rgb8(8, 8, &data).unwrap()
        };
        let (a, b) = (gen(), gen());
        let (ra, rb) = (a.to_rgb8(), b.to_rgb8());
        let mut sum = 0.0;
        for y in 0..8 {
            for x in 0..8 {
                for c in 0..3 {
                    let i = (y * 8 + x) * 3 + c;
                    let d = f64::from(ra[i]) - f64::from(rb[i]);
                    sum += d * d;
                }
            }
        }
        let oracle = sum / 192.0;
        assert!((mse(&a, &b).unwrap() - oracle).abs() < 1e-12);
        assert_eq!(mse(&a, &b).unwrap(), mse(&b, &a).unwrap());
    }

    #[test]
    fn rejects_out_of_range_samples() {
        assert!(RasterImage::new(1, 1, [vec![256.0], vec![0.0], vec![0.0]], ColorSpace::Rgb).is_err());
        assert!(RasterImage::new(1, 1, [vec![0.0, 1.0], vec![0.0], vec![0.0]], ColorSpace::Rgb).is_err());
    }
}
