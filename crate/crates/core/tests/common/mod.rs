//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rjip_core::image::{ColorSpace, PixelCoord, RasterImage};
use rjip_core::inpaint::{shepard_inpaint, KnownPixels, ShepardWeights};
use rjip_core::tonal::TonalProblem;

/// Direct double loop over every (pixel, known pixel) pair.
pub fn shepard_oracle(
    positions: &[PixelCoord],
    values: &[Vec<f64>],
    width: usize,
    height: usize,
    sigma: f64,
) -> Vec<Vec<f64>> {
    let cutoff = 4.0 * sigma;
    let channels = values.len();
    let mut out = vec![vec![0.0; width * height]; channels];
    for y in 0..height {
        for x in 0..width {
            let idx = y * width + x;
            if let Some(i) = positions.iter().position(|p| p.x == x && p.y == y) {
                for c in 0..channels {
                    out[c][idx] = values[c][i];
                }
                continue;
            }
            let mut den = 0.0;
            let mut num = vec![0.0; channels];
            for (i, p) in positions.iter().enumerate() {
                let dx = p.x as f64 - x as f64;
                let dy = p.y as f64 - y as f64;
                let d2 = dx * dx + dy * dy;
                if d2.sqrt() > cutoff {
                    continue;
                }
                let w = (-d2 / (2.0 * sigma * sigma)).exp();
                den += w;
                for c in 0..channels {
                    num[c] += w * values[c][i];
                }
            }
            for c in 0..channels {
                out[c][idx] = if den > 0.0 { num[c] / den } else { 128.0 };
            }
        }
    }
    out
}

/// Golden-section minimum of a unimodal `f` on `[a, b]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|c| (a[c] - b[c]) * (a[c] - b[c])).sum()
}

/// Optimal 2-means energy by enumerating every bipartition.
pub fn exhaustive_two_means(points: &[[f64; 3]]) -> f64 {
    let n = points.len();
    if n <= 2 {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    // point 0 always in part A; part B non-empty
    for mask in 1u32..(1 << (n - 1)) {
        let mut energy = 0.0;
        for part in [false, true] {
            let members: Vec<&[f64; 3]> = (0..n)
                .filter(|&i| i > 0 && (mask >> (i - 1)) & 1 == 1)
                .map(|i| &points[i])
                .collect();
            let members: Vec<&[f64; 3]> = if part {
                members
            } else {
                (0..n)
                    .filter(|&i| i == 0 || (mask >> (i - 1)) & 1 == 0)
                    .map(|i| &points[i])
                    .collect()
            };
            let m = members.len() as f64;
            let mut centre = [0.0; 3];
            for p in &members {
                for c in 0..3 {
                    centre[c] += p[c] / m;
                }
            }
            energy += members.iter().map(|p| dist2(p, &centre)).sum::<f64>();
        }
        best = best.min(energy);
    }
    best
}

/// Energy of assigning each point to its nearest centre.
pub fn nearest_energy(points: &[[f64; 3]], centres: &[[f64; 3]]) -> f64 {
    points
        .iter()
        .map(|p| centres.iter().map(|c| dist2(p, c)).fold(f64::INFINITY, f64::min))
        .sum()
}

/// Random mask of `n` distinct positions.
pub fn random_mask(rng: &mut ChaCha8Rng, width: usize, height: usize, n: usize) -> Vec<PixelCoord> {
    let mut all: Vec<PixelCoord> = (0..height)
        .flat_map(|y| (0..width).map(move |x| PixelCoord::new(x, y)))
        .collect();
    for i in 0..n {
        let j = rng.gen_range(i..all.len());
        all.swap(i, j);
    }
    all.truncate(n);
    all
}

pub fn random_planes(rng: &mut ChaCha8Rng, channels: usize, len: usize) -> Vec<Vec<f64>> {
    (0..channels)
        .map(|_| (0..len).map(|_| rng.gen_range(0.0..255.0)).collect())
        .collect()
}

/// Smooth synthetic photo-like image with mild noise.
pub fn synthetic_image(width: usize, height: usize, seed: u64) -> RasterImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let freq: [f64; 3] = [
        rng.gen_range(3.0..9.0),
        rng.gen_range(3.0..9.0),
        rng.gen_range(3.0..9.0),
    ];
    let planes = [0, 1, 2].map(|c| {
        (0..width * height)
            .map(|i| {
                let (x, y) = ((i % width) as f64, (i / width) as f64);
                let v = 128.0 + 80.0 * (x / freq[c]).sin() * (y / (freq[c] + 2.0)).cos() + rng.gen_range(-6.0..6.0);
                v.clamp(0.0, 255.0).round()
            })
            .collect()
    });
    RasterImage::new(width, height, planes, ColorSpace::Rgb).unwrap()
}

pub fn fixture(name: &str) -> RasterImage {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name);
    rjip_core::image::load_ppm(&std::fs::read(path).unwrap()).unwrap()
}

pub fn weights_for(width: usize, height: usize, n: usize) -> ShepardWeights {
    ShepardWeights::for_mask(width, height, n).unwrap()
}

/// Window error as a function of one stored value, by full re-inpainting.
pub fn window_error(
    problem: &TonalProblem,
    target: &[Vec<f64>],
    w: usize,
    h: usize,
    i: usize,
    c: usize,
    u: f64,
) -> f64 {
    let mut values = problem.values().to_vec();
    values[c][i] = u;
    let known = KnownPixels::new(problem.positions().to_vec(), values).unwrap();
    let rec = shepard_inpaint(&known, w, h, problem.weights()).unwrap();
    let p = problem.positions()[i];
    let own = p.y * w + p.x;
    rec[c]
        .iter()
        .zip(&target[c])
        .enumerate()
        .filter(|&(j, _)| j != own && !problem.positions().iter().any(|q| q.y * w + q.x == j))
        .map(|(_, (r, t))| (r - t) * (r - t))
        .sum()
}
