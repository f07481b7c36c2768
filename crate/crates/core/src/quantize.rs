//! Scalar and vector quantisation of mask colours.

use std::collections::{HashMap, HashSet};

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::{PixelCoord, RasterImage};
use crate::inpaint::{AccumulatorField, ShepardWeights, Window};

/// Uniform quantiser with `q` equal-width intervals over `[0, 256)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct UniformQuantizer {
    q: u16,
}

impl UniformQuantizer {
    pub fn new(q: u16) -> Result<Self> {
        if !(2..=256).contains(&q) {
            return Err(Error::contract(format!("q = {q} outside [2, 256]")));
        }
        Ok(Self { q })
    }

    pub fn levels(&self) -> u16 {
        self.q
    }

    pub fn quantize(&self, value: f64) -> Result<u16> {
        if !(0.0..=255.0).contains(&value) {
            return Err(Error::contract(format!("value {value} outside [0, 255]")));
        }
        Ok(self.level_of(value))
    }

    pub fn dequantize(&self, level: u16) -> Result<f64> {
        if level >= self.q {
            return Err(Error::contract(format!("level {level} >= q = {}", self.q)));
        }
        Ok(self.value_of(level))
    }

    /// Nearest level, clamping out-of-range input.
    pub(crate) fn level_of(&self, value: f64) -> u16 {
        let q = f64::from(self.q);
        ((value * q / 256.0).floor().max(0.0) as u16).min(self.q - 1)
    }

    pub(crate) fn value_of(&self, level: u16) -> f64 {
        (f64::from(level) + 0.5) * 256.0 / f64::from(self.q)
    }
}

pub fn scalar_quantize(value: f64, q: u16) -> Result<u16> {
    UniformQuantizer::new(q)?.quantize(value)
}

pub fn scalar_dequantize(level: u16, q: u16) -> Result<f64> {
    UniformQuantizer::new(q)?.dequantize(level)
}

/// Ordered palette of integer RGB centres; an index fits in one byte.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Codebook {
    centers: Vec<[u8; 3]>,
}

impl Codebook {
    pub fn new(centers: Vec<[u8; 3]>) -> Result<Self> {
        if centers.is_empty() || centers.len() > 256 {
            return Err(Error::contract(format!(
                "codebook size {} outside [1, 256]",
                centers.len()
            )));
        }
        Ok(Self { centers })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn centers(&self) -> &[[u8; 3]] {
        &self.centers
    }

    pub fn center(&self, i: usize) -> [f64; 3] {
        self.centers[i].map(f64::from)
    }

    /// True when two entries hold the same colour.
    pub fn has_duplicates(&self) -> bool {
        let mut seen = self.centers.clone();
        seen.sort_unstable();
        seen.windows(2).any(|w| w[0] == w[1])
    }

    /// `k-1`, then `R G B` per centre.
    pub fn serialize(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(1 + 3 * self.len());
        out.push((self.len() - 1) as u8);
        for c in &self.centers {
            out.extend_from_slice(c);
        }
        out
    }

    /// Parses a serialised codebook, returning it and the number of bytes consumed.
    pub fn deserialize(bytes: &[u8]) -> Result<(Self, usize)> {
        let k = usize::from(
            *bytes
                .first()
                .ok_or_else(|| Error::corrupt(0, "missing codebook size"))?,
        ) + 1;
        let need = 1 + 3 * k;
        if bytes.len() < need {
            return Err(Error::corrupt(bytes.len(), format!("codebook needs {need} bytes")));
        }
        let centers = bytes[1..need].chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        Ok((Self { centers }, need))
    }
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

/// Closest centre by squared Euclidean distance; ties go to the lower index.
pub fn assign_nearest(color: [f64; 3], codebook: &Codebook) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in codebook.centers.iter().enumerate() {
        let d = dist2(&color, &c.map(f64::from));
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

fn nearest_real(color: &[f64; 3], centers: &[[f64; 3]]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centers.iter().enumerate() {
        let mut d = color[0] - c[0];
        d *= d;
        if d >= best_d {
            continue;
        }
        let e = color[1] - c[1];
        d += e * e;
        if d >= best_d {
            continue;
        }
        let e = color[2] - c[2];
        d += e * e;
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansOptions {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Independent seeded runs; the lowest-energy one is returned.
    pub restarts: usize,
}

impl KMeansOptions {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            max_iters: 100,
            restarts: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeans {
    /// Integer centres (rounded centroids).
    pub codebook: Codebook,
    /// Index into `codebook` per input colour, nearest to the rounded centres.
    pub labels: Vec<usize>,
    /// Real-valued centroids at termination.
    pub centroids: Vec<[f64; 3]>,
    /// Lloyd energy of `centroids` with the final Lloyd assignment.
    pub energy: f64,
    /// Energy after every assignment step of the winning run.
    pub energy_history: Vec<f64>,
    pub iterations: usize,
}

/// Lloyd's k-means from a seeded random selection of distinct input colours.
pub fn kmeans(colors: &[[f64; 3]], opts: &KMeansOptions) -> Result<KMeans> {
    if colors.is_empty() {
        return Err(Error::contract("kmeans on an empty colour set"));
    }
    if opts.k == 0 || opts.k > 256 {
        return Err(Error::contract(format!("k = {} outside [1, 256]", opts.k)));
    }
    // collapse duplicates into weighted points
    let mut index: HashMap<[u64; 3], usize> = HashMap::new();
    let mut points: Vec<[f64; 3]> = Vec::new();
    let mut counts: Vec<f64> = Vec::new();
    let mut point_of = Vec::with_capacity(colors.len());
    for c in colors {
        let key = c.map(f64::to_bits);
        let id = *index.entry(key).or_insert_with(|| {
            points.push(*c);
            counts.push(0.0);
            points.len() - 1
        });
        counts[id] += 1.0;
        point_of.push(id);
    }

    let k = opts.k.min(points.len());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut tried: HashSet<Vec<usize>> = HashSet::new();
    let mut best: Option<Lloyd> = None;
    for _ in 0..opts.restarts.max(1) {
        // restarts prefer initial selections not tried yet
        let mut init = seed_centroids(&points, &counts, k, &mut rng);
        for _ in 0..32 {
            if tried.insert(init.clone()) {
                break;
            }
            init = seed_centroids(&points, &counts, k, &mut rng);
        }
        let start = init.iter().map(|&i| points[i]).collect();
        let run = lloyd(&points, &counts, start, opts.max_iters);
        if best.as_ref().is_none_or(|b| run.energy < b.energy) {
            best = Some(run);
        }
    }
    let run = best.expect("at least one restart");

    let codebook = Codebook::new(
        run.centroids
            .iter()
            .map(|c| c.map(|v| v.round().clamp(0.0, 255.0) as u8))
            .collect(),
    )?;
    let rounded: Vec<[f64; 3]> = codebook.centers.iter().map(|c| c.map(f64::from)).collect();
    let labels = point_of.iter().map(|&p| nearest_real(&points[p], &rounded)).collect();
    Ok(KMeans {
        codebook,
        labels,
        centroids: run.centroids,
        energy: run.energy,
        energy_history: run.history,
        iterations: run.iterations,
    })
}

struct Lloyd {
    centroids: Vec<[f64; 3]>,
    energy: f64,
    history: Vec<f64>,
    iterations: usize,
}

/// D²-weighted selection of `k` distinct points (k-means++ seeding), as
/// sorted indices.
fn seed_centroids(points: &[[f64; 3]], counts: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let first = WeightedIndex::new(counts).expect("positive counts").sample(rng);
    let mut chosen = vec![first];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &points[first])).collect();
    while chosen.len() < k {
        let w: Vec<f64> = d2.iter().zip(counts).map(|(d, c)| d * c).collect();
        // distinct points always leave some weight while fewer than k are chosen
        let next = WeightedIndex::new(&w)
            .expect("unchosen distinct points remain")
            .sample(rng);
        chosen.push(next);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, &points[next]));
        }
    }
    chosen.sort_unstable();
    chosen
}

/// Single-point transfers that lower the energy once centroids follow the
/// move. Leaves a partition that is also stable under Lloyd assignment.
/// Returns whether anything moved.
fn hartigan(
    points: &[[f64; 3]],
    counts: &[f64],
    labels: &mut [usize],
    centroids: &mut [[f64; 3]],
    max_passes: usize,
) -> bool {
    let k = centroids.len();
    let mut mass = vec![0.0; k];
    let mut sums = vec![[0.0; 3]; k];
    for (i, p) in points.iter().enumerate() {
        mass[labels[i]] += counts[i];
        for c in 0..3 {
            sums[labels[i]][c] += counts[i] * p[c];
        }
    }
    let mean = |s: &[f64; 3], m: f64| s.map(|v| v / m);
    for l in 0..k {
        if mass[l] > 0.0 {
            centroids[l] = mean(&sums[l], mass[l]);
        }
    }
    let mut moved = false;
    for _ in 0..max_passes {
        let mut any = false;
        for (i, p) in points.iter().enumerate() {
            let a = labels[i];
            let w = counts[i];
            if mass[a] <= w {
                continue;
            }
            let leave = mass[a] * w / (mass[a] - w) * dist2(p, &centroids[a]);
            let mut best = (a, 0.0);
            for b in (0..k).filter(|&b| b != a && mass[b] > 0.0) {
                let gain = mass[b] * w / (mass[b] + w) * dist2(p, &centroids[b]) - leave;
                if gain < best.1 - 1e-9 * leave.max(1.0) {
                    best = (b, gain);
                }
            }
            let b = best.0;
            if b == a {
                continue;
            }
            for c in 0..3 {
                sums[a][c] -= w * p[c];
                sums[b][c] += w * p[c];
            }
            mass[a] -= w;
            mass[b] += w;
            centroids[a] = mean(&sums[a], mass[a]);
            centroids[b] = mean(&sums[b], mass[b]);
            labels[i] = b;
            any = true;
        }
        moved |= any;
        if !any {
            break;
        }
    }
    moved
}

fn lloyd(points: &[[f64; 3]], counts: &[f64], mut centroids: Vec<[f64; 3]>, max_iters: usize) -> Lloyd {
    let k = centroids.len();
    let mut labels = vec![usize::MAX; points.len()];
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut energy;
    loop {
        let mut changed = false;
        energy = 0.0;
        for (i, p) in points.iter().enumerate() {
            let l = nearest_real(p, &centroids);
            if l != labels[i] {
                labels[i] = l;
                changed = true;
            }
            energy += counts[i] * dist2(p, &centroids[l]);
        }
        history.push(energy);
        if !changed || iterations >= max_iters {
            break;
        }
        iterations += 1;

        let mut sums = vec![[0.0; 3]; k];
        let mut mass = vec![0.0; k];
        for (i, p) in points.iter().enumerate() {
            let l = labels[i];
            mass[l] += counts[i];
            for c in 0..3 {
                sums[l][c] += counts[i] * p[c];
            }
        }
        let mut taken = vec![false; points.len()];
        for l in 0..k {
            if mass[l] > 0.0 {
                centroids[l] = sums[l].map(|s| s / mass[l]);
                continue;
            }
            // re-seed an empty cluster at the point farthest from its centre
            let far = (0..points.len())
                .filter(|&i| !taken[i])
                .max_by(|&a, &b| {
                    let da = dist2(&points[a], &centroids[labels[a]]);
                    let db = dist2(&points[b], &centroids[labels[b]]);
                    da.total_cmp(&db).then(b.cmp(&a))
                })
                .expect("k <= number of distinct points");
            taken[far] = true;
            centroids[l] = points[far];
        }
    }
    if hartigan(points, counts, &mut labels, &mut centroids, max_iters) {
        energy = (0..points.len())
            .map(|i| counts[i] * dist2(&points[i], &centroids[labels[i]]))
            .sum();
        history.push(energy);
    }
    Lloyd {
        centroids,
        energy,
        history,
        iterations,
    }
}

/// Squared-distance energy of `colors` against real `centers` under `labels`.
pub fn quantization_energy(colors: &[[f64; 3]], centers: &[[f64; 3]], labels: &[usize]) -> f64 {
    colors.iter().zip(labels).map(|(c, &l)| dist2(c, &centers[l])).sum()
}

/// Coordinate descent on the palette against reconstruction error.
///
/// Each visit to a centre tries the six `±1` single-channel moves and keeps the
/// best one if it lowers the squared reconstruction error; the visit repeats
/// until no move helps. Stops after a sweep with no accepted move or
/// `max_sweeps` sweeps.
pub fn refine_codebook(
    codebook: &Codebook,
    mask_labels: &[usize],
    mask_positions: &[PixelCoord],
    original: &RasterImage,
    weights: &ShepardWeights,
    max_sweeps: usize,
) -> Result<Codebook> {
    if mask_labels.len() != mask_positions.len() || mask_positions.is_empty() {
        return Err(Error::contract("labels and positions must align and be non-empty"));
    }
    if let Some(&l) = mask_labels.iter().find(|&&l| l >= codebook.len()) {
        return Err(Error::contract(format!("label {l} outside codebook")));
    }
    let (w, h) = (original.width(), original.height());
    let mut acc = AccumulatorField::new(w, h, 3);
    for (p, &l) in mask_positions.iter().zip(mask_labels) {
        acc.add_known_pixel(*p, &codebook.center(l), weights);
    }
    let mut is_mask = vec![false; w * h];
    for p in mask_positions {
        is_mask[p.y * w + p.x] = true;
    }
    // residual = reconstruction - original, non-mask pixels only
    let mut resid: Vec<Vec<f64>> = (0..3)
        .map(|c| {
            let f = original.plane(c);
            (0..w * h)
                .map(|i| {
                    let wi = acc.denominator()[i];
                    if is_mask[i] {
                        0.0
                    } else {
                        let r = if wi > 0.0 {
                            acc.numerator(c)[i] / wi
                        } else {
                            crate::inpaint::FALLBACK
                        };
                        r - f[i]
                    }
                })
                .collect()
        })
        .collect();

    let mut members: Vec<Vec<PixelCoord>> = vec![Vec::new(); codebook.len()];
    for (p, &l) in mask_positions.iter().zip(mask_labels) {
        members[l].push(*p);
    }

    let mut book = codebook.clone();
    let mut share = vec![0.0; w * h];
    let mut touched: Vec<usize> = Vec::new();
    let r = weights.radius();
    for _ in 0..max_sweeps {
        let mut accepted = false;
        for (label, pts) in members.iter().enumerate() {
            if pts.is_empty() {
                continue;
            }
            // a_j = S_label(j) / W_j: sensitivity of pixel j to this centre
            for p in pts {
                let win = Window::around(*p, r, w, h);
                for y in win.y0..=win.y1 {
                    for x in win.x0..=win.x1 {
                        let wt = weights.weight(x as i64 - p.x as i64, y as i64 - p.y as i64);
                        let j = y * w + x;
                        if wt == 0.0 || is_mask[j] {
                            continue;
                        }
                        if share[j] == 0.0 {
                            touched.push(j);
                        }
                        share[j] += wt;
                    }
                }
            }
            for &j in &touched {
                share[j] /= acc.denominator()[j];
            }
            let a2: f64 = touched.iter().map(|&j| share[j] * share[j]).sum::<f64>() + pts.len() as f64;
            loop {
                let center = book.centers[label];
                let mut best: Option<(usize, i32, f64)> = None;
                for c in 0..3 {
                    let own: f64 = pts
                        .iter()
                        .map(|p| f64::from(center[c]) - original.plane(c)[p.y * w + p.x])
                        .sum();
                    let a1: f64 = touched.iter().map(|&j| share[j] * resid[c][j]).sum::<f64>() + own;
                    for delta in [-1i32, 1] {
                        let moved = i32::from(center[c]) + delta;
                        if !(0..=255).contains(&moved) {
                            continue;
                        }
                        let gain = 2.0 * f64::from(delta) * a1 + a2;
                        if gain < -1e-9 && best.is_none_or(|b| gain < b.2) {
                            best = Some((c, delta, gain));
                        }
                    }
                }
                let Some((c, delta, _)) = best else { break };
                let mut moved = center;
                moved[c] = (i32::from(center[c]) + delta) as u8;
                book.centers[label] = moved;
                for &j in &touched {
                    resid[c][j] += f64::from(delta) * share[j];
                }
                accepted = true;
            }
            for &j in &touched {
                share[j] = 0.0;
            }
            touched.clear();
        }
        if !accepted {
            break;
        }
    }
    Ok(book)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::ColorSpace;
    use crate::inpaint::{shepard_inpaint, KnownPixels};
    use rand::Rng;

    #[test]
    fn midpoint_rule() {
        assert_eq!(scalar_quantize(255.0, 2).unwrap(), 1);
        assert_eq!(scalar_dequantize(1, 2).unwrap(), 192.0);
        assert_eq!(scalar_quantize(0.0, 2).unwrap(), 0);
        assert_eq!(scalar_dequantize(0, 2).unwrap(), 64.0);
        for v in 0..=255 {
            let l = scalar_quantize(f64::from(v), 256).unwrap();
            assert!((scalar_dequantize(l, 256).unwrap() - f64::from(v)).abs() <= 0.5);
        }
    }

    #[test]
    fn quantizer_contracts() {
        assert!(UniformQuantizer::new(1).is_err());
        assert!(UniformQuantizer::new(257).is_err());
        let q = UniformQuantizer::new(8).unwrap();
        assert!(q.quantize(-0.1).is_err());
        assert!(q.quantize(255.5).is_err());
        assert!(q.dequantize(8).is_err());
    }

    #[test]
    fn quantizer_monotone() {
        for q in [2u16, 3, 7, 16, 100, 256] {
            let uq = UniformQuantizer::new(q).unwrap();
            let mut last = 0;
            for i in 0..=2550 {
                let l = uq.quantize(f64::from(i) / 10.0).unwrap();
                assert!(l >= last);
                last = l;
            }
            for l in 1..q {
                assert!(uq.dequantize(l).unwrap() > uq.dequantize(l - 1).unwrap());
                assert!(uq.dequantize(l).unwrap() <= 255.5);
            }
        }
    }

    #[test]
    fn nearest_ties_to_lowest() {
        let book = Codebook::new(vec![
            [0, 0, 0],
            [9, 9, 9],
            [10, 0, 0],
            [50, 50, 50],
            [60, 60, 60],
            [0, 10, 0],
        ])
        .unwrap();
        assert_eq!(assign_nearest([9.0, 9.0, 9.0], &book), 1);
        // equidistant between 2 and 5
        assert_eq!(assign_nearest([5.0, 5.0, 0.0], &book), 0);
        assert_eq!(assign_nearest([10.0, 10.0, 0.0], &book), 1);
        let book = Codebook::new(vec![
            [0, 0, 0],
            [1, 1, 1],
            [10, 0, 0],
            [90, 90, 90],
            [91, 91, 91],
            [0, 10, 0],
        ])
        .unwrap();
        assert_eq!(assign_nearest([5.0, 5.0, 0.0], &book), 1);
        let book = Codebook::new(vec![
            [200, 0, 0],
            [200, 0, 1],
            [10, 0, 0],
            [90, 90, 90],
            [91, 91, 91],
            [0, 10, 0],
        ])
        .unwrap();
        assert_eq!(assign_nearest([5.0, 5.0, 0.0], &book), 2);
    }

    #[test]
    fn nearest_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let k = rng.gen_range(1..40);
            let book = Codebook::new((0..k).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect()).unwrap();
            let c = [
                rng.gen_range(0.0..255.0),
                rng.gen_range(0.0..255.0),
                rng.gen_range(0.0..255.0),
            ];
            let ds: Vec<f64> = book.centers().iter().map(|e| dist2(&c, &e.map(f64::from))).collect();
            let min = ds.iter().copied().fold(f64::INFINITY, f64::min);
            let want = ds.iter().position(|&d| d == min).unwrap();
            assert_eq!(assign_nearest(c, &book), want);
        }
    }

    #[test]
    fn codebook_bytes() {
        let book = Codebook::new(vec![[1, 2, 3], [4, 5, 6]]).unwrap();
        let bytes = book.serialize();
        assert_eq!(bytes, vec![1, 1, 2, 3, 4, 5, 6]);
        let (back, used) = Codebook::deserialize(&bytes).unwrap();
        assert_eq!((back, used), (book, 7));
        assert!(Codebook::deserialize(&bytes[..5]).is_err());
        assert!(Codebook::new(vec![]).is_err());
        assert!(Codebook::new(vec![[0; 3]; 257]).is_err());
        assert!(Codebook::new(vec![[0; 3], [0; 3]]).unwrap().has_duplicates());
    }

    #[test]
    fn kmeans_identical_colors() {
        let colors = vec![[12.0, 40.0, 200.0]; 50];
        let km = kmeans(&colors, &KMeansOptions::new(4, 3)).unwrap();
        assert_eq!(km.energy, 0.0);
        assert_eq!(km.codebook.centers(), &[[12, 40, 200]]);
        assert!(km.labels.iter().all(|&l| l == 0));
        assert!(kmeans(&[], &KMeansOptions::new(2, 0)).is_err());
    }

    #[test]
    fn kmeans_enough_centres() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let distinct: Vec<[f64; 3]> = (0..10)
            .map(|_| [rng.gen_range(0..256) as f64, rng.gen_range(0..256) as f64, 0.0])
            .collect();
        let colors: Vec<[f64; 3]> = (0..100).map(|i| distinct[i % 10]).collect();
        let km = kmeans(&colors, &KMeansOptions::new(12, 8)).unwrap();
        assert_eq!(km.energy, 0.0);
    }

    #[test]
    fn lloyd_energy_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for seed in 0..20 {
            let colors: Vec<[f64; 3]> = (0..300)
                .map(|_| {
                    [
                        rng.gen_range(0.0..255.0),
                        rng.gen_range(0.0..255.0),
                        rng.gen_range(0.0..255.0),
                    ]
                })
                .collect();
            let km = kmeans(&colors, &KMeansOptions::new(8, seed)).unwrap();
            assert!(km.energy_history.windows(2).all(|w| w[1] <= w[0] + 1e-9));
            let check = quantization_energy(&colors, &km.centroids, &{
                colors
                    .iter()
                    .map(|c| nearest_real(c, &km.centroids))
                    .collect::<Vec<_>>()
            });
            assert!(check <= km.energy + 1e-6);
        }
    }

    fn refine_instance(seed: u64) -> (Codebook, Vec<usize>, Vec<PixelCoord>, RasterImage, ShepardWeights) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<u8> = (0..16 * 16 * 3).map(|_| rng.gen()).collect();
        let img = RasterImage::from_rgb8(16, 16, &data).unwrap();
        let positions = crate::mask::build_regular_mask(16, 16, 4.0).unwrap();
        let book = Codebook::new((0..4).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect()).unwrap();
        let labels = positions.iter().map(|p| assign_nearest(img.pixel(*p), &book)).collect();
        let weights = ShepardWeights::for_mask(16, 16, positions.len()).unwrap();
        (book, labels, positions, img, weights)
    }

    fn recon_sse(
        book: &Codebook,
        labels: &[usize],
        positions: &[PixelCoord],
        img: &RasterImage,
        weights: &ShepardWeights,
    ) -> f64 {
        let values = (0..3)
            .map(|c| labels.iter().map(|&l| book.center(l)[c]).collect())
            .collect();
        let known = KnownPixels::new(positions.to_vec(), values).unwrap();
        let rec = shepard_inpaint(&known, img.width(), img.height(), weights).unwrap();
        let rec = RasterImage::new(
            img.width(),
            img.height(),
            [rec[0].clone(), rec[1].clone(), rec[2].clone()],
            ColorSpace::Rgb,
        )
        .unwrap();
        crate::image::mse(&rec, img).unwrap()
    }

    #[test]
    fn refinement_never_hurts() {
        for seed in 0..10 {
            let (book, labels, pos, img, weights) = refine_instance(seed);
            let before = recon_sse(&book, &labels, &pos, &img, &weights);
            let refined = refine_codebook(&book, &labels, &pos, &img, &weights, 20).unwrap();
            let after = recon_sse(&refined, &labels, &pos, &img, &weights);
            assert!(after <= before + 1e-9, "seed {seed}: {after} > {before}");
            // refining again from the result is a fixed point
            let again = refine_codebook(&refined, &labels, &pos, &img, &weights, 20).unwrap();
            if again != refined {
                // only possible when the first call hit the sweep cap
                assert!(recon_sse(&again, &labels, &pos, &img, &weights) <= after + 1e-9);
            }
        }
    }

    #[test]
    fn refinement_fixed_point() {
        let (book, labels, pos, img, weights) = refine_instance(77);
        let refined = refine_codebook(&book, &labels, &pos, &img, &weights, 1000).unwrap();
        let again = refine_codebook(&refined, &labels, &pos, &img, &weights, 1000).unwrap();
        assert_eq!(again, refined);
    }

    #[test]
    fn refinement_single_centre_matches_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let data: Vec<u8> = (0..12 * 12 * 3).map(|_| rng.gen_range(60..200)).collect();
        let img = RasterImage::from_rgb8(12, 12, &data).unwrap();
        let pos = vec![PixelCoord::new(5, 6)];
        let weights = ShepardWeights::new(20.0).unwrap();
        let start = [128u8, 100, 150];
        let book = Codebook::new(vec![start]).unwrap();
        let refined = refine_codebook(&book, &[0], &pos, &img, &weights, 1000).unwrap();
        // exhaustive scan of each channel over start +- 32
        for c in 0..3 {
            let mut best = (f64::INFINITY, 0u8);
            for v in i32::from(start[c]) - 32..=i32::from(start[c]) + 32 {
                let mut centre = start;
                centre[c] = v as u8;
                let sse = recon_sse(&Codebook::new(vec![centre]).unwrap(), &[0], &pos, &img, &weights);
                if sse < best.0 {
                    best = (sse, v as u8);
                }
            }
            assert_eq!(refined.centers()[0][c], best.1, "channel {c}");
        }
    }
}
