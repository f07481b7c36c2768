//! The three compression pipelines and the `.rjc` container.
//!
//! A file is a [`Header`] followed, per channel group, by a 4-byte big-endian
//! payload length and the payload itself. Encoders search mask spacing and
//! level count against the byte budget, tonally optimise the winner and
//! re-encode it. The image an encoder reports is exactly what [`decode`]
//! returns for its bytes.

pub mod group;
pub mod header;
pub mod search;

use std::collections::HashSet;

pub use group::{decode_scalar_group, decode_vector_group, encode_scalar_group, encode_vector_group, GroupCoding};
pub use header::{GroupParams, Header, Mode, LUMA_FACTORS, MAGIC, VERSION};
pub use search::{CandidateRecord, Evaluation, Memo, SearchSpace};

use crate::error::{Error, Result};
use crate::image::{plane_sse, to_u8, ycbcr_to_rgb, ColorSpace, PixelCoord, RasterImage};
use crate::inpaint::ShepardWeights;
use crate::mask::{fixed_to_h, h_to_fixed, RegularGrid};
use crate::quantize::{kmeans, refine_codebook, Codebook, KMeansOptions, UniformQuantizer};
use crate::tonal::{tonal_optimize_direct, tonal_optimize_random_walk, Admissible, TonalProblem, DEFAULT_MAX_SWEEPS};

/// Bytes of the per-group length field.
pub const LENGTH_FIELD: usize = 4;

pub const MIN_RATIO: f64 = 5.0;
pub const MAX_RATIO: f64 = 200.0;

/// Largest file size for a compression ratio: `⌊3·w·h / ratio⌋`.
pub fn budget_bytes(width: usize, height: usize, ratio: f64) -> Result<usize> {
    if ratio.is_nan() || ratio <= 1.0 || ratio.is_infinite() {
        return Err(Error::contract(format!("ratio {ratio} must exceed 1")));
    }
    Ok((3.0 * (width * height) as f64 / ratio).floor() as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TonalMethod {
    Direct,
    /// Random-walk baseline; scalar modes only.
    RandomWalk,
    Off,
}

impl std::str::FromStr for TonalMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(TonalMethod::Direct),
            "walk" => Ok(TonalMethod::RandomWalk),
            "off" => Ok(TonalMethod::Off),
            other => Err(Error::contract(format!("unknown tonal method {other:?}"))),
        }
    }
}

/// How the LP payload budget is divided between luma and chroma.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LumaSplit {
    /// `B_Y = f·B`, `B_CbCr = (1 − f)·B`.
    Fraction,
    /// `B_Y = f·B_CbCr`, i.e. `B_Y = f/(1 + f)·B`.
    Literal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodeOptions {
    pub mode: Mode,
    pub ratio: f64,
    /// Fixes the LP luma factor instead of searching all of [`LUMA_FACTORS`].
    pub luma_factor: Option<f64>,
    pub luma_split: LumaSplit,
    pub seed: u64,
    pub tonal: TonalMethod,
    pub max_sweeps: usize,
    /// Codebook refinement sweeps in vector mode; 0 disables it.
    pub refine_sweeps: usize,
    pub search: SearchSpace,
}

impl EncodeOptions {
    pub fn new(mode: Mode, ratio: f64) -> Self {
        Self {
            mode,
            ratio,
            luma_factor: None,
            luma_split: LumaSplit::Fraction,
            seed: 0,
            tonal: TonalMethod::Direct,
            max_sweeps: DEFAULT_MAX_SWEEPS,
            refine_sweeps: 20,
            search: SearchSpace::default(),
        }
    }
}

/// Parameters chosen for one encode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeConfig {
    pub mode: Mode,
    pub groups: Vec<GroupParams>,
    pub luma_factor: Option<f64>,
    /// Codebook size actually used (vector mode).
    pub codebook_size: Option<usize>,
}

impl ModeConfig {
    pub fn h(&self, group: usize) -> f64 {
        fixed_to_h(self.groups[group].h_fixed)
    }
}

#[derive(Debug, Clone)]
pub struct Encoded {
    pub bytes: Vec<u8>,
    pub header: Header,
    /// Bit-identical to `decode(&bytes)`.
    pub image: RasterImage,
    /// RGB MSE of `image` against the input.
    pub mse: f64,
    pub config: ModeConfig,
    /// Distinct stored colours on the mask; `None` in LP mode, whose groups use different masks.
    pub distinct_mask_colors: Option<usize>,
    /// Whether the tonally optimised values were kept, per group.
    pub tonal_applied: Vec<bool>,
    /// Every candidate the search evaluated, per group.
    pub candidates: Vec<Vec<CandidateRecord>>,
}

impl Encoded {
    pub fn achieved_ratio(&self) -> f64 {
        3.0 * self.image.len() as f64 / self.bytes.len() as f64
    }
}

#[derive(Debug, Clone)]
pub struct Decoded {
    pub image: RasterImage,
    pub header: Header,
}

/// Result of coding one channel group for the container.
#[derive(Debug, Clone)]
struct FinalGroup {
    params: GroupParams,
    payload: Vec<u8>,
    reconstruction: Vec<Vec<f64>>,
    codebook: Option<Codebook>,
    mask_colors: usize,
    tonal_applied: bool,
    sse: f64,
    /// Size of the tuned coding when it was rejected for exceeding the budget.
    tuned_size: Option<usize>,
}

fn group_sse(recon: &[Vec<f64>], target: &[Vec<f64>]) -> f64 {
    recon.iter().zip(target).map(|(r, t)| plane_sse(r, t)).sum()
}

fn sample(v: f64) -> f64 {
    f64::from(to_u8(v))
}

/// Decoder output from group reconstructions: clamped, converted, rounded.
fn assemble(mode: Mode, width: usize, height: usize, groups: &[Vec<Vec<f64>>]) -> Result<RasterImage> {
    let clamp = |p: &[f64]| -> Vec<f64> { p.iter().map(|v| v.clamp(0.0, 255.0)).collect() };
    match mode {
        Mode::ScalarRgb | Mode::VectorRgb => {
            let g = &groups[0];
            let planes = [0, 1, 2].map(|c| g[c].iter().map(|&v| sample(v)).collect());
            RasterImage::new(width, height, planes, ColorSpace::Rgb)
        }
        Mode::ScalarLp => {
            let planes = [clamp(&groups[0][0]), clamp(&groups[1][0]), clamp(&groups[1][1])];
            let rgb = ycbcr_to_rgb(&RasterImage::new(width, height, planes, ColorSpace::YCbCr)?)?;
            let planes = [0, 1, 2].map(|c| rgb.plane(c).iter().map(|&v| sample(v)).collect());
            RasterImage::new(width, height, planes, ColorSpace::Rgb)
        }
    }
}

fn distinct_tuples(values: &[Vec<f64>]) -> usize {
    let n = values.first().map_or(0, Vec::len);
    (0..n)
        .map(|i| values.iter().map(|v| v[i].to_bits()).collect::<Vec<u64>>())
        .collect::<HashSet<_>>()
        .len()
}

/// Scalar channel group: planes sharing one mask, each with its own quantiser.
struct ScalarTask<'a> {
    width: usize,
    height: usize,
    target: &'a [Vec<f64>],
}

impl ScalarTask<'_> {
    fn grid(&self, h_fixed: u16) -> Result<RegularGrid> {
        RegularGrid::from_fixed(self.width, self.height, h_fixed)
    }

    fn untuned(&self, h_fixed: u16, q: u16) -> Result<(RegularGrid, UniformQuantizer, Vec<Vec<u16>>, GroupCoding)> {
        let grid = self.grid(h_fixed)?;
        let quantizer = UniformQuantizer::new(q)?;
        let levels = group::quantize_levels(self.target, self.width, &grid.points(), quantizer);
        let coding = encode_scalar_group(&grid, quantizer, &levels)?;
        Ok((grid, quantizer, levels, coding))
    }

    fn evaluate(&self, h_fixed: u16, q: u16) -> Result<Evaluation> {
        let (_, _, _, coding) = self.untuned(h_fixed, q)?;
        Ok(Evaluation {
            size: coding.payload.len(),
            sse: group_sse(&coding.reconstruction, self.target),
        })
    }

    fn finish(&self, h_fixed: u16, q: u16, budget: usize, opts: &EncodeOptions) -> Result<FinalGroup> {
        let (grid, quantizer, levels, coding) = self.untuned(h_fixed, q)?;
        let params = GroupParams { h_fixed, q };
        let stored = |levels: &[Vec<u16>]| -> Vec<Vec<f64>> {
            levels
                .iter()
                .map(|l| l.iter().map(|&v| quantizer.value_of(v)).collect())
                .collect()
        };
        let mut best = FinalGroup {
            params,
            mask_colors: distinct_tuples(&stored(&levels)),
            sse: group_sse(&coding.reconstruction, self.target),
            payload: coding.payload,
            reconstruction: coding.reconstruction,
            codebook: None,
            tonal_applied: false,
            tuned_size: None,
        };
        if opts.tonal == TonalMethod::Off {
            return Ok(best);
        }
        let positions = grid.points();
        let weights = ShepardWeights::for_mask(self.width, self.height, positions.len())?;
        let mut problem = TonalProblem::scalar(
            self.width,
            self.height,
            positions,
            levels,
            quantizer,
            self.target.to_vec(),
            weights,
        )?;
        match opts.tonal {
            TonalMethod::Direct => {
                tonal_optimize_direct(&mut problem, opts.max_sweeps);
            }
            TonalMethod::RandomWalk => {
                tonal_optimize_random_walk(&mut problem, opts.seed, opts.max_sweeps)?;
            }
            TonalMethod::Off => unreachable!(),
        }
        let Admissible::Scalar { levels: tuned, .. } = problem.admissible() else {
            unreachable!("scalar problem");
        };
        let coding = encode_scalar_group(&grid, quantizer, tuned)?;
        let sse = group_sse(&coding.reconstruction, self.target);
        if coding.payload.len() > budget {
            best.tuned_size = Some(coding.payload.len());
        } else if sse < best.sse {
            best = FinalGroup {
                params,
                mask_colors: distinct_tuples(&stored(tuned)),
                sse,
                payload: coding.payload,
                reconstruction: coding.reconstruction,
                codebook: None,
                tonal_applied: true,
                tuned_size: None,
            };
        }
        Ok(best)
    }
}

/// Vector group: RGB mask colours replaced by codebook labels.
struct VectorTask<'a> {
    image: &'a RasterImage,
    target: Vec<Vec<f64>>,
}

impl<'a> VectorTask<'a> {
    fn new(image: &'a RasterImage) -> Self {
        Self {
            image,
            target: image.planes().to_vec(),
        }
    }

    fn untuned(&self, h_fixed: u16, k: u16, seed: u64) -> Result<(RegularGrid, Codebook, Vec<usize>, GroupCoding)> {
        let grid = RegularGrid::from_fixed(self.image.width(), self.image.height(), h_fixed)?;
        let colors: Vec<[f64; 3]> = grid.points().iter().map(|&p| self.image.pixel(p)).collect();
        let km = kmeans(&colors, &KMeansOptions::new(usize::from(k), seed))?;
        let labels16: Vec<u16> = km.labels.iter().map(|&l| l as u16).collect();
        let coding = encode_vector_group(&grid, &km.codebook, &labels16)?;
        Ok((grid, km.codebook, km.labels, coding))
    }

    fn size(coding: &GroupCoding, book: &Codebook) -> usize {
        coding.payload.len() + book.serialize().len()
    }

    fn evaluate(&self, h_fixed: u16, k: u16, seed: u64) -> Result<Evaluation> {
        let (_, book, _, coding) = self.untuned(h_fixed, k, seed)?;
        Ok(Evaluation {
            size: Self::size(&coding, &book),
            sse: group_sse(&coding.reconstruction, &self.target),
        })
    }

    fn finish(&self, h_fixed: u16, k: u16, budget: usize, opts: &EncodeOptions) -> Result<FinalGroup> {
        if opts.tonal == TonalMethod::RandomWalk {
            return Err(Error::contract("random-walk tonal optimisation is scalar only"));
        }
        let (grid, book, labels, coding) = self.untuned(h_fixed, k, opts.seed)?;
        let used = |labels: &[usize]| labels.iter().collect::<HashSet<_>>().len();
        let mut best = FinalGroup {
            params: GroupParams {
                h_fixed,
                q: book.len() as u16,
            },
            mask_colors: used(&labels),
            sse: group_sse(&coding.reconstruction, &self.target),
            payload: coding.payload,
            reconstruction: coding.reconstruction,
            codebook: Some(book.clone()),
            tonal_applied: false,
            tuned_size: None,
        };
        let positions = grid.points();
        let weights = ShepardWeights::for_mask(self.image.width(), self.image.height(), positions.len())?;
        let mut labels = labels;
        let mut tuned = false;
        if opts.tonal == TonalMethod::Direct {
            let mut problem = TonalProblem::vector(
                self.image.width(),
                self.image.height(),
                positions.clone(),
                labels.clone(),
                book.clone(),
                self.target.clone(),
                weights.clone(),
            )?;
            tonal_optimize_direct(&mut problem, opts.max_sweeps);
            let Admissible::Vector { labels: l, .. } = problem.admissible() else {
                unreachable!("vector problem");
            };
            labels = l.clone();
            tuned = true;
        }
        let book = if opts.refine_sweeps > 0 {
            refine_codebook(&book, &labels, &positions, self.image, &weights, opts.refine_sweeps)?
        } else {
            book
        };
        let labels16: Vec<u16> = labels.iter().map(|&l| l as u16).collect();
        let coding = encode_vector_group(&grid, &book, &labels16)?;
        let sse = group_sse(&coding.reconstruction, &self.target);
        let size = Self::size(&coding, &book);
        if size > budget {
            best.tuned_size = Some(size);
        } else if sse < best.sse {
            best = FinalGroup {
                params: best.params,
                mask_colors: used(&labels),
                sse,
                payload: coding.payload,
                reconstruction: coding.reconstruction,
                codebook: Some(book),
                tonal_applied: tuned,
                tuned_size: None,
            };
        }
        Ok(best)
    }
}

/// Spacing adjustments tried when the tuned winner overflows the budget.
const STRETCH_TRIES: usize = 4;
/// Runner-up level counts tried after the winner's.
const RUNNER_UPS: usize = 2;

/// Final coding of a group. Tonal optimisation inflates payloads, so if the
/// tuned winner overflows, its spacing is widened by the observed inflation
/// and the next-best level counts are tried; the lowest error that fits wins.
fn finish_within_budget<F>(
    winner: CandidateRecord,
    records: &[CandidateRecord],
    budget: usize,
    max_h: f64,
    finish: F,
) -> Result<FinalGroup>
where
    F: Fn(u16, u16) -> Result<FinalGroup>,
{
    let mut best = finish(winner.h_fixed, winner.param)?;
    let Some(mut overflow) = best.tuned_size else {
        return Ok(best);
    };
    let mut tried = HashSet::from([(winner.h_fixed, winner.param)]);
    let mut h = fixed_to_h(winner.h_fixed);
    for _ in 0..STRETCH_TRIES {
        h = (h * (overflow as f64 / budget as f64).sqrt() * 1.01).min(max_h);
        let hf = h_to_fixed(h);
        if !tried.insert((hf, winner.param)) {
            break;
        }
        let g = finish(hf, winner.param)?;
        let fitted = g.tuned_size.is_none();
        overflow = g.tuned_size.unwrap_or(overflow);
        if g.sse < best.sse {
            best = g;
        }
        if fitted {
            break;
        }
    }
    let mut others: Vec<&CandidateRecord> = records
        .iter()
        .filter(|r| r.eval.size <= budget && r.param != winner.param)
        .collect();
    others.sort_by(|a, b| a.eval.sse.total_cmp(&b.eval.sse).then(a.h_fixed.cmp(&b.h_fixed)));
    let mut params_seen = HashSet::new();
    for r in others {
        if params_seen.len() >= RUNNER_UPS {
            break;
        }
        if !params_seen.insert(r.param) || !tried.insert((r.h_fixed, r.param)) {
            continue;
        }
        let g = finish(r.h_fixed, r.param)?;
        if g.sse < best.sse {
            best = g;
        }
    }
    Ok(best)
}

fn infeasible(ratio: f64, msg: impl Into<String>) -> Error {
    Error::Infeasible { ratio, msg: msg.into() }
}

fn check_input(image: &RasterImage, opts: &EncodeOptions) -> Result<usize> {
    if image.space() != ColorSpace::Rgb {
        return Err(Error::contract("encoder input must be RGB"));
    }
    if image.width() > usize::from(u16::MAX) || image.height() > usize::from(u16::MAX) {
        return Err(Error::contract("image dimensions exceed 65535"));
    }
    if !(MIN_RATIO..=MAX_RATIO).contains(&opts.ratio) {
        return Err(Error::contract(format!(
            "ratio {} outside [{MIN_RATIO}, {MAX_RATIO}]",
            opts.ratio
        )));
    }
    if let Some(f) = opts.luma_factor {
        luma_index(f)?;
    }
    budget_bytes(image.width(), image.height(), opts.ratio)
}

fn luma_index(f: f64) -> Result<u8> {
    LUMA_FACTORS
        .iter()
        .position(|&x| (x - f).abs() < 1e-9)
        .map(|i| i as u8)
        .ok_or_else(|| Error::contract(format!("luma factor {f} not in {LUMA_FACTORS:?}")))
}

fn payload_budget(budget: usize, header: usize, groups: usize, ratio: f64) -> Result<usize> {
    budget
        .checked_sub(header + groups * LENGTH_FIELD)
        .ok_or_else(|| infeasible(ratio, format!("budget of {budget} bytes cannot hold the header")))
}

/// Writes the container.
fn write_file(header: &Header, payloads: &[&[u8]]) -> Result<Vec<u8>> {
    let mut out = header.serialize()?;
    for p in payloads {
        let len = u32::try_from(p.len()).map_err(|_| Error::contract("payload exceeds 4 GiB"))?;
        out.extend_from_slice(&len.to_be_bytes());
        out.extend_from_slice(p);
    }
    Ok(out)
}

fn finish_encode(
    image: &RasterImage,
    mode: Mode,
    luma_factor: Option<f64>,
    groups: Vec<FinalGroup>,
    candidates: Vec<Vec<CandidateRecord>>,
) -> Result<Encoded> {
    let (w, h) = (image.width(), image.height());
    let codebook = groups[0].codebook.clone();
    let header = Header {
        mode,
        width: w as u16,
        height: h as u16,
        groups: groups.iter().map(|g| g.params).collect(),
        luma_index: luma_factor.map(luma_index).transpose()?,
        codebook: codebook.clone(),
    };
    let payloads: Vec<&[u8]> = groups.iter().map(|g| g.payload.as_slice()).collect();
    let bytes = write_file(&header, &payloads)?;
    let recons: Vec<Vec<Vec<f64>>> = groups.iter().map(|g| g.reconstruction.clone()).collect();
    let out = assemble(mode, w, h, &recons)?;
    let mse = crate::image::mse(image, &out)?;
    Ok(Encoded {
        bytes,
        header,
        image: out,
        mse,
        config: ModeConfig {
            mode,
            groups: groups.iter().map(|g| g.params).collect(),
            luma_factor,
            codebook_size: codebook.as_ref().map(Codebook::len),
        },
        distinct_mask_colors: (mode != Mode::ScalarLp).then_some(groups[0].mask_colors),
        tonal_applied: groups.iter().map(|g| g.tonal_applied).collect(),
        candidates,
    })
}

/// Searches parameters against the budget and encodes.
pub fn encode(image: &RasterImage, opts: &EncodeOptions) -> Result<Encoded> {
    let budget = check_input(image, opts)?;
    let (w, h) = (image.width(), image.height());
    let h_grid = opts.search.h_grid(w, h);
    let ratio = opts.ratio;
    let no_fit = || infeasible(ratio, format!("no candidate fits {budget} bytes"));
    let max_h = max_spacing(w, h);
    match opts.mode {
        Mode::ScalarRgb => {
            let avail = payload_budget(budget, Header::encoded_len(Mode::ScalarRgb, 0), 1, ratio)?;
            let target = image.planes().to_vec();
            let task = ScalarTask {
                width: w,
                height: h,
                target: &target,
            };
            let memo = Memo::new();
            let eval = |hf, q| task.evaluate(hf, q);
            let best = search::grid_search(
                &h_grid,
                &opts.search.q_values,
                avail,
                opts.search.refine_steps,
                &memo,
                &eval,
            )?
            .ok_or_else(no_fit)?;
            let records = memo.records();
            let group = finish_within_budget(best, &records, avail, max_h, |hf, q| task.finish(hf, q, avail, opts))?;
            finish_encode(image, Mode::ScalarRgb, None, vec![group], vec![records])
        }
        Mode::VectorRgb => {
            let avail = payload_budget(budget, Header::encoded_len(Mode::VectorRgb, 0), 1, ratio)?;
            let task = VectorTask::new(image);
            let memo = Memo::new();
            let eval = |hf, k| task.evaluate(hf, k, opts.seed);
            let best = search::grid_search(
                &h_grid,
                &opts.search.k_values,
                avail,
                opts.search.refine_steps,
                &memo,
                &eval,
            )?
            .ok_or_else(no_fit)?;
            let records = memo.records();
            let group = finish_within_budget(best, &records, avail, max_h, |hf, k| task.finish(hf, k, avail, opts))?;
            finish_encode(image, Mode::VectorRgb, None, vec![group], vec![records])
        }
        Mode::ScalarLp => encode_lp(image, opts, budget, &h_grid),
    }
}

fn max_spacing(width: usize, height: usize) -> f64 {
    (width.min(height) as f64).min(255.0)
}

/// Luma budget for a payload budget `total`.
pub fn luma_budget(total: usize, f: f64, split: LumaSplit) -> usize {
    let share = match split {
        LumaSplit::Fraction => f,
        LumaSplit::Literal => f / (1.0 + f),
    };
    (share * total as f64).floor() as usize
}

fn encode_lp(image: &RasterImage, opts: &EncodeOptions, budget: usize, h_grid: &[u16]) -> Result<Encoded> {
    let (w, h) = (image.width(), image.height());
    let ratio = opts.ratio;
    let avail = payload_budget(budget, Header::encoded_len(Mode::ScalarLp, 0), 2, ratio)?;
    let ycc = crate::image::rgb_to_ycbcr(image)?;
    let luma = vec![ycc.plane(0).to_vec()];
    let chroma = vec![ycc.plane(1).to_vec(), ycc.plane(2).to_vec()];
    let tasks = [
        ScalarTask {
            width: w,
            height: h,
            target: &luma,
        },
        ScalarTask {
            width: w,
            height: h,
            target: &chroma,
        },
    ];
    let memos = [Memo::new(), Memo::new()];
    let factors: Vec<f64> = match opts.luma_factor {
        Some(f) => vec![f],
        None => LUMA_FACTORS.to_vec(),
    };
    let max_h = max_spacing(w, h);
    let mut finished: std::collections::HashMap<(usize, u16, u16, usize), FinalGroup> = Default::default();
    let mut best: Option<Encoded> = None;
    for f in factors {
        let y_budget = luma_budget(avail, f, opts.luma_split);
        let budgets = [y_budget, avail - y_budget];
        let mut groups = Vec::with_capacity(2);
        for g in 0..2 {
            let task = &tasks[g];
            let eval = |hf, q| task.evaluate(hf, q);
            let found = search::grid_search(
                h_grid,
                &opts.search.q_values,
                budgets[g],
                opts.search.refine_steps,
                &memos[g],
                &eval,
            )?;
            match found {
                Some(c) => {
                    let key = (g, c.h_fixed, c.param, budgets[g]);
                    if let Some(done) = finished.get(&key) {
                        groups.push(done.clone());
                        continue;
                    }
                    let records = memos[g].records();
                    let done = finish_within_budget(c, &records, budgets[g], max_h, |hf, q| {
                        task.finish(hf, q, budgets[g], opts)
                    })?;
                    finished.insert(key, done.clone());
                    groups.push(done);
                }
                None => break,
            }
        }
        if groups.len() < 2 {
            continue;
        }
        let encoded = finish_encode(
            image,
            Mode::ScalarLp,
            Some(f),
            groups,
            memos.iter().map(Memo::records).collect(),
        )?;
        if best.as_ref().is_none_or(|b| encoded.mse < b.mse) {
            best = Some(encoded);
        }
    }
    best.ok_or_else(|| infeasible(ratio, format!("no luma/chroma split fits {budget} bytes")))
}

/// Encodes with fixed parameters, skipping the search. The budget is not
/// enforced; `opts.ratio` is ignored.
pub fn encode_with_config(image: &RasterImage, config: &ModeConfig, opts: &EncodeOptions) -> Result<Encoded> {
    if image.space() != ColorSpace::Rgb {
        return Err(Error::contract("encoder input must be RGB"));
    }
    if config.groups.len() != config.mode.groups() {
        return Err(Error::contract("group count does not match mode"));
    }
    let (w, h) = (image.width(), image.height());
    let g0 = config.groups[0];
    match config.mode {
        Mode::ScalarRgb => {
            let target = image.planes().to_vec();
            let task = ScalarTask {
                width: w,
                height: h,
                target: &target,
            };
            let group = task.finish(g0.h_fixed, g0.q, usize::MAX, opts)?;
            finish_encode(image, Mode::ScalarRgb, None, vec![group], vec![Vec::new()])
        }
        Mode::VectorRgb => {
            let task = VectorTask::new(image);
            let group = task.finish(g0.h_fixed, g0.q, usize::MAX, opts)?;
            finish_encode(image, Mode::VectorRgb, None, vec![group], vec![Vec::new()])
        }
        Mode::ScalarLp => {
            let f = config
                .luma_factor
                .ok_or_else(|| Error::contract("LP config needs a luma factor"))?;
            luma_index(f)?;
            let ycc = crate::image::rgb_to_ycbcr(image)?;
            let luma = vec![ycc.plane(0).to_vec()];
            let chroma = vec![ycc.plane(1).to_vec(), ycc.plane(2).to_vec()];
            let g1 = config.groups[1];
            let y = ScalarTask {
                width: w,
                height: h,
                target: &luma,
            }
            .finish(g0.h_fixed, g0.q, usize::MAX, opts)?;
            let c = ScalarTask {
                width: w,
                height: h,
                target: &chroma,
            }
            .finish(g1.h_fixed, g1.q, usize::MAX, opts)?;
            finish_encode(image, Mode::ScalarLp, Some(f), vec![y, c], vec![Vec::new(), Vec::new()])
        }
    }
}

/// Decodes a `.rjc` file. Errors carry the byte offset of the problem.
pub fn decode(bytes: &[u8]) -> Result<Decoded> {
    let (header, mut pos) = Header::parse(bytes)?;
    let (w, h) = (usize::from(header.width), usize::from(header.height));
    let mut recons = Vec::with_capacity(header.groups.len());
    for (g, params) in header.groups.iter().enumerate() {
        if bytes.len() < pos + LENGTH_FIELD {
            return Err(Error::corrupt(bytes.len(), format!("truncated length of group {g}")));
        }
        let len = u32::from_be_bytes(bytes[pos..pos + LENGTH_FIELD].try_into().expect("4 bytes")) as usize;
        pos += LENGTH_FIELD;
        let payload = bytes
            .get(pos..pos.saturating_add(len))
            .ok_or_else(|| Error::corrupt(bytes.len(), format!("group {g} payload truncated")))?;
        let grid =
            RegularGrid::from_fixed(w, h, params.h_fixed).map_err(|e| Error::corrupt(10 + 3 * g, e.to_string()))?;
        let recon = match header.mode {
            Mode::VectorRgb => {
                let book = header.codebook.as_ref().expect("validated header");
                decode_vector_group(payload, &grid, book, pos)?.0
            }
            Mode::ScalarRgb | Mode::ScalarLp => {
                let quantizer =
                    UniformQuantizer::new(params.q).map_err(|e| Error::corrupt(12 + 3 * g, e.to_string()))?;
                let channels = match (header.mode, g) {
                    (Mode::ScalarLp, 0) => 1,
                    (Mode::ScalarLp, _) => 2,
                    _ => 3,
                };
                decode_scalar_group(payload, &grid, quantizer, channels, pos)?.0
            }
        };
        recons.push(recon);
        pos += len;
    }
    if pos != bytes.len() {
        return Err(Error::corrupt(pos, format!("{} trailing bytes", bytes.len() - pos)));
    }
    let image = assemble(header.mode, w, h, &recons)?;
    Ok(Decoded { image, header })
}

/// Mask positions of group `g` of a header, for inspection.
pub fn mask_positions(header: &Header, g: usize) -> Result<Vec<PixelCoord>> {
    let params = header
        .groups
        .get(g)
        .ok_or_else(|| Error::contract(format!("no group {g}")))?;
    Ok(RegularGrid::from_fixed(usize::from(header.width), usize::from(header.height), params.h_fixed)?.points())
}
