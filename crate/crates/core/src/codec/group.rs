//! Coding of one channel group: a set of planes sharing one regular mask.
//!
//! Scalar groups use joint inpainting and prediction. Mask points are visited
//! in grid order; each point is predicted by Shepard interpolation from the
//! points already coded, the prediction is quantised, and only the residual
//! `(level - predicted level) mod q` is entropy coded. The decoder repeats the
//! same steps, so both sides hold identical accumulators at every point.
//!
//! Vector groups code palette labels with 2-D context PPM instead.

use crate::entropy::{
    pack_raw, ppm2d_decode, ppm2d_encode, raw_bits, unpack_raw, AdaptiveModel, RangeDecoder, RangeEncoder,
    METHOD_CODED, METHOD_RAW,
};
use crate::error::{Error, Result};
use crate::image::PixelCoord;
use crate::inpaint::{AccumulatorField, KnownPixels, ShepardWeights};
use crate::mask::RegularGrid;
use crate::quantize::{Codebook, UniformQuantizer};

/// Payload of one channel group and the reconstruction a decoder will produce.
#[derive(Debug, Clone)]
pub struct GroupCoding {
    pub payload: Vec<u8>,
    /// One plane per channel, unclamped.
    pub reconstruction: Vec<Vec<f64>>,
}

/// Initial levels: each mask sample quantised on its own.
pub fn quantize_levels(
    target: &[Vec<f64>],
    width: usize,
    positions: &[PixelCoord],
    quantizer: UniformQuantizer,
) -> Vec<Vec<u16>> {
    target
        .iter()
        .map(|plane| {
            positions
                .iter()
                .map(|p| quantizer.level_of(plane[p.y * width + p.x]))
                .collect()
        })
        .collect()
}

fn known_from(positions: &[PixelCoord], values: Vec<Vec<f64>>) -> Result<KnownPixels> {
    KnownPixels::new(positions.to_vec(), values)
}

/// Predictive coding of scalar levels, `levels[c][i]` for mask point `i`.
pub fn encode_scalar_group(
    grid: &RegularGrid,
    quantizer: UniformQuantizer,
    levels: &[Vec<u16>],
) -> Result<GroupCoding> {
    let positions = grid.points();
    let channels = levels.len();
    if channels == 0 || levels.iter().any(|l| l.len() != positions.len()) {
        return Err(Error::contract("levels must cover every mask point of every channel"));
    }
    if levels.iter().flatten().any(|&l| l >= quantizer.levels()) {
        return Err(Error::contract("level outside quantiser range"));
    }
    let (w, h) = (grid.width(), grid.height());
    let weights = ShepardWeights::for_mask(w, h, positions.len())?;
    let q = usize::from(quantizer.levels());
    let mut acc = AccumulatorField::new(w, h, channels);
    let mut models = vec![AdaptiveModel::new(q); channels];
    let mut enc = RangeEncoder::new();
    let mut pred = vec![0.0; channels];
    let mut value = vec![0.0; channels];
    for (i, &p) in positions.iter().enumerate() {
        acc.predict_into(p.y * w + p.x, &mut pred);
        for c in 0..channels {
            let predicted = usize::from(quantizer.level_of(pred[c]));
            let level = usize::from(levels[c][i]);
            models[c].encode(&mut enc, (level + q - predicted) % q);
            value[c] = quantizer.value_of(levels[c][i]);
        }
        acc.add_known_pixel(p, &value, &weights);
    }
    let coded = enc.finish();
    let bits = raw_bits(q);
    let raw_len = (positions.len() * channels * bits as usize).div_ceil(8);
    let mut payload;
    if raw_len < coded.len() {
        payload = vec![METHOD_RAW];
        let interleaved: Vec<u16> = (0..positions.len())
            .flat_map(|i| levels.iter().map(move |l| l[i]))
            .collect();
        payload.extend(pack_raw(&interleaved, bits));
    } else {
        payload = vec![METHOD_CODED];
        payload.extend(coded);
    }
    let values = levels
        .iter()
        .map(|l| l.iter().map(|&v| quantizer.value_of(v)).collect())
        .collect();
    let reconstruction = acc.reconstruct(&known_from(&positions, values)?);
    Ok(GroupCoding {
        payload,
        reconstruction,
    })
}

/// Reconstruction planes and the decoded levels.
pub type ScalarDecode = (Vec<Vec<f64>>, Vec<Vec<u16>>);

/// Inverse of [`encode_scalar_group`]. `base` is the payload's file offset.
pub fn decode_scalar_group(
    payload: &[u8],
    grid: &RegularGrid,
    quantizer: UniformQuantizer,
    channels: usize,
    base: usize,
) -> Result<ScalarDecode> {
    let positions = grid.points();
    let (w, h) = (grid.width(), grid.height());
    let weights = ShepardWeights::for_mask(w, h, positions.len())?;
    let q = usize::from(quantizer.levels());
    let mut levels = vec![vec![0u16; positions.len()]; channels];
    let mut acc = AccumulatorField::new(w, h, channels);
    let mut value = vec![0.0; channels];
    let (&method, body) = payload
        .split_first()
        .ok_or_else(|| Error::corrupt(base, "empty group payload"))?;
    match method {
        METHOD_RAW => {
            let raw = unpack_raw(body, raw_bits(q), positions.len() * channels, base + 1)?;
            for (i, &p) in positions.iter().enumerate() {
                for c in 0..channels {
                    let l = raw[i * channels + c];
                    if usize::from(l) >= q {
                        return Err(Error::corrupt(base + 1, "raw level outside quantiser range"));
                    }
                    levels[c][i] = l;
                    value[c] = quantizer.value_of(l);
                }
                acc.add_known_pixel(p, &value, &weights);
            }
        }
        METHOD_CODED => {
            let mut dec = RangeDecoder::with_base(body, base + 1)?;
            let mut models = vec![AdaptiveModel::new(q); channels];
            let mut pred = vec![0.0; channels];
            for (i, &p) in positions.iter().enumerate() {
                acc.predict_into(p.y * w + p.x, &mut pred);
                for c in 0..channels {
                    let predicted = usize::from(quantizer.level_of(pred[c]));
                    let residual = models[c].decode(&mut dec)?;
                    let l = ((residual + predicted) % q) as u16;
                    levels[c][i] = l;
                    value[c] = quantizer.value_of(l);
                }
                acc.add_known_pixel(p, &value, &weights);
            }
        }
        m => return Err(Error::corrupt(base, format!("unknown payload method {m}"))),
    }
    let values = levels
        .iter()
        .map(|l| l.iter().map(|&v| quantizer.value_of(v)).collect())
        .collect();
    let reconstruction = acc.reconstruct(&known_from(&positions, values)?);
    Ok((reconstruction, levels))
}

fn codebook_values(codebook: &Codebook, labels: &[u16]) -> Vec<Vec<f64>> {
    (0..3)
        .map(|c| {
            labels
                .iter()
                .map(|&l| f64::from(codebook.centers()[usize::from(l)][c]))
                .collect()
        })
        .collect()
}

fn inpaint_labels(
    grid: &RegularGrid,
    positions: &[PixelCoord],
    codebook: &Codebook,
    labels: &[u16],
) -> Result<Vec<Vec<f64>>> {
    let weights = ShepardWeights::for_mask(grid.width(), grid.height(), positions.len())?;
    let known = known_from(positions, codebook_values(codebook, labels))?;
    crate::inpaint::shepard_inpaint(&known, grid.width(), grid.height(), &weights)
}

/// PPM coding of palette labels laid out on the grid.
pub fn encode_vector_group(grid: &RegularGrid, codebook: &Codebook, labels: &[u16]) -> Result<GroupCoding> {
    let positions = grid.points();
    if labels.len() != positions.len() {
        return Err(Error::contract("one label per mask point required"));
    }
    let payload = ppm2d_encode(labels, grid.rows(), grid.cols(), codebook.len())?;
    let reconstruction = inpaint_labels(grid, &positions, codebook, labels)?;
    Ok(GroupCoding {
        payload,
        reconstruction,
    })
}

pub fn decode_vector_group(
    payload: &[u8],
    grid: &RegularGrid,
    codebook: &Codebook,
    base: usize,
) -> Result<(Vec<Vec<f64>>, Vec<u16>)> {
    let positions = grid.points();
    let labels = ppm2d_decode(payload, grid.rows(), grid.cols(), codebook.len()).map_err(|e| match e {
        Error::Corrupt { offset, msg } => Error::corrupt(base + offset, msg),
        other => other,
    })?;
    let reconstruction = inpaint_labels(grid, &positions, codebook, &labels)?;
    Ok((reconstruction, labels))
}
