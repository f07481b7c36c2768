//! Lossless coding layer.
//!
//! Every payload produced here starts with a one-byte method tag:
//! [`METHOD_CODED`] for a range-coded stream, [`METHOD_RAW`] for symbols packed
//! at a fixed bit width. Encoders emit whichever is shorter, which bounds the
//! worst-case expansion.

pub mod model;
pub mod ppm;
pub mod range;

pub use model::AdaptiveModel;
pub use ppm::{Neighbours, PpmModel};
pub use range::{RangeDecoder, RangeEncoder};

use crate::error::{Error, Result};

pub const METHOD_CODED: u8 = 0;
pub const METHOD_RAW: u8 = 1;

/// Bits needed to store one symbol of an alphabet of size `alphabet`.
pub fn raw_bits(alphabet: usize) -> u32 {
    usize::BITS - (alphabet.max(1) - 1).leading_zeros()
}

/// Packs symbols MSB-first at `bits` bits each.
pub fn pack_raw(symbols: &[u16], bits: u32) -> Vec<u8> {
    let mut out = Vec::with_capacity((symbols.len() * bits as usize).div_ceil(8));
    let mut acc: u32 = 0;
    let mut filled = 0;
    for &s in symbols {
        acc = (acc << bits) | u32::from(s);
        filled += bits;
        while filled >= 8 {
            filled -= 8;
            out.push((acc >> filled) as u8);
        }
        acc &= (1 << filled) - 1;
    }
    if filled > 0 {
        out.push((acc << (8 - filled)) as u8);
    }
    out
}

pub fn unpack_raw(bytes: &[u8], bits: u32, count: usize, base: usize) -> Result<Vec<u16>> {
    let need = (count * bits as usize).div_ceil(8);
    if bytes.len() < need {
        return Err(Error::corrupt(
            base + bytes.len(),
            format!("raw payload needs {need} bytes"),
        ));
    }
    let mut out = Vec::with_capacity(count);
    let mut acc: u32 = 0;
    let mut filled = 0;
    let mut it = bytes.iter();
    for _ in 0..count {
        while filled < bits {
            acc = (acc << 8) | u32::from(*it.next().expect("length checked"));
            filled += 8;
        }
        filled -= bits;
        out.push(((acc >> filled) & ((1 << bits) - 1)) as u16);
        acc &= (1 << filled) - 1;
    }
    Ok(out)
}

fn check_symbols(symbols: &[u16], alphabet: usize) -> Result<()> {
    if !(1..=256).contains(&alphabet) {
        return Err(Error::contract(format!("alphabet size {alphabet} outside [1, 256]")));
    }
    match symbols.iter().find(|&&s| usize::from(s) >= alphabet) {
        Some(s) => Err(Error::contract(format!("symbol {s} outside alphabet {alphabet}"))),
        None => Ok(()),
    }
}

/// Chooses the shorter of a coded stream and raw packing.
fn frame(coded: Vec<u8>, symbols: &[u16], alphabet: usize) -> Vec<u8> {
    let bits = raw_bits(alphabet);
    let raw_len = (symbols.len() * bits as usize).div_ceil(8);
    if raw_len < coded.len() {
        let mut out = vec![METHOD_RAW];
        out.extend(pack_raw(symbols, bits));
        out
    } else {
        let mut out = vec![METHOD_CODED];
        out.extend(coded);
        out
    }
}

fn split_method(bytes: &[u8]) -> Result<(u8, &[u8])> {
    match bytes.split_first() {
        Some((&m, rest)) if m == METHOD_CODED || m == METHOD_RAW => Ok((m, rest)),
        Some((m, _)) => Err(Error::corrupt(0, format!("unknown payload method {m}"))),
        None => Err(Error::corrupt(0, "empty payload")),
    }
}

/// Adaptive order-0 coding of a symbol sequence.
pub fn range_encode(symbols: &[u16], alphabet: usize) -> Result<Vec<u8>> {
    check_symbols(symbols, alphabet)?;
    let mut model = AdaptiveModel::new(alphabet);
    let mut enc = RangeEncoder::new();
    for &s in symbols {
        model.encode(&mut enc, usize::from(s));
    }
    Ok(frame(enc.finish(), symbols, alphabet))
}

pub fn range_decode(bytes: &[u8], alphabet: usize, count: usize) -> Result<Vec<u16>> {
    check_symbols(&[], alphabet)?;
    let (method, body) = split_method(bytes)?;
    if method == METHOD_RAW {
        return unpack_raw(body, raw_bits(alphabet), count, 1);
    }
    let mut model = AdaptiveModel::new(alphabet);
    let mut dec = RangeDecoder::with_base(body, 1)?;
    (0..count).map(|_| model.decode(&mut dec).map(|s| s as u16)).collect()
}

/// Codes `(level - prediction) mod q` with one adaptive model.
pub fn residual_encode(levels: &[u16], predictions: &[u16], q: usize) -> Result<Vec<u8>> {
    if levels.len() != predictions.len() {
        return Err(Error::contract("levels and predictions differ in length"));
    }
    check_symbols(levels, q)?;
    check_symbols(predictions, q)?;
    let residuals: Vec<u16> = levels
        .iter()
        .zip(predictions)
        .map(|(&l, &p)| ((usize::from(l) + q - usize::from(p)) % q) as u16)
        .collect();
    range_encode(&residuals, q)
}

pub fn residual_decode(bytes: &[u8], predictions: &[u16], q: usize) -> Result<Vec<u16>> {
    check_symbols(predictions, q)?;
    let residuals = range_decode(bytes, q, predictions.len())?;
    Ok(residuals
        .iter()
        .zip(predictions)
        .map(|(&r, &p)| ((usize::from(r) + usize::from(p)) % q) as u16)
        .collect())
}

/// PPM coding of a row-major `rows x cols` label grid.
pub fn ppm2d_encode(labels: &[u16], rows: usize, cols: usize, q: usize) -> Result<Vec<u8>> {
    if labels.len() != rows * cols {
        return Err(Error::contract("label grid size mismatch"));
    }
    check_symbols(labels, q)?;
    let mut model = PpmModel::new(q);
    let mut enc = RangeEncoder::new();
    for r in 0..rows {
        for c in 0..cols {
            model.encode(&mut enc, Neighbours::of(labels, cols, r, c), labels[r * cols + c]);
        }
    }
    Ok(frame(enc.finish(), labels, q))
}

pub fn ppm2d_decode(bytes: &[u8], rows: usize, cols: usize, q: usize) -> Result<Vec<u16>> {
    check_symbols(&[], q)?;
    let (method, body) = split_method(bytes)?;
    if method == METHOD_RAW {
        let labels = unpack_raw(body, raw_bits(q), rows * cols, 1)?;
        check_symbols(&labels, q).map_err(|_| Error::corrupt(1, "raw label outside alphabet"))?;
        return Ok(labels);
    }
    let mut model = PpmModel::new(q);
    let mut dec = RangeDecoder::with_base(body, 1)?;
    let mut labels = vec![0u16; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            labels[r * cols + c] = model.decode(&mut dec, Neighbours::of(&labels, cols, r, c))?;
        }
    }
    Ok(labels)
}
