//! Container header. Big-endian throughout; see FORMAT.md for the layout.

use crate::error::{Error, Result};
use crate::quantize::Codebook;

pub const MAGIC: &[u8; 4] = b"RJPC";
pub const VERSION: u8 = 1;

/// Luma factors addressable by the header's index byte.
pub const LUMA_FACTORS: [f64; 5] = [0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    ScalarRgb = 0,
    ScalarLp = 1,
    VectorRgb = 2,
}

impl Mode {
    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Mode::ScalarRgb),
            1 => Some(Mode::ScalarLp),
            2 => Some(Mode::VectorRgb),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::ScalarRgb => "rgb",
            Mode::ScalarLp => "lp",
            Mode::VectorRgb => "vector",
        }
    }

    /// Number of channel groups, each with its own mask and payload.
    pub fn groups(self) -> usize {
        match self {
            Mode::ScalarLp => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rgb" => Ok(Mode::ScalarRgb),
            "lp" => Ok(Mode::ScalarLp),
            "vector" => Ok(Mode::VectorRgb),
            other => Err(Error::contract(format!("unknown mode {other:?}"))),
        }
    }
}

/// Mask spacing and level count of one channel group. In vector mode `q` is
/// the codebook size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GroupParams {
    pub h_fixed: u16,
    pub q: u16,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub mode: Mode,
    pub width: u16,
    pub height: u16,
    pub groups: Vec<GroupParams>,
    /// Index into [`LUMA_FACTORS`]; LP mode only.
    pub luma_index: Option<u8>,
    /// Vector mode only.
    pub codebook: Option<Codebook>,
}

impl Header {
    /// Size in bytes of a header with these optional parts.
    pub fn encoded_len(mode: Mode, codebook_len: usize) -> usize {
        let mut n = 4 + 1 + 1 + 2 + 2 + 3 * mode.groups();
        match mode {
            Mode::ScalarLp => n += 1,
            Mode::VectorRgb => n += 1 + 3 * codebook_len,
            Mode::ScalarRgb => {}
        }
        n
    }

    fn validate(&self) -> Result<()> {
        if self.groups.len() != self.mode.groups() {
            return Err(Error::contract("channel group count does not match mode"));
        }
        if self.groups.iter().any(|g| !(1..=256).contains(&g.q)) {
            return Err(Error::contract("group q outside [1, 256]"));
        }
        match (self.mode, &self.luma_index, &self.codebook) {
            (Mode::ScalarRgb, None, None) => {}
            (Mode::ScalarLp, Some(i), None) if usize::from(*i) < LUMA_FACTORS.len() => {}
            (Mode::VectorRgb, None, Some(book)) if book.len() == usize::from(self.groups[0].q) => {}
            _ => return Err(Error::contract("optional header fields do not match mode")),
        }
        if self.mode != Mode::VectorRgb && self.groups.iter().any(|g| g.q < 2) {
            return Err(Error::contract("scalar q must be at least 2"));
        }
        Ok(())
    }

    pub fn serialize(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let mut out = Vec::with_capacity(Self::encoded_len(
            self.mode,
            self.codebook.as_ref().map_or(0, Codebook::len),
        ));
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(self.mode as u8);
        out.extend_from_slice(&self.width.to_be_bytes());
        out.extend_from_slice(&self.height.to_be_bytes());
        for g in &self.groups {
            out.extend_from_slice(&g.h_fixed.to_be_bytes());
            out.push((g.q - 1) as u8);
        }
        if let Some(i) = self.luma_index {
            out.push(i);
        }
        if let Some(book) = &self.codebook {
            out.extend(book.serialize());
        }
        Ok(out)
    }

    /// Parses a header, returning it and its length.
    pub fn parse(bytes: &[u8]) -> Result<(Self, usize)> {
        let need = |n: usize, what: &str| -> Result<()> {
            if bytes.len() < n {
                Err(Error::corrupt(bytes.len(), format!("truncated header: missing {what}")))
            } else {
                Ok(())
            }
        };
        need(10, "fixed fields")?;
        if &bytes[..4] != MAGIC {
            return Err(Error::corrupt(0, "bad magic"));
        }
        if bytes[4] != VERSION {
            return Err(Error::corrupt(4, format!("unsupported version {}", bytes[4])));
        }
        let mode = Mode::from_byte(bytes[5]).ok_or_else(|| Error::corrupt(5, format!("unknown mode {}", bytes[5])))?;
        let width = u16::from_be_bytes([bytes[6], bytes[7]]);
        let height = u16::from_be_bytes([bytes[8], bytes[9]]);
        if width == 0 || height == 0 {
            return Err(Error::corrupt(6, "zero image dimension"));
        }
        let mut pos = 10;
        let mut groups = Vec::with_capacity(mode.groups());
        for _ in 0..mode.groups() {
            need(pos + 3, "channel group parameters")?;
            groups.push(GroupParams {
                h_fixed: u16::from_be_bytes([bytes[pos], bytes[pos + 1]]),
                q: u16::from(bytes[pos + 2]) + 1,
            });
            pos += 3;
        }
        let mut luma_index = None;
        let mut codebook = None;
        match mode {
            Mode::ScalarLp => {
                need(pos + 1, "luma factor")?;
                luma_index = Some(bytes[pos]);
                pos += 1;
            }
            Mode::VectorRgb => {
                let (book, used) = Codebook::deserialize(&bytes[pos..]).map_err(|e| match e {
                    Error::Corrupt { offset, msg } => Error::corrupt(pos + offset, msg),
                    other => other,
                })?;
                codebook = Some(book);
                pos += used;
            }
            Mode::ScalarRgb => {}
        }
        let header = Self {
            mode,
            width,
            height,
            groups,
            luma_index,
            codebook,
        };
        header.validate().map_err(|e| Error::corrupt(pos, e.to_string()))?;
        Ok((header, pos))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rgb_header() -> Header {
        Header {
            mode: Mode::ScalarRgb,
            width: 768,
            height: 512,
            groups: vec![GroupParams { h_fixed: 0x0480, q: 16 }],
            luma_index: None,
            codebook: None,
        }
    }

    #[test]
    fn rgb_layout() {
        let bytes = rgb_header().serialize().unwrap();
        assert_eq!(bytes, b"RJPC\x01\x00\x03\x00\x02\x00\x04\x80\x0f".to_vec());
        assert_eq!(bytes.len(), Header::encoded_len(Mode::ScalarRgb, 0));
        assert_eq!(Header::parse(&bytes).unwrap(), (rgb_header(), 13));
    }

    #[test]
    fn vector_layout() {
        let h = Header {
            mode: Mode::VectorRgb,
            width: 2,
            height: 3,
            groups: vec![GroupParams { h_fixed: 256, q: 2 }],
            luma_index: None,
            codebook: Some(Codebook::new(vec![[1, 2, 3], [250, 251, 252]]).unwrap()),
        };
        let bytes = h.serialize().unwrap();
        assert_eq!(&bytes[10..], &[1, 0, 1, 1, 1, 2, 3, 250, 251, 252]);
        assert_eq!(bytes.len(), Header::encoded_len(Mode::VectorRgb, 2));
        assert_eq!(Header::parse(&bytes).unwrap().0, h);
    }

    #[test]
    fn rejects_bad_headers() {
        let bytes = rgb_header().serialize().unwrap();
        assert!(matches!(
            Header::parse(&bytes[..12]),
            Err(Error::Corrupt { offset: 12, .. })
        ));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Header::parse(&bad).is_err());
        let mut bad = bytes.clone();
        bad[5] = 9;
        assert!(matches!(Header::parse(&bad), Err(Error::Corrupt { offset: 5, .. })));
        let mut h = rgb_header();
        h.luma_index = Some(1);
        assert!(h.serialize().is_err());
        let mut h = rgb_header();
        h.groups[0].q = 1;
        assert!(h.serialize().is_err());
    }
}
