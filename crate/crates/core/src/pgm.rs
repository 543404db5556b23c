//! Binary PGM (P5, maxval 255) encoding for masks.
//!
//! Binary masks map 0 to 0 and 1 to 255; on read any sample `>= 128` is
//! foreground. Probability maps are scaled linearly onto 0..=255.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{ImdError, Result};
use crate::mask::{BinaryMask, ProbMask};

pub fn encode_gray8(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    debug_assert_eq!(pixels.len(), width * height);
    let mut out = Vec::with_capacity(pixels.len() + 20);
    write!(out, "P5\n{width} {height}\n255\n").expect("vec write");
    out.extend_from_slice(pixels);
    out
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Header<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Result<&'a str> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(ImdError::Pgm("truncated header".into()));
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).map_err(|_| ImdError::Pgm("non-ascii header".into()))
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let tok = self.token()?;
        tok.parse().map_err(|_| ImdError::Pgm(format!("bad {what}: {tok:?}")))
    }
}

/// Decode a P5 image into `(width, height, samples)` rescaled to 0..=255.
pub fn decode_gray8(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let mut h = Header { bytes, pos: 0 };
    if h.token()? != "P5" {
        return Err(ImdError::Pgm("expected magic P5".into()));
    }
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(ImdError::Pgm(format!("zero dimension {width}x{height}")));
    }
    if maxval == 0 || maxval > 255 {
        return Err(ImdError::Pgm(format!("unsupported maxval {maxval}")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if h.pos >= bytes.len() || !bytes[h.pos].is_ascii_whitespace() {
        return Err(ImdError::Pgm("missing raster separator".into()));
    }
    let start = h.pos + 1;
    let n = width * height;
    let raster = bytes.get(start..start + n).ok_or_else(|| {
        ImdError::Pgm(format!(
            "raster has {} bytes, need {n}",
            bytes.len().saturating_sub(start)
        ))
    })?;
    let pixels = if maxval == 255 {
        raster.to_vec()
    } else {
        raster
            .iter()
            .map(|&v| ((v as usize * 255 + maxval / 2) / maxval).min(255) as u8)
            .collect()
    };
    Ok((width, height, pixels))
}

pub fn encode_binary(mask: &BinaryMask) -> Vec<u8> {
    let px: Vec<u8> = mask.as_slice().iter().map(|&v| if v != 0 { 255 } else { 0 }).collect();
    encode_gray8(mask.width(), mask.height(), &px)
}

pub fn decode_binary(bytes: &[u8]) -> Result<BinaryMask> {
    let (w, h, px) = decode_gray8(bytes)?;
    BinaryMask::from_vec(w, h, px.into_iter().map(|v| (v >= 128) as u8).collect())
}

pub fn unit_to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn encode_prob(p: &ProbMask) -> Vec<u8> {
    let px: Vec<u8> = p.as_slice().iter().map(|&v| unit_to_u8(v)).collect();
    encode_gray8(p.width(), p.height(), &px)
}

pub fn decode_prob(bytes: &[u8]) -> Result<ProbMask> {
    let (w, h, px) = decode_gray8(bytes)?;
    ProbMask::from_vec(w, h, px.into_iter().map(|v| v as f64 / 255.0).collect())
}

pub fn write_binary(path: &Path, mask: &BinaryMask) -> Result<()> {
    fs::write(path, encode_binary(mask))?;
    Ok(())
}

pub fn read_binary(path: &Path) -> Result<BinaryMask> {
    decode_binary(&fs::read(path)?)
}

pub fn write_prob(path: &Path, p: &ProbMask) -> Result<()> {
    fs::write(path, encode_prob(p))?;
    Ok(())
}

pub fn read_prob(path: &Path) -> Result<ProbMask> {
    decode_prob(&fs::read(path)?)
}
