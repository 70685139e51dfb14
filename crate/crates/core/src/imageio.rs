//! Grayscale image input and PGM output.
//!
//! PGM files are binary P5 with a header `P5\n<w> <h>\n<maxval>\n` followed
//! by `w·h` sample bytes. PNG input may be gray or RGB; color is converted to
//! luma with weights 0.299, 0.587, 0.114.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::patching::{BinaryImage, GrayImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    Png,
}

impl ImageFormat {
    /// Format from the file extension (case-insensitive).
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "pgm" => Some(Self::Pgm),
            "png" => Some(Self::Png),
            _ => None,
        }
    }
}

fn format_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        offset,
        message: message.into(),
    }
}

/// Header fields parsed from the front of a P5 stream.
struct PgmCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl PgmCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(format_err(start, format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format_err(start, format!("{what} out of range")))
    }
}

/// Parses a binary P5 PGM. Samples are divided by `maxval`.
pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if !bytes.starts_with(b"P5") {
        return Err(format_err(0, "missing P5 magic"));
    }
    let mut cur = PgmCursor { bytes, pos: 2 };
    if !bytes.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(format_err(2, "expected whitespace after magic"));
    }
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    cur.skip_space_and_comments();
    let maxval_at = cur.pos;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(format_err(maxval_at, format!("empty image {width}x{height}")));
    }
    if maxval == 0 || maxval > 255 {
        return Err(format_err(maxval_at, format!("unsupported maxval {maxval}")));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(format_err(cur.pos, "expected single whitespace before pixel data")),
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| format_err(0, "image dimensions overflow"))?;
    let payload = &bytes[cur.pos..];
    if payload.len() < count {
        return Err(format_err(
            bytes.len(),
            format!("truncated pixel data: {} of {count} bytes", payload.len()),
        ));
    }
    let scale = maxval as f64;
    let mut data = Vec::with_capacity(count);
    for (i, &b) in payload[..count].iter().enumerate() {
        if b as usize > maxval {
            return Err(format_err(cur.pos + i, format!("sample {b} exceeds maxval {maxval}")));
        }
        data.push(b as f64 / scale);
    }
    GrayImage::new(height, width, data)
}

/// Encodes 8-bit samples as P5 with maxval 255.
pub fn encode_pgm(height: usize, width: usize, samples: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(samples);
    out
}

fn decode_png(bytes: &[u8]) -> Result<GrayImage> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = if img.color().has_color() {
        img.to_rgb8()
            .pixels()
            .map(|p| {
                let [r, g, b] = p.0;
                (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64) / 255.0
            })
            .map(|v| v.clamp(0.0, 1.0))
            .collect()
    } else {
        img.to_luma8().pixels().map(|p| p.0[0] as f64 / 255.0).collect()
    };
    GrayImage::new(h, w, data)
}

/// Reads a PGM or PNG as grayscale intensities in `[0, 1]`.
pub fn read_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    match ImageFormat::from_path(path) {
        Some(ImageFormat::Pgm) => parse_pgm(&bytes),
        Some(ImageFormat::Png) => decode_png(&bytes),
        None if bytes.starts_with(b"P5") => parse_pgm(&bytes),
        None => decode_png(&bytes),
    }
}

/// Writes a mask as P5: 0 for background, 255 for foreground.
pub fn write_mask(path: impl AsRef<Path>, mask: &BinaryImage) -> Result<()> {
    let samples: Vec<u8> = mask.data().iter().map(|&b| if b { 255 } else { 0 }).collect();
    fs::write(path, encode_pgm(mask.height(), mask.width(), &samples))?;
    Ok(())
}

/// Writes intensities as P5, rounding `v·255` to the nearest level.
pub fn write_gray(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    let samples: Vec<u8> = img
        .data()
        .iter()
        .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    fs::write(path, encode_pgm(img.height(), img.width(), &samples))?;
    Ok(())
}

/// Reads a mask written by [`write_mask`] (or any image), thresholding at 0.5.
pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryImage> {
    Ok(BinaryImage::from_gray(&read_gray(path)?, 0.5))
}
