//! Binary PGM (P5) with 8-bit samples.
//!
//! Samples are mapped to `[0, 1]` by dividing by 255 on read; on write values
//! are clamped to `[0, 1]` and rounded to the nearest 8-bit level.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Image;

fn format_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Format(msg.into()))
}

/// Header tokenizer that skips whitespace and `#` comments.
struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&b| b != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return format_err(format!("expected {what} in PGM header"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .map_or_else(|| format_err(format!("bad {what} in PGM header")), Ok)
    }
}

pub fn decode(bytes: &[u8]) -> Result<Image> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return format_err("not a binary PGM (missing P5 magic)");
    }
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if maxval != 255 {
        return format_err(format!("only 8-bit PGM with maxval 255 is supported, got maxval {maxval}"));
    }
    if width == 0 || height == 0 {
        return format_err(format!("empty image {width}x{height}"));
    }
    // exactly one whitespace byte separates the header from the raster
    if !bytes.get(h.pos).is_some_and(u8::is_ascii_whitespace) {
        return format_err("missing whitespace after PGM header");
    }
    let start = h.pos + 1;
    let n = width * height;
    let Some(raster) = bytes.get(start..start + n) else {
        return format_err(format!("raster truncated: need {n} bytes, have {}", bytes.len().saturating_sub(start)));
    };
    Image::new(width, height, raster.iter().map(|&b| b as f64 / 255.0).collect())
}

#[inline]
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn encode(img: &Image) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.data().iter().map(|&v| quantize(v)));
    out
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Image> {
    decode(&fs::read(path)?)
}

pub fn write_pgm(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode(img))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_with_comments() {
        let mut bytes = b"P5\n# made by hand\n3 2\n# another\n255\n".to_vec();
        bytes.extend([0u8, 51, 255, 128, 1, 2]);
        let img = decode(&bytes).unwrap();
        assert_eq!((img.width(), img.height()), (3, 2));
        assert_eq!(img.data()[1], 0.2);
        assert_eq!(img.data()[2], 1.0);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(decode(b"P2\n1 1\n255\n0").is_err());
        assert!(decode(b"P5\n2 2\n65535\n\0\0\0\0\0\0\0\0").is_err());
        assert!(decode(b"P5\n2 2\n255\n\0\0").is_err());
        assert!(decode(b"P5\n0 2\n255\n").is_err());
        assert!(decode(b"P5\nx 2\n255\n").is_err());
    }

    #[test]
    fn encode_clamps_and_rounds() {
        let img = Image::new(4, 1, vec![-0.2, 1.7, 0.5, 0.1]).unwrap();
        let bytes = encode(&img);
        assert_eq!(&bytes[bytes.len() - 4..], &[0, 255, 128, 26]);
        assert!(bytes.starts_with(b"P5\n4 1\n255\n"));
    }

    proptest::proptest! {
        #[test]
        fn eight_bit_images_survive_a_round_trip(w in 1usize..20, h in 1usize..20, seed in 0u32..1000) {
            let img = Image::from_fn(w, h, |r, c| ((r as u32 * 31 + c as u32 * 7 + seed) % 256) as f64 / 255.0).unwrap();
            proptest::prop_assert_eq!(decode(&encode(&img)).unwrap(), img);
        }
    }
}
