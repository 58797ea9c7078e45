//! Binary netpbm: `P5` (graymap) and `P6` (pixmap) with 8-bit samples.

use super::RawImage;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PnmError {
    #[error("not a binary PGM/PPM file")]
    BadMagic,
    #[error("malformed header: {0}")]
    Header(&'static str),
    #[error("maxval {0} unsupported (1..=255)")]
    MaxVal(u32),
    #[error("pixel data truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
}

/// Largest accepted width or height.
const MAX_EXTENT: u32 = 1 << 15;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self) -> Result<u32, PnmError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(PnmError::Header("expected a decimal number"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or(PnmError::Header("number out of range"))
    }
}

pub fn decode(bytes: &[u8]) -> Result<RawImage, PnmError> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(PnmError::BadMagic),
    };
    let mut c = Cursor { bytes, pos: 2 };
    let width = c.number()?;
    let height = c.number()?;
    let maxval = c.number()?;
    if width == 0 || height == 0 || width > MAX_EXTENT || height > MAX_EXTENT {
        return Err(PnmError::Header("width/height out of range"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(PnmError::MaxVal(maxval));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(c.pos) {
        Some(b) if b.is_ascii_whitespace() => c.pos += 1,
        _ => return Err(PnmError::Header("missing separator before raster")),
    }
    let expected = width as usize * height as usize * channels;
    let raster = &bytes[c.pos..];
    if raster.len() < expected {
        return Err(PnmError::Truncated {
            expected,
            found: raster.len(),
        });
    }
    let data = if maxval == 255 {
        raster[..expected].to_vec()
    } else {
        raster[..expected]
            .iter()
            .map(|&v| ((v.min(maxval as u8) as u32 * 255 + maxval / 2) / maxval) as u8)
            .collect()
    };
    Ok(RawImage {
        width: width as usize,
        height: height as usize,
        channels,
        data,
    })
}

pub fn encode(img: &RawImage) -> Vec<u8> {
    let magic = if img.channels == 3 { "P6" } else { "P5" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}
