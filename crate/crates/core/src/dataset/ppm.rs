//! Minimal binary PPM (P6, maxval 255) codec.

use crate::error::{Error, Result};
use crate::image::Image;

/// Decodes a binary P6 PPM with maxval 255. Channels map to [0, 1]
/// via v/255. Header comments (`# …`) are accepted; anything else —
/// wrong magic, truncation, other maxvals, trailing bytes — is a
/// decode error carrying the byte offset.
pub fn decode_ppm(bytes: &[u8]) -> Result<Image> {
    let mut cursor = Cursor { bytes, pos: 0 };
    if cursor.take(2) != Some(b"P6" as &[u8]) {
        return Err(Error::decode(0, "bad magic, expected P6"));
    }
    let width = cursor.header_number()?;
    let height = cursor.header_number()?;
    let maxval = cursor.header_number()?;
    if maxval != 255 {
        return Err(Error::decode(
            cursor.pos,
            format!("unsupported maxval {maxval}, only 255 is supported"),
        ));
    }
    // exactly one whitespace byte separates the header from the raster
    match cursor.next_byte() {
        Some(b) if b.is_ascii_whitespace() => {}
        Some(_) => return Err(Error::decode(cursor.pos - 1, "expected whitespace before raster")),
        None => return Err(Error::decode(cursor.pos, "truncated before raster")),
    }
    if width == 0 || height == 0 {
        return Err(Error::decode(cursor.pos, "zero image dimension"));
    }
    let need = width * height * 3;
    let raster_start = cursor.pos;
    if bytes.len() - raster_start < need {
        return Err(Error::decode(
            bytes.len(),
            format!(
                "truncated raster: need {need} bytes, found {}",
                bytes.len() - raster_start
            ),
        ));
    }
    if bytes.len() - raster_start > need {
        return Err(Error::decode(
            raster_start + need,
            "trailing data after raster",
        ));
    }
    let raster = &bytes[raster_start..raster_start + need];
    let pixels = raster
        .chunks_exact(3)
        .map(|px| {
            [
                px[0] as f64 / 255.0,
                px[1] as f64 / 255.0,
                px[2] as f64 / 255.0,
            ]
        })
        .collect();
    Image::new(width, height, pixels)
}

/// Encodes to canonical P6 form: `P6\n<w> <h>\n255\n` + raster.
/// Channels are quantized by round(v·255), clamped to [0, 255].
pub fn encode_ppm(img: &Image) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.reserve(img.pixels().len() * 3);
    for px in img.pixels() {
        for &c in px {
            out.push((c * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let slice = self.bytes.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(slice)
    }

    fn next_byte(&mut self) -> Option<u8> {
        let b = *self.bytes.get(self.pos)?;
        self.pos += 1;
        Some(b)
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    /// Skips whitespace and `#` comments, then reads a decimal number.
    fn header_number(&mut self) -> Result<usize> {
        loop {
            match self.peek() {
                Some(b) if b.is_ascii_whitespace() => {
                    self.pos += 1;
                }
                Some(b'#') => {
                    while let Some(b) = self.next_byte() {
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                Some(b) if b.is_ascii_digit() => break,
                Some(_) => {
                    return Err(Error::decode(self.pos, "expected a decimal header field"))
                }
                None => return Err(Error::decode(self.pos, "truncated header")),
            }
        }
        let mut value: usize = 0;
        while let Some(b) = self.peek() {
            if !b.is_ascii_digit() {
                break;
            }
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add((b - b'0') as usize))
                .ok_or_else(|| Error::decode(self.pos, "header number overflow"))?;
            self.pos += 1;
        }
        Ok(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_red_pixel() {
        let bytes = b"P6\n1 1\n255\n\xff\x00\x00";
        let img = decode_ppm(bytes).unwrap();
        assert_eq!((img.width(), img.height()), (1, 1));
        assert_eq!(img.get(0, 0), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn unsupported_maxval_is_rejected() {
        let bytes = b"P6\n1 1\n65535\n\x00\x00\x00\x00\x00\x00";
        assert!(matches!(
            decode_ppm(bytes),
            Err(Error::Decode { .. })
        ));
    }

    #[test]
    fn bad_magic_reports_offset_zero() {
        match decode_ppm(b"P5\n1 1\n255\n\x00") {
            Err(Error::Decode { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("expected decode error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_raster_is_rejected() {
        let bytes = b"P6\n2 2\n255\n\x01\x02\x03";
        assert!(decode_ppm(bytes).is_err());
    }

    #[test]
    fn header_comments_are_skipped() {
        let bytes = b"P6\n# a comment\n2 1\n255\n\x00\x00\x00\xff\xff\xff";
        let img = decode_ppm(bytes).unwrap();
        assert_eq!(img.get(1, 0), [1.0, 1.0, 1.0]);
    }

    #[test]
    fn encode_decode_roundtrip_on_canonical_bytes() {
        let bytes = b"P6\n2 2\n255\n\x00\x01\x02\x10\x20\x30\x7f\x80\x81\xfd\xfe\xff".to_vec();
        let img = decode_ppm(&bytes).unwrap();
        assert_eq!(encode_ppm(&img), bytes);
    }

    #[test]
    fn decode_encode_roundtrip_preserves_pixels() {
        let img = Image::new(
            2,
            1,
            vec![[0.25, 0.5, 0.75], [0.0, 1.0, 128.0 / 255.0]],
        )
        .unwrap();
        let round = decode_ppm(&encode_ppm(&img)).unwrap();
        for (a, b) in img.pixels().iter().zip(round.pixels()) {
            for c in 0..3 {
                assert!((a[c] - b[c]).abs() <= 0.5 / 255.0);
            }
        }
    }
}
