//! Netpbm grayscale (P2 ASCII / P5 binary) reading and writing.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::numerics::DenseMatrix;
use crate::tasks::image::{Mask, MaskedImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmFormat {
    Ascii,
    Binary,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            offset: self.pos,
            message: message.into(),
        }
    }

    /// Skips whitespace and `#` comments.
    fn skip_blank(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_blank();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(if self.pos >= self.bytes.len() {
                self.err(format!("unexpected end of data reading {what}"))
            } else {
                self.err(format!("expected a decimal {what}"))
            });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse {
                offset: start,
                message: format!("{what} out of range"),
            })
    }
}

/// Decodes a PGM byte stream into pixels scaled to `[0, 1]`.
pub fn decode_pgm(bytes: &[u8]) -> Result<DenseMatrix> {
    let mut cur = Cursor { bytes, pos: 0 };
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(cur.err("missing 'P' magic number"));
    }
    let format = match bytes[1] {
        b'2' => PgmFormat::Ascii,
        b'5' => PgmFormat::Binary,
        _ => {
            cur.pos = 1;
            return Err(cur.err("only P2 and P5 graymaps are supported"));
        }
    };
    cur.pos = 2;
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(cur.err("zero image dimension"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(cur.err(format!("unsupported maxval {maxval} (expected 1..=255)")));
    }
    let scale = maxval as f64;
    let count = width * height;
    let mut data = Vec::with_capacity(count);
    match format {
        PgmFormat::Binary => {
            if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
                return Err(cur.err("expected a single whitespace byte before raster"));
            }
            cur.pos += 1;
            let raster = &bytes[cur.pos..];
            if raster.len() < count {
                cur.pos = bytes.len();
                return Err(cur.err(format!(
                    "truncated raster: expected {count} bytes, found {}",
                    raster.len()
                )));
            }
            for &b in &raster[..count] {
                if b as usize > maxval {
                    return Err(cur.err("sample exceeds maxval"));
                }
                data.push(b as f64 / scale);
            }
        }
        PgmFormat::Ascii => {
            for _ in 0..count {
                let v = cur.number("sample")?;
                if v > maxval {
                    return Err(cur.err("sample exceeds maxval"));
                }
                data.push(v as f64 / scale);
            }
        }
    }
    DenseMatrix::from_vec(height, width, data)
}

/// Quantizes `[0, 1]` values to 0..=255, clamping first and rounding half up.
pub fn quantize(v: f64) -> u8 {
    let c = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    (c * 255.0 + 0.5).floor() as u8
}

pub fn encode_pgm(pixels: &DenseMatrix, format: PgmFormat) -> Vec<u8> {
    let (h, w) = pixels.shape();
    match format {
        PgmFormat::Binary => {
            let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
            out.extend(pixels.as_slice().iter().map(|&v| quantize(v)));
            out
        }
        PgmFormat::Ascii => {
            let mut s = format!("P2\n{w} {h}\n255\n");
            for i in 0..h {
                let row: Vec<String> = pixels.row(i).iter().map(|&v| quantize(v).to_string()).collect();
                s.push_str(&row.join(" "));
                s.push('\n');
            }
            s.into_bytes()
        }
    }
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<MaskedImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let pixels = decode_pgm(&bytes)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    MaskedImage::fully_observed(pixels, name)
}

pub fn save_pgm(pixels: &DenseMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_pgm(pixels, PgmFormat::Binary))
}

/// Masks are stored as graymaps: 255 = observed, 0 = unobserved.
pub fn save_mask(mask: &Mask, path: impl AsRef<Path>) -> Result<()> {
    save_pgm(&mask.to_matrix(), path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_payload_arithmetic() {
        let bytes = b"P5\n2 2\n255\n\x00\xff\x80\x40";
        let m = decode_pgm(bytes).unwrap();
        assert_eq!(m.as_slice(), &[0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0]);
    }

    #[test]
    fn ascii_and_binary_agree() {
        let pixels = DenseMatrix::from_fn(3, 5, |i, j| ((i * 5 + j) * 17 % 256) as f64 / 255.0);
        let a = decode_pgm(&encode_pgm(&pixels, PgmFormat::Ascii)).unwrap();
        let b = decode_pgm(&encode_pgm(&pixels, PgmFormat::Binary)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, pixels);
    }

    #[test]
    fn comments_in_header() {
        let bytes = b"P2\n# made by hand\n2 1 # trailing\n255\n3 250\n";
        let m = decode_pgm(bytes).unwrap();
        assert_eq!(m.shape(), (1, 2));
        assert_eq!(m.as_slice(), &[3.0 / 255.0, 250.0 / 255.0]);
    }

    #[test]
    fn truncated_payload_reports_offset() {
        let bytes = b"P5\n4 4\n255\n\x00\x01";
        match decode_pgm(bytes) {
            Err(Error::Parse { offset, message }) => {
                assert_eq!(offset, bytes.len());
                assert!(message.contains("truncated"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_header() {
        assert!(matches!(
            decode_pgm(b"P6\n1 1\n255\n\x00"),
            Err(Error::Parse { offset: 1, .. })
        ));
        assert!(matches!(
            decode_pgm(b"P5\nx 1\n255\n"),
            Err(Error::Parse { offset: 3, .. })
        ));
        assert!(decode_pgm(b"P5\n1 1\n65535\n\x00\x00").is_err());
    }

    #[test]
    fn quantization_error_is_bounded() {
        let pixels = DenseMatrix::from_fn(7, 9, |i, j| ((i * 9 + j) as f64 * 0.618).fract());
        let back = decode_pgm(&encode_pgm(&pixels, PgmFormat::Binary)).unwrap();
        let err = back.sub(&pixels).unwrap().max_abs();
        assert!(err <= 1.0 / 510.0 + 1e-15, "{err}");
    }

    #[test]
    fn round_trip_file_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.pgm");
        let p2 = dir.path().join("b.pgm");
        let pixels = DenseMatrix::from_fn(4, 6, |i, j| ((i + 2 * j) % 7) as f64 / 6.0);
        save_pgm(&pixels, &p1).unwrap();
        let loaded = load_pgm(&p1).unwrap();
        save_pgm(&loaded.pixels, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        assert_eq!(loaded.name, "a");
    }

    #[test]
    fn out_of_range_values_are_clamped_on_save() {
        assert_eq!(quantize(-0.3), 0);
        assert_eq!(quantize(1.7), 255);
        assert_eq!(quantize(0.5), 128);
    }
}
