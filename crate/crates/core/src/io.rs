//! Binary file formats: `.tmat` transport matrices, PFM float images and PGM
//! byte images. Every writer goes through a temporary file and an atomic rename.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::reconstruct::IrradianceImage;
use crate::transport::TransportMatrix;
use crate::types::HeightField;

const TMAT_MAGIC: &[u8; 4] = b"TMAT";
const TMAT_VERSION: u32 = 1;

/// Writes `bytes` to `path` so that readers see either the old file or the complete new one.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut builder = tempfile::Builder::new();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(std::fs::Permissions::from_mode(0o644));
    }
    let mut tmp = builder.tempfile_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn format_err(format: &'static str, message: impl Into<String>) -> Error {
    Error::Format {
        format,
        message: message.into(),
    }
}

/// `"TMAT"`, u32 version, u32 rows, u32 cols, then `rows*cols` f32 values,
/// all little-endian, row-major.
pub fn encode_tmat(t: &TransportMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * t.data().len());
    out.extend_from_slice(TMAT_MAGIC);
    out.extend_from_slice(&TMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(t.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(t.cols() as u32).to_le_bytes());
    for v in t.data() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode_tmat(bytes: &[u8]) -> Result<TransportMatrix> {
    if bytes.len() < 16 || &bytes[..4] != TMAT_MAGIC {
        return Err(format_err("tmat", "missing TMAT header"));
    }
    let word = |k: usize| u32::from_le_bytes(bytes[k..k + 4].try_into().unwrap());
    let version = word(4);
    if version != TMAT_VERSION {
        return Err(format_err("tmat", format!("unsupported version {version}")));
    }
    let (rows, cols) = (word(8) as usize, word(12) as usize);
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| format_err("tmat", "dimensions overflow"))?;
    if bytes.len() != 16 + 4 * n {
        return Err(format_err(
            "tmat",
            format!("expected {} payload bytes for {rows}x{cols}, found {}", 4 * n, bytes.len() - 16),
        ));
    }
    let data = bytes[16..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    TransportMatrix::from_dense(rows, cols, data)
}

pub fn write_tmat(path: &Path, t: &TransportMatrix) -> Result<()> {
    write_atomic(path, &encode_tmat(t))
}

pub fn read_tmat(path: &Path) -> Result<TransportMatrix> {
    decode_tmat(&fs::read(path)?)
}

/// Grayscale float image: width, height and row-major values (top row first).
#[derive(Debug, Clone, PartialEq)]
pub struct FloatImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl FloatImage {
    pub fn from_heightfield(h: &HeightField) -> Self {
        let data = h
            .depths()
            .iter()
            .zip(h.mask())
            .map(|(z, ok)| if *ok { *z as f32 } else { f32::NAN })
            .collect();
        FloatImage {
            width: h.width(),
            height: h.height(),
            data,
        }
    }

    /// Depth map on a unit pixel grid; NaN pixels become invalid.
    pub fn to_heightfield(&self) -> Result<HeightField> {
        let z: Vec<f64> = self.data.iter().map(|v| *v as f64).collect();
        let valid = z.iter().map(|v| v.is_finite()).collect();
        HeightField::new(self.width, self.height, 1.0, 1.0, z, valid)
    }

    pub fn from_irradiance(e: &IrradianceImage) -> Self {
        let data = e
            .values()
            .iter()
            .zip(e.mask())
            .map(|(v, ok)| if *ok { *v as f32 } else { f32::NAN })
            .collect();
        FloatImage {
            width: e.width(),
            height: e.height(),
            data,
        }
    }

    pub fn to_irradiance(&self) -> Result<IrradianceImage> {
        let values: Vec<f64> = self.data.iter().map(|v| *v as f64).collect();
        let valid = values.iter().map(|v| v.is_finite()).collect();
        IrradianceImage::new(self.width, self.height, values, valid)
    }
}

/// `"Pf\n<w> <h>\n-1.0\n"` followed by little-endian f32 rows, bottom row first.
pub fn encode_pfm(img: &FloatImage) -> Vec<u8> {
    let mut out = format!("Pf\n{} {}\n-1.0\n", img.width, img.height).into_bytes();
    for row in img.data.chunks(img.width.max(1)).rev() {
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Splits a netpbm-style header into `count` whitespace-separated tokens,
/// returning them and the offset just past the single whitespace byte that
/// ends the last token.
fn header_tokens(bytes: &[u8], count: usize, format: &'static str) -> Result<(Vec<String>, usize)> {
    let mut tokens = Vec::with_capacity(count);
    let mut k = 0;
    while tokens.len() < count {
        while k < bytes.len() && bytes[k].is_ascii_whitespace() {
            k += 1;
        }
        if k < bytes.len() && bytes[k] == b'#' {
            while k < bytes.len() && bytes[k] != b'\n' {
                k += 1;
            }
            continue;
        }
        let start = k;
        while k < bytes.len() && !bytes[k].is_ascii_whitespace() {
            k += 1;
        }
        if start == k {
            return Err(format_err(format, "truncated header"));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..k]).into_owned());
    }
    if k >= bytes.len() {
        return Err(format_err(format, "missing pixel data"));
    }
    Ok((tokens, k + 1))
}

fn parse_dim(s: &str, format: &'static str) -> Result<usize> {
    s.parse::<usize>()
        .ok()
        .filter(|v| *v > 0)
        .ok_or_else(|| format_err(format, format!("bad dimension `{s}`")))
}

pub fn decode_pfm(bytes: &[u8]) -> Result<FloatImage> {
    let (tokens, offset) = header_tokens(bytes, 4, "pfm")?;
    if tokens[0] != "Pf" {
        return Err(format_err("pfm", "expected grayscale `Pf` magic"));
    }
    let width = parse_dim(&tokens[1], "pfm")?;
    let height = parse_dim(&tokens[2], "pfm")?;
    let scale: f64 = tokens[3]
        .parse()
        .map_err(|_| format_err("pfm", format!("bad scale `{}`", tokens[3])))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(format_err("pfm", "scale must be nonzero"));
    }
    let payload = &bytes[offset..];
    if payload.len() != 4 * width * height {
        return Err(format_err(
            "pfm",
            format!("expected {} data bytes, found {}", 4 * width * height, payload.len()),
        ));
    }
    let little = scale < 0.0;
    let mut data = vec![0f32; width * height];
    for (r, row) in payload.chunks_exact(4 * width).enumerate() {
        let dest = (height - 1 - r) * width;
        for (c, b) in row.chunks_exact(4).enumerate() {
            let b: [u8; 4] = b.try_into().unwrap();
            data[dest + c] = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        }
    }
    Ok(FloatImage { width, height, data })
}

pub fn write_pfm(path: &Path, img: &FloatImage) -> Result<()> {
    write_atomic(path, &encode_pfm(img))
}

pub fn read_pfm(path: &Path) -> Result<FloatImage> {
    decode_pfm(&fs::read(path)?)
}

/// 8-bit grayscale image, row-major, top row first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ByteImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl ByteImage {
    /// Values scaled by `255 / max` and rounded; an all-zero image stays black.
    pub fn from_normalized(width: usize, height: usize, values: &[f64]) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::dims("image pixels", width * height, values.len()));
        }
        let max = values.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
        let data = values
            .iter()
            .map(|v| {
                if max > 0.0 && v.is_finite() {
                    (v / max * 255.0).round().clamp(0.0, 255.0) as u8
                } else {
                    0
                }
            })
            .collect();
        Ok(ByteImage { width, height, data })
    }

    /// Pixel values mapped to `[0, 1]`.
    pub fn to_unit(&self) -> Vec<f64> {
        self.data.iter().map(|b| *b as f64 / 255.0).collect()
    }
}

pub fn encode_pgm(img: &ByteImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<ByteImage> {
    let (tokens, offset) = header_tokens(bytes, 4, "pgm")?;
    if tokens[0] != "P5" {
        return Err(format_err("pgm", "expected binary `P5` magic"));
    }
    let width = parse_dim(&tokens[1], "pgm")?;
    let height = parse_dim(&tokens[2], "pgm")?;
    if tokens[3] != "255" {
        return Err(format_err("pgm", format!("unsupported maxval `{}`", tokens[3])));
    }
    let payload = &bytes[offset..];
    if payload.len() != width * height {
        return Err(format_err(
            "pgm",
            format!("expected {} data bytes, found {}", width * height, payload.len()),
        ));
    }
    Ok(ByteImage {
        width,
        height,
        data: payload.to_vec(),
    })
}

pub fn write_pgm(path: &Path, img: &ByteImage) -> Result<()> {
    write_atomic(path, &encode_pgm(img))
}

pub fn read_pgm(path: &Path) -> Result<ByteImage> {
    decode_pgm(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tmat_round_trip() {
        let t = TransportMatrix::from_dense(2, 3, vec![0.0, 0.5, 1.0 / 3.0, 7.0, 0.0, 1e-7]).unwrap();
        let bytes = encode_tmat(&t);
        assert_eq!(&bytes[..4], b"TMAT");
        assert_eq!(bytes.len(), 16 + 24);
        let back = decode_tmat(&bytes).unwrap();
        assert_eq!(encode_tmat(&back), bytes);
        assert!(decode_tmat(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_tmat(b"TMAX\x01\0\0\0\x01\0\0\0\x01\0\0\0\0\0\0\0").is_err());
    }

    #[test]
    fn pfm_rows_are_bottom_up() {
        let img = FloatImage {
            width: 2,
            height: 2,
            data: vec![1.0, 2.0, 3.0, f32::NAN],
        };
        let bytes = encode_pfm(&img);
        let header = b"Pf\n2 2\n-1.0\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..header.len() + 4], &3f32.to_le_bytes());
        let back = decode_pfm(&bytes).unwrap();
        assert_eq!(&back.data[..3], &[1.0, 2.0, 3.0]);
        assert!(back.data[3].is_nan());
        assert_eq!(encode_pfm(&back), bytes);
    }

    #[test]
    fn pgm_round_trip() {
        let img = ByteImage::from_normalized(3, 1, &[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(img.data, vec![0, 128, 255]);
        let bytes = encode_pgm(&img);
        assert_eq!(decode_pgm(&bytes).unwrap(), img);
        assert!(decode_pgm(b"P2\n1 1\n255\n\0").is_err());
    }
}
