//! Portable float map (PFM) depth rasters.
//!
//! Only single-channel (`Pf`) maps are accepted. Scanlines are stored bottom
//! row first; a negative scale marks little-endian samples.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::DepthMap;

pub fn encode(depth: &DepthMap) -> Vec<u8> {
    let (w, h) = (depth.width(), depth.height());
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(w * h * 4);
    for row in (0..h).rev() {
        for &d in &depth.values()[row * w..(row + 1) * w] {
            out.extend_from_slice(&d.to_le_bytes());
        }
    }
    out
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a str> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Format("truncated PFM header".into()));
    }
    std::str::from_utf8(&bytes[start..*pos]).map_err(|_| Error::Format("non-ASCII PFM header".into()))
}

pub fn decode(bytes: &[u8]) -> Result<DepthMap> {
    let mut pos = 0;
    let magic = next_token(bytes, &mut pos)?;
    match magic {
        "Pf" => {}
        "PF" => return Err(Error::Format("colour PFM is not a depth raster".into())),
        other => return Err(Error::Format(format!("bad PFM magic {other:?}"))),
    }
    let parse_dim = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Format(format!("bad PFM dimension {s:?}")))
    };
    let width = parse_dim(next_token(bytes, &mut pos)?)?;
    let height = parse_dim(next_token(bytes, &mut pos)?)?;
    let scale_tok = next_token(bytes, &mut pos)?;
    let scale: f64 = scale_tok
        .parse()
        .map_err(|_| Error::Format(format!("bad PFM scale {scale_tok:?}")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Format(format!("bad PFM scale {scale}")));
    }
    // exactly one whitespace byte separates the header from the samples
    pos += 1;
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::Format("PFM dimensions overflow".into()))?;
    let body = bytes.get(pos..).unwrap_or(&[]);
    if body.len() != n * 4 {
        return Err(Error::Format(format!(
            "PFM body has {} bytes, expected {}",
            body.len(),
            n * 4
        )));
    }
    let little = scale < 0.0;
    let mut values = vec![0f32; n];
    for (k, chunk) in body.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let d = if little {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let (file_row, col) = (k / width, k % width);
        values[(height - 1 - file_row) * width + col] = d;
    }
    DepthMap::new(width, height, values)
}

pub fn read(path: &Path) -> Result<DepthMap> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub fn write(path: &Path, depth: &DepthMap) -> Result<()> {
    fs::write(path, encode(depth)).map_err(|e| Error::io(path, e))
}
