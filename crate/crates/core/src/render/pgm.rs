//! Netpbm writers for inspecting images.

use std::fs;
use std::path::Path;

use super::{DepthImage, RenderError, Result};

fn write(path: &Path, header: String, body: &[u8]) -> Result<()> {
    let mut bytes = header.into_bytes();
    bytes.extend_from_slice(body);
    fs::write(path, bytes).map_err(|source| RenderError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Binary 16-bit PGM with depth mapped linearly from `[0, sensor_height]` to `[0, 65535]`.
pub fn write_pgm16(path: impl AsRef<Path>, image: &DepthImage) -> Result<()> {
    let scale = 65535.0 / image.sensor_height;
    let body: Vec<u8> = image
        .values
        .iter()
        .flat_map(|&d| ((d as f64 * scale).round().clamp(0.0, 65535.0) as u16).to_be_bytes())
        .collect();
    write(
        path.as_ref(),
        format!("P5\n{} {}\n65535\n", image.width(), image.height()),
        &body,
    )
}

/// Reads a binary 16-bit PGM as `(width, height, samples)`.
pub fn read_pgm16(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<u16>)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| RenderError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(RenderError::Format("truncated PGM header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "65535" {
        return Err(RenderError::Format(format!("unsupported PGM header {fields:?}")));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| RenderError::Format(format!("bad dimension {s}")));
    let (w, h) = (parse(&fields[1])?, parse(&fields[2])?);
    let body = bytes.get(pos..).unwrap_or(&[]);
    if body.len() != 2 * w * h {
        return Err(RenderError::Format(format!("expected {} data bytes, found {}", 2 * w * h, body.len())));
    }
    Ok((w, h, body.chunks_exact(2).map(|b| u16::from_be_bytes([b[0], b[1]])).collect()))
}

pub fn write_pgm8(path: impl AsRef<Path>, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    if pixels.len() != width * height {
        return Err(RenderError::InvalidConfig("pixel count does not match size".into()));
    }
    write(path.as_ref(), format!("P5\n{width} {height}\n255\n"), pixels)
}

pub fn write_ppm(path: impl AsRef<Path>, width: usize, height: usize, rgb: &[[u8; 3]]) -> Result<()> {
    if rgb.len() != width * height {
        return Err(RenderError::InvalidConfig("pixel count does not match size".into()));
    }
    let body: Vec<u8> = rgb.iter().flatten().copied().collect();
    write(path.as_ref(), format!("P6\n{width} {height}\n255\n"), &body)
}
