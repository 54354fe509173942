use std::f64::consts::PI;

use super::{PixelGrid, RenderError, Result};

/// Binary image of the finger-to-finger segment, row-major, 1 on the segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<u8>,
}

impl SegmentImage {
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.values[row * self.width + col]
    }

    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0).count()
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.values.iter().map(|&v| v as f32).collect()
    }
}

/// Rasterizes the gripper at `(x, y, theta)` with opening `width` as a
/// segment `round(width / pixel_size)` pixels long and `thickness` pixels wide.
///
/// `theta` is taken modulo π, so opposite yaws give the same image.
pub fn render_gripper_segment(x: f64, y: f64, theta: f64, width: f64, thickness: usize, grid: &PixelGrid) -> Result<SegmentImage> {
    if thickness == 0 || !(width >= 0.0) {
        return Err(RenderError::InvalidConfig(format!("segment thickness {thickness} / width {width}")));
    }
    let (rc, cc) = grid.to_pixel(x, y);
    if !(rc >= 0.0 && cc >= 0.0 && rc < grid.height as f64 && cc < grid.width as f64) {
        return Err(RenderError::OutOfBounds { x, y });
    }
    let theta = theta.rem_euclid(PI);
    let (s, c) = theta.sin_cos();
    // snap near-axis directions so θ = 0 and π/2 give exact rows and columns
    let snap = |v: f64| if v.abs() < 1e-12 { 0.0 } else { v };
    let (dr, dc) = (snap(s), snap(c));
    let (pr, pc) = (dc, -dr);
    let n = ((width / grid.pixel_size).round() as usize).max(1);
    let half = (thickness as f64 - 1.0) / 2.0;
    let mut values = vec![0u8; grid.width * grid.height];
    for i in 0..n {
        let along = i as f64 - (n as f64 - 1.0) / 2.0;
        for k in 0..thickness {
            let across = k as f64 - half;
            let r = (rc + along * dr + across * pr).floor();
            let col = (cc + along * dc + across * pc).floor();
            if r >= 0.0 && col >= 0.0 && (r as usize) < grid.height && (col as usize) < grid.width {
                values[r as usize * grid.width + col as usize] = 1;
            }
        }
    }
    Ok(SegmentImage {
        width: grid.width,
        height: grid.height,
        values,
    })
}
