//! Top-down orthographic depth images and gripper segment images.
//!
//! Depth images are ray cast from the exact triangle meshes, never from the
//! collision boxes. Pixel `(row, col)` looks down at world
//! `x = origin.x + (col + 0.5) · pixel_size`, `y = origin.y + (row + 0.5) · pixel_size`.

mod pgm;
mod segment;

pub use pgm::{read_pgm16, write_pgm16, write_pgm8, write_ppm};
pub use segment::{render_gripper_segment, SegmentImage};

use nalgebra::Isometry3;
use serde::{Deserialize, Serialize};

use crate::geometry::{Point3, TriMesh};

#[derive(Debug, thiserror::Error)]
pub enum RenderError {
    #[error("pose ({x:.4}, {y:.4}) projects outside the image")]
    OutOfBounds { x: f64, y: f64 },
    #[error("invalid image configuration: {0}")]
    InvalidConfig(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed image file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, RenderError>;

/// Placement of a pixel raster in the horizontal plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelGrid {
    pub width: usize,
    pub height: usize,
    /// Meters per pixel.
    pub pixel_size: f64,
    /// World (x, y) of the corner of pixel (0, 0).
    pub origin: [f64; 2],
}

impl PixelGrid {
    /// A grid of `width × height` pixels centered on world `(cx, cy)`.
    pub fn centered(width: usize, height: usize, pixel_size: f64, cx: f64, cy: f64) -> Self {
        Self {
            width,
            height,
            pixel_size,
            origin: [cx - width as f64 * pixel_size / 2.0, cy - height as f64 * pixel_size / 2.0],
        }
    }

    pub fn pixel_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.origin[0] + (col as f64 + 0.5) * self.pixel_size,
            self.origin[1] + (row as f64 + 0.5) * self.pixel_size,
        )
    }

    /// Continuous pixel coordinates `(row, col)` of a world point; pixel
    /// centers sit at half-integers.
    pub fn to_pixel(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (y - self.origin[1]) / self.pixel_size,
            (x - self.origin[0]) / self.pixel_size,
        )
    }

    /// Integer pixel containing a world point, if inside.
    pub fn pixel_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let (r, c) = self.to_pixel(x, y);
        (r >= 0.0 && c >= 0.0 && (r as usize) < self.height && (c as usize) < self.width).then(|| (r as usize, c as usize))
    }

    /// The grid of a `side × side` crop centered on pixel `(row, col)`.
    pub fn crop(&self, row: i64, col: i64, side: usize) -> Self {
        let r0 = row - side as i64 / 2;
        let c0 = col - side as i64 / 2;
        Self {
            width: side,
            height: side,
            pixel_size: self.pixel_size,
            origin: [
                self.origin[0] + c0 as f64 * self.pixel_size,
                self.origin[1] + r0 as f64 * self.pixel_size,
            ],
        }
    }
}

/// Orthographic sensor looking straight down from `sensor_height` above z = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    pub width: usize,
    pub height: usize,
    pub pixel_size: f64,
    /// World (x, y) under the image center.
    pub center: [f64; 2],
    pub sensor_height: f64,
    /// Height of the tray floor, m.
    pub floor_z: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            width: 128,
            height: 128,
            pixel_size: 0.2 / 128.0,
            center: [0.0, 0.0],
            sensor_height: 0.3,
            floor_z: 0.0,
        }
    }
}

impl CameraConfig {
    pub fn grid(&self) -> PixelGrid {
        PixelGrid::centered(self.width, self.height, self.pixel_size, self.center[0], self.center[1])
    }

    pub fn floor_depth(&self) -> f64 {
        self.sensor_height - self.floor_z
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || !(self.pixel_size > 0.0) {
            return Err(RenderError::InvalidConfig("image needs positive size and pixel size".into()));
        }
        if !(self.sensor_height > self.floor_z) {
            return Err(RenderError::InvalidConfig("sensor must be above the floor".into()));
        }
        Ok(())
    }
}

/// Row-major depths in meters below the sensor plane.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub grid: PixelGrid,
    pub sensor_height: f64,
    pub floor_depth: f64,
    pub values: Vec<f32>,
}

impl DepthImage {
    pub fn filled(grid: PixelGrid, sensor_height: f64, floor_depth: f64) -> Self {
        Self {
            grid,
            sensor_height,
            floor_depth,
            values: vec![floor_depth as f32; grid.width * grid.height],
        }
    }

    pub fn width(&self) -> usize {
        self.grid.width
    }

    pub fn height(&self) -> usize {
        self.grid.height
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.grid.width + col]
    }

    /// Height above the floor at a pixel, m.
    pub fn height_at(&self, row: usize, col: usize) -> f64 {
        (self.floor_depth as f32 - self.get(row, col)) as f64
    }

    /// Normalized height map `(floor − depth) / height_range`, clamped to [0, 1].
    pub fn height_map(&self, height_range: f64) -> Vec<f32> {
        let floor = self.floor_depth as f32;
        let scale = (1.0 / height_range) as f32;
        self.values.iter().map(|&d| ((floor - d) * scale).clamp(0.0, 1.0)).collect()
    }

    /// `side × side` window centered on pixel `(row, col)`; outside pixels are floor.
    pub fn crop(&self, row: i64, col: i64, side: usize) -> DepthImage {
        let grid = self.grid.crop(row, col, side);
        let mut out = DepthImage::filled(grid, self.sensor_height, self.floor_depth);
        let r0 = row - side as i64 / 2;
        let c0 = col - side as i64 / 2;
        for r in 0..side {
            let sr = r0 + r as i64;
            if sr < 0 || sr >= self.grid.height as i64 {
                continue;
            }
            for c in 0..side {
                let sc = c0 + c as i64;
                if sc < 0 || sc >= self.grid.width as i64 {
                    continue;
                }
                out.values[r * side + c] = self.get(sr as usize, sc as usize);
            }
        }
        out
    }

    /// Raw little-endian f32 buffer.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    pub fn from_le_bytes(camera: &CameraConfig, bytes: &[u8]) -> Result<Self> {
        let n = camera.width * camera.height;
        if bytes.len() != 4 * n {
            return Err(RenderError::Format(format!("expected {} bytes, found {}", 4 * n, bytes.len())));
        }
        let values = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        Ok(Self {
            grid: camera.grid(),
            sensor_height: camera.sensor_height,
            floor_depth: camera.floor_depth(),
            values,
        })
    }
}

/// Ray casts every mesh at its pose straight down; the nearest hit wins.
pub fn render_depth<'a>(scene: impl IntoIterator<Item = (&'a TriMesh, Isometry3<f64>)>, camera: &CameraConfig) -> DepthImage {
    let grid = camera.grid();
    let mut depth = vec![camera.floor_depth(); grid.width * grid.height];
    for (mesh, pose) in scene {
        let world: Vec<Point3> = mesh.vertices.iter().map(|v| pose * v).collect();
        for t in &mesh.triangles {
            rasterize(&grid, camera.sensor_height, [world[t[0]], world[t[1]], world[t[2]]], &mut depth);
        }
    }
    DepthImage {
        grid,
        sensor_height: camera.sensor_height,
        floor_depth: camera.floor_depth(),
        values: depth.iter().map(|&d| d.clamp(0.0, camera.sensor_height) as f32).collect(),
    }
}

/// Downward ray casts through the pixel centers under one triangle.
fn rasterize(grid: &PixelGrid, sensor: f64, tri: [Point3; 3], depth: &mut [f64]) {
    let [a, b, c] = tri;
    let e1 = b - a;
    let e2 = c - a;
    // Möller–Trumbore with direction d = (0, 0, -1), so d × e2 = (e2.y, -e2.x, 0)
    let det = e1.x * e2.y - e1.y * e2.x;
    if det.abs() < 1e-18 {
        return;
    }
    let inv = 1.0 / det;
    let (r_lo, c_lo) = grid.to_pixel(a.x.min(b.x).min(c.x), a.y.min(b.y).min(c.y));
    let (r_hi, c_hi) = grid.to_pixel(a.x.max(b.x).max(c.x), a.y.max(b.y).max(c.y));
    let clamp_idx = |v: f64, n: usize| (v.max(0.0) as usize).min(n);
    let (r0, r1) = (clamp_idx((r_lo - 0.5).ceil(), grid.height), clamp_idx((r_hi - 0.5).floor() + 1.0, grid.height));
    let (c0, c1) = (clamp_idx((c_lo - 0.5).ceil(), grid.width), clamp_idx((c_hi - 0.5).floor() + 1.0, grid.width));
    for r in r0..r1 {
        for col in c0..c1 {
            let (x, y) = grid.pixel_center(r, col);
            let s = nalgebra::Vector3::new(x - a.x, y - a.y, sensor - a.z);
            let u = (s.x * e2.y - s.y * e2.x) * inv;
            if !(0.0..=1.0).contains(&u) {
                continue;
            }
            let q = s.cross(&e1);
            let v = -q.z * inv;
            if v < 0.0 || u + v > 1.0 {
                continue;
            }
            let t = e2.dot(&q) * inv;
            let i = r * grid.width + col;
            if t < depth[i] {
                depth[i] = t;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{primitives, Vector3};

    #[test]
    fn crops_follow_the_centering_rule() {
        let cam = CameraConfig {
            width: 500,
            height: 500,
            ..CameraConfig::default()
        };
        let mut img = DepthImage::filled(cam.grid(), cam.sensor_height, cam.floor_depth());
        for (i, v) in img.values.iter_mut().enumerate() {
            *v = i as f32;
        }
        let c = img.crop(250, 250, 250);
        assert_eq!(c.get(0, 0), img.get(125, 125));
        assert_eq!(c.get(249, 249), img.get(374, 374));
        assert_eq!(img.crop(250, 250, 500), img);
        let corner = img.crop(0, 0, 250);
        assert_eq!(corner.get(0, 0), cam.floor_depth() as f32);
        assert_eq!(corner.get(125, 125), img.get(0, 0));
    }

    #[test]
    fn crop_grid_matches_world_positions() {
        let cam = CameraConfig::default();
        let g = cam.grid();
        let c = g.crop(40, 70, 16);
        let (a, b) = (c.pixel_center(8, 8), g.pixel_center(40, 70));
        assert!((a.0 - b.0).abs() < 1e-15 && (a.1 - b.1).abs() < 1e-15);
    }

    #[test]
    fn box_pixels_match_the_analytic_height() {
        let cam = CameraConfig::default();
        let m = primitives::box_mesh("b", Vector3::new(0.02, 0.01, 0.015));
        let img = render_depth([(&m, Isometry3::translation(0.0, 0.0, 0.015))], &cam);
        let (r, c) = cam.grid().pixel_of(0.0, 0.0).unwrap();
        assert!((img.get(r, c) as f64 - (0.3 - 0.03)).abs() < 1e-6);
        assert_eq!(img.get(0, 0) as f64, cam.floor_depth() as f32 as f64);
    }

    #[test]
    fn le_bytes_round_trip() {
        let cam = CameraConfig {
            width: 4,
            height: 3,
            ..CameraConfig::default()
        };
        let mut img = DepthImage::filled(cam.grid(), cam.sensor_height, cam.floor_depth());
        img.values[5] = 0.125;
        let back = DepthImage::from_le_bytes(&cam, &img.to_le_bytes()).unwrap();
        assert_eq!(back, img);
        assert!(DepthImage::from_le_bytes(&cam, &[0; 5]).is_err());
    }
}
