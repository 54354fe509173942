use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{GraspError, Result, Scorer};
use crate::physics::TrayConfig;
use crate::render::{render_gripper_segment, DepthImage, PixelGrid};
use crate::trials::GraspPose;

/// Area the window centers are spread over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanRegion {
    /// The tray interior projected into the image.
    Tray,
    Image,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    /// Window centers per side.
    pub grid: usize,
    /// Window side in pixels; centers keep half a window from the region edge.
    pub window: usize,
    pub orientations: usize,
    /// Candidates scoring above this form the good set.
    pub good_threshold: f64,
    pub decision_threshold: f64,
    pub opening: f64,
    pub region: ScanRegion,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            grid: 6,
            window: 64,
            orientations: 8,
            good_threshold: 0.9,
            decision_threshold: 0.5,
            opening: 0.05,
            region: ScanRegion::Tray,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid == 0 || self.orientations == 0 || self.window == 0 {
            return Err(GraspError::Config("grid, window and orientations must be positive".into()));
        }
        if !(self.opening > 0.0) || !(0.0..=1.0).contains(&self.good_threshold) || !(0.0..=1.0).contains(&self.decision_threshold) {
            return Err(GraspError::Config("opening must be positive and thresholds in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn candidate_count(&self) -> usize {
        self.grid * self.grid * self.orientations
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspCandidate {
    pub index: usize,
    /// Window center in continuous pixel coordinates.
    pub row: f64,
    pub col: f64,
    /// Yaw is `orientation · π / orientations`.
    pub orientation: usize,
    pub pose: GraspPose,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub candidates: Vec<GraspCandidate>,
    pub best: usize,
    /// Indices of candidates above the good threshold.
    pub good: Vec<usize>,
    /// Whether the best candidate clears the decision threshold.
    pub best_succeeds: bool,
}

impl ScanResult {
    pub fn best(&self) -> &GraspCandidate {
        &self.candidates[self.best]
    }

    pub fn scores(&self) -> Vec<f64> {
        self.candidates.iter().map(|c| c.score.unwrap_or(f64::NAN)).collect()
    }
}

fn centers(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (i as f64 + 0.5) * (hi - lo) / n as f64).collect()
}

/// Window centers on an `n × n` grid, row-major, each with every orientation.
pub fn enumerate_candidates(grid: &PixelGrid, tray: &TrayConfig, config: &ScanConfig) -> Result<Vec<GraspCandidate>> {
    config.validate()?;
    let (w, h) = (grid.width as f64, grid.height as f64);
    let (r0, c0, r1, c1) = match config.region {
        ScanRegion::Image => (0.0, 0.0, h, w),
        ScanRegion::Tray => {
            let (ra, ca) = grid.to_pixel(-tray.size[0] / 2.0, -tray.size[1] / 2.0);
            let (rb, cb) = grid.to_pixel(tray.size[0] / 2.0, tray.size[1] / 2.0);
            (ra.max(0.0), ca.max(0.0), rb.min(h), cb.min(w))
        }
    };
    let m = config.window as f64 / 2.0;
    let (r0, c0, r1, c1) = (r0 + m, c0 + m, r1 - m, c1 - m);
    if r1 < r0 || c1 < c0 {
        return Err(GraspError::Config(format!(
            "a {}-pixel window does not fit the scan region",
            config.window
        )));
    }
    let rows = centers(r0, r1, config.grid);
    let cols = centers(c0, c1, config.grid);
    let mut out = Vec::with_capacity(config.candidate_count());
    for &row in &rows {
        for &col in &cols {
            let x = grid.origin[0] + col * grid.pixel_size;
            let y = grid.origin[1] + row * grid.pixel_size;
            for orientation in 0..config.orientations {
                let theta = orientation as f64 * PI / config.orientations as f64;
                out.push(GraspCandidate {
                    index: out.len(),
                    row,
                    col,
                    orientation,
                    pose: GraspPose::new(x, y, theta, config.opening),
                    score: None,
                });
            }
        }
    }
    Ok(out)
}

/// Scores every candidate and returns the highest, ties going to the lowest index.
pub fn find_best_grasp(
    scorer: &dyn Scorer,
    image: &DepthImage,
    candidates: Vec<GraspCandidate>,
    config: &ScanConfig,
) -> Result<ScanResult> {
    if candidates.is_empty() {
        return Err(GraspError::Config("no candidates to score".into()));
    }
    let scores: Vec<f64> = candidates
        .par_iter()
        .map(|c| scorer.score(image, &c.pose))
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    let good = scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > config.good_threshold)
        .map(|(i, _)| i)
        .collect();
    let best_succeeds = scores[best] > config.decision_threshold;
    let candidates = candidates
        .into_iter()
        .zip(scores)
        .map(|(c, s)| GraspCandidate { score: Some(s), ..c })
        .collect();
    Ok(ScanResult {
        candidates,
        best,
        good,
        best_succeeds,
    })
}

fn paint(image: &DepthImage, pose: &GraspPose, mut put: impl FnMut(usize)) -> Result<()> {
    let seg = render_gripper_segment(pose.x, pose.y, pose.theta, pose.opening, 1, &image.grid)?;
    for (i, &v) in seg.values.iter().enumerate() {
        if v != 0 {
            put(i);
        }
    }
    Ok(())
}

/// Height map in gray with good grasps in yellow and the best in red.
pub fn overlay_rgb(image: &DepthImage, result: &ScanResult, height_range: f64) -> Result<Vec<[u8; 3]>> {
    let mut rgb: Vec<[u8; 3]> = image
        .height_map(height_range)
        .into_iter()
        .map(|v| {
            let g = (v * 255.0).round() as u8;
            [g, g, g]
        })
        .collect();
    for &i in &result.good {
        paint(image, &result.candidates[i].pose, |p| rgb[p] = [255, 255, 0])?;
    }
    paint(image, &result.best().pose, |p| rgb[p] = [255, 0, 0])?;
    Ok(rgb)
}

/// Grayscale variant: height map in 0..=127, good grasps 191, best 255.
pub fn overlay_gray(image: &DepthImage, result: &ScanResult, height_range: f64) -> Result<Vec<u8>> {
    let mut gray: Vec<u8> = image
        .height_map(height_range)
        .into_iter()
        .map(|v| (v * 127.0).round() as u8)
        .collect();
    for &i in &result.good {
        paint(image, &result.candidates[i].pose, |p| gray[p] = 191)?;
    }
    paint(image, &result.best().pose, |p| gray[p] = 255)?;
    Ok(gray)
}
