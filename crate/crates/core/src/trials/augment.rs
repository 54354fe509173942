use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::{GraspPose, Label, Result, TrialsError};
use crate::render::DepthImage;

/// Image symmetry about the image center: optional mirror `x → -x`, then
/// `quarter_turns` counter-clockwise quarter turns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Symmetry {
    pub quarter_turns: u8,
    pub mirror: bool,
}

impl Symmetry {
    pub const IDENTITY: Symmetry = Symmetry {
        quarter_turns: 0,
        mirror: false,
    };

    /// {0°, 90°, 180°} × {identity, mirror}.
    pub fn default_set() -> Vec<Symmetry> {
        [false, true]
            .into_iter()
            .flat_map(|mirror| (0..3).map(move |quarter_turns| Symmetry { quarter_turns, mirror }))
            .collect()
    }

    fn map_xy(&self, x: f64, y: f64) -> (f64, f64) {
        let (mut x, mut y) = if self.mirror { (-x, y) } else { (x, y) };
        for _ in 0..self.quarter_turns % 4 {
            (x, y) = (-y, x);
        }
        (x, y)
    }

    /// Transforms image and pose together; the image must be square.
    pub fn apply(&self, image: &DepthImage, pose: &GraspPose) -> Result<(DepthImage, GraspPose)> {
        let n = image.width();
        if image.height() != n {
            return Err(TrialsError::Config("symmetries need a square image".into()));
        }
        let g = &image.grid;
        let (cx, cy) = (g.origin[0] + n as f64 * g.pixel_size / 2.0, g.origin[1] + n as f64 * g.pixel_size / 2.0);
        let mut out = image.clone();
        let last = n as i64 - 1;
        for r in 0..n {
            for c in 0..n {
                // offsets from the center in doubled pixel units keep the map exact
                let (dx, dy) = self.map_xy((2 * c as i64 - last) as f64, (2 * r as i64 - last) as f64);
                let (c2, r2) = (((dx as i64 + last) / 2) as usize, ((dy as i64 + last) / 2) as usize);
                out.values[r2 * n + c2] = image.values[r * n + c];
            }
        }
        let (px, py) = self.map_xy(pose.x - cx, pose.y - cy);
        let mut theta = if self.mirror { -pose.theta } else { pose.theta };
        theta += self.quarter_turns as f64 * FRAC_PI_2;
        Ok((out, GraspPose::new(cx + px, cy + py, theta, pose.opening)))
    }
}

/// Expands each sample by every symmetry in `set`; labels are unchanged.
pub fn augment_records(
    samples: &[(DepthImage, GraspPose, Label)],
    set: &[Symmetry],
) -> Result<Vec<(DepthImage, GraspPose, Label)>> {
    let mut out = Vec::with_capacity(samples.len() * set.len());
    for (image, pose, label) in samples {
        for s in set {
            let (i, p) = s.apply(image, pose)?;
            out.push((i, p, *label));
        }
    }
    Ok(out)
}
