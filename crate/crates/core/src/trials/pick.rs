use std::collections::VecDeque;
use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Result, Scene, TrialsError};
use crate::physics::{GripperAction, GripperParams, PhysicsError};
use crate::render::DepthImage;

/// Gripper pose over the tray; `theta` is the closing-axis yaw in `[0, π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspPose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    /// Finger gap before closing, m.
    pub opening: f64,
}

impl GraspPose {
    pub fn new(x: f64, y: f64, theta: f64, opening: f64) -> Self {
        Self {
            x,
            y,
            theta: canonical_theta(theta),
            opening,
        }
    }
}

pub(crate) fn canonical_theta(theta: f64) -> f64 {
    let t = theta.rem_euclid(PI);
    // rem_euclid can round up to exactly π
    if t >= PI {
        0.0
    } else {
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Success,
    Failure,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PickOutcome {
    Labeled(Label),
    Discarded(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialParams {
    pub gripper: GripperParams,
    pub opening: f64,
    /// Finger bottoms stop this far below the local top of the pile, m.
    pub grasp_depth: f64,
    /// Fingers start this far above the local top, m.
    pub start_clearance: f64,
    pub lift_height: f64,
    /// Success when an object's center rises above `floor + lift_fraction · lift_height`.
    pub lift_fraction: f64,
    /// A blocked descent counts as failure past this fraction of its travel, otherwise it is discarded.
    pub blocked_fraction: f64,
    /// Grasp centers are drawn uniformly within this distance of the peak, m.
    pub sampler_radius: f64,
    /// Pixels within this height of the peak belong to its plateau, m.
    pub plateau_tolerance: f64,
    /// Step budget for each gripper motion.
    pub max_phase_steps: usize,
}

impl Default for TrialParams {
    fn default() -> Self {
        Self {
            gripper: GripperParams::default(),
            opening: 0.05,
            grasp_depth: 0.01,
            start_clearance: 0.005,
            lift_height: 0.12,
            lift_fraction: 0.5,
            blocked_fraction: 0.8,
            sampler_radius: 0.01,
            plateau_tolerance: 0.003,
            max_phase_steps: 4000,
        }
    }
}

impl TrialParams {
    pub fn validate(&self) -> Result<()> {
        let g = &self.gripper;
        if !(self.opening > g.min_width && self.opening <= g.max_width) {
            return Err(TrialsError::Config(format!("opening {} m outside the gripper stroke", self.opening)));
        }
        if !(self.grasp_depth > 0.0 && self.lift_height > 0.0 && self.start_clearance >= 0.0) {
            return Err(TrialsError::Config("grasp depth, lift height and clearance must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.lift_fraction) || !(0.0..=1.0).contains(&self.blocked_fraction) {
            return Err(TrialsError::Config("fractions must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Highest point of the image under the gripper's footprint, m above the floor.
pub fn local_top(image: &DepthImage, pose: &GraspPose, gripper: &GripperParams) -> f64 {
    let g = &image.grid;
    let px = g.pixel_size;
    let half_u = pose.opening / 2.0 + gripper.finger_thickness + px;
    let half_v = gripper.finger_depth / 2.0 + px;
    let reach = half_u.hypot(half_v);
    let (s, c) = pose.theta.sin_cos();
    let (r_lo, c_lo) = g.to_pixel(pose.x - reach, pose.y - reach);
    let (r_hi, c_hi) = g.to_pixel(pose.x + reach, pose.y + reach);
    let clamp = |v: f64, n: usize| (v.max(0.0) as usize).min(n);
    let mut top: f64 = 0.0;
    for r in clamp(r_lo.floor(), g.height)..clamp(r_hi.ceil() + 1.0, g.height) {
        for col in clamp(c_lo.floor(), g.width)..clamp(c_hi.ceil() + 1.0, g.width) {
            let (x, y) = g.pixel_center(r, col);
            let (dx, dy) = (x - pose.x, y - pose.y);
            let u = dx * c + dy * s;
            let v = -dx * s + dy * c;
            if u.abs() <= half_u && v.abs() <= half_v {
                top = top.max(image.height_at(r, col));
            }
        }
    }
    top
}

/// Draws a grasp near the highest plateau of the pile.
///
/// The plateau is the 4-connected set of pixels within `plateau_tolerance`
/// of the highest pixel; the center is drawn uniformly from the disk of
/// `sampler_radius` around its centroid, and the yaw uniformly from `[0, π)`.
pub fn sample_grasp_pose(image: &DepthImage, params: &TrialParams, tray_half: [f64; 2], rng: &mut impl Rng) -> GraspPose {
    let (w, h) = (image.width(), image.height());
    let mut best = 0;
    for (i, &v) in image.values.iter().enumerate() {
        if v < image.values[best] {
            best = i;
        }
    }
    let peak = image.height_at(best / w, best % w);
    let mut seen = vec![false; w * h];
    let mut queue = VecDeque::from([best]);
    seen[best] = true;
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    while let Some(i) = queue.pop_front() {
        let (r, c) = (i / w, i % w);
        let (x, y) = image.grid.pixel_center(r, c);
        sx += x;
        sy += y;
        n += 1;
        let mut push = |rr: usize, cc: usize| {
            let j = rr * w + cc;
            if !seen[j] && image.height_at(rr, cc) >= peak - params.plateau_tolerance {
                seen[j] = true;
                queue.push_back(j);
            }
        };
        if r > 0 {
            push(r - 1, c);
        }
        if r + 1 < h {
            push(r + 1, c);
        }
        if c > 0 {
            push(r, c - 1);
        }
        if c + 1 < w {
            push(r, c + 1);
        }
    }
    let (cx, cy) = (sx / n as f64, sy / n as f64);
    let rho = params.sampler_radius * rng.gen::<f64>().sqrt();
    let phi = rng.gen_range(0.0..std::f64::consts::TAU);
    let theta = rng.gen_range(0.0..PI);
    // stay inside the tray and within the outermost pixel centers
    let g = &image.grid;
    let (x0, y0) = g.pixel_center(0, 0);
    let (x1, y1) = g.pixel_center(h - 1, w - 1);
    GraspPose::new(
        (cx + rho * phi.cos()).clamp(-tray_half[0], tray_half[0]).clamp(x0, x1),
        (cy + rho * phi.sin()).clamp(-tray_half[1], tray_half[1]).clamp(y0, y1),
        theta,
        params.opening,
    )
}

/// Runs descend, close and lift on a copy of the settled pile.
///
/// `image` must be the pile rendered before the gripper enters.
pub fn run_pick_trial(scene: &Scene, image: &DepthImage, pose: &GraspPose, params: &TrialParams) -> Result<PickOutcome> {
    params.validate()?;
    let mut world = scene.world.clone();
    let floor = world.floor_z();
    let top = floor + local_top(image, pose, &params.gripper);
    let start = top + params.start_clearance;
    let target = (top - params.grasp_depth).max(floor + 1e-3);
    let mut gripper = params.gripper.clone();
    gripper.max_width = gripper.max_width.max(pose.opening);
    let discard = |e: PhysicsError| match e {
        PhysicsError::Unstable { .. } | PhysicsError::StrokeViolation(_) | PhysicsError::IllegalCommand { .. } => {
            Ok(PickOutcome::Discarded(e.to_string()))
        }
        other => Err(TrialsError::Physics(other)),
    };
    macro_rules! phase {
        ($e:expr) => {
            match $e {
                Ok(v) => v,
                Err(e) => return discard(e),
            }
        };
    }
    phase!(world.add_gripper(gripper, pose.x, pose.y, pose.theta, start, pose.opening));
    phase!(world.command_gripper(GripperAction::Descend(target)));
    if !phase!(world.run_gripper(params.max_phase_steps)) {
        return Ok(PickOutcome::Discarded("descent did not finish".into()));
    }
    let g = world.gripper().expect("gripper was added");
    if g.blocked {
        let travelled = (start - g.z) / (start - target);
        return Ok(if travelled >= params.blocked_fraction {
            PickOutcome::Labeled(Label::Failure)
        } else {
            PickOutcome::Discarded(format!("descent blocked after {:.0}% of its travel", 100.0 * travelled))
        });
    }
    let min = g.params.min_width;
    phase!(world.command_gripper(GripperAction::Close(min)));
    if !phase!(world.run_gripper(params.max_phase_steps)) {
        return Ok(PickOutcome::Discarded("closing did not finish".into()));
    }
    let z = world.gripper().expect("gripper was added").z;
    phase!(world.command_gripper(GripperAction::Ascend(z + params.lift_height)));
    if !phase!(world.run_gripper(params.max_phase_steps)) {
        return Ok(PickOutcome::Discarded("lift did not finish".into()));
    }
    let threshold = floor + params.lift_fraction * params.lift_height;
    let lifted = scene.objects.iter().any(|&i| world.body(i).position.z >= threshold);
    Ok(PickOutcome::Labeled(if lifted { Label::Success } else { Label::Failure }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_is_canonical() {
        assert_eq!(GraspPose::new(0.0, 0.0, PI, 0.05).theta, 0.0);
        assert!((GraspPose::new(0.0, 0.0, -PI / 4.0, 0.05).theta - 3.0 * PI / 4.0).abs() < 1e-15);
        assert_eq!(canonical_theta(-1e-18), 0.0);
    }
}
