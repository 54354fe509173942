//! Success discrimination for a single grasp and the raster-scan search for
//! the best grasp in a depth image.

mod input;
mod scan;

pub use input::{class_of, encode_input, InputConfig, RecordSource};
pub use scan::{
    enumerate_candidates, find_best_grasp, overlay_gray, overlay_rgb, GraspCandidate, ScanConfig, ScanRegion, ScanResult,
};

use thiserror::Error;

use crate::nn::{Network, NnError, Scalar};
use crate::render::{DepthImage, RenderError};
use crate::trials::{GraspPose, TrialsError};

#[derive(Debug, Error)]
pub enum GraspError {
    #[error("invalid scan configuration: {0}")]
    Config(String),
    #[error("grasp at ({x:.4}, {y:.4}) projects outside the image")]
    OutOfBounds { x: f64, y: f64 },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Trials(#[from] TrialsError),
}

pub type Result<T> = std::result::Result<T, GraspError>;

/// Success when `y0` is strictly above one half.
pub fn verdict(y0: f64) -> bool {
    y0 > 0.5
}

/// Anything that assigns a success probability to a grasp in an image.
pub trait Scorer: Sync {
    fn score(&self, image: &DepthImage, pose: &GraspPose) -> Result<f64>;
}

/// A network paired with the input encoding it was trained on.
pub struct NetScorer<'a, T: Scalar> {
    pub net: &'a Network<T>,
    pub input: InputConfig,
}

impl<T: Scalar> Scorer for NetScorer<'_, T> {
    fn score(&self, image: &DepthImage, pose: &GraspPose) -> Result<f64> {
        if self.input.crop != self.net.config.input {
            return Err(GraspError::Config(format!(
                "crop of {} pixels does not match the network input of {}",
                self.input.crop, self.net.config.input
            )));
        }
        let (depth, gripper) = encode_input(image, pose, &self.input)?;
        let conv = |v: Vec<f32>| v.into_iter().map(|x| T::from_f64(x as f64)).collect::<Vec<T>>();
        let (y0, _) = self.net.forward(&conv(depth), &conv(gripper))?;
        Ok(y0.to_f64())
    }
}

/// `(y0, verdict)` for one grasp.
pub fn discriminate(scorer: &dyn Scorer, image: &DepthImage, pose: &GraspPose) -> Result<(f64, bool)> {
    let y0 = scorer.score(image, pose)?;
    Ok((y0, verdict(y0)))
}
