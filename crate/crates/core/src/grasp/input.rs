use serde::{Deserialize, Serialize};

use super::{GraspError, Result};
use crate::nn::{Sample, SampleSource};
use crate::render::{render_gripper_segment, DepthImage};
use crate::trials::{Dataset, GraspPose, Label, Split, Symmetry};

/// How a (depth image, grasp) pair becomes the two network channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    /// Crop side in pixels; must equal the network input size.
    pub crop: usize,
    /// Height mapped to 1.0 in the depth channel, m.
    pub height_range: f64,
    pub segment_thickness: usize,
}

impl Default for InputConfig {
    fn default() -> Self {
        Self {
            crop: 64,
            height_range: 0.08,
            segment_thickness: 3,
        }
    }
}

/// Height-map crop centered on the grasp and the gripper segment on the same grid.
pub fn encode_input(image: &DepthImage, pose: &GraspPose, input: &InputConfig) -> Result<(Vec<f32>, Vec<f32>)> {
    if input.crop == 0 || !(input.height_range > 0.0) {
        return Err(GraspError::Config("crop must be positive and height_range above zero".into()));
    }
    let (row, col) = image
        .grid
        .pixel_of(pose.x, pose.y)
        .ok_or(GraspError::OutOfBounds { x: pose.x, y: pose.y })?;
    let crop = image.crop(row as i64, col as i64, input.crop);
    let segment = render_gripper_segment(pose.x, pose.y, pose.theta, pose.opening, input.segment_thickness, &crop.grid)?;
    Ok((crop.height_map(input.height_range), segment.to_f32()))
}

/// Class index used by the network: 0 = success.
pub fn class_of(label: Label) -> usize {
    match label {
        Label::Success => 0,
        Label::Failure => 1,
    }
}

/// Dataset records expanded by a symmetry set, encoded on demand.
///
/// Sample `i` is record `i / set.len()` under symmetry `i % set.len()`.
pub struct RecordSource {
    images: Vec<DepthImage>,
    poses: Vec<GraspPose>,
    labels: Vec<Label>,
    symmetries: Vec<Symmetry>,
    input: InputConfig,
}

impl RecordSource {
    pub fn new(items: Vec<(DepthImage, GraspPose, Label)>, symmetries: Vec<Symmetry>, input: InputConfig) -> Result<Self> {
        if symmetries.is_empty() {
            return Err(GraspError::Config("symmetry set is empty".into()));
        }
        let mut out = Self {
            images: Vec::with_capacity(items.len()),
            poses: Vec::with_capacity(items.len()),
            labels: Vec::with_capacity(items.len()),
            symmetries,
            input,
        };
        for (image, pose, label) in items {
            if image.grid.pixel_of(pose.x, pose.y).is_none() {
                return Err(GraspError::OutOfBounds { x: pose.x, y: pose.y });
            }
            if out.symmetries.iter().any(|s| *s != Symmetry::IDENTITY) && image.width() != image.height() {
                return Err(GraspError::Config("symmetries need square images".into()));
            }
            out.images.push(image);
            out.poses.push(pose);
            out.labels.push(label);
        }
        Ok(out)
    }

    /// Loads every record of `split`.
    pub fn from_dataset(dataset: &Dataset, split: Split, symmetries: Vec<Symmetry>, input: InputConfig) -> Result<Self> {
        let items = dataset
            .split(split)
            .map(|r| Ok((dataset.image(r)?, r.pose, r.label)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(items, symmetries, input)
    }

    pub fn records(&self) -> usize {
        self.images.len()
    }

    pub fn label(&self, index: usize) -> Label {
        self.labels[index / self.symmetries.len()]
    }

    fn try_sample(&self, index: usize) -> Result<Sample> {
        let k = self.symmetries.len();
        let (r, s) = (index / k, index % k);
        let (image, pose) = if self.symmetries[s] == Symmetry::IDENTITY {
            (std::borrow::Cow::Borrowed(&self.images[r]), self.poses[r])
        } else {
            let (i, p) = self.symmetries[s].apply(&self.images[r], &self.poses[r])?;
            (std::borrow::Cow::Owned(i), p)
        };
        let (depth, gripper) = encode_input(&image, &pose, &self.input)?;
        Ok(Sample {
            depth,
            gripper,
            label: class_of(self.labels[r]),
        })
    }
}

impl SampleSource for RecordSource {
    fn len(&self) -> usize {
        self.images.len() * self.symmetries.len()
    }

    /// Poses are checked on construction and symmetries keep them inside a
    /// square image, so encoding cannot fail here.
    fn sample(&self, index: usize) -> Sample {
        self.try_sample(index).expect("record encodes")
    }
}
