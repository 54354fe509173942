//! Pile generation, the descend-close-lift pick protocol, and the on-disk dataset.
//!
//! Every random draw comes from a ChaCha8 stream selected by the master seed
//! and the scene index, so a dataset is a pure function of its configuration
//! regardless of how many workers produce it.

mod augment;
mod dataset;
mod pick;
mod scene;

pub use augment::{augment_records, Symmetry};
pub use dataset::{collect, load_dataset, split_stratified, CollectConfig, CollectSummary, Dataset, Split, TrialRecord};
pub use pick::{local_top, run_pick_trial, sample_grasp_pose, GraspPose, Label, PickOutcome, TrialParams};
pub use scene::{generate_scene, prepare_asset, rebuild_scene, Asset, CollisionMode, Scene, SceneConfig};

use crate::geometry::GeometryError;
use crate::physics::PhysicsError;
use crate::render::RenderError;

#[derive(Debug, thiserror::Error)]
pub enum TrialsError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("scene {seed} did not settle within {steps} steps")]
    NotQuiescent { seed: u64, steps: usize },
    #[error("scene {seed} lost a body outside the tray")]
    Escaped { seed: u64 },
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed dataset: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, TrialsError>;

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> TrialsError + '_ {
    move |source| TrialsError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Independent random stream for one scene.
pub fn scene_rng(master_seed: u64, scene: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(scene);
    rng
}
