//! Classification metrics, the collision-resolution timing benchmark, and the
//! approximation-rate sweep.

mod bench;
mod metrics;
mod sweep;

pub use bench::{timing_benchmark, BenchConfig, BenchRow};
pub use metrics::{evaluate_records, ConfusionMatrix, EvalReport, Metrics, ScoreRow};
pub use sweep::{
    approx_effect_experiment, probe_setup, train_on_records, Probe, ProbeSetup, ProbeStats, SweepConfig, SweepReport, SweepRow,
};

use thiserror::Error;

use crate::geometry::GeometryError;
use crate::grasp::GraspError;
use crate::nn::NnError;
use crate::physics::PhysicsError;
use crate::render::RenderError;
use crate::trials::TrialsError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{0} is undefined: its denominator is zero")]
    UndefinedMetric(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("not enough data: {0}")]
    InsufficientData(String),
    #[error(transparent)]
    Grasp(#[from] GraspError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Trials(#[from] TrialsError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, EvalError>;
