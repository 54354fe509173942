//! Exact render geometry and the approximate collision geometry derived from it.
//!
//! An object is loaded as a [`TriMesh`] (used for depth rendering), split into
//! [`ConvexPart`]s by axis-aligned plane cuts, and each part is enclosed by a
//! [`FittedBox`]. The resulting [`ApproxModel`] is the only geometry the
//! physics engine sees in box mode.

mod decompose;
mod hull;
mod mesh;
mod model;
mod obb;
pub mod primitives;

pub use decompose::{decompose, decompose_with, DecomposeOptions};
pub use hull::ConvexPart;
pub(crate) use hull::face_plane;
pub use mesh::{load_mesh, parse_obj, Aabb, TriMesh};
pub use model::{build_approx_model, ApproxModel};
pub use obb::{fit_box, FittedBox};

pub type Point3 = nalgebra::Point3<f64>;
pub type Vector3 = nalgebra::Vector3<f64>;

/// Containment tolerance of the approximate model, meters.
pub const CONTAINMENT_TOL: f64 = 1e-3;
/// A part is convex when each vertex lies on its own hull within this distance.
pub const CONVEXITY_EPS: f64 = 1e-7;

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("decomposition failed: {0}")]
    Decomposition(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, GeometryError>;
