use nalgebra::{Quaternion, UnitQuaternion};
use serde::{Deserialize, Serialize};

use super::{decompose, fit_box, FittedBox, GeometryError, Point3, Result, TriMesh, Vector3};

/// Box-compound collision model of one mesh.
///
/// JSON layout (field order as written):
///
/// ```json
/// { "source": "workpiece", "part_count": 2,
///   "boxes": [ { "center": [x, y, z],
///                "half_extents": [hx, hy, hz],
///                "orientation": [w, x, y, z] } ] }
/// ```
///
/// Lengths are meters in the mesh frame; `orientation` is a unit quaternion
/// with the scalar part first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct ApproxModel {
    pub source: String,
    pub boxes: Vec<FittedBox>,
}

impl ApproxModel {
    pub fn new(source: impl Into<String>, boxes: Vec<FittedBox>) -> Result<Self> {
        if boxes.is_empty() {
            return Err(GeometryError::InvalidArgument("approximate model needs at least one box".into()));
        }
        for (i, b) in boxes.iter().enumerate() {
            if !b.half_extents.iter().all(|&h| h > 0.0) {
                return Err(GeometryError::Degenerate(format!("box {i} has non-positive half extents")));
            }
            if (b.orientation.norm() - 1.0).abs() > 1e-9 {
                return Err(GeometryError::Degenerate(format!("box {i} orientation is not unit")));
            }
        }
        Ok(Self {
            source: source.into(),
            boxes,
        })
    }

    /// Number of boxes K.
    pub fn part_count(&self) -> usize {
        self.boxes.len()
    }

    pub fn total_volume(&self) -> f64 {
        self.boxes.iter().map(FittedBox::volume).sum()
    }

    pub fn contains(&self, p: &Point3, tol: f64) -> bool {
        self.boxes.iter().any(|b| b.contains(p, tol))
    }

    /// The boxes as one (possibly self-intersecting) triangle soup, for rendering.
    pub fn to_mesh(&self) -> TriMesh {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (i, b) in self.boxes.iter().enumerate() {
            let m = b.to_mesh(&format!("{}#{i}", self.source));
            let off = vertices.len();
            vertices.extend(m.vertices);
            triangles.extend(m.triangles.iter().map(|t| t.map(|v| v + off)));
        }
        TriMesh {
            name: format!("{}-boxes", self.source),
            vertices,
            triangles,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| GeometryError::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }
}

/// Decomposes `mesh` into at most `target_parts` convex parts and boxes each one.
pub fn build_approx_model(mesh: &TriMesh, target_parts: usize) -> Result<ApproxModel> {
    let parts = decompose(mesh, target_parts)?;
    ApproxModel::new(mesh.name.clone(), parts.iter().map(fit_box).collect())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    source: String,
    part_count: usize,
    boxes: Vec<BoxFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoxFile {
    center: [f64; 3],
    half_extents: [f64; 3],
    orientation: [f64; 4],
}

impl From<ApproxModel> for ModelFile {
    fn from(m: ApproxModel) -> Self {
        ModelFile {
            source: m.source,
            part_count: m.boxes.len(),
            boxes: m
                .boxes
                .iter()
                .map(|b| {
                    let q = b.orientation.quaternion();
                    BoxFile {
                        center: [b.center.x, b.center.y, b.center.z],
                        half_extents: [b.half_extents.x, b.half_extents.y, b.half_extents.z],
                        orientation: [q.w, q.i, q.j, q.k],
                    }
                })
                .collect(),
        }
    }
}

impl TryFrom<ModelFile> for ApproxModel {
    type Error = GeometryError;

    fn try_from(f: ModelFile) -> Result<Self> {
        if f.part_count != f.boxes.len() {
            return Err(GeometryError::InvalidArgument(format!(
                "part_count {} does not match {} boxes",
                f.part_count,
                f.boxes.len()
            )));
        }
        let boxes = f
            .boxes
            .into_iter()
            .map(|b| {
                let [w, x, y, z] = b.orientation;
                FittedBox {
                    center: Point3::from(b.center),
                    half_extents: Vector3::from(b.half_extents),
                    orientation: UnitQuaternion::new_unchecked(Quaternion::new(w, x, y, z)),
                }
            })
            .collect();
        ApproxModel::new(f.source, boxes)
    }
}
