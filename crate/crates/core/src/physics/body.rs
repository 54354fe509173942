use std::sync::Arc;

use nalgebra::{Isometry3, Matrix3, Translation3, UnitQuaternion};
use serde::{Deserialize, Serialize};

use super::shape::{MassProperties, Polytope};
use super::{PhysicsError, Result};
use crate::geometry::{ApproxModel, ConvexPart, FittedBox, Point3, Vector3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyKind {
    Dynamic,
    Kinematic,
    Static,
}

/// Collision geometry of one body: convex parts in the body frame, whose
/// origin is the center of mass for dynamic bodies.
#[derive(Debug, Clone, PartialEq)]
pub struct Shape {
    pub parts: Vec<Polytope>,
    pub radius: f64,
}

impl Shape {
    pub fn new(parts: Vec<Polytope>) -> Self {
        let radius = parts
            .iter()
            .map(|p| p.center.coords.norm() + p.radius)
            .fold(0.0, f64::max);
        Self { parts, radius }
    }

    pub fn from_model(model: &ApproxModel) -> Self {
        Self::new(model.boxes.iter().map(Polytope::from_box).collect())
    }

    pub fn from_hulls(parts: &[ConvexPart]) -> Self {
        Self::new(parts.iter().map(Polytope::from_part).collect())
    }

    pub fn from_boxes(boxes: &[FittedBox]) -> Self {
        Self::new(boxes.iter().map(Polytope::from_box).collect())
    }

    fn shifted(&self, offset: &Vector3) -> Self {
        Self::new(
            self.parts
                .iter()
                .map(|p| p.transformed(&UnitQuaternion::identity(), offset))
                .collect(),
        )
    }
}

#[derive(Debug, Clone)]
pub struct RigidBody {
    pub kind: BodyKind,
    /// World position of the body origin.
    pub position: Point3,
    pub orientation: UnitQuaternion<f64>,
    pub linear_velocity: Vector3,
    pub angular_velocity: Vector3,
    pub mass: f64,
    /// Inertia tensor about the body origin, body axes.
    pub inertia: Matrix3<f64>,
    pub shape: Arc<Shape>,
    /// Body-frame position of the source mesh origin.
    pub mesh_offset: Vector3,
    pub(crate) inv_mass: f64,
    pub(crate) inv_inertia: Matrix3<f64>,
    pub(crate) sleeping: bool,
    pub(crate) still_steps: u32,
}

impl RigidBody {
    /// A dynamic body of uniform `density` whose mesh-frame collision shape is
    /// `shape`; the body origin is placed at the compound's center of mass.
    pub fn dynamic(shape: &Shape, density: f64, pose: Isometry3<f64>) -> Result<Self> {
        if !(density > 0.0) {
            return Err(PhysicsError::InvalidParameter(format!("density {density} must be positive")));
        }
        let mp = MassProperties::of_parts(&shape.parts, density);
        if !(mp.mass > 0.0) || !mp.inertia.iter().all(|v| v.is_finite()) {
            return Err(PhysicsError::InvalidParameter("shape has no volume".into()));
        }
        let inv_inertia = mp
            .inertia
            .try_inverse()
            .ok_or_else(|| PhysicsError::InvalidParameter("singular inertia".into()))?;
        let offset = -mp.center.coords;
        let position = pose * Point3::from(-offset);
        Ok(Self {
            kind: BodyKind::Dynamic,
            position,
            orientation: pose.rotation,
            linear_velocity: Vector3::zeros(),
            angular_velocity: Vector3::zeros(),
            mass: mp.mass,
            inertia: mp.inertia,
            shape: Arc::new(shape.shifted(&offset)),
            mesh_offset: offset,
            inv_mass: 1.0 / mp.mass,
            inv_inertia,
            sleeping: false,
            still_steps: 0,
        })
    }

    /// A body of infinite mass; `Kinematic` bodies move only by commanded velocity.
    pub fn fixed(kind: BodyKind, shape: Shape, pose: Isometry3<f64>) -> Self {
        debug_assert!(kind != BodyKind::Dynamic);
        Self {
            kind,
            position: Point3::from(pose.translation.vector),
            orientation: pose.rotation,
            linear_velocity: Vector3::zeros(),
            angular_velocity: Vector3::zeros(),
            mass: f64::INFINITY,
            inertia: Matrix3::zeros(),
            shape: Arc::new(shape),
            mesh_offset: Vector3::zeros(),
            inv_mass: 0.0,
            inv_inertia: Matrix3::zeros(),
            sleeping: false,
            still_steps: 0,
        }
    }

    pub fn is_sleeping(&self) -> bool {
        self.sleeping
    }

    /// True for dynamic bodies that the solver currently moves.
    pub fn is_active(&self) -> bool {
        self.kind == BodyKind::Dynamic && !self.sleeping
    }

    pub fn pose(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.position.coords), self.orientation)
    }

    /// Maps source-mesh coordinates to world coordinates.
    pub fn mesh_pose(&self) -> Isometry3<f64> {
        self.pose() * Translation3::from(self.mesh_offset)
    }

    pub fn kinetic_energy(&self) -> f64 {
        if self.kind != BodyKind::Dynamic {
            return 0.0;
        }
        let w_body = self.orientation.inverse_transform_vector(&self.angular_velocity);
        0.5 * self.mass * self.linear_velocity.norm_squared() + 0.5 * w_body.dot(&(self.inertia * w_body))
    }

    pub fn velocity_at(&self, p: &Point3) -> Vector3 {
        self.linear_velocity + self.angular_velocity.cross(&(p - self.position))
    }

    /// World-frame inverse inertia; zero for bodies the solver does not move.
    pub(crate) fn world_inv_inertia(&self) -> Matrix3<f64> {
        if !self.is_active() {
            return Matrix3::zeros();
        }
        let r = self.orientation.to_rotation_matrix().into_inner();
        r * self.inv_inertia * r.transpose()
    }

    pub(crate) fn effective_inv_mass(&self) -> f64 {
        if self.is_active() {
            self.inv_mass
        } else {
            0.0
        }
    }

    pub(crate) fn world_parts(&self) -> Vec<Polytope> {
        let t = self.position.coords;
        self.shape
            .parts
            .iter()
            .map(|p| p.transformed(&self.orientation, &t))
            .collect()
    }

    /// Fastest surface speed, bounded with the shape radius.
    pub(crate) fn max_point_speed(&self) -> f64 {
        self.linear_velocity.norm() + self.angular_velocity.norm() * self.shape.radius
    }
}
