//! Rigid-body simulation of the tray, the pile, and a parallel-jaw gripper.
//!
//! Bodies collide only through convex polytopes: the fitted boxes of an
//! [`ApproxModel`](crate::geometry::ApproxModel) in box mode, or the convex
//! hulls of the decomposition in exact-convex mode. Contacts come from a
//! separating-axis test with face clipping, and a sequential-impulse solver
//! with warm starting, Coulomb friction, and Baumgarte correction resolves them.

mod body;
mod collide;
mod gripper;
mod shape;
mod world;

pub use body::{BodyKind, RigidBody, Shape};
pub use collide::{closest_points, collide, Manifold, ManifoldPoint};
pub use gripper::{Gripper, GripperAction, GripperParams, GripperState};
pub use shape::{Face, MassProperties, Polytope};
pub use world::{BodySnapshot, ContactPoint, TrayConfig, World, WorldSnapshot};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum PhysicsError {
    #[error("body {body} became unstable at {speed:.3} m/s")]
    Unstable { body: usize, speed: f64 },
    #[error("gripper stroke violation: {0}")]
    StrokeViolation(String),
    #[error("gripper command {command} is not allowed while {state}")]
    IllegalCommand { command: String, state: String },
    #[error("invalid physics parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, PhysicsError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsParams {
    /// Time step, s.
    pub dt: f64,
    pub iterations: usize,
    /// Coulomb friction coefficient.
    pub friction: f64,
    pub restitution: f64,
    /// Penetration left uncorrected, m.
    pub slop: f64,
    /// Fraction of the remaining penetration corrected per step.
    pub baumgarte: f64,
    pub gravity: [f64; 3],
    /// Any body faster than this aborts the step, m/s.
    pub max_speed: f64,
    /// Angular velocity decay rate, 1/s.
    pub angular_damping: f64,
    pub sleep_linear: f64,
    pub sleep_angular: f64,
    /// Consecutive slow steps before a body sleeps.
    pub sleep_steps: u32,
    /// A sleeping body wakes when touched by something faster than this, m/s.
    pub wake_speed: f64,
    /// Part density, kg/m³.
    pub density: f64,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        Self {
            dt: 1.0 / 240.0,
            iterations: 10,
            friction: 0.6,
            restitution: 0.0,
            slop: 1e-4,
            baumgarte: 0.2,
            gravity: [0.0, 0.0, -9.81],
            max_speed: 20.0,
            angular_damping: 0.05,
            sleep_linear: 5e-3,
            sleep_angular: 0.05,
            sleep_steps: 60,
            wake_speed: 0.02,
            density: 2700.0,
        }
    }
}

impl PhysicsParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(PhysicsError::InvalidParameter(m.into()));
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1");
        }
        if !(self.friction >= 0.0) {
            return bad("friction must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.restitution) {
            return bad("restitution must lie in [0, 1]");
        }
        if !(self.slop >= 0.0) || !(0.0..=1.0).contains(&self.baumgarte) {
            return bad("slop must be non-negative and baumgarte in [0, 1]");
        }
        if !(self.max_speed > 0.0) || !(self.density > 0.0) {
            return bad("max_speed and density must be positive");
        }
        Ok(())
    }
}
