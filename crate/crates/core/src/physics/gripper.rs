use nalgebra::{Isometry3, Translation3, UnitQuaternion};
use serde::{Deserialize, Serialize};

use super::{PhysicsError, Result};
use crate::geometry::{Point3, Vector3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GripperParams {
    /// Finger size along the closing axis, m.
    pub finger_thickness: f64,
    /// Finger size across the closing axis, m.
    pub finger_depth: f64,
    pub finger_length: f64,
    pub min_width: f64,
    pub max_width: f64,
    pub descend_speed: f64,
    /// Rate of change of the opening width, m/s.
    pub close_speed: f64,
    pub lift_speed: f64,
    /// Closing stops once a finger pushes harder than this, N.
    pub grip_stop_force: f64,
    /// Squeeze force per finger while holding, N.
    pub hold_force: f64,
    pub squeeze_speed: f64,
    /// Descent stops once the fingers push down harder than this, N.
    pub block_force: f64,
}

impl Default for GripperParams {
    fn default() -> Self {
        Self {
            finger_thickness: 0.008,
            finger_depth: 0.02,
            finger_length: 0.06,
            min_width: 0.0,
            max_width: 0.08,
            descend_speed: 0.1,
            close_speed: 0.02,
            lift_speed: 0.1,
            grip_stop_force: 5.0,
            hold_force: 5.0,
            squeeze_speed: 0.02,
            block_force: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GripperState {
    Idle,
    Descending { target_z: f64 },
    Closing { target_width: f64 },
    Ascending { target_z: f64 },
}

impl std::fmt::Display for GripperState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GripperState::Idle => write!(f, "idle"),
            GripperState::Descending { .. } => write!(f, "descending"),
            GripperState::Closing { .. } => write!(f, "closing"),
            GripperState::Ascending { .. } => write!(f, "ascending"),
        }
    }
}

/// Motion commands; each magnitude is the target finger-bottom height or opening width, m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GripperAction {
    Descend(f64),
    Close(f64),
    Ascend(f64),
}

/// Two kinematic box fingers closing symmetrically along the yaw axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Gripper {
    pub params: GripperParams,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    /// Height of the finger bottoms, m.
    pub z: f64,
    /// Inner gap between the fingers, m.
    pub width: f64,
    pub state: GripperState,
    /// Set when closing stopped on contact; the fingers then squeeze.
    pub holding: bool,
    /// Set when descent stopped on contact.
    pub blocked: bool,
    pub fingers: [usize; 2],
    /// Normal impulse each finger applied during the last step, N·s.
    pub last_impulse: [f64; 2],
}

impl Gripper {
    pub(crate) fn new(params: GripperParams, x: f64, y: f64, yaw: f64, z: f64, width: f64, fingers: [usize; 2]) -> Self {
        Self {
            params,
            x,
            y,
            yaw,
            z,
            width,
            state: GripperState::Idle,
            holding: false,
            blocked: false,
            fingers,
            last_impulse: [0.0; 2],
        }
    }

    pub fn closing_axis(&self) -> Vector3 {
        Vector3::new(self.yaw.cos(), self.yaw.sin(), 0.0)
    }

    pub fn finger_half_extents(&self) -> Vector3 {
        let p = &self.params;
        Vector3::new(p.finger_thickness / 2.0, p.finger_depth / 2.0, p.finger_length / 2.0)
    }

    /// Finger `k` sits on the `-axis` side for k = 0 and the `+axis` side for k = 1.
    pub fn finger_pose(&self, k: usize) -> Isometry3<f64> {
        let side = if k == 0 { -1.0 } else { 1.0 };
        let offset = self.closing_axis() * side * (self.width + self.params.finger_thickness) / 2.0;
        let center = Point3::new(self.x, self.y, self.z + self.params.finger_length / 2.0) + offset;
        Isometry3::from_parts(
            Translation3::from(center.coords),
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), self.yaw),
        )
    }

    pub fn is_moving(&self) -> bool {
        self.state != GripperState::Idle
    }

    pub(crate) fn command(&mut self, action: GripperAction, floor_z: f64) -> Result<()> {
        let illegal = |name: &str, state: GripperState| {
            Err(PhysicsError::IllegalCommand {
                command: name.into(),
                state: state.to_string(),
            })
        };
        if self.state != GripperState::Idle {
            let name = match action {
                GripperAction::Descend(_) => "descend",
                GripperAction::Close(_) => "close",
                GripperAction::Ascend(_) => "ascend",
            };
            return illegal(name, self.state);
        }
        match action {
            GripperAction::Descend(target_z) => {
                if target_z < floor_z {
                    return Err(PhysicsError::StrokeViolation(format!(
                        "descent target {target_z:.4} m is below the tray floor at {floor_z:.4} m"
                    )));
                }
                if self.holding {
                    return illegal("descend", self.state);
                }
                self.blocked = false;
                self.state = GripperState::Descending { target_z };
            }
            GripperAction::Close(target_width) => {
                if target_width < self.params.min_width || target_width > self.width {
                    return Err(PhysicsError::StrokeViolation(format!(
                        "closing target {target_width:.4} m outside [{:.4}, {:.4}] m",
                        self.params.min_width, self.width
                    )));
                }
                self.state = GripperState::Closing { target_width };
            }
            GripperAction::Ascend(target_z) => {
                if target_z < self.z {
                    return Err(PhysicsError::StrokeViolation(format!(
                        "ascent target {target_z:.4} m is below the fingers at {:.4} m",
                        self.z
                    )));
                }
                self.state = GripperState::Ascending { target_z };
            }
        }
        Ok(())
    }

    /// This step's commanded motion `(dz, dwidth)`.
    pub(crate) fn plan(&self, dt: f64) -> (f64, f64) {
        let p = &self.params;
        match self.state {
            GripperState::Idle => (0.0, 0.0),
            GripperState::Descending { target_z } => ((target_z - self.z).max(-p.descend_speed * dt), 0.0),
            GripperState::Closing { target_width } => (0.0, (target_width - self.width).max(-p.close_speed * dt)),
            GripperState::Ascending { target_z } => ((target_z - self.z).min(p.lift_speed * dt), 0.0),
        }
    }

    /// Records the step's contact feedback; returns false when the fingers
    /// stall and the planned motion must not be applied.
    pub(crate) fn feedback(&mut self, impulse: [f64; 2], touching_static: bool, dt: f64) -> bool {
        self.last_impulse = impulse;
        let p = &self.params;
        match self.state {
            GripperState::Descending { .. } if impulse[0] + impulse[1] > p.block_force * dt || touching_static => {
                self.blocked = true;
                self.state = GripperState::Idle;
                false
            }
            GripperState::Closing { .. } if impulse.iter().any(|&j| j > p.grip_stop_force * dt) => {
                // both fingers stop together to stay mirror-symmetric
                self.holding = true;
                self.state = GripperState::Idle;
                false
            }
            _ => true,
        }
    }

    pub(crate) fn advance(&mut self, dz: f64, dw: f64) {
        self.z += dz;
        self.width += dw;
        const ARRIVED: f64 = 1e-12;
        match self.state {
            GripperState::Descending { target_z } | GripperState::Ascending { target_z }
                if (self.z - target_z).abs() < ARRIVED =>
            {
                self.z = target_z;
                self.state = GripperState::Idle;
            }
            GripperState::Closing { target_width } if (self.width - target_width).abs() < ARRIVED => {
                self.width = target_width;
                self.state = GripperState::Idle;
            }
            _ => {}
        }
    }

    /// Linear velocity of finger `k` for a step moving by `(dz, dw)`.
    pub(crate) fn finger_velocity(&self, k: usize, dz: f64, dw: f64, dt: f64) -> Vector3 {
        let side = if k == 0 { -1.0 } else { 1.0 };
        (Vector3::z() * dz + self.closing_axis() * side * dw / 2.0) / dt
    }
}
