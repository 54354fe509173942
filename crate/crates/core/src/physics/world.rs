use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{Isometry3, Matrix3, Quaternion, UnitQuaternion};
use serde::{Deserialize, Serialize};

use super::body::{BodyKind, RigidBody, Shape};
use super::collide::collide;
use super::gripper::{Gripper, GripperAction, GripperParams};
use super::shape::Polytope;
use super::{PhysicsError, PhysicsParams, Result};
use crate::geometry::{FittedBox, Point3, Vector3};

/// Open-top tray centered on the origin with its floor surface at z = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrayConfig {
    /// Interior size along x and y, m.
    pub size: [f64; 2],
    pub wall_height: f64,
    pub wall_thickness: f64,
    pub floor_thickness: f64,
}

impl Default for TrayConfig {
    fn default() -> Self {
        Self {
            size: [0.2, 0.2],
            wall_height: 0.08,
            wall_thickness: 0.01,
            floor_thickness: 0.05,
        }
    }
}

impl TrayConfig {
    pub fn boxes(&self) -> Vec<FittedBox> {
        let [sx, sy] = self.size;
        let (h, t, f) = (self.wall_height, self.wall_thickness, self.floor_thickness);
        let outer_x = sx / 2.0 + t;
        vec![
            FittedBox::axis_aligned(Point3::new(0.0, 0.0, -f / 2.0), Vector3::new(outer_x, sy / 2.0 + t, f / 2.0)),
            FittedBox::axis_aligned(Point3::new(-(sx + t) / 2.0, 0.0, h / 2.0), Vector3::new(t / 2.0, sy / 2.0 + t, h / 2.0)),
            FittedBox::axis_aligned(Point3::new((sx + t) / 2.0, 0.0, h / 2.0), Vector3::new(t / 2.0, sy / 2.0 + t, h / 2.0)),
            FittedBox::axis_aligned(Point3::new(0.0, -(sy + t) / 2.0, h / 2.0), Vector3::new(sx / 2.0, t / 2.0, h / 2.0)),
            FittedBox::axis_aligned(Point3::new(0.0, (sy + t) / 2.0, h / 2.0), Vector3::new(sx / 2.0, t / 2.0, h / 2.0)),
        ]
    }

    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        x.abs() <= self.size[0] / 2.0 && y.abs() <= self.size[1] / 2.0
    }
}

/// A contact between two bodies; `normal` points from `bodies.0` toward `bodies.1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactPoint {
    pub point: Point3,
    pub normal: Vector3,
    pub depth: f64,
    pub bodies: (usize, usize),
    pub parts: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodySnapshot {
    pub kind: BodyKind,
    pub position: [f64; 3],
    /// Scalar part first.
    pub orientation: [f64; 4],
    pub linear_velocity: [f64; 3],
    pub angular_velocity: [f64; 3],
    pub sleeping: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSnapshot {
    pub steps: u64,
    pub bodies: Vec<BodySnapshot>,
}

#[derive(Debug, Clone, Copy)]
struct Cached {
    local: Vector3,
    jn: f64,
    jt: [f64; 2],
}

type PairKey = (usize, usize, usize, usize);

struct Constraint {
    a: usize,
    b: usize,
    key: PairKey,
    local: Vector3,
    n: Vector3,
    t: [Vector3; 2],
    ra: Vector3,
    rb: Vector3,
    mass_n: f64,
    mass_t: [f64; 2],
    bias: f64,
    max_jn: f64,
    jn: f64,
    jt: [f64; 2],
    finger: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct World {
    pub params: PhysicsParams,
    bodies: Vec<RigidBody>,
    gripper: Option<Gripper>,
    floor_z: f64,
    steps: u64,
    warm: HashMap<PairKey, Vec<Cached>>,
    parts: Vec<Option<Arc<Vec<Polytope>>>>,
}

impl World {
    pub fn new(params: PhysicsParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            bodies: Vec::new(),
            gripper: None,
            floor_z: 0.0,
            steps: 0,
            warm: HashMap::new(),
            parts: Vec::new(),
        })
    }

    pub fn add_body(&mut self, body: RigidBody) -> usize {
        self.bodies.push(body);
        self.parts.push(None);
        self.bodies.len() - 1
    }

    pub fn add_tray(&mut self, tray: &TrayConfig) -> usize {
        self.floor_z = 0.0;
        self.add_body(RigidBody::fixed(BodyKind::Static, Shape::from_boxes(&tray.boxes()), Isometry3::identity()))
    }

    pub fn bodies(&self) -> &[RigidBody] {
        &self.bodies
    }

    pub fn body(&self, i: usize) -> &RigidBody {
        &self.bodies[i]
    }

    /// Mutable access; the body is woken and its cached geometry dropped.
    pub fn body_mut(&mut self, i: usize) -> &mut RigidBody {
        self.parts[i] = None;
        let b = &mut self.bodies[i];
        b.sleeping = false;
        b.still_steps = 0;
        b
    }

    pub fn floor_z(&self) -> f64 {
        self.floor_z
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.params.dt
    }

    pub fn gripper(&self) -> Option<&Gripper> {
        self.gripper.as_ref()
    }

    /// Places an open gripper with finger bottoms at height `z`.
    pub fn add_gripper(&mut self, params: GripperParams, x: f64, y: f64, yaw: f64, z: f64, width: f64) -> Result<()> {
        if width < params.min_width || width > params.max_width {
            return Err(PhysicsError::StrokeViolation(format!(
                "opening {width:.4} m outside [{:.4}, {:.4}] m",
                params.min_width, params.max_width
            )));
        }
        if self.gripper.is_some() {
            return Err(PhysicsError::InvalidParameter("world already has a gripper".into()));
        }
        let mut g = Gripper::new(params, x, y, yaw, z, width, [0, 0]);
        let half = g.finger_half_extents();
        for k in 0..2 {
            let shape = Shape::from_boxes(&[FittedBox::axis_aligned(Point3::origin(), half)]);
            g.fingers[k] = self.add_body(RigidBody::fixed(BodyKind::Kinematic, shape, g.finger_pose(k)));
        }
        self.gripper = Some(g);
        Ok(())
    }

    pub fn command_gripper(&mut self, action: GripperAction) -> Result<()> {
        let floor = self.floor_z;
        match self.gripper.as_mut() {
            Some(g) => g.command(action, floor),
            None => Err(PhysicsError::InvalidParameter("world has no gripper".into())),
        }
    }

    /// Steps until the gripper finishes its command or `max_steps` elapse.
    pub fn run_gripper(&mut self, max_steps: usize) -> Result<bool> {
        for _ in 0..max_steps {
            if !self.gripper.as_ref().is_some_and(Gripper::is_moving) {
                return Ok(true);
            }
            self.step()?;
        }
        Ok(!self.gripper.as_ref().is_some_and(Gripper::is_moving))
    }

    /// True when every dynamic body is slower than both thresholds.
    pub fn is_quiescent(&self, v_eps: f64, w_eps: f64) -> bool {
        self.bodies
            .iter()
            .filter(|b| b.kind == BodyKind::Dynamic)
            .all(|b| b.linear_velocity.norm() < v_eps && b.angular_velocity.norm() < w_eps)
    }

    pub fn kinetic_energy(&self) -> f64 {
        self.bodies.iter().map(RigidBody::kinetic_energy).sum()
    }

    pub fn snapshot(&self) -> WorldSnapshot {
        let v = |x: &Vector3| [x.x, x.y, x.z];
        WorldSnapshot {
            steps: self.steps,
            bodies: self
                .bodies
                .iter()
                .map(|b| {
                    let q = b.orientation.quaternion();
                    BodySnapshot {
                        kind: b.kind,
                        position: v(&b.position.coords),
                        orientation: [q.w, q.i, q.j, q.k],
                        linear_velocity: v(&b.linear_velocity),
                        angular_velocity: v(&b.angular_velocity),
                        sleeping: b.sleeping,
                    }
                })
                .collect(),
        }
    }

    /// Touching or overlapping box pairs, penetration ≥ 0.
    pub fn detect_contacts(&mut self) -> Vec<ContactPoint> {
        let pairs: Vec<(usize, usize)> = (0..self.bodies.len())
            .flat_map(|i| (i + 1..self.bodies.len()).map(move |j| (i, j)))
            .filter(|&(i, j)| self.bodies[i].kind == BodyKind::Dynamic || self.bodies[j].kind == BodyKind::Dynamic)
            .collect();
        let mut out = Vec::new();
        for (i, j) in pairs {
            self.pair_contacts(i, j, 0.0, &mut out);
        }
        out.retain(|c| c.depth >= 0.0);
        out
    }

    fn world_parts(&mut self, i: usize) -> Arc<Vec<Polytope>> {
        if let Some(p) = &self.parts[i] {
            return p.clone();
        }
        let p = Arc::new(self.bodies[i].world_parts());
        self.parts[i] = Some(p.clone());
        p
    }

    fn pair_contacts(&mut self, i: usize, j: usize, margin: f64, out: &mut Vec<ContactPoint>) {
        let (bi, bj) = (&self.bodies[i], &self.bodies[j]);
        if (bi.position - bj.position).norm() > bi.shape.radius + bj.shape.radius + margin {
            return;
        }
        let pi = self.world_parts(i);
        let pj = self.world_parts(j);
        for (ka, a) in pi.iter().enumerate() {
            for (kb, b) in pj.iter().enumerate() {
                if let Some(m) = collide(a, b, margin) {
                    out.extend(m.points.iter().map(|p| ContactPoint {
                        point: p.point,
                        normal: m.normal,
                        depth: p.depth,
                        bodies: (i, j),
                        parts: (ka, kb),
                    }));
                }
            }
        }
    }

    fn moving_kinematic(b: &RigidBody) -> bool {
        b.kind == BodyKind::Kinematic && (b.linear_velocity.norm() > 0.0 || b.angular_velocity.norm() > 0.0)
    }

    /// Contacts for the solver, waking sleeping bodies hit by fast movers.
    fn solver_contacts(&mut self) -> Vec<ContactPoint> {
        let dt = self.params.dt;
        let n = self.bodies.len();
        loop {
            let mut out = Vec::new();
            let mut woke = false;
            for i in 0..n {
                for j in i + 1..n {
                    let (bi, bj) = (&self.bodies[i], &self.bodies[j]);
                    let active = bi.is_active() || bj.is_active();
                    let waker = |s: &RigidBody, o: &RigidBody| {
                        s.kind == BodyKind::Dynamic
                            && s.sleeping
                            && ((o.is_active() && o.max_point_speed() > self.params.wake_speed) || Self::moving_kinematic(o))
                    };
                    let wake_i = waker(bi, bj);
                    let wake_j = waker(bj, bi);
                    let finger_static = (bi.kind == BodyKind::Kinematic && bj.kind == BodyKind::Static)
                        || (bj.kind == BodyKind::Kinematic && bi.kind == BodyKind::Static);
                    if !active && !wake_i && !wake_j && !finger_static {
                        continue;
                    }
                    let margin = 1e-3f64.max((bi.max_point_speed() + bj.max_point_speed()) * dt);
                    let before = out.len();
                    self.pair_contacts(i, j, margin, &mut out);
                    if out.len() > before && (wake_i || wake_j) {
                        for k in [i, j] {
                            if self.bodies[k].sleeping {
                                self.bodies[k].sleeping = false;
                                self.bodies[k].still_steps = 0;
                                woke = true;
                            }
                        }
                    }
                }
            }
            if !woke {
                return out;
            }
        }
    }

    /// Advances the world by one time step.
    pub fn step(&mut self) -> Result<()> {
        let dt = self.params.dt;
        let gravity = Vector3::from(self.params.gravity);

        let mut gripper_motion = (0.0, 0.0);
        if let Some(g) = self.gripper.as_mut() {
            if g.is_moving() {
                gripper_motion = g.plan(dt);
            }
            let (dz, dw) = gripper_motion;
            for k in 0..2 {
                let v = g.finger_velocity(k, dz, dw, dt);
                self.bodies[g.fingers[k]].linear_velocity = v;
            }
        }

        let damping = 1.0 / (1.0 + dt * self.params.angular_damping);
        for b in self.bodies.iter_mut().filter(|b| b.is_active()) {
            b.linear_velocity += gravity * dt;
            b.angular_velocity *= damping;
        }

        let contacts = self.solver_contacts();
        let mut constraints = self.build_constraints(&contacts);
        self.solve(&mut constraints);

        self.warm.clear();
        for c in &constraints {
            self.warm.entry(c.key).or_default().push(Cached {
                local: c.local,
                jn: c.jn,
                jt: c.jt,
            });
        }

        self.integrate()?;

        if let Some(g) = self.gripper.as_mut() {
            let mut impulse = [0.0; 2];
            for c in &constraints {
                if let Some(k) = c.finger {
                    impulse[k] += c.jn;
                }
            }
            let touching_static = contacts.iter().any(|c| {
                let (a, b) = c.bodies;
                c.depth > self.params.slop
                    && (g.fingers.contains(&a) && self.bodies[b].kind == BodyKind::Static
                        || g.fingers.contains(&b) && self.bodies[a].kind == BodyKind::Static)
            });
            if g.feedback(impulse, touching_static, dt) {
                let (dz, dw) = gripper_motion;
                g.advance(dz, dw);
            }
            for k in 0..2 {
                let pose = g.finger_pose(k);
                let f = g.fingers[k];
                self.bodies[f].position = Point3::from(pose.translation.vector);
                self.bodies[f].orientation = pose.rotation;
                self.bodies[f].linear_velocity = Vector3::zeros();
                self.parts[f] = None;
            }
        }
        self.steps += 1;
        Ok(())
    }

    fn build_constraints(&self, contacts: &[ContactPoint]) -> Vec<Constraint> {
        let p = &self.params;
        let dt = p.dt;
        let finger_of = |i: usize| self.gripper.as_ref().and_then(|g| g.fingers.iter().position(|&f| f == i));
        let holding = self.gripper.as_ref().is_some_and(|g| g.holding);
        let mut per_finger = [0usize; 2];
        let mut out = Vec::with_capacity(contacts.len());
        for c in contacts {
            let (a, b) = c.bodies;
            let (ba, bb) = (&self.bodies[a], &self.bodies[b]);
            if !ba.is_active() && !bb.is_active() {
                continue;
            }
            let ia = ba.world_inv_inertia();
            let ib = bb.world_inv_inertia();
            let (ma, mb) = (ba.effective_inv_mass(), bb.effective_inv_mass());
            let ra = c.point - ba.position;
            let rb = c.point - bb.position;
            let k_along = |d: &Vector3| {
                let ta = ra.cross(d);
                let tb = rb.cross(d);
                ma + mb + ta.dot(&(ia * ta)) + tb.dot(&(ib * tb))
            };
            let n = c.normal;
            let t = tangents(&n);
            let vn = (bb.velocity_at(&c.point) - ba.velocity_at(&c.point)).dot(&n);
            let mut bias = if c.depth > p.slop {
                p.baumgarte / dt * (c.depth - p.slop)
            } else if c.depth < 0.0 {
                c.depth / dt
            } else {
                0.0
            };
            if vn < -1.0 {
                bias = bias.max(-p.restitution * vn);
            }
            let finger = finger_of(a).or(finger_of(b));
            if let Some(k) = finger {
                per_finger[k] += 1;
            }
            let local = ba.orientation.inverse_transform_vector(&ra);
            let key = (a, b, c.parts.0, c.parts.1);
            let (jn, jt) = self
                .warm
                .get(&key)
                .and_then(|list| {
                    list.iter()
                        .map(|w| ((w.local - local).norm(), w))
                        .filter(|(d, _)| *d < 2e-3)
                        .min_by(|x, y| x.0.total_cmp(&y.0))
                        .map(|(_, w)| (w.jn, w.jt))
                })
                .unwrap_or((0.0, [0.0; 2]));
            out.push(Constraint {
                a,
                b,
                key,
                local,
                n,
                t,
                ra,
                rb,
                mass_n: 1.0 / k_along(&n),
                mass_t: [1.0 / k_along(&t[0]), 1.0 / k_along(&t[1])],
                bias,
                max_jn: f64::INFINITY,
                jn,
                jt,
                finger,
            });
        }
        if holding {
            let g = self.gripper.as_ref().expect("holding implies a gripper");
            for c in out.iter_mut() {
                if let Some(k) = c.finger {
                    c.bias = c.bias.max(g.params.squeeze_speed);
                    c.max_jn = g.params.hold_force * dt / per_finger[k] as f64;
                    c.jn = c.jn.min(c.max_jn);
                }
            }
        }
        out
    }

    fn solve(&mut self, cs: &mut [Constraint]) {
        let mut v: Vec<Vector3> = self.bodies.iter().map(|b| b.linear_velocity).collect();
        let mut w: Vec<Vector3> = self.bodies.iter().map(|b| b.angular_velocity).collect();
        let inv_m: Vec<f64> = self.bodies.iter().map(RigidBody::effective_inv_mass).collect();
        let inv_i: Vec<Matrix3<f64>> = self.bodies.iter().map(RigidBody::world_inv_inertia).collect();
        let mu = self.params.friction;

        let apply = |v: &mut [Vector3], w: &mut [Vector3], c: &Constraint, imp: Vector3| {
            v[c.a] -= imp * inv_m[c.a];
            w[c.a] -= inv_i[c.a] * c.ra.cross(&imp);
            v[c.b] += imp * inv_m[c.b];
            w[c.b] += inv_i[c.b] * c.rb.cross(&imp);
        };
        for c in cs.iter() {
            let imp = c.n * c.jn + c.t[0] * c.jt[0] + c.t[1] * c.jt[1];
            apply(&mut v, &mut w, c, imp);
        }
        for _ in 0..self.params.iterations {
            for c in cs.iter_mut() {
                let rel = |v: &[Vector3], w: &[Vector3]| (v[c.b] + w[c.b].cross(&c.rb)) - (v[c.a] + w[c.a].cross(&c.ra));
                for k in 0..2 {
                    let dv = rel(&v, &w);
                    let lambda = -dv.dot(&c.t[k]) * c.mass_t[k];
                    let limit = mu * c.jn;
                    let old = c.jt[k];
                    c.jt[k] = (old + lambda).clamp(-limit, limit);
                    let imp = c.t[k] * (c.jt[k] - old);
                    apply(&mut v, &mut w, c, imp);
                }
                let dv = rel(&v, &w);
                let lambda = (c.bias - dv.dot(&c.n)) * c.mass_n;
                let old = c.jn;
                c.jn = (old + lambda).clamp(0.0, c.max_jn);
                let imp = c.n * (c.jn - old);
                apply(&mut v, &mut w, c, imp);
            }
        }
        for (i, b) in self.bodies.iter_mut().enumerate() {
            if b.is_active() {
                b.linear_velocity = v[i];
                b.angular_velocity = w[i];
            }
        }
    }

    fn integrate(&mut self) -> Result<()> {
        let p = &self.params;
        let dt = p.dt;
        for (i, b) in self.bodies.iter_mut().enumerate() {
            if b.kind == BodyKind::Static || b.sleeping {
                continue;
            }
            if b.kind == BodyKind::Kinematic && !Self::moving_kinematic(b) {
                continue;
            }
            if b.kind == BodyKind::Dynamic {
                let speed = b.max_point_speed();
                if !(speed <= p.max_speed) {
                    return Err(PhysicsError::Unstable { body: i, speed });
                }
            }
            b.position += b.linear_velocity * dt;
            let w = b.angular_velocity;
            let q = b.orientation.into_inner();
            let dq = Quaternion::new(0.0, w.x, w.y, w.z) * q * (0.5 * dt);
            b.orientation = UnitQuaternion::new_normalize(q + dq);
            self.parts[i] = None;

            if b.kind == BodyKind::Dynamic {
                if b.linear_velocity.norm() < p.sleep_linear && b.angular_velocity.norm() < p.sleep_angular {
                    b.still_steps += 1;
                    if b.still_steps >= p.sleep_steps {
                        b.sleeping = true;
                        b.linear_velocity = Vector3::zeros();
                        b.angular_velocity = Vector3::zeros();
                    }
                } else {
                    b.still_steps = 0;
                }
            }
        }
        Ok(())
    }
}

/// Orthonormal tangents of a unit normal, chosen deterministically.
fn tangents(n: &Vector3) -> [Vector3; 2] {
    let helper = if n.x.abs() < 0.57 { Vector3::x() } else { Vector3::y() };
    let t1 = n.cross(&helper).normalize();
    [t1, n.cross(&t1)]
}
