use binpick::geometry::{FittedBox, Point3, Vector3};
use binpick::physics::{
    BodyKind, GripperAction, GripperParams, PhysicsError, PhysicsParams, RigidBody, Shape, TrayConfig, World,
};
use nalgebra::{Isometry3, UnitQuaternion};

fn cube_shape(half: f64) -> Shape {
    Shape::from_boxes(&[FittedBox::axis_aligned(Point3::origin(), Vector3::repeat(half))])
}

fn tray_world(params: PhysicsParams) -> World {
    let mut w = World::new(params).unwrap();
    w.add_tray(&TrayConfig::default());
    w
}

fn max_penetration(w: &mut World) -> f64 {
    w.detect_contacts().iter().map(|c| c.depth).fold(0.0, f64::max)
}

#[test]
fn free_fall_matches_closed_form() {
    let mut w = World::new(PhysicsParams::default()).unwrap();
    let b = w.add_body(RigidBody::dynamic(&cube_shape(0.01), 2700.0, Isometry3::translation(0.0, 0.0, 0.2)).unwrap());
    for _ in 0..60 {
        w.step().unwrap();
    }
    let t = 60.0 * w.params.dt;
    let drop = 0.2 - w.body(b).position.z;
    let exact = 0.5 * 9.81 * t * t;
    assert!((t - 0.25).abs() < 1e-12);
    // semi-implicit Euler overshoots by (n + 1) / n
    assert!((drop - exact).abs() / exact < 0.02, "drop {drop} vs {exact}");
    assert!((drop / exact - 61.0 / 60.0).abs() < 1e-9);
}

#[test]
fn resting_box_stays_put() {
    let mut w = tray_world(PhysicsParams::default());
    let b = w.add_body(RigidBody::dynamic(&cube_shape(0.015), 2700.0, Isometry3::translation(0.0, 0.0, 0.015)).unwrap());
    for _ in 0..1000 {
        w.step().unwrap();
    }
    let body = w.body(b).clone();
    assert!(body.linear_velocity.norm() <= 1e-3);
    assert!(max_penetration(&mut w) <= w.params.slop);
    assert!((body.position.z - 0.015).abs() <= 2.0 * w.params.slop);
}

#[test]
fn stacked_boxes_settle_in_order() {
    let mut w = tray_world(PhysicsParams::default());
    let lo = w.add_body(RigidBody::dynamic(&cube_shape(0.015), 2700.0, Isometry3::translation(0.0, 0.0, 0.0152)).unwrap());
    let hi = w.add_body(RigidBody::dynamic(&cube_shape(0.01), 2700.0, Isometry3::translation(0.002, 0.001, 0.045)).unwrap());
    assert!(!w.is_quiescent(1e-3, 1e-2) || w.steps() == 0);
    for _ in 0..2000 {
        w.step().unwrap();
    }
    assert!(w.body(hi).position.z > w.body(lo).position.z);
    assert!((w.body(hi).position.z - 0.04).abs() < 1e-3);
    assert!(w.is_quiescent(1e-3, 1e-2));
    assert!(w.kinetic_energy() <= 1e-6);
    assert!(max_penetration(&mut w) <= 2.0 * w.params.slop);
}

#[test]
fn frictionless_collision_conserves_momentum() {
    let params = PhysicsParams {
        gravity: [0.0; 3],
        friction: 0.0,
        ..PhysicsParams::default()
    };
    let mut w = World::new(params).unwrap();
    let a = w.add_body(RigidBody::dynamic(&cube_shape(0.01), 2700.0, Isometry3::translation(-0.03, 0.0, 0.0)).unwrap());
    let rot = Isometry3::from_parts(
        nalgebra::Translation3::new(0.03, 0.004, 0.002),
        UnitQuaternion::from_euler_angles(0.2, 0.1, 0.3),
    );
    let b = w.add_body(RigidBody::dynamic(&cube_shape(0.012), 2700.0, rot).unwrap());
    w.body_mut(a).linear_velocity = Vector3::new(0.5, 0.0, 0.0);
    w.body_mut(b).linear_velocity = Vector3::new(-0.3, 0.05, 0.0);
    let momentum = |w: &World| w.body(a).linear_velocity * w.body(a).mass + w.body(b).linear_velocity * w.body(b).mass;
    let p0 = momentum(&w);
    let mut touched = false;
    for _ in 0..120 {
        w.step().unwrap();
        touched |= !w.detect_contacts().is_empty();
    }
    assert!(touched);
    assert!((momentum(&w) - p0).norm() <= 1e-6, "{} vs {}", momentum(&w), p0);
}

#[test]
fn empty_world_is_quiescent_and_fresh_drop_is_not() {
    let w = tray_world(PhysicsParams::default());
    assert!(w.is_quiescent(1e-3, 1e-2));
    let mut w = tray_world(PhysicsParams::default());
    w.add_body(RigidBody::dynamic(&cube_shape(0.01), 2700.0, Isometry3::translation(0.0, 0.0, 0.1)).unwrap());
    for _ in 0..10 {
        w.step().unwrap();
    }
    assert!(!w.is_quiescent(1e-3, 1e-2));
}

#[test]
fn speed_cap_reports_instability() {
    let params = PhysicsParams {
        max_speed: 1.0,
        ..PhysicsParams::default()
    };
    let mut w = World::new(params).unwrap();
    let b = w.add_body(RigidBody::dynamic(&cube_shape(0.01), 2700.0, Isometry3::identity()).unwrap());
    w.body_mut(b).linear_velocity = Vector3::new(5.0, 0.0, 0.0);
    assert!(matches!(w.step(), Err(PhysicsError::Unstable { .. })));
}

#[test]
fn invalid_parameters_are_rejected() {
    for p in [
        PhysicsParams { dt: 0.0, ..Default::default() },
        PhysicsParams { friction: -0.1, ..Default::default() },
        PhysicsParams { restitution: 1.5, ..Default::default() },
    ] {
        assert!(matches!(World::new(p), Err(PhysicsError::InvalidParameter(_))));
    }
}

#[test]
fn detect_contacts_examples() {
    let mut w = World::new(PhysicsParams::default()).unwrap();
    let a = w.add_body(RigidBody::dynamic(&cube_shape(0.5), 1.0, Isometry3::identity()).unwrap());
    let b = w.add_body(RigidBody::dynamic(&cube_shape(0.5), 1.0, Isometry3::translation(2.0, 0.0, 0.0)).unwrap());
    assert!(w.detect_contacts().is_empty());
    w.body_mut(b).position = Point3::new(0.9, 0.0, 0.0);
    let cs = w.detect_contacts();
    assert!(!cs.is_empty());
    for c in &cs {
        assert_eq!(c.bodies, (a, b));
        assert!((c.depth - 0.1).abs() < 1e-9);
        assert!((c.normal.x.abs() - 1.0).abs() < 1e-12);
    }
}

fn gripper_world() -> World {
    let mut w = tray_world(PhysicsParams::default());
    w.add_gripper(GripperParams::default(), 0.0, 0.0, 0.0, 0.001, 0.06).unwrap();
    w
}

#[test]
fn closing_on_air_reaches_minimum_stroke() {
    let mut w = gripper_world();
    let min = w.gripper().unwrap().params.min_width;
    w.command_gripper(GripperAction::Close(min)).unwrap();
    assert!(w.run_gripper(10_000).unwrap());
    let g = w.gripper().unwrap();
    assert_eq!(g.width, min);
    assert!(!g.holding);
}

#[test]
fn closing_on_a_box_stops_at_its_width() {
    let mut w = gripper_world();
    w.add_body(RigidBody::dynamic(&cube_shape(0.015), 2700.0, Isometry3::translation(0.0, 0.0, 0.015)).unwrap());
    for _ in 0..100 {
        w.step().unwrap();
    }
    w.command_gripper(GripperAction::Close(0.0)).unwrap();
    assert!(w.run_gripper(10_000).unwrap());
    let g = w.gripper().unwrap();
    assert!(g.holding);
    assert!((g.width - 0.03).abs() <= w.params.slop, "width {}", g.width);
}

#[test]
fn descending_below_the_floor_is_a_stroke_violation() {
    let mut w = gripper_world();
    assert!(matches!(
        w.command_gripper(GripperAction::Descend(-0.01)),
        Err(PhysicsError::StrokeViolation(_))
    ));
}

#[test]
fn gripper_picks_a_box_and_stays_symmetric() {
    let mut w = tray_world(PhysicsParams::default());
    let b = w.add_body(RigidBody::dynamic(&cube_shape(0.015), 2700.0, Isometry3::translation(0.0, 0.0, 0.015)).unwrap());
    w.add_gripper(GripperParams::default(), 0.0, 0.0, 0.3, 0.04, 0.06).unwrap();
    let check = |w: &World| {
        let g = w.gripper().unwrap();
        let a = w.body(g.fingers[0]).position;
        let c = w.body(g.fingers[1]).position;
        let mid = (a.coords + c.coords) / 2.0;
        assert!((mid.xy() - nalgebra::Vector2::new(g.x, g.y)).norm() < 1e-12);
        assert!((a.z - c.z).abs() < 1e-12);
    };
    w.command_gripper(GripperAction::Descend(0.01)).unwrap();
    while w.gripper().unwrap().is_moving() {
        w.step().unwrap();
        check(&w);
    }
    assert!(!w.gripper().unwrap().blocked);
    w.command_gripper(GripperAction::Close(0.0)).unwrap();
    while w.gripper().unwrap().is_moving() {
        w.step().unwrap();
        check(&w);
    }
    assert!(w.gripper().unwrap().holding);
    w.command_gripper(GripperAction::Ascend(0.13)).unwrap();
    while w.gripper().unwrap().is_moving() {
        w.step().unwrap();
        check(&w);
    }
    assert!(w.body(b).position.z > 0.06, "z = {}", w.body(b).position.z);
}

#[test]
fn descent_onto_a_box_is_blocked() {
    let mut w = tray_world(PhysicsParams::default());
    w.add_body(RigidBody::dynamic(&cube_shape(0.015), 2700.0, Isometry3::translation(0.0, 0.0, 0.015)).unwrap());
    // narrow opening: the fingers land on the box top
    w.add_gripper(GripperParams::default(), 0.0, 0.0, 0.0, 0.04, 0.01).unwrap();
    w.command_gripper(GripperAction::Descend(0.005)).unwrap();
    assert!(w.run_gripper(10_000).unwrap());
    let g = w.gripper().unwrap();
    assert!(g.blocked);
    assert!(g.z > 0.029 && g.z < 0.031, "z = {}", g.z);
}

fn pile(seed: u64) -> World {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut w = tray_world(PhysicsParams::default());
    for k in 0..4 {
        let pose = Isometry3::from_parts(
            nalgebra::Translation3::new(rng.gen_range(-0.03..0.03), rng.gen_range(-0.03..0.03), 0.03 + 0.03 * k as f64),
            UnitQuaternion::from_euler_angles(rng.gen_range(0.0..6.3), rng.gen_range(0.0..6.3), rng.gen_range(0.0..6.3)),
        );
        w.add_body(RigidBody::dynamic(&cube_shape(0.012), 2700.0, pose).unwrap());
    }
    for _ in 0..600 {
        w.step().unwrap();
    }
    w
}

#[test]
fn seeded_piles_are_bit_reproducible() {
    let a = pile(7).snapshot();
    let b = pile(7).snapshot();
    assert_eq!(a, b);
    let text = serde_json::to_string(&a).unwrap();
    let back: binpick::physics::WorldSnapshot = serde_json::from_str(&text).unwrap();
    assert_eq!(back, a);
    assert_ne!(pile(8).snapshot(), a);
}

#[test]
fn settled_pile_is_quiescent_and_inside_the_tray() {
    let mut w = pile(3);
    for _ in 0..1500 {
        w.step().unwrap();
        if w.is_quiescent(1e-3, 1e-2) {
            break;
        }
    }
    assert!(w.is_quiescent(1e-3, 1e-2));
    assert!(w.kinetic_energy() <= 1e-6);
    assert!(max_penetration(&mut w) <= 2.0 * w.params.slop, "{}", max_penetration(&mut w));
    for b in w.bodies().iter().filter(|b| b.kind == BodyKind::Dynamic) {
        assert!(b.position.x.abs() < 0.1 && b.position.y.abs() < 0.1 && b.position.z > 0.0);
    }
}
