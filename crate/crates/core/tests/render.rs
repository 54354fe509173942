use std::f64::consts::PI;

use binpick::geometry::{build_approx_model, decompose, primitives, Point3, TriMesh, Vector3};
use binpick::render::{self, render_depth, render_gripper_segment, CameraConfig, DepthImage, PixelGrid};
use nalgebra::{Isometry3, Translation3, UnitQuaternion};
use proptest::prelude::*;

fn hex_prism() -> TriMesh {
    primitives::prism_mesh("hex", &primitives::regular_polygon(6, 0.02), 0.02)
}

#[test]
fn empty_tray_is_floor_everywhere() {
    let cam = CameraConfig::default();
    let img = render_depth(std::iter::empty(), &cam);
    assert!(img.values.iter().all(|&v| v == cam.floor_depth() as f32));
}

/// Independent oracle: a pixel center inside the box footprint sees its top face.
#[test]
fn box_height_map_matches_analytic_map() {
    let cam = CameraConfig {
        floor_z: 0.0,
        sensor_height: 0.3,
        ..CameraConfig::default()
    };
    let (hx, hy, h) = (0.031, 0.017, 0.023);
    let (cx, cy) = (0.0113, -0.0207);
    let m = primitives::box_mesh("b", Vector3::new(hx, hy, h / 2.0));
    let img = render_depth([(&m, Isometry3::translation(cx, cy, h / 2.0))], &cam);
    let grid = cam.grid();
    let mut inside = 0;
    for r in 0..grid.height {
        for c in 0..grid.width {
            let (x, y) = grid.pixel_center(r, c);
            let expect = if (x - cx).abs() < hx && (y - cy).abs() < hy {
                inside += 1;
                cam.sensor_height - cam.floor_z - h
            } else {
                cam.sensor_height - cam.floor_z
            };
            assert!((img.get(r, c) as f64 - expect).abs() < 1e-6, "pixel ({r}, {c})");
        }
    }
    assert!(inside > 100);
}

#[test]
fn taller_box_wins_where_boxes_overlap() {
    let cam = CameraConfig::default();
    let low = primitives::box_mesh("low", Vector3::new(0.03, 0.03, 0.01));
    let high = primitives::box_mesh("high", Vector3::new(0.01, 0.01, 0.02));
    let img = render_depth(
        [(&low, Isometry3::translation(0.0, 0.0, 0.01)), (&high, Isometry3::translation(0.0, 0.0, 0.02))],
        &cam,
    );
    let (r, c) = cam.grid().pixel_of(0.0, 0.0).unwrap();
    assert!((img.get(r, c) as f64 - (0.3 - 0.04)).abs() < 1e-6);
    let (r, c) = cam.grid().pixel_of(0.02, 0.02).unwrap();
    assert!((img.get(r, c) as f64 - (0.3 - 0.02)).abs() < 1e-6);
}

#[test]
fn exact_and_box_renders_of_hex_prism_differ() {
    let cam = CameraConfig::default();
    let mesh = hex_prism();
    let model = build_approx_model(&mesh, 1).unwrap();
    let boxes = model.to_mesh();
    let pose = Isometry3::identity();
    let exact = render_depth([(&mesh, pose)], &cam);
    let approx = render_depth([(&boxes, pose)], &cam);
    let floor = cam.floor_depth() as f32;
    let object = exact.values.iter().zip(&approx.values).filter(|(a, b)| **a < floor || **b < floor).count();
    let differ = exact.values.iter().zip(&approx.values).filter(|(a, b)| (**a - **b).abs() > 1e-6).count();
    assert!(object > 0);
    assert!(differ as f64 > 0.01 * object as f64, "{differ} of {object} object pixels differ");
}

#[test]
fn rotated_mesh_render_uses_the_pose() {
    let cam = CameraConfig::default();
    let m = primitives::box_mesh("b", Vector3::new(0.04, 0.005, 0.005));
    let rot = Isometry3::from_parts(Translation3::new(0.0, 0.0, 0.005), UnitQuaternion::from_axis_angle(&Vector3::z_axis(), PI / 2.0));
    let img = render_depth([(&m, rot)], &cam);
    let g = cam.grid();
    let (r, c) = g.pixel_of(0.0, 0.03).unwrap();
    assert!(img.height_at(r, c) > 0.009);
    let (r, c) = g.pixel_of(0.03, 0.0).unwrap();
    assert_eq!(img.height_at(r, c), 0.0);
}

fn columns_and_rows(img: &render::SegmentImage) -> (usize, usize) {
    let cols = (0..img.width).filter(|&c| (0..img.height).any(|r| img.get(r, c) != 0)).count();
    let rows = (0..img.height).filter(|&r| (0..img.width).any(|c| img.get(r, c) != 0)).count();
    (cols, rows)
}

#[test]
fn segment_lengths_match_opening_width() {
    let cam = CameraConfig::default();
    let g = cam.grid();
    let w = 0.04;
    let n = (w / g.pixel_size).round() as usize;
    let h = render_gripper_segment(0.0, 0.0, 0.0, w, 3, &g).unwrap();
    assert_eq!(columns_and_rows(&h), (n, 3));
    assert_eq!(h.count(), 3 * n);
    let v = render_gripper_segment(0.0, 0.0, PI / 2.0, w, 3, &g).unwrap();
    assert_eq!(columns_and_rows(&v), (3, n));
    let back = render_gripper_segment(0.0, 0.0, PI, w, 3, &g).unwrap();
    assert_eq!(back, h);
}

#[test]
fn segment_outside_the_image_is_rejected() {
    let g = CameraConfig::default().grid();
    assert!(matches!(
        render_gripper_segment(0.2, 0.0, 0.0, 0.04, 3, &g),
        Err(render::RenderError::OutOfBounds { .. })
    ));
}

#[test]
fn height_map_is_normalized() {
    let cam = CameraConfig::default();
    let m = primitives::box_mesh("b", Vector3::new(0.01, 0.01, 0.1));
    let img = render_depth([(&m, Isometry3::translation(0.0, 0.0, 0.1))], &cam);
    let hm = img.height_map(0.1);
    assert!(hm.iter().all(|v| (0.0..=1.0).contains(v)));
    let (r, c) = cam.grid().pixel_of(0.0, 0.0).unwrap();
    assert_eq!(hm[r * cam.width + c], 1.0);
    assert_eq!(hm[0], 0.0);
}

#[test]
fn pgm16_round_trips_depth() {
    let cam = CameraConfig::default();
    let m = primitives::box_mesh("b", Vector3::new(0.02, 0.02, 0.01));
    let img = render_depth([(&m, Isometry3::translation(0.0, 0.0, 0.01))], &cam);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.pgm");
    render::write_pgm16(&path, &img).unwrap();
    let (w, h, px) = render::read_pgm16(&path).unwrap();
    assert_eq!((w, h), (cam.width, cam.height));
    for (q, v) in px.iter().zip(&img.values) {
        assert!((*q as f64 / 65535.0 * cam.sensor_height - *v as f64).abs() <= cam.sensor_height / 65535.0);
    }
}

#[test]
fn decomposed_parts_render_inside_the_exact_silhouette() {
    let cam = CameraConfig::default();
    let mesh = primitives::prism_mesh("l", &primitives::l_outline(0.05, 0.03, 0.015), 0.015);
    let parts = decompose(&mesh, 2).unwrap();
    let meshes: Vec<TriMesh> = parts.iter().map(|p| p.to_mesh("p")).collect();
    let exact = render_depth([(&mesh, Isometry3::identity())], &cam);
    let hulls = render_depth(meshes.iter().map(|m| (m, Isometry3::identity())), &cam);
    for (a, b) in exact.values.iter().zip(&hulls.values) {
        assert!((a - b).abs() < 1e-6);
    }
}

fn small_box(cx: f64, cy: f64, yaw: f64, h: f64) -> (TriMesh, Isometry3<f64>) {
    let m = primitives::box_mesh("b", Vector3::new(0.015, 0.008, h / 2.0));
    let pose = Isometry3::from_parts(Translation3::new(cx, cy, h / 2.0), UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw));
    (m, pose)
}

fn image_with(grid_side: usize, values: Vec<f32>) -> DepthImage {
    DepthImage {
        grid: PixelGrid::centered(grid_side, grid_side, 0.001, 0.0, 0.0),
        sensor_height: 0.3,
        floor_depth: 0.3,
        values,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn adding_a_body_never_increases_depth(
        a in (-0.06f64..0.06, -0.06f64..0.06, 0.0f64..3.2, 0.005f64..0.04),
        b in (-0.06f64..0.06, -0.06f64..0.06, 0.0f64..3.2, 0.005f64..0.04),
    ) {
        let cam = CameraConfig { width: 48, height: 48, pixel_size: 0.2 / 48.0, ..CameraConfig::default() };
        let first = small_box(a.0, a.1, a.2, a.3);
        let second = small_box(b.0, b.1, b.2, b.3);
        let one = render_depth([(&first.0, first.1)], &cam);
        let two = render_depth([(&first.0, first.1), (&second.0, second.1)], &cam);
        for (x, y) in one.values.iter().zip(&two.values) {
            prop_assert!(y <= x);
        }
        prop_assert!(two.values.iter().all(|v| (0.0..=0.3).contains(v)));
    }

    #[test]
    fn crop_of_crop_is_idempotent(
        side in 1usize..40,
        row in -10i64..50,
        col in -10i64..50,
        seed in any::<u32>(),
    ) {
        let n = 40;
        let values: Vec<f32> = (0..n * n).map(|i| ((i as u32).wrapping_mul(2654435761).wrapping_add(seed) % 1000) as f32 * 1e-4).collect();
        let img = image_with(n, values);
        let once = img.crop(row, col, side);
        let twice = once.crop(side as i64 / 2, side as i64 / 2, side);
        prop_assert_eq!(&twice, &once);
    }

    #[test]
    fn segment_is_symmetric_under_half_turn(theta in 0.0f64..PI, w in 0.005f64..0.08) {
        let g = CameraConfig::default().grid();
        let a = render_gripper_segment(0.003, -0.004, theta, w, 3, &g).unwrap();
        let b = render_gripper_segment(0.003, -0.004, theta + PI, w, 3, &g).unwrap();
        prop_assert_eq!(a.count(), b.count());
        let c = render_gripper_segment(0.003, -0.004, theta, w, 1, &g).unwrap();
        prop_assert!(c.count() <= ((w / g.pixel_size).round() as usize).max(1));
    }
}

#[test]
fn vertices_of_the_render_grid_align_with_the_tray() {
    let g = CameraConfig::default().grid();
    let corner = Point3::new(g.origin[0], g.origin[1], 0.0);
    assert!((corner - Point3::new(-0.1, -0.1, 0.0)).norm() < 1e-15);
}
