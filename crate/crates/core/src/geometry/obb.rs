use nalgebra::{Matrix3, Rotation3, SymmetricEigen, UnitQuaternion};

use super::{primitives, ConvexPart, Point3, TriMesh, Vector3};

/// Oriented box: `center + orientation · (±half_extents)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FittedBox {
    pub center: Point3,
    pub half_extents: Vector3,
    pub orientation: UnitQuaternion<f64>,
}

impl FittedBox {
    pub fn axis_aligned(center: Point3, half_extents: Vector3) -> Self {
        Self {
            center,
            half_extents,
            orientation: UnitQuaternion::identity(),
        }
    }

    pub fn volume(&self) -> f64 {
        8.0 * self.half_extents.x * self.half_extents.y * self.half_extents.z
    }

    pub fn to_local(&self, p: &Point3) -> Vector3 {
        self.orientation.inverse_transform_vector(&(p - self.center))
    }

    pub fn contains(&self, p: &Point3, tol: f64) -> bool {
        let l = self.to_local(p);
        (0..3).all(|i| l[i].abs() <= self.half_extents[i] + tol)
    }

    pub fn corners(&self) -> [Point3; 8] {
        let h = self.half_extents;
        std::array::from_fn(|i| {
            let l = Vector3::new(
                if i & 1 == 0 { -h.x } else { h.x },
                if i & 2 == 0 { -h.y } else { h.y },
                if i & 4 == 0 { -h.z } else { h.z },
            );
            self.center + self.orientation * l
        })
    }

    pub fn to_mesh(&self, name: &str) -> TriMesh {
        primitives::box_mesh(name, self.half_extents).map_vertices(|v| self.center + self.orientation * v.coords)
    }
}

/// Encloses a convex part in an oriented box.
///
/// Candidate frames are the covariance principal axes, the world axes, and one
/// frame per (hull face, face edge) pair; the tightest candidate wins. The
/// principal axes alone are ill-defined for parts with isotropic covariance
/// such as cubes and regular prisms, which the face frames handle exactly.
pub fn fit_box(part: &ConvexPart) -> FittedBox {
    let pts = &part.vertices;
    let mut frames: Vec<Matrix3<f64>> = Vec::new();

    let mean = pts.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / pts.len() as f64;
    let mut cov = Matrix3::zeros();
    for p in pts {
        let d = p.coords - mean;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov / pts.len() as f64);
    frames.push(eig.eigenvectors);
    frames.push(Matrix3::identity());
    for face in &part.faces {
        let (n, _) = super::hull::face_plane(pts, face);
        for k in 0..face.len() {
            let e = pts[face[(k + 1) % face.len()]] - pts[face[k]];
            let e = e - n * n.dot(&e);
            let len = e.norm();
            if len < 1e-12 {
                continue;
            }
            let e = e / len;
            frames.push(Matrix3::from_columns(&[n, e, n.cross(&e)]));
        }
    }

    let mut best: Option<(f64, Matrix3<f64>, Vector3, Vector3)> = None;
    for mut r in frames {
        if r.determinant() < 0.0 {
            r.set_column(2, &(-r.column(2)));
        }
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for p in pts {
            let l = r.transpose() * p.coords;
            lo = lo.inf(&l);
            hi = hi.sup(&l);
        }
        let ext = hi - lo;
        let vol = ext.x * ext.y * ext.z;
        if best.as_ref().is_none_or(|b| vol < b.0 * (1.0 - 1e-12)) {
            best = Some((vol, r, lo, hi));
        }
    }
    let (_, r, lo, hi) = best.expect("a convex part has vertices");
    let orientation = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r));
    let orientation = UnitQuaternion::new_normalize(orientation.into_inner());
    // corners are recomputed through the quaternion, so re-measure extents in its frame
    let mut lo2 = Vector3::repeat(f64::INFINITY);
    let mut hi2 = Vector3::repeat(f64::NEG_INFINITY);
    for p in pts {
        let l = orientation.inverse_transform_vector(&p.coords);
        lo2 = lo2.inf(&l);
        hi2 = hi2.sup(&l);
    }
    debug_assert!(((hi2 - lo2) - (hi - lo)).norm() < 1e-9);
    FittedBox {
        center: Point3::from(orientation * ((lo2 + hi2) / 2.0)),
        half_extents: (hi2 - lo2) / 2.0,
        orientation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cube(rot: UnitQuaternion<f64>) -> ConvexPart {
        let pts: Vec<Point3> = FittedBox::axis_aligned(Point3::origin(), Vector3::repeat(0.5))
            .corners()
            .iter()
            .map(|p| Point3::from(rot * p.coords))
            .collect();
        ConvexPart::from_points(&pts).unwrap()
    }

    #[test]
    fn box_of_a_box_is_itself() {
        let b = fit_box(&cube(UnitQuaternion::identity()));
        assert!((b.half_extents - Vector3::repeat(0.5)).norm() < 1e-12);
        assert!(b.center.coords.norm() < 1e-12);
        assert!((b.orientation.norm() - 1.0).abs() < 1e-9);
    }

    /// Brute-force minimum over yaw angles sampled every 0.25°.
    fn brute_force_min_volume(part: &ConvexPart) -> f64 {
        (0..360)
            .map(|k| {
                let r = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), k as f64 * 0.25 * PI / 180.0);
                let mut lo = Vector3::repeat(f64::INFINITY);
                let mut hi = Vector3::repeat(f64::NEG_INFINITY);
                for p in &part.vertices {
                    let l = r.inverse_transform_vector(&p.coords);
                    lo = lo.inf(&l);
                    hi = hi.sup(&l);
                }
                let e = hi - lo;
                e.x * e.y * e.z
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn rotated_cube_matches_brute_force() {
        let part = cube(UnitQuaternion::from_axis_angle(&Vector3::z_axis(), PI / 6.0));
        let oracle = brute_force_min_volume(&part);
        assert!((oracle - 1.0).abs() < 0.01, "oracle {oracle}");
        let b = fit_box(&part);
        assert!((b.volume() - 1.0).abs() < 0.01, "fitted {}", b.volume());
        assert!(b.volume() <= oracle * 1.01);
        for v in &part.vertices {
            assert!(b.contains(v, 1e-6));
        }
    }

    #[test]
    fn tetrahedron_is_contained() {
        let a = 1.0;
        let pts = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(a, 0.0, 0.0),
            Point3::new(a / 2.0, a * 3f64.sqrt() / 2.0, 0.0),
            Point3::new(a / 2.0, a * 3f64.sqrt() / 6.0, a * (2.0f64 / 3.0).sqrt()),
        ];
        let part = ConvexPart::from_points(&pts).unwrap();
        let hull_volume = 2f64.sqrt() / 12.0 * a * a * a;
        assert!((hull_volume - 0.1179).abs() < 1e-4);
        let b = fit_box(&part);
        assert!(b.volume() >= hull_volume);
        for v in &pts {
            assert!(b.contains(v, 1e-6));
        }
        assert!(b.half_extents.iter().all(|&h| h > 0.0));
    }
}
