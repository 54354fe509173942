//! Convex polytopes and their compounds.

use nalgebra::{Matrix3, UnitQuaternion};

use crate::geometry::{face_plane, ConvexPart, FittedBox, Point3, Vector3};

#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    /// Counter-clockwise around `normal`.
    pub vertices: Vec<usize>,
    pub normal: Vector3,
    pub offset: f64,
}

/// A convex polytope in its owner's body frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    pub vertices: Vec<Point3>,
    pub faces: Vec<Face>,
    /// Faces whose normals are distinct up to sign; these are the SAT face axes.
    pub axis_faces: Vec<usize>,
    /// Edge directions, distinct up to sign, each with the edges sharing it.
    pub edge_dirs: Vec<(Vector3, Vec<(usize, usize)>)>,
    pub center: Point3,
    pub radius: f64,
}

const PARALLEL_EPS: f64 = 1e-6;

impl Polytope {
    pub fn from_box(b: &FittedBox) -> Self {
        let c = b.corners();
        // corner index bits: x = 1, y = 2, z = 4
        let quads: [([usize; 4], usize, f64); 6] = [
            ([0, 4, 6, 2], 0, -1.0),
            ([1, 3, 7, 5], 0, 1.0),
            ([0, 1, 5, 4], 1, -1.0),
            ([2, 6, 7, 3], 1, 1.0),
            ([0, 2, 3, 1], 2, -1.0),
            ([4, 5, 7, 6], 2, 1.0),
        ];
        let faces = quads
            .iter()
            .map(|&(q, axis, sign)| {
                let mut local = Vector3::zeros();
                local[axis] = sign;
                let normal = b.orientation * local;
                Face {
                    vertices: q.to_vec(),
                    normal,
                    offset: normal.dot(&c[q[0]].coords),
                }
            })
            .collect();
        Self::assemble(c.to_vec(), faces)
    }

    pub fn from_part(part: &ConvexPart) -> Self {
        let centroid = part.centroid();
        let faces = part
            .faces
            .iter()
            .map(|f| {
                let (n, d) = face_plane(&part.vertices, f);
                if n.dot(&centroid.coords) > d {
                    // inward winding: flip to keep counter-clockwise about the outward normal
                    let mut rev = f.clone();
                    rev.reverse();
                    Face {
                        vertices: rev,
                        normal: -n,
                        offset: -d,
                    }
                } else {
                    Face {
                        vertices: f.clone(),
                        normal: n,
                        offset: d,
                    }
                }
            })
            .collect();
        Self::assemble(part.vertices.clone(), faces)
    }

    fn assemble(vertices: Vec<Point3>, faces: Vec<Face>) -> Self {
        let mut axis_faces: Vec<usize> = Vec::new();
        for (i, f) in faces.iter().enumerate() {
            if !axis_faces
                .iter()
                .any(|&j| f.normal.cross(&faces[j].normal).norm() < PARALLEL_EPS)
            {
                axis_faces.push(i);
            }
        }
        let mut edge_dirs: Vec<(Vector3, Vec<(usize, usize)>)> = Vec::new();
        for f in &faces {
            for k in 0..f.vertices.len() {
                let (a, b) = (f.vertices[k], f.vertices[(k + 1) % f.vertices.len()]);
                if a > b {
                    // every edge appears once per adjacent face; keep one orientation
                    continue;
                }
                let d = (vertices[b] - vertices[a]).normalize();
                match edge_dirs.iter_mut().find(|(e, _)| e.cross(&d).norm() < PARALLEL_EPS) {
                    Some((_, list)) => list.push((a, b)),
                    None => edge_dirs.push((d, vec![(a, b)])),
                }
            }
        }
        let center = Point3::from(vertices.iter().fold(Vector3::zeros(), |s, p| s + p.coords) / vertices.len() as f64);
        let radius = vertices.iter().map(|p| (p - center).norm()).fold(0.0, f64::max);
        Self {
            vertices,
            faces,
            axis_faces,
            edge_dirs,
            center,
            radius,
        }
    }

    /// Rigidly moves the polytope by `p ↦ rotation · p + translation`.
    pub fn transformed(&self, rotation: &UnitQuaternion<f64>, translation: &Vector3) -> Self {
        let map = |p: &Point3| Point3::from(rotation * p.coords + translation);
        Self {
            vertices: self.vertices.iter().map(map).collect(),
            faces: self
                .faces
                .iter()
                .map(|f| {
                    let normal = rotation * f.normal;
                    Face {
                        vertices: f.vertices.clone(),
                        normal,
                        offset: f.offset + normal.dot(translation),
                    }
                })
                .collect(),
            axis_faces: self.axis_faces.clone(),
            edge_dirs: self
                .edge_dirs
                .iter()
                .map(|(d, list)| (rotation * d, list.clone()))
                .collect(),
            center: map(&self.center),
            radius: self.radius,
        }
    }

    /// Volume, centroid, and second moment `∫ x xᵀ dV` about the origin.
    pub fn moments(&self) -> (f64, Point3, Matrix3<f64>) {
        let o = self.center.coords;
        let mut volume = 0.0;
        let mut first = Vector3::zeros();
        let mut second = Matrix3::zeros();
        for f in &self.faces {
            let p0 = self.vertices[f.vertices[0]].coords;
            for k in 1..f.vertices.len() - 1 {
                let p1 = self.vertices[f.vertices[k]].coords;
                let p2 = self.vertices[f.vertices[k + 1]].coords;
                let v = (p0 - o).dot(&(p1 - o).cross(&(p2 - o))) / 6.0;
                let s = o + p0 + p1 + p2;
                let mut pp = s * s.transpose();
                for p in [o, p0, p1, p2] {
                    pp += p * p.transpose();
                }
                volume += v;
                first += v * s / 4.0;
                second += pp * (v / 20.0);
            }
        }
        (volume, Point3::from(first / volume), second)
    }

    /// Index of the vertex with the largest projection on `dir`.
    pub fn support(&self, dir: &Vector3) -> usize {
        let mut best = 0;
        let mut best_d = f64::NEG_INFINITY;
        for (i, p) in self.vertices.iter().enumerate() {
            let d = p.coords.dot(dir);
            if d > best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    pub fn project(&self, axis: &Vector3) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in &self.vertices {
            let d = p.coords.dot(axis);
            lo = lo.min(d);
            hi = hi.max(d);
        }
        (lo, hi)
    }
}

/// Mass, center of mass, and inertia about the center of mass for uniform density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassProperties {
    pub mass: f64,
    pub center: Point3,
    pub inertia: Matrix3<f64>,
}

impl MassProperties {
    /// Sums the parts' contributions; overlapping parts are counted twice.
    pub fn of_parts(parts: &[Polytope], density: f64) -> Self {
        let mut volume = 0.0;
        let mut first = Vector3::zeros();
        let mut second = Matrix3::zeros();
        for p in parts {
            let (v, c, s) = p.moments();
            volume += v;
            first += v * c.coords;
            second += s;
        }
        let mass = density * volume;
        let c = first / volume;
        // shift the second moment to the center of mass
        let central = (second - volume * c * c.transpose()) * density;
        let inertia = Matrix3::identity() * central.trace() - central;
        Self {
            mass,
            center: Point3::from(c),
            inertia,
        }
    }
}
