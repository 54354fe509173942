//! Separating-axis tests and contact manifolds between convex polytopes.

use super::shape::Polytope;
use crate::geometry::{Point3, Vector3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldPoint {
    /// Midway between the two surfaces.
    pub point: Point3,
    /// Penetration depth; negative values are separations within the margin.
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifold {
    /// Unit normal pointing from the first shape toward the second.
    pub normal: Vector3,
    pub points: Vec<ManifoldPoint>,
}

#[derive(Debug, Clone, Copy)]
enum Axis {
    FaceA,
    FaceB,
    Edge { da: usize, db: usize },
}

const MAX_POINTS: usize = 4;

/// Contact manifold between `a` and `b` (both in world frame), or `None` when a
/// separating axis shows a gap wider than `margin`.
///
/// Covers every face normal of either polytope and every cross product of
/// their edge directions; for two boxes that is the usual 15 axes. Face axes
/// are preferred unless an edge axis is clearly shallower.
pub fn collide(a: &Polytope, b: &Polytope, margin: f64) -> Option<Manifold> {
    if (a.center - b.center).norm() > a.radius + b.radius + margin {
        return None;
    }
    let mut best_face: Option<(f64, Vector3, Axis)> = None;
    let test = |axis: Vector3, tag: Axis, best: &mut Option<(f64, Vector3, Axis)>| -> bool {
        let (amin, amax) = a.project(&axis);
        let (bmin, bmax) = b.project(&axis);
        let (pen, n) = if amax - bmin <= bmax - amin {
            (amax - bmin, axis)
        } else {
            (bmax - amin, -axis)
        };
        if pen < -margin {
            return false;
        }
        if best.as_ref().is_none_or(|(p, _, _)| pen < *p) {
            *best = Some((pen, n, tag));
        }
        true
    };
    for &f in &a.axis_faces {
        if !test(a.faces[f].normal, Axis::FaceA, &mut best_face) {
            return None;
        }
    }
    for &f in &b.axis_faces {
        if !test(b.faces[f].normal, Axis::FaceB, &mut best_face) {
            return None;
        }
    }
    let mut best_edge: Option<(f64, Vector3, Axis)> = None;
    for (i, (da, _)) in a.edge_dirs.iter().enumerate() {
        for (j, (db, _)) in b.edge_dirs.iter().enumerate() {
            let c = da.cross(db);
            let len = c.norm();
            if len < 1e-6 {
                continue;
            }
            if !test(c / len, Axis::Edge { da: i, db: j }, &mut best_edge) {
                return None;
            }
        }
    }
    let (face_pen, face_n, face_axis) = best_face?;
    match best_edge {
        // separations: -pen; an edge axis must beat the face axis by a margin
        Some((edge_pen, edge_n, Axis::Edge { da, db })) if -edge_pen > 0.95 * -face_pen + 1e-5 => {
            edge_contact(a, b, da, db, edge_n, edge_pen)
        }
        _ => match face_axis {
            Axis::FaceA => face_contact(a, b, face_n, margin),
            Axis::FaceB => face_contact(b, a, -face_n, margin).map(|m| Manifold {
                normal: -m.normal,
                points: m.points,
            }),
            Axis::Edge { .. } => unreachable!("face axes only"),
        },
    }
}

/// Clips the incident face of `inc` against the reference face of `reference`
/// most aligned with `n` (pointing from `reference` to `inc`).
fn face_contact(reference: &Polytope, inc: &Polytope, n: Vector3, margin: f64) -> Option<Manifold> {
    let rf = (0..reference.faces.len())
        .max_by(|&i, &j| reference.faces[i].normal.dot(&n).total_cmp(&reference.faces[j].normal.dot(&n)))?;
    let if_ = (0..inc.faces.len())
        .min_by(|&i, &j| inc.faces[i].normal.dot(&n).total_cmp(&inc.faces[j].normal.dot(&n)))?;
    let ref_face = &reference.faces[rf];
    let nf = ref_face.normal;
    let mut poly: Vec<Point3> = inc.faces[if_].vertices.iter().map(|&v| inc.vertices[v]).collect();
    let rv = &ref_face.vertices;
    for k in 0..rv.len() {
        let p = reference.vertices[rv[k]];
        let q = reference.vertices[rv[(k + 1) % rv.len()]];
        let side = (q - p).cross(&nf);
        let len = side.norm();
        if len < 1e-12 {
            continue;
        }
        let side = side / len;
        poly = clip(&poly, &side, side.dot(&p.coords));
        if poly.is_empty() {
            return None;
        }
    }
    let points: Vec<ManifoldPoint> = poly
        .iter()
        .filter_map(|p| {
            let sep = nf.dot(&p.coords) - ref_face.offset;
            (sep <= margin).then(|| ManifoldPoint {
                point: p - nf * (sep / 2.0),
                depth: -sep,
            })
        })
        .collect();
    if points.is_empty() {
        return None;
    }
    Some(Manifold {
        normal: nf,
        points: reduce(points, &nf),
    })
}

fn clip(poly: &[Point3], n: &Vector3, d: f64) -> Vec<Point3> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    for k in 0..poly.len() {
        let a = poly[k];
        let b = poly[(k + 1) % poly.len()];
        let (da, db) = (n.dot(&a.coords) - d, n.dot(&b.coords) - d);
        if da <= 0.0 {
            out.push(a);
        }
        if (da <= 0.0) != (db <= 0.0) {
            out.push(a + (b - a) * (da / (da - db)));
        }
    }
    out
}

/// Keeps at most four points: the deepest, the one farthest from it, and the
/// two spanning the largest areas on either side of that segment.
fn reduce(points: Vec<ManifoldPoint>, n: &Vector3) -> Vec<ManifoldPoint> {
    if points.len() <= MAX_POINTS {
        return points;
    }
    let argmax = |f: &dyn Fn(&ManifoldPoint) -> f64| {
        let mut best = 0;
        for i in 1..points.len() {
            if f(&points[i]) > f(&points[best]) {
                best = i;
            }
        }
        best
    };
    let i0 = argmax(&|p| p.depth);
    let p0 = points[i0].point;
    let i1 = argmax(&|p| (p.point - p0).norm_squared());
    let p1 = points[i1].point;
    let area = |p: &ManifoldPoint| (p1 - p0).cross(&(p.point - p0)).dot(n);
    let i2 = argmax(&|p| area(p));
    let i3 = argmax(&|p| -area(p));
    let mut keep = vec![i0, i1, i2, i3];
    keep.sort_unstable();
    keep.dedup();
    keep.into_iter().map(|i| points[i]).collect()
}

fn edge_contact(a: &Polytope, b: &Polytope, da: usize, db: usize, n: Vector3, pen: f64) -> Option<Manifold> {
    let extreme = |poly: &Polytope, edges: &[(usize, usize)], sign: f64| {
        edges
            .iter()
            .copied()
            .max_by(|&(p, q), &(r, s)| {
                let m1 = (poly.vertices[p].coords + poly.vertices[q].coords).dot(&n) * sign;
                let m2 = (poly.vertices[r].coords + poly.vertices[s].coords).dot(&n) * sign;
                m1.total_cmp(&m2)
            })
            .map(|(p, q)| (poly.vertices[p], poly.vertices[q]))
    };
    let (a0, a1) = extreme(a, &a.edge_dirs[da].1, 1.0)?;
    let (b0, b1) = extreme(b, &b.edge_dirs[db].1, -1.0)?;
    let (pa, pb) = closest_points(a0, a1, b0, b1);
    Some(Manifold {
        normal: n,
        points: vec![ManifoldPoint {
            point: Point3::from((pa.coords + pb.coords) / 2.0),
            depth: pen,
        }],
    })
}

/// Closest points between segments `p0 p1` and `q0 q1`.
pub fn closest_points(p0: Point3, p1: Point3, q0: Point3, q1: Point3) -> (Point3, Point3) {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let r = p0 - q0;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    let (s, t);
    if a <= 1e-18 && e <= 1e-18 {
        return (p0, q0);
    }
    if a <= 1e-18 {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= 1e-18 {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let s0 = if denom > 1e-18 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            } else {
                t = t0;
                s = s0;
            }
        }
    }
    (p0 + d1 * s, q0 + d2 * t)
}
