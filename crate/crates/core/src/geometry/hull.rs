use std::cmp::Ordering;
use std::collections::HashMap;

use super::{GeometryError, Point3, Result, TriMesh, Vector3};

/// Convex polytope: extreme points and outward, counter-clockwise face polygons.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPart {
    pub vertices: Vec<Point3>,
    pub faces: Vec<Vec<usize>>,
}

impl ConvexPart {
    /// Convex hull of a point cloud. Fails if the points do not span a volume.
    pub fn from_points(points: &[Point3]) -> Result<Self> {
        let scale = diameter(points).max(1e-6);
        let eps = 1e-9 * scale;
        let tris = hull_triangles(points, eps)?;
        Ok(merge_faces(points, &tris, eps))
    }

    /// Outward unit normal and offset of every face: `n·x = d` on the face.
    pub fn planes(&self) -> Vec<(Vector3, f64)> {
        self.faces.iter().map(|f| face_plane(&self.vertices, f)).collect()
    }

    /// Largest signed distance of `p` to a face plane; ≤ 0 inside.
    pub fn signed_distance(&self, p: &Point3) -> f64 {
        self.planes()
            .iter()
            .map(|(n, d)| n.dot(&p.coords) - d)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, p: &Point3, tol: f64) -> bool {
        self.signed_distance(p) <= tol
    }

    pub fn volume(&self) -> f64 {
        self.fan_triangles()
            .map(|[a, b, c]| a.coords.dot(&b.coords.cross(&c.coords)) / 6.0)
            .sum()
    }

    pub fn centroid(&self) -> Point3 {
        let mut acc = Vector3::zeros();
        let mut vol = 0.0;
        for [a, b, c] in self.fan_triangles() {
            let v = a.coords.dot(&b.coords.cross(&c.coords)) / 6.0;
            acc += v * (a.coords + b.coords + c.coords) / 4.0;
            vol += v;
        }
        Point3::from(acc / vol)
    }

    /// Every vertex lies on its own hull: inside all face planes and on at least one.
    pub fn is_convex(&self, eps: f64) -> bool {
        let planes = self.planes();
        self.vertices.iter().all(|v| {
            let dists: Vec<f64> = planes.iter().map(|(n, d)| n.dot(&v.coords) - d).collect();
            dists.iter().all(|&s| s <= eps) && dists.iter().any(|&s| s.abs() <= eps)
        })
    }

    /// Undirected edges as sorted vertex index pairs, deduplicated, in face order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = Vec::new();
        for f in &self.faces {
            for k in 0..f.len() {
                let (a, b) = (f[k], f[(k + 1) % f.len()]);
                let e = (a.min(b), a.max(b));
                if !out.contains(&e) {
                    out.push(e);
                }
            }
        }
        out
    }

    pub fn to_mesh(&self, name: &str) -> TriMesh {
        let mut triangles = Vec::new();
        for f in &self.faces {
            for k in 1..f.len() - 1 {
                triangles.push([f[0], f[k], f[k + 1]]);
            }
        }
        TriMesh {
            name: name.into(),
            vertices: self.vertices.clone(),
            triangles,
        }
    }

    fn fan_triangles(&self) -> impl Iterator<Item = [Point3; 3]> + '_ {
        self.faces.iter().flat_map(move |f| {
            (1..f.len() - 1).map(move |k| [self.vertices[f[0]], self.vertices[f[k]], self.vertices[f[k + 1]]])
        })
    }
}

/// Newell normal of a polygon, normalized, with the plane offset at its centroid.
pub(crate) fn face_plane(vertices: &[Point3], face: &[usize]) -> (Vector3, f64) {
    let mut n = Vector3::zeros();
    let mut c = Vector3::zeros();
    for k in 0..face.len() {
        let a = vertices[face[k]];
        let b = vertices[face[(k + 1) % face.len()]];
        n.x += (a.y - b.y) * (a.z + b.z);
        n.y += (a.z - b.z) * (a.x + b.x);
        n.z += (a.x - b.x) * (a.y + b.y);
        c += a.coords;
    }
    let n = n.normalize();
    let c = c / face.len() as f64;
    (n, n.dot(&c))
}

fn diameter(points: &[Point3]) -> f64 {
    let b = super::Aabb::from_points(points);
    if b.is_empty() {
        0.0
    } else {
        b.extent().norm()
    }
}

struct Tri {
    v: [usize; 3],
    n: Vector3,
    d: f64,
    alive: bool,
}

impl Tri {
    fn new(points: &[Point3], v: [usize; 3]) -> Self {
        let (a, b, c) = (points[v[0]], points[v[1]], points[v[2]]);
        let n = (b - a).cross(&(c - a)).normalize();
        Tri {
            v,
            n,
            d: n.dot(&a.coords),
            alive: true,
        }
    }

    fn dist(&self, p: &Point3) -> f64 {
        self.n.dot(&p.coords) - self.d
    }
}

/// Incremental 3D convex hull; returns outward-wound triangles over `points`.
fn hull_triangles(points: &[Point3], eps: f64) -> Result<Vec<[usize; 3]>> {
    let degenerate = || GeometryError::Degenerate(format!("{} points do not span a volume", points.len()));
    if points.len() < 4 {
        return Err(degenerate());
    }
    let i0 = (0..points.len())
        .min_by(|&a, &b| points[a].x.partial_cmp(&points[b].x).unwrap_or(Ordering::Equal))
        .unwrap();
    let farthest = |score: &dyn Fn(&Point3) -> f64| {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, p) in points.iter().enumerate() {
            let s = score(p);
            if s > best.1 {
                best = (i, s);
            }
        }
        best
    };
    let (i1, d1) = farthest(&|p| (p - points[i0]).norm());
    if d1 <= eps {
        return Err(degenerate());
    }
    let axis = (points[i1] - points[i0]) / d1;
    let (i2, d2) = farthest(&|p| {
        let r = p - points[i0];
        (r - axis * r.dot(&axis)).norm()
    });
    if d2 <= eps {
        return Err(degenerate());
    }
    let normal = (points[i1] - points[i0]).cross(&(points[i2] - points[i0])).normalize();
    let (i3, d3) = farthest(&|p| normal.dot(&(p - points[i0])).abs());
    if d3 <= eps {
        return Err(degenerate());
    }

    let interior = Point3::from((points[i0].coords + points[i1].coords + points[i2].coords + points[i3].coords) / 4.0);
    let mut tris: Vec<Tri> = Vec::new();
    let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
    let add = |tris: &mut Vec<Tri>, edges: &mut HashMap<(usize, usize), usize>, mut v: [usize; 3]| {
        let mut t = Tri::new(points, v);
        if t.dist(&interior) > 0.0 {
            v.swap(1, 2);
            t = Tri::new(points, v);
        }
        let id = tris.len();
        for k in 0..3 {
            edges.insert((v[k], v[(k + 1) % 3]), id);
        }
        tris.push(t);
    };
    for v in [[i0, i1, i2], [i0, i1, i3], [i0, i2, i3], [i1, i2, i3]] {
        add(&mut tris, &mut edges, v);
    }

    let mut order: Vec<usize> = (0..points.len()).filter(|i| ![i0, i1, i2, i3].contains(i)).collect();
    order.sort_by(|&a, &b| {
        let da = (points[a] - interior).norm();
        let db = (points[b] - interior).norm();
        db.partial_cmp(&da).unwrap_or(Ordering::Equal).then(a.cmp(&b))
    });

    for &pi in &order {
        let p = points[pi];
        let visible: Vec<usize> = (0..tris.len()).filter(|&t| tris[t].alive && tris[t].dist(&p) > eps).collect();
        if visible.is_empty() {
            continue;
        }
        let mut horizon = Vec::new();
        for &t in &visible {
            let v = tris[t].v;
            for k in 0..3 {
                let (a, b) = (v[k], v[(k + 1) % 3]);
                let twin = edges.get(&(b, a)).copied();
                let twin_visible = twin.is_some_and(|o| visible.contains(&o));
                if !twin_visible {
                    horizon.push((a, b));
                }
            }
        }
        for &t in &visible {
            tris[t].alive = false;
            let v = tris[t].v;
            for k in 0..3 {
                let e = (v[k], v[(k + 1) % 3]);
                if edges.get(&e) == Some(&t) {
                    edges.remove(&e);
                }
            }
        }
        for (a, b) in horizon {
            let id = tris.len();
            let t = Tri::new(points, [a, b, pi]);
            for e in [(a, b), (b, pi), (pi, a)] {
                edges.insert(e, id);
            }
            tris.push(t);
        }
    }
    Ok(tris.into_iter().filter(|t| t.alive).map(|t| t.v).collect())
}

/// Groups coplanar hull triangles into convex polygons and drops non-extreme points.
fn merge_faces(points: &[Point3], tris: &[[usize; 3]], eps: f64) -> ConvexPart {
    let planes: Vec<(Vector3, f64)> = tris
        .iter()
        .map(|t| {
            let n = (points[t[1]] - points[t[0]]).cross(&(points[t[2]] - points[t[0]])).normalize();
            (n, n.dot(&points[t[0]].coords))
        })
        .collect();
    let mut edge_owner: HashMap<(usize, usize), usize> = HashMap::new();
    for (i, t) in tris.iter().enumerate() {
        for k in 0..3 {
            edge_owner.insert((t[k], t[(k + 1) % 3]), i);
        }
    }
    let mut group = vec![usize::MAX; tris.len()];
    let mut polygons: Vec<Vec<usize>> = Vec::new();
    for seed in 0..tris.len() {
        if group[seed] != usize::MAX {
            continue;
        }
        let gid = polygons.len();
        let (n, d) = planes[seed];
        let mut stack = vec![seed];
        let mut members = Vec::new();
        group[seed] = gid;
        while let Some(t) = stack.pop() {
            members.push(t);
            let v = tris[t];
            for k in 0..3 {
                if let Some(&o) = edge_owner.get(&(v[(k + 1) % 3], v[k])) {
                    let coplanar = n.dot(&planes[o].0) > 0.0
                        && tris[o].iter().all(|&i| (n.dot(&points[i].coords) - d).abs() <= 4.0 * eps);
                    if group[o] == usize::MAX && coplanar {
                        group[o] = gid;
                        stack.push(o);
                    }
                }
            }
        }
        let mut ids: Vec<usize> = members.iter().flat_map(|&t| tris[t]).collect();
        ids.sort_unstable();
        ids.dedup();
        polygons.push(polygon_hull(points, &ids, &n, eps));
    }

    let mut remap: HashMap<usize, usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut used: Vec<usize> = polygons.iter().flatten().copied().collect();
    used.sort_unstable();
    used.dedup();
    for i in used {
        remap.insert(i, vertices.len());
        vertices.push(points[i]);
    }
    let faces = polygons
        .into_iter()
        .filter(|p| p.len() >= 3)
        .map(|p| p.into_iter().map(|i| remap[&i]).collect())
        .collect();
    ConvexPart { vertices, faces }
}

/// Counter-clockwise (about `n`) convex polygon of the given coplanar points, collinear points removed.
fn polygon_hull(points: &[Point3], ids: &[usize], n: &Vector3, eps: f64) -> Vec<usize> {
    let u = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let u = (u - n * n.dot(&u)).normalize();
    let v = n.cross(&u);
    let mut pts: Vec<(f64, f64, usize)> = ids
        .iter()
        .map(|&i| (points[i].coords.dot(&u), points[i].coords.dot(&v), i))
        .collect();
    pts.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(Ordering::Equal)
            .then(a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal))
    });
    let cross = |o: &(f64, f64, usize), a: &(f64, f64, usize), b: &(f64, f64, usize)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    // eps = 1e-9 · scale, so this is 1e-9 · scale² (the cross product is an area)
    let tol = eps * eps * 1e9;
    let mut hull: Vec<(f64, f64, usize)> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64, usize)>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for p in iter {
            while hull.len() >= start + 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= tol {
                hull.pop();
            }
            hull.push(*p);
        }
        hull.pop();
    }
    hull.into_iter().map(|p| p.2).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube_points(s: f64) -> Vec<Point3> {
        let mut pts = Vec::new();
        for i in 0..8 {
            pts.push(Point3::new(
                if i & 1 == 0 { 0.0 } else { s },
                if i & 2 == 0 { 0.0 } else { s },
                if i & 4 == 0 { 0.0 } else { s },
            ));
        }
        pts
    }

    #[test]
    fn cube_hull_has_six_quads() {
        let mut pts = cube_points(1.0);
        // interior, face-interior and edge-midpoint points must all be dropped
        pts.push(Point3::new(0.5, 0.5, 0.5));
        pts.push(Point3::new(0.5, 0.5, 1.0));
        pts.push(Point3::new(0.5, 0.0, 0.0));
        let hull = ConvexPart::from_points(&pts).unwrap();
        assert_eq!(hull.vertices.len(), 8);
        assert_eq!(hull.faces.len(), 6);
        assert!(hull.faces.iter().all(|f| f.len() == 4));
        assert!((hull.volume() - 1.0).abs() < 1e-12);
        assert_eq!(hull.edges().len(), 12);
        assert!(hull.is_convex(super::super::CONVEXITY_EPS));
        let c = hull.centroid();
        assert!((c - Point3::new(0.5, 0.5, 0.5)).norm() < 1e-12);
    }

    #[test]
    fn tetrahedron_volume() {
        let a = 1.0;
        let pts = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(a, 0.0, 0.0),
            Point3::new(a / 2.0, a * 3f64.sqrt() / 2.0, 0.0),
            Point3::new(a / 2.0, a * 3f64.sqrt() / 6.0, a * (2.0f64 / 3.0).sqrt()),
        ];
        let hull = ConvexPart::from_points(&pts).unwrap();
        assert_eq!(hull.faces.len(), 4);
        assert!((hull.volume() - 2f64.sqrt() / 12.0).abs() < 1e-12);
    }

    #[test]
    fn coplanar_points_are_degenerate() {
        let pts: Vec<Point3> = (0..10).map(|i| Point3::new(i as f64, (i * i) as f64, 0.0)).collect();
        assert!(matches!(ConvexPart::from_points(&pts), Err(GeometryError::Degenerate(_))));
    }

    #[test]
    fn sphere_samples_are_all_inside() {
        let mut pts = Vec::new();
        for i in 0..20 {
            for j in 0..10 {
                let th = i as f64 * 0.314159;
                let ph = 0.1 + j as f64 * 0.3;
                pts.push(Point3::new(th.cos() * ph.sin(), th.sin() * ph.sin(), ph.cos()));
            }
        }
        let hull = ConvexPart::from_points(&pts).unwrap();
        for p in &pts {
            assert!(hull.contains(p, 1e-9));
        }
        assert!(hull.is_convex(1e-7));
    }
}
