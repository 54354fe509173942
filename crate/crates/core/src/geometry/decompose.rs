//! Approximate convex decomposition by recursive axis-aligned plane splitting.
//!
//! A piece is the solid clipped to an axis-aligned region. Its concavity is the
//! deepest point of the clipped original surface below the piece's convex hull
//! boundary; cap faces on the cutting planes lie on the hull and never count.
//! The most concave piece is split at the axis-aligned plane that minimizes the
//! combined hull volume of the two halves, until the part budget is spent or
//! every piece is convex within tolerance.

use super::{Aabb, ConvexPart, GeometryError, Point3, Result, TriMesh, CONTAINMENT_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct DecomposeOptions {
    /// Stop once every piece has concavity below this depth, meters.
    pub concavity_tol: f64,
    /// Evenly spaced candidate planes per axis, in addition to vertex coordinates.
    pub uniform_candidates: usize,
    /// Cap on vertex-coordinate candidate planes per axis.
    pub max_vertex_candidates: usize,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self {
            concavity_tol: CONTAINMENT_TOL,
            uniform_candidates: 7,
            max_vertex_candidates: 24,
        }
    }
}

pub fn decompose(mesh: &TriMesh, target_parts: usize) -> Result<Vec<ConvexPart>> {
    decompose_with(mesh, target_parts, &DecomposeOptions::default())
}

struct Piece {
    region: Aabb,
    triangles: Vec<usize>,
    bounds: Aabb,
    hull: ConvexPart,
    concavity: f64,
    splittable: bool,
}

pub fn decompose_with(mesh: &TriMesh, target_parts: usize, opts: &DecomposeOptions) -> Result<Vec<ConvexPart>> {
    if target_parts == 0 {
        return Err(GeometryError::InvalidArgument("target_parts must be at least 1".into()));
    }
    if !mesh.is_closed_manifold() {
        return Err(GeometryError::Decomposition(format!(
            "mesh {:?} is not a closed manifold",
            mesh.name
        )));
    }
    let all: Vec<usize> = (0..mesh.triangles.len()).collect();
    let root = build_piece(mesh, &all, mesh.aabb())?
        .ok_or_else(|| GeometryError::Decomposition("mesh produced an empty piece".into()))?;
    let mut pieces = vec![root];

    while pieces.len() < target_parts {
        let Some(i) = most_concave(&pieces) else { break };
        if pieces[i].concavity < opts.concavity_tol {
            break;
        }
        match best_split(mesh, &pieces[i], opts)? {
            Some((left, right)) => {
                pieces[i] = left;
                pieces.insert(i + 1, right);
            }
            None => pieces[i].splittable = false,
        }
    }
    Ok(pieces.into_iter().map(|p| p.hull).collect())
}

fn most_concave(pieces: &[Piece]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, p) in pieces.iter().enumerate() {
        if p.splittable && best.is_none_or(|b| p.concavity > pieces[b].concavity) {
            best = Some(i);
        }
    }
    best
}

fn best_split(mesh: &TriMesh, piece: &Piece, opts: &DecomposeOptions) -> Result<Option<(Piece, Piece)>> {
    let mut best: Option<((f64, f64), Piece, Piece)> = None;
    for axis in 0..3 {
        for s in candidate_planes(mesh, piece, axis, opts) {
            let mut lo_region = piece.region;
            lo_region.max[axis] = s;
            let mut hi_region = piece.region;
            hi_region.min[axis] = s;
            let (Some(a), Some(b)) = (
                build_piece(mesh, &piece.triangles, lo_region).ok().flatten(),
                build_piece(mesh, &piece.triangles, hi_region).ok().flatten(),
            ) else {
                continue;
            };
            // the solid volume is shared between the halves, so hull volume measures the residual
            let score = (a.hull.volume() + b.hull.volume(), a.concavity.max(b.concavity));
            let vol_eps = 1e-9 * piece.hull.volume();
            let better = best.as_ref().is_none_or(|(bs, _, _)| {
                score.0 < bs.0 - vol_eps || (score.0 <= bs.0 + vol_eps && score.1 < bs.1 - 1e-12)
            });
            if better {
                best = Some((score, a, b));
            }
        }
    }
    Ok(best.map(|(_, a, b)| (a, b)))
}

fn candidate_planes(mesh: &TriMesh, piece: &Piece, axis: usize, opts: &DecomposeOptions) -> Vec<f64> {
    let (lo, hi) = (piece.bounds.min[axis], piece.bounds.max[axis]);
    let ext = hi - lo;
    if ext <= 1e-9 {
        return Vec::new();
    }
    let margin = 1e-3 * ext;
    let mut coords: Vec<f64> = piece
        .triangles
        .iter()
        .flat_map(|&t| mesh.triangles[t])
        .map(|v| mesh.vertices[v][axis])
        .filter(|&c| c > lo + margin && c < hi - margin)
        .collect();
    coords.sort_by(f64::total_cmp);
    coords.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    if coords.len() > opts.max_vertex_candidates {
        let n = coords.len();
        let m = opts.max_vertex_candidates;
        coords = (0..m).map(|k| coords[k * n / m]).collect();
    }
    let u = opts.uniform_candidates;
    coords.extend((1..=u).map(|k| lo + ext * k as f64 / (u + 1) as f64));
    coords.sort_by(f64::total_cmp);
    coords.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    coords
}

/// Clips the solid to `region`. `Ok(None)` for an empty intersection; errors on a flat one.
fn build_piece(mesh: &TriMesh, triangles: &[usize], region: Aabb) -> Result<Option<Piece>> {
    let mut points = Vec::new();
    let mut samples = Vec::new();
    let mut kept = Vec::new();
    for &t in triangles {
        let tri = mesh.triangle(t);
        if lies_outside_on_boundary(&tri, &region) {
            continue;
        }
        let poly = clip_to_region(&tri, &region);
        if poly.is_empty() {
            continue;
        }
        kept.push(t);
        // slivers touching the region along an edge belong to a neighbouring piece
        if polygon_area(&poly) <= 1e-12 * mesh.triangle_area(t).max(f64::MIN_POSITIVE) {
            continue;
        }
        points.extend_from_slice(&poly);
        for k in 1..poly.len() - 1 {
            let (a, b, c) = (poly[0], poly[k], poly[k + 1]);
            samples.push(a);
            samples.push(Point3::from((a.coords + b.coords + c.coords) / 3.0));
            samples.push(Point3::from((a.coords + b.coords) / 2.0));
            samples.push(Point3::from((b.coords + c.coords) / 2.0));
            samples.push(Point3::from((c.coords + a.coords) / 2.0));
            samples.push(Point3::from((4.0 * a.coords + b.coords + c.coords) / 6.0));
            samples.push(Point3::from((a.coords + 4.0 * b.coords + c.coords) / 6.0));
            samples.push(Point3::from((a.coords + b.coords + 4.0 * c.coords) / 6.0));
        }
        samples.extend_from_slice(&poly);
    }
    for i in 0..8 {
        let corner = Point3::new(
            if i & 1 == 0 { region.min.x } else { region.max.x },
            if i & 2 == 0 { region.min.y } else { region.max.y },
            if i & 4 == 0 { region.min.z } else { region.max.z },
        );
        // nudge into the region so corners on the surface resolve to the side we keep
        let inward = region.center() - corner;
        if mesh.contains_point(&(corner + inward * 1e-6)) {
            points.push(corner);
        }
    }
    if points.is_empty() {
        return Ok(None);
    }
    let hull = ConvexPart::from_points(&points)?;
    let planes = hull.planes();
    let concavity = samples
        .iter()
        .map(|p| {
            planes
                .iter()
                .map(|(n, d)| d - n.dot(&p.coords))
                .fold(f64::INFINITY, f64::min)
                .max(0.0)
        })
        .fold(0.0, f64::max);
    Ok(Some(Piece {
        region,
        triangles: kept,
        bounds: Aabb::from_points(&points),
        hull,
        concavity,
        splittable: true,
    }))
}

fn polygon_area(poly: &[Point3]) -> f64 {
    let mut n = nalgebra::Vector3::zeros();
    for k in 1..poly.len().saturating_sub(1) {
        n += (poly[k] - poly[0]).cross(&(poly[k + 1] - poly[0]));
    }
    n.norm() / 2.0
}

/// A triangle lying in a face plane of the region whose solid side is outside the region.
fn lies_outside_on_boundary(tri: &[Point3; 3], region: &Aabb) -> bool {
    let n = (tri[1] - tri[0]).cross(&(tri[2] - tri[0]));
    (0..3).any(|axis| {
        let on = |b: f64| tri.iter().all(|p| p[axis] == b);
        (on(region.max[axis]) && n[axis] < 0.0) || (on(region.min[axis]) && n[axis] > 0.0)
    })
}

/// Sutherland–Hodgman clip of a triangle against the six faces of `region`, boundary inclusive.
fn clip_to_region(tri: &[Point3; 3], region: &Aabb) -> Vec<Point3> {
    let tb = Aabb::from_points(tri);
    if !tb.overlaps(region) {
        return Vec::new();
    }
    let mut poly: Vec<Point3> = tri.to_vec();
    for axis in 0..3 {
        for (bound, keep_below) in [(region.max[axis], true), (region.min[axis], false)] {
            if poly.is_empty() {
                return poly;
            }
            let inside = |p: &Point3| if keep_below { p[axis] <= bound } else { p[axis] >= bound };
            let mut out = Vec::with_capacity(poly.len() + 2);
            for k in 0..poly.len() {
                let a = poly[k];
                let b = poly[(k + 1) % poly.len()];
                let (ia, ib) = (inside(&a), inside(&b));
                if ia {
                    out.push(a);
                }
                if ia != ib {
                    let t = (bound - a[axis]) / (b[axis] - a[axis]);
                    let mut p = a + (b - a) * t;
                    p[axis] = bound;
                    out.push(p);
                }
            }
            out.dedup_by(|a, b| (*a - *b).norm() < 1e-15);
            poly = out;
        }
    }
    poly
}
