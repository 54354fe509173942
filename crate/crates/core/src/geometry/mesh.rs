use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{GeometryError, Point3, Result, Vector3};

/// Minimum triangle area accepted by [`TriMesh::new`], m².
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point3>) -> Self {
        let mut b = Self::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn grow(&mut self, p: &Point3) {
        for i in 0..3 {
            self.min[i] = self.min[i].min(p[i]);
            self.max[i] = self.max[i].max(p[i]);
        }
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|i| self.min[i] > self.max[i])
    }

    pub fn extent(&self) -> Vector3 {
        self.max - self.min
    }

    pub fn center(&self) -> Point3 {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn contains(&self, p: &Point3, tol: f64) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] - tol && p[i] <= self.max[i] + tol)
    }

    pub fn overlaps(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] <= other.max[i] && other.min[i] <= self.max[i])
    }
}

/// Closed triangle mesh in meters. Triangles are counter-clockwise seen from outside.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub name: String,
    pub vertices: Vec<Point3>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn new(name: impl Into<String>, vertices: Vec<Point3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let mesh = Self {
            name: name.into(),
            vertices,
            triangles,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    fn validate(&self) -> Result<()> {
        if self.vertices.len() < 4 {
            return Err(GeometryError::Degenerate(format!(
                "mesh has {} vertices, need at least 4",
                self.vertices.len()
            )));
        }
        if self.triangles.is_empty() {
            return Err(GeometryError::Degenerate("mesh has no triangles".into()));
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&i| i >= self.vertices.len()) {
                return Err(GeometryError::Degenerate(format!(
                    "triangle {t} references vertex {bad} of {}",
                    self.vertices.len()
                )));
            }
            let area = self.triangle_area(t);
            if !(area > MIN_TRIANGLE_AREA) {
                return Err(GeometryError::Degenerate(format!("triangle {t} has area {area:e} m²")));
            }
        }
        Ok(())
    }

    pub fn triangle(&self, t: usize) -> [Point3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle(t);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    /// Signed volume by the divergence theorem; positive for outward-oriented closed meshes.
    pub fn volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|&[a, b, c]| {
                let (a, b, c) = (self.vertices[a].coords, self.vertices[b].coords, self.vertices[c].coords);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    /// Volume-weighted centroid of the enclosed solid.
    pub fn centroid(&self) -> Point3 {
        let mut acc = Vector3::zeros();
        let mut vol = 0.0;
        for &[a, b, c] in &self.triangles {
            let (a, b, c) = (self.vertices[a].coords, self.vertices[b].coords, self.vertices[c].coords);
            let v = a.dot(&b.cross(&c)) / 6.0;
            acc += v * (a + b + c) / 4.0;
            vol += v;
        }
        Point3::from(acc / vol)
    }

    /// Every undirected edge is shared by exactly two triangles with opposite winding.
    pub fn is_closed_manifold(&self) -> bool {
        let mut directed: HashMap<(usize, usize), u32> = HashMap::new();
        for &[a, b, c] in &self.triangles {
            for e in [(a, b), (b, c), (c, a)] {
                *directed.entry(e).or_insert(0) += 1;
            }
        }
        directed
            .iter()
            .all(|(&(a, b), &n)| n == 1 && directed.get(&(b, a)) == Some(&1))
    }

    /// Point-in-solid test by ray parity along a fixed skew direction.
    pub fn contains_point(&self, p: &Point3) -> bool {
        let dir = Vector3::new(0.5773502691896258, 0.5345224838248488, 0.6172133998483676).normalize();
        let mut hits = 0;
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.triangle(t);
            if let Some(d) = ray_triangle(p, &dir, &a, &b, &c) {
                if d > 0.0 {
                    hits += 1;
                }
            }
        }
        hits % 2 == 1
    }

    /// Copy of the mesh with every vertex mapped through `f`.
    pub fn map_vertices(&self, f: impl Fn(&Point3) -> Point3) -> TriMesh {
        TriMesh {
            name: self.name.clone(),
            vertices: self.vertices.iter().map(f).collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Serializes the mesh in the OBJ subset accepted by [`parse_obj`].
    pub fn to_obj(&self) -> String {
        let mut out = format!("# {}\n", self.name);
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
        }
        for t in &self.triangles {
            let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
        out
    }
}

/// Möller–Trumbore ray/triangle intersection; returns the ray parameter of the hit.
pub(crate) fn ray_triangle(orig: &Point3, dir: &Vector3, a: &Point3, b: &Point3, c: &Point3) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-18 {
        return None;
    }
    let inv = 1.0 / det;
    let s = orig - a;
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(e2.dot(&q) * inv)
}

/// Reads a mesh in the OBJ subset: `v x y z` and `f i j k ...` records with
/// positive 1-based indices, `#` comments and blank lines. Polygonal faces are
/// fan-triangulated. Any other record is rejected.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| GeometryError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "mesh".into());
    parse_obj(&name, &text)
}

pub fn parse_obj(name: &str, text: &str) -> Result<TriMesh> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let tag = tokens.next().unwrap_or_default();
        let parse_err = |message: String| GeometryError::Parse { line, message };
        match tag {
            "v" => {
                let coords: Vec<f64> = tokens
                    .map(|t| t.parse::<f64>().map_err(|e| parse_err(format!("bad coordinate {t:?}: {e}"))))
                    .collect::<Result<_>>()?;
                if coords.len() != 3 {
                    return Err(parse_err(format!("vertex needs 3 coordinates, got {}", coords.len())));
                }
                if coords.iter().any(|c| !c.is_finite()) {
                    return Err(parse_err("non-finite coordinate".into()));
                }
                vertices.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            "f" => {
                let idx: Vec<usize> = tokens
                    .map(|t| {
                        let i = t
                            .parse::<i64>()
                            .map_err(|_| parse_err(format!("bad face index {t:?}")))?;
                        if i < 1 {
                            return Err(parse_err(format!("face index {i} out of range (indices are 1-based)")));
                        }
                        Ok(i as usize - 1)
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(parse_err(format!("face needs at least 3 indices, got {}", idx.len())));
                }
                if let Some(&bad) = idx.iter().find(|&&i| i >= vertices.len()) {
                    return Err(parse_err(format!(
                        "face index {} refers to an undefined vertex",
                        bad + 1
                    )));
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            other => return Err(parse_err(format!("unsupported record {other:?}"))),
        }
    }
    TriMesh::new(name, vertices, triangles)
}
