//! Procedural meshes used for the shipped assets and in tests.

use std::collections::HashMap;

use super::{Point3, TriMesh, Vector3};

/// Axis-aligned box centered at the origin.
pub fn box_mesh(name: &str, half: Vector3) -> TriMesh {
    let (x, y, z) = (half.x, half.y, half.z);
    let vertices = vec![
        Point3::new(-x, -y, -z),
        Point3::new(x, -y, -z),
        Point3::new(x, y, -z),
        Point3::new(-x, y, -z),
        Point3::new(-x, -y, z),
        Point3::new(x, -y, z),
        Point3::new(x, y, z),
        Point3::new(-x, y, z),
    ];
    let triangles = vec![
        [0, 3, 2],
        [0, 2, 1],
        [4, 5, 6],
        [4, 6, 7],
        [0, 1, 5],
        [0, 5, 4],
        [1, 2, 6],
        [1, 6, 5],
        [2, 3, 7],
        [2, 7, 6],
        [3, 0, 4],
        [3, 4, 7],
    ];
    TriMesh {
        name: name.into(),
        vertices,
        triangles,
    }
}

/// Extrudes a simple counter-clockwise polygon in the xy plane from z = 0 to z = `height`.
pub fn prism_mesh(name: &str, outline: &[[f64; 2]], height: f64) -> TriMesh {
    let n = outline.len();
    assert!(n >= 3, "outline needs at least 3 points");
    let mut vertices: Vec<Point3> = outline.iter().map(|p| Point3::new(p[0], p[1], 0.0)).collect();
    vertices.extend(outline.iter().map(|p| Point3::new(p[0], p[1], height)));
    let mut triangles = Vec::new();
    for [a, b, c] in ear_clip(outline) {
        triangles.push([a, c, b]);
        triangles.push([n + a, n + b, n + c]);
    }
    for i in 0..n {
        let j = (i + 1) % n;
        triangles.push([i, j, n + j]);
        triangles.push([i, n + j, n + i]);
    }
    TriMesh {
        name: name.into(),
        vertices,
        triangles,
    }
}

/// Regular polygon with `sides` vertices on a circle of `radius`, first vertex on +x.
pub fn regular_polygon(sides: usize, radius: f64) -> Vec<[f64; 2]> {
    ellipse_polygon(sides, radius, radius)
}

pub fn ellipse_polygon(sides: usize, rx: f64, ry: f64) -> Vec<[f64; 2]> {
    (0..sides)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / sides as f64;
            [rx * a.cos(), ry * a.sin()]
        })
        .collect()
}

/// L-shaped outline: an `outer_x` × `outer_y` rectangle with a `leg`-wide L.
pub fn l_outline(outer_x: f64, outer_y: f64, leg: f64) -> Vec<[f64; 2]> {
    vec![
        [0.0, 0.0],
        [outer_x, 0.0],
        [outer_x, leg],
        [leg, leg],
        [leg, outer_y],
        [0.0, outer_y],
    ]
}

/// Pin-fin plate: a square plate of `cells` × `cells` grid cells with a square
/// pin on every odd cell that is not on the border.
pub fn pin_fin_plate(name: &str, cells: usize, cell: f64, plate: f64, pin: f64) -> TriMesh {
    let heights: Vec<Vec<f64>> = (0..cells)
        .map(|i| {
            (0..cells)
                .map(|j| {
                    let pinned = i % 2 == 1 && j % 2 == 1 && i + 1 < cells && j + 1 < cells;
                    if pinned {
                        pin
                    } else {
                        plate
                    }
                })
                .collect()
        })
        .collect();
    let mut b = MeshBuilder::default();
    let c = |i: usize| i as f64 * cell;
    for i in 0..cells {
        for j in 0..cells {
            let (x0, x1, y0, y1) = (c(i), c(i + 1), c(j), c(j + 1));
            let h = heights[i][j];
            b.quad([x0, y0, 0.0], [x1, y0, 0.0], [x1, y1, 0.0], [x0, y1, 0.0], -Vector3::z());
            b.quad([x0, y0, h], [x1, y0, h], [x1, y1, h], [x0, y1, h], Vector3::z());
            if h > plate {
                b.quad([x0, y0, plate], [x0, y1, plate], [x0, y1, h], [x0, y0, h], -Vector3::x());
                b.quad([x1, y0, plate], [x1, y1, plate], [x1, y1, h], [x1, y0, h], Vector3::x());
                b.quad([x0, y0, plate], [x1, y0, plate], [x1, y0, h], [x0, y0, h], -Vector3::y());
                b.quad([x0, y1, plate], [x1, y1, plate], [x1, y1, h], [x0, y1, h], Vector3::y());
            }
        }
    }
    let l = c(cells);
    for k in 0..cells {
        let (a, e) = (c(k), c(k + 1));
        b.quad([0.0, a, 0.0], [0.0, e, 0.0], [0.0, e, plate], [0.0, a, plate], -Vector3::x());
        b.quad([l, a, 0.0], [l, e, 0.0], [l, e, plate], [l, a, plate], Vector3::x());
        b.quad([a, 0.0, 0.0], [e, 0.0, 0.0], [e, 0.0, plate], [a, 0.0, plate], -Vector3::y());
        b.quad([a, l, 0.0], [e, l, 0.0], [e, l, plate], [a, l, plate], Vector3::y());
    }
    b.finish(name)
}

#[derive(Default)]
struct MeshBuilder {
    index: HashMap<[u64; 3], usize>,
    vertices: Vec<Point3>,
    triangles: Vec<[usize; 3]>,
}

impl MeshBuilder {
    fn vertex(&mut self, p: [f64; 3]) -> usize {
        let key = p.map(f64::to_bits);
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        self.vertices.push(Point3::new(p[0], p[1], p[2]));
        self.index.insert(key, self.vertices.len() - 1);
        self.vertices.len() - 1
    }

    /// Planar quad a-b-c-d, wound so its normal agrees with `outward`.
    fn quad(&mut self, a: [f64; 3], b: [f64; 3], c: [f64; 3], d: [f64; 3], outward: Vector3) {
        let ids = [self.vertex(a), self.vertex(b), self.vertex(c), self.vertex(d)];
        let pa = self.vertices[ids[0]];
        let n = (self.vertices[ids[1]] - pa).cross(&(self.vertices[ids[2]] - pa));
        let [a, b, c, d] = if n.dot(&outward) >= 0.0 { ids } else { [ids[0], ids[3], ids[2], ids[1]] };
        self.triangles.push([a, b, c]);
        self.triangles.push([a, c, d]);
    }

    fn finish(self, name: &str) -> TriMesh {
        TriMesh {
            name: name.into(),
            vertices: self.vertices,
            triangles: self.triangles,
        }
    }
}

/// Ear-clipping triangulation of a simple counter-clockwise polygon.
fn ear_clip(poly: &[[f64; 2]]) -> Vec<[usize; 3]> {
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut idx: Vec<usize> = (0..poly.len()).collect();
    let mut out = Vec::new();
    while idx.len() > 3 {
        let n = idx.len();
        let ear = (0..n).find(|&k| {
            let (i0, i1, i2) = (idx[(k + n - 1) % n], idx[k], idx[(k + 1) % n]);
            let (a, b, c) = (poly[i0], poly[i1], poly[i2]);
            if cross(a, b, c) <= 0.0 {
                return false;
            }
            idx.iter().all(|&m| {
                if m == i0 || m == i1 || m == i2 {
                    return true;
                }
                let p = poly[m];
                !(cross(a, b, p) >= 0.0 && cross(b, c, p) >= 0.0 && cross(c, a, p) >= 0.0)
            })
        });
        let k = ear.expect("polygon must be simple and counter-clockwise");
        out.push([idx[(k + n - 1) % n], idx[k], idx[(k + 1) % n]]);
        idx.remove(k);
    }
    out.push([idx[0], idx[1], idx[2]]);
    out
}
