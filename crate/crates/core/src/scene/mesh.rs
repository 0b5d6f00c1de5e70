use std::collections::HashMap;

use crate::{Error, Result, Vec2};

/// Triangle mesh of one planar body.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec2>,
    pub triangles: Vec<[usize; 3]>,
    /// Edges owned by exactly one triangle, oriented counterclockwise around the body.
    pub boundary_edges: Vec<[usize; 2]>,
    pub rest_positions: Vec<Vec2>,
}

pub(crate) fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

pub(crate) fn signed_area(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    0.5 * cross(b - a, c - a)
}

pub fn polygon_area(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    (0..n).map(|i| cross(poly[i], poly[(i + 1) % n])).sum::<f64>() * 0.5
}

pub fn polygon_centroid(poly: &[Vec2]) -> Vec2 {
    let n = poly.len();
    let area = polygon_area(poly);
    let mut c = Vec2::zeros();
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        c += (p + q) * cross(p, q);
    }
    c / (6.0 * area)
}

fn segments_intersect(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let d1 = cross(p2 - p1, q1 - p1);
    let d2 = cross(p2 - p1, q2 - p1);
    let d3 = cross(q2 - q1, p1 - q1);
    let d4 = cross(q2 - q1, p2 - q1);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |a: Vec2, b: Vec2, p: Vec2, d: f64| {
        d == 0.0 && p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
    };
    on(p1, p2, q1, d1) || on(p1, p2, q2, d2) || on(q1, q2, p1, d3) || on(q1, q2, p2, d4)
}

/// Reject polygons whose non-adjacent edges touch or cross.
pub fn check_simple(poly: &[Vec2]) -> Result<()> {
    let n = poly.len();
    if n < 3 {
        return Err(Error::InvalidInput(format!("polygon needs at least 3 vertices, got {n}")));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]) {
                return Err(Error::SelfIntersectingPolygon { first: i, second: j });
            }
        }
    }
    Ok(())
}

fn point_in_triangle(p: Vec2, a: Vec2, b: Vec2, c: Vec2) -> bool {
    let d1 = cross(b - a, p - a);
    let d2 = cross(c - b, p - b);
    let d3 = cross(a - c, p - c);
    d1 >= 0.0 && d2 >= 0.0 && d3 >= 0.0
}

/// Ear-clipping triangulation. For convex input this is the fan around vertex 0.
fn ear_clip(poly: &[Vec2]) -> Result<Vec<[usize; 3]>> {
    let mut idx: Vec<usize> = (0..poly.len()).collect();
    let mut tris = Vec::with_capacity(poly.len() - 2);
    while idx.len() > 3 {
        let m = idx.len();
        let ear = (1..=m).map(|k| k % m).find(|&k| {
            let (ia, ib, ic) = (idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]);
            let (a, b, c) = (poly[ia], poly[ib], poly[ic]);
            if signed_area(a, b, c) <= 0.0 {
                return false;
            }
            !idx.iter().filter(|&&q| q != ia && q != ib && q != ic).any(|&q| point_in_triangle(poly[q], a, b, c))
        });
        let Some(k) = ear else {
            return Err(Error::InvalidInput("polygon has no ear; is it counterclockwise?".into()));
        };
        tris.push([idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]]);
        idx.remove(k);
    }
    tris.push([idx[0], idx[1], idx[2]]);
    Ok(tris)
}

/// Split every triangle into four through its edge midpoints.
fn refine_midpoints(vertices: &mut Vec<Vec2>, triangles: &[[usize; 3]]) -> Vec<[usize; 3]> {
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut mid = |a: usize, b: usize, vertices: &mut Vec<Vec2>| {
        let key = (a.min(b), a.max(b));
        *midpoint.entry(key).or_insert_with(|| {
            vertices.push((vertices[a] + vertices[b]) * 0.5);
            vertices.len() - 1
        })
    };
    let mut out = Vec::with_capacity(triangles.len() * 4);
    for &[a, b, c] in triangles {
        let ab = mid(a, b, vertices);
        let bc = mid(b, c, vertices);
        let ca = mid(c, a, vertices);
        out.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
    }
    out
}

impl TriMesh {
    /// Assemble a mesh from vertices and triangles, deriving the boundary.
    pub fn from_parts(vertices: Vec<Vec2>, triangles: Vec<[usize; 3]>) -> Self {
        let boundary_edges = boundary_edges(&triangles);
        Self { rest_positions: vertices.clone(), vertices, triangles, boundary_edges }
    }

    pub fn area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| signed_area(self.rest_positions[t[0]], self.rest_positions[t[1]], self.rest_positions[t[2]]))
            .sum()
    }

    /// Vertices that appear on at least one boundary edge, sorted.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.boundary_edges.iter().flatten().copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Apply a rigid or mirroring map to every vertex, repairing triangle winding.
    pub fn transformed(&self, f: impl Fn(Vec2) -> Vec2) -> Self {
        let vertices: Vec<Vec2> = self.vertices.iter().map(|&p| f(p)).collect();
        let triangles = self
            .triangles
            .iter()
            .map(
                |&[a, b, c]| {
                    if signed_area(vertices[a], vertices[b], vertices[c]) < 0.0 {
                        [a, c, b]
                    } else {
                        [a, b, c]
                    }
                },
            )
            .collect();
        Self::from_parts(vertices, triangles)
    }
}

fn boundary_edges(triangles: &[[usize; 3]]) -> Vec<[usize; 2]> {
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for t in triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let mut edges = Vec::new();
    for t in triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            if count[&(a.min(b), a.max(b))] == 1 {
                edges.push([a, b]);
            }
        }
    }
    edges
}

/// Triangulate a simple counterclockwise polygon and refine it `subdivision_level`
/// times by midpoint splitting (each level multiplies the triangle count by 4).
pub fn triangulate(polygon: &[Vec2], subdivision_level: u32) -> Result<TriMesh> {
    check_simple(polygon)?;
    if polygon_area(polygon) <= 0.0 {
        return Err(Error::InvalidInput("polygon must be counterclockwise with positive area".into()));
    }
    let mut vertices = polygon.to_vec();
    let mut triangles = ear_clip(polygon)?;
    for _ in 0..subdivision_level {
        triangles = refine_midpoints(&mut vertices, &triangles);
    }
    Ok(TriMesh::from_parts(vertices, triangles))
}

/// Cross-section shape of a jaw pad.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JawProfile {
    Rectangular,
    Rounded,
}

impl std::str::FromStr for JawProfile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rectangular" => Ok(Self::Rectangular),
            "rounded" => Ok(Self::Rounded),
            other => Err(Error::InvalidInput(format!("unknown jaw profile {other:?}"))),
        }
    }
}

/// Geometry of one pad cross-section in jaw-local coordinates: `s` runs from the
/// contact face toward the backing, `v` along the pad height (centered at 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PadGeometry {
    pub thickness: f64,
    pub height: f64,
    pub profile: JawProfile,
    /// Bulge of the rounded face: the face recedes by this much at the pad ends.
    pub sagitta: f64,
    pub max_edge: f64,
}

impl PadGeometry {
    /// Face offset (toward the backing) at height `v`.
    pub fn face_offset(&self, v: f64) -> f64 {
        match self.profile {
            JawProfile::Rectangular => 0.0,
            JawProfile::Rounded => {
                let half = 0.5 * self.height;
                let r = (half * half + self.sagitta * self.sagitta) / (2.0 * self.sagitta);
                r - (r * r - v * v).max(0.0).sqrt()
            }
        }
    }
}

/// Structured pad mesh. Vertex `(i, j)` sits at column `i` (0 = face,
/// `nx` = back) and row `j` (bottom to top).
#[derive(Debug, Clone)]
pub struct PadMesh {
    pub mesh: TriMesh,
    pub nx: usize,
    pub ny: usize,
}

impl PadMesh {
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }
    pub fn face_vertex(&self, row: usize) -> usize {
        self.index(0, row)
    }
    pub fn back_vertex(&self, row: usize) -> usize {
        self.index(self.nx, row)
    }
}

/// Mesh a pad in local `(s, v)` coordinates with maximum edge length about
/// `geometry.max_edge` along each grid direction.
pub fn pad_mesh(geometry: &PadGeometry) -> PadMesh {
    let nx = (geometry.thickness / geometry.max_edge).ceil().max(1.0) as usize;
    let ny = (geometry.height / geometry.max_edge).ceil().max(1.0) as usize;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let v = -0.5 * geometry.height + geometry.height * j as f64 / ny as f64;
        let face = geometry.face_offset(v);
        for i in 0..=nx {
            let s = face + (geometry.thickness - face) * i as f64 / nx as f64;
            vertices.push(Vec2::new(s, v));
        }
    }
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            // alternate diagonals to avoid a directional bias in the pad stiffness
            if (i + j) % 2 == 0 {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }
    PadMesh { mesh: TriMesh::from_parts(vertices, triangles), nx, ny }
}

/// Regular polygon with `n` vertices on a circle of the given radius, counterclockwise.
pub fn regular_polygon(n: usize, radius: f64, phase: f64) -> Vec<Vec2> {
    (0..n)
        .map(|k| {
            let a = phase + 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            Vec2::new(radius * a.cos(), radius * a.sin())
        })
        .collect()
}

pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<Vec2> {
    vec![Vec2::new(x0, y0), Vec2::new(x1, y0), Vec2::new(x1, y1), Vec2::new(x0, y1)]
}
