//! Collision and visual primitives.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ShapeError {
    #[error("dimension `{0}` must be strictly positive")]
    NonPositive(&'static str),
    #[error("convex mesh needs at least 4 non-coplanar vertices")]
    DegenerateMesh,
    #[error("mesh file {path}: {reason}")]
    MeshFile { path: String, reason: String },
}

/// A geometric primitive in its own local frame.
///
/// Boxes are centered at the origin; cylinders are centered at the origin with their
/// axis along local z.
#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    Sphere { radius: f64 },
    Box { half_extents: Vector3<f64> },
    Cylinder { radius: f64, length: f64 },
    ConvexMesh(ConvexHull),
}

impl Shape {
    pub fn sphere(radius: f64) -> Result<Shape, ShapeError> {
        positive("radius", radius)?;
        Ok(Shape::Sphere { radius })
    }

    /// Box from full side lengths.
    pub fn cuboid(size: [f64; 3]) -> Result<Shape, ShapeError> {
        for s in size {
            positive("size", s)?;
        }
        Ok(Shape::Box {
            half_extents: Vector3::new(size[0] / 2.0, size[1] / 2.0, size[2] / 2.0),
        })
    }

    pub fn cylinder(radius: f64, length: f64) -> Result<Shape, ShapeError> {
        positive("radius", radius)?;
        positive("length", length)?;
        Ok(Shape::Cylinder { radius, length })
    }

    pub fn convex_mesh(points: &[Point3<f64>]) -> Result<Shape, ShapeError> {
        Ok(Shape::ConvexMesh(ConvexHull::new(points)?))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Shape::Sphere { .. } => "sphere",
            Shape::Box { .. } => "box",
            Shape::Cylinder { .. } => "cylinder",
            Shape::ConvexMesh(_) => "mesh",
        }
    }

    /// Radius of a sphere centered at the local origin that contains the shape.
    pub fn bounding_radius(&self) -> f64 {
        match self {
            Shape::Sphere { radius } => *radius,
            Shape::Box { half_extents } => half_extents.norm(),
            Shape::Cylinder { radius, length } => (radius * radius + length * length / 4.0).sqrt(),
            Shape::ConvexMesh(h) => h.vertices.iter().map(|v| v.coords.norm()).fold(0.0, f64::max),
        }
    }

    /// Triangle soup approximating the surface, for rendering clients.
    pub fn triangulate(&self) -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
        match self {
            Shape::Sphere { radius } => uv_sphere(*radius, 8, 12),
            Shape::Box { half_extents: h } => {
                let mut v = Vec::with_capacity(8);
                for i in 0..8 {
                    let sx = if i & 1 == 0 { -1.0 } else { 1.0 };
                    let sy = if i & 2 == 0 { -1.0 } else { 1.0 };
                    let sz = if i & 4 == 0 { -1.0 } else { 1.0 };
                    v.push([sx * h.x, sy * h.y, sz * h.z]);
                }
                let f = vec![
                    [0, 2, 1], [1, 2, 3], [4, 5, 6], [5, 7, 6],
                    [0, 1, 4], [1, 5, 4], [2, 6, 3], [3, 6, 7],
                    [0, 4, 2], [2, 4, 6], [1, 3, 5], [3, 7, 5],
                ];
                (v, f)
            }
            Shape::Cylinder { radius, length } => {
                let n = 16;
                let mut v = Vec::new();
                for i in 0..n {
                    let a = std::f64::consts::TAU * i as f64 / n as f64;
                    v.push([radius * a.cos(), radius * a.sin(), -length / 2.0]);
                    v.push([radius * a.cos(), radius * a.sin(), length / 2.0]);
                }
                v.push([0.0, 0.0, -length / 2.0]);
                v.push([0.0, 0.0, length / 2.0]);
                let (cb, ct) = (2 * n, 2 * n + 1);
                let mut f = Vec::new();
                for i in 0..n {
                    let j = (i + 1) % n;
                    let (b0, t0, b1, t1) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
                    f.push([b0, b1, t0]);
                    f.push([t0, b1, t1]);
                    f.push([cb, b1, b0]);
                    f.push([ct, t0, t1]);
                }
                (v, f)
            }
            Shape::ConvexMesh(h) => (
                h.vertices.iter().map(|p| [p.x, p.y, p.z]).collect(),
                h.faces.clone(),
            ),
        }
    }
}

fn positive(name: &'static str, v: f64) -> Result<(), ShapeError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ShapeError::NonPositive(name))
    }
}

fn uv_sphere(r: f64, rings: usize, segments: usize) -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let mut v = vec![[0.0, 0.0, r]];
    for i in 1..rings {
        let phi = std::f64::consts::PI * i as f64 / rings as f64;
        for j in 0..segments {
            let th = std::f64::consts::TAU * j as f64 / segments as f64;
            v.push([r * phi.sin() * th.cos(), r * phi.sin() * th.sin(), r * phi.cos()]);
        }
    }
    v.push([0.0, 0.0, -r]);
    let south = v.len() - 1;
    let ring = |i: usize, j: usize| 1 + (i - 1) * segments + (j % segments);
    let mut f = Vec::new();
    for j in 0..segments {
        f.push([0, ring(1, j), ring(1, j + 1)]);
        f.push([south, ring(rings - 1, j + 1), ring(rings - 1, j)]);
    }
    for i in 1..rings - 1 {
        for j in 0..segments {
            f.push([ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)]);
            f.push([ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)]);
        }
    }
    (v, f)
}

/// Convex hull of a vertex cloud: only hull vertices are kept, in their input order,
/// with outward-facing triangles.
///
/// Equality compares vertices only: faces are derived from them, and coplanar
/// facets may be triangulated differently for the same vertex set.
#[derive(Clone, Debug)]
pub struct ConvexHull {
    pub vertices: Vec<Point3<f64>>,
    pub faces: Vec<[usize; 3]>,
}

impl PartialEq for ConvexHull {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices
    }
}

impl ConvexHull {
    pub fn new(points: &[Point3<f64>]) -> Result<ConvexHull, ShapeError> {
        // exact duplicates first, keeping first occurrence
        let mut seen = HashSet::new();
        let pts: Vec<Point3<f64>> = points
            .iter()
            .filter(|p| p.iter().all(|c| c.is_finite()))
            .filter(|p| seen.insert([p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]))
            .copied()
            .collect();
        if pts.len() < 4 {
            return Err(ShapeError::DegenerateMesh);
        }
        let scale = pts
            .iter()
            .map(|p| p.coords.amax())
            .fold(0.0, f64::max)
            .max(1e-300);
        let eps = 1e-10 * scale;

        let (i0, i1, i2, i3) = initial_simplex(&pts, eps).ok_or(ShapeError::DegenerateMesh)?;
        let interior = Point3::from((pts[i0].coords + pts[i1].coords + pts[i2].coords + pts[i3].coords) / 4.0);

        let mut faces: Vec<Face> = Vec::new();
        for tri in [[i0, i1, i2], [i0, i1, i3], [i0, i2, i3], [i1, i2, i3]] {
            faces.push(Face::oriented(&pts, tri, &interior));
        }

        for (idx, p) in pts.iter().enumerate() {
            if [i0, i1, i2, i3].contains(&idx) {
                continue;
            }
            let visible: Vec<bool> = faces.iter().map(|f| f.distance(p) > eps).collect();
            if !visible.iter().any(|v| *v) {
                continue;
            }
            let mut edges: HashSet<(usize, usize)> = HashSet::new();
            for (f, _) in faces.iter().zip(&visible).filter(|(_, v)| **v) {
                for k in 0..3 {
                    edges.insert((f.v[k], f.v[(k + 1) % 3]));
                }
            }
            let mut horizon: Vec<(usize, usize)> = edges
                .iter()
                .filter(|(a, b)| !edges.contains(&(*b, *a)))
                .copied()
                .collect();
            horizon.sort_unstable();
            let mut kept: Vec<Face> = faces
                .into_iter()
                .zip(visible)
                .filter(|(_, v)| !v)
                .map(|(f, _)| f)
                .collect();
            for (a, b) in horizon {
                kept.push(Face::oriented(&pts, [a, b, idx], &interior));
            }
            faces = kept;
        }

        // keep only referenced vertices, in input order
        let mut used = vec![false; pts.len()];
        for f in &faces {
            for &i in &f.v {
                used[i] = true;
            }
        }
        let mut remap = vec![usize::MAX; pts.len()];
        let mut vertices = Vec::new();
        for (i, p) in pts.iter().enumerate() {
            if used[i] {
                remap[i] = vertices.len();
                vertices.push(*p);
            }
        }
        let mut tris: Vec<[usize; 3]> = faces
            .iter()
            .map(|f| [remap[f.v[0]], remap[f.v[1]], remap[f.v[2]]])
            .collect();
        tris.sort_unstable();
        Ok(ConvexHull { vertices, faces: tris })
    }

    pub fn support(&self, dir: &Vector3<f64>) -> Point3<f64> {
        let mut best = self.vertices[0];
        let mut best_d = best.coords.dot(dir);
        for v in &self.vertices[1..] {
            let d = v.coords.dot(dir);
            if d > best_d {
                best_d = d;
                best = *v;
            }
        }
        best
    }

    pub fn scaled(&self, s: [f64; 3]) -> Result<ConvexHull, ShapeError> {
        let pts: Vec<Point3<f64>> = self
            .vertices
            .iter()
            .map(|p| Point3::new(p.x * s[0], p.y * s[1], p.z * s[2]))
            .collect();
        ConvexHull::new(&pts)
    }
}

struct Face {
    v: [usize; 3],
    normal: Vector3<f64>,
    offset: f64,
}

impl Face {
    fn oriented(pts: &[Point3<f64>], tri: [usize; 3], interior: &Point3<f64>) -> Face {
        let [a, b, c] = tri;
        let mut n = (pts[b] - pts[a]).cross(&(pts[c] - pts[a]));
        let mut v = tri;
        if n.dot(&(interior - pts[a])) > 0.0 {
            n = -n;
            v = [a, c, b];
        }
        let len = n.norm();
        let normal = if len > 0.0 { n / len } else { n };
        Face { v, normal, offset: normal.dot(&pts[a].coords) }
    }

    fn distance(&self, p: &Point3<f64>) -> f64 {
        self.normal.dot(&p.coords) - self.offset
    }
}

fn initial_simplex(pts: &[Point3<f64>], eps: f64) -> Option<(usize, usize, usize, usize)> {
    let i0 = 0;
    let i1 = argmax(pts, |p| (p - pts[i0]).norm())?;
    if (pts[i1] - pts[i0]).norm() <= eps {
        return None;
    }
    let dir = (pts[i1] - pts[i0]).normalize();
    let i2 = argmax(pts, |p| {
        let d = p - pts[i0];
        (d - dir * d.dot(&dir)).norm()
    })?;
    let n = (pts[i1] - pts[i0]).cross(&(pts[i2] - pts[i0]));
    if n.norm() <= eps * (pts[i1] - pts[i0]).norm() {
        return None;
    }
    let n = n.normalize();
    let i3 = argmax(pts, |p| n.dot(&(p - pts[i0])).abs())?;
    if n.dot(&(pts[i3] - pts[i0])).abs() <= eps {
        return None;
    }
    Some((i0, i1, i2, i3))
}

fn argmax(pts: &[Point3<f64>], f: impl Fn(&Point3<f64>) -> f64) -> Option<usize> {
    let mut best = None;
    let mut best_v = f64::NEG_INFINITY;
    for (i, p) in pts.iter().enumerate() {
        let v = f(p);
        if v > best_v {
            best_v = v;
            best = Some(i);
        }
    }
    best
}

/// Reads vertices from an ASCII STL (`vertex x y z` lines) or OFF file.
pub fn load_mesh_vertices(path: &Path) -> Result<Vec<Point3<f64>>, ShapeError> {
    let err = |reason: String| ShapeError::MeshFile {
        path: path.display().to_string(),
        reason,
    };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "stl" => parse_ascii_stl(&text).map_err(err),
        "off" => parse_off(&text).map_err(err),
        other => Err(err(format!("unsupported mesh format `{other}` (ASCII STL and OFF only)"))),
    }
}

pub fn parse_ascii_stl(text: &str) -> Result<Vec<Point3<f64>>, String> {
    if !text.trim_start().starts_with("solid") {
        return Err("not an ASCII STL file".into());
    }
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        if it.next() == Some("vertex") {
            out.push(parse_xyz(&mut it).ok_or_else(|| format!("bad vertex on line {}", n + 1))?);
        }
    }
    if out.is_empty() {
        return Err("no vertices".into());
    }
    Ok(out)
}

pub fn parse_off(text: &str) -> Result<Vec<Point3<f64>>, String> {
    let mut lines = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty());
    let header = lines.next().ok_or("empty file")?;
    let counts_line = if header == "OFF" {
        lines.next().ok_or("missing counts")?
    } else if let Some(rest) = header.strip_prefix("OFF") {
        rest
    } else {
        return Err("missing OFF header".into());
    };
    let nv: usize = counts_line
        .split_whitespace()
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or("bad vertex count")?;
    let mut out = Vec::with_capacity(nv);
    for i in 0..nv {
        let l = lines.next().ok_or_else(|| format!("expected {nv} vertices, found {i}"))?;
        out.push(parse_xyz(&mut l.split_whitespace()).ok_or_else(|| format!("bad vertex {i}"))?);
    }
    Ok(out)
}

fn parse_xyz<'a>(it: &mut impl Iterator<Item = &'a str>) -> Option<Point3<f64>> {
    let x = it.next()?.parse().ok()?;
    let y = it.next()?.parse().ok()?;
    let z = it.next()?.parse().ok()?;
    Some(Point3::new(x, y, z))
}

// Serialized form used by scene files: `{"type": "box", "size": [..]}` and friends.
#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum ShapeRepr {
    Sphere { radius: f64 },
    Box { size: [f64; 3] },
    Cylinder { radius: f64, length: f64 },
    Mesh { vertices: Vec<[f64; 3]> },
}

impl Serialize for Shape {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let repr = match self {
            Shape::Sphere { radius } => ShapeRepr::Sphere { radius: *radius },
            Shape::Box { half_extents: h } => ShapeRepr::Box {
                size: [h.x * 2.0, h.y * 2.0, h.z * 2.0],
            },
            Shape::Cylinder { radius, length } => ShapeRepr::Cylinder {
                radius: *radius,
                length: *length,
            },
            Shape::ConvexMesh(h) => ShapeRepr::Mesh {
                vertices: h.vertices.iter().map(|p| [p.x, p.y, p.z]).collect(),
            },
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Shape {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let shape = match ShapeRepr::deserialize(d)? {
            ShapeRepr::Sphere { radius } => Shape::sphere(radius),
            ShapeRepr::Box { size } => Shape::cuboid(size),
            ShapeRepr::Cylinder { radius, length } => Shape::cylinder(radius, length),
            ShapeRepr::Mesh { vertices } => {
                let pts: Vec<Point3<f64>> = vertices.iter().map(|v| Point3::new(v[0], v[1], v[2])).collect();
                Shape::convex_mesh(&pts)
            }
        };
        shape.map_err(D::Error::custom)
    }
}
