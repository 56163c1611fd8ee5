//! Pairwise shape intersection.
//!
//! Sphere/sphere, sphere/box and box/box are exact. Cylinders are treated as their
//! bounding capsules. Everything else goes through a GJK distance query between the
//! shapes' "cores" (point, segment, box, hull), inflated by the core radius.

use std::cmp::Ordering;

use nalgebra::{Matrix3, Point3, Vector3};

use crate::pose::Pose;
use crate::shape::{ConvexHull, Shape};

/// GJK termination tolerance on the distance gap, meters.
pub const GJK_TOLERANCE: f64 = 1e-9;
const GJK_MAX_ITERATIONS: usize = 128;

/// True when the two posed shapes overlap or touch. Symmetric in its arguments.
pub fn shapes_intersect(a: &Shape, pose_a: &Pose, b: &Shape, pose_b: &Pose) -> bool {
    if canonical_order(a, pose_a, b, pose_b) == Ordering::Greater {
        intersect_ordered(b, pose_b, a, pose_a)
    } else {
        intersect_ordered(a, pose_a, b, pose_b)
    }
}

/// Radius of a sphere around the shape origin containing the shape as tested here
/// (cylinders are tested as capsules, which reach further along the axis).
pub fn test_bound(shape: &Shape) -> f64 {
    match shape {
        Shape::Cylinder { radius, length } => length / 2.0 + radius,
        other => other.bounding_radius(),
    }
}

fn rank(s: &Shape) -> u8 {
    match s {
        Shape::Sphere { .. } => 0,
        Shape::Box { .. } => 1,
        Shape::Cylinder { .. } => 2,
        Shape::ConvexMesh(_) => 3,
    }
}

fn key(s: &Shape, p: &Pose) -> Vec<f64> {
    let mut k = vec![
        p.translation.x,
        p.translation.y,
        p.translation.z,
        p.rotation.w,
        p.rotation.i,
        p.rotation.j,
        p.rotation.k,
    ];
    match s {
        Shape::Sphere { radius } => k.push(*radius),
        Shape::Box { half_extents } => k.extend(half_extents.iter()),
        Shape::Cylinder { radius, length } => k.extend([*radius, *length]),
        Shape::ConvexMesh(h) => k.extend(h.vertices.iter().flat_map(|v| v.iter().copied())),
    }
    k
}

fn canonical_order(a: &Shape, pa: &Pose, b: &Shape, pb: &Pose) -> Ordering {
    rank(a).cmp(&rank(b)).then_with(|| {
        let (ka, kb) = (key(a, pa), key(b, pb));
        for (x, y) in ka.iter().zip(&kb) {
            match x.total_cmp(y) {
                Ordering::Equal => {}
                o => return o,
            }
        }
        ka.len().cmp(&kb.len())
    })
}

fn intersect_ordered(a: &Shape, pa: &Pose, b: &Shape, pb: &Pose) -> bool {
    match (a, b) {
        (Shape::Sphere { radius: ra }, Shape::Sphere { radius: rb }) => {
            (pa.translation - pb.translation).norm_squared() <= (ra + rb) * (ra + rb)
        }
        (Shape::Sphere { radius }, Shape::Box { half_extents }) => {
            sphere_box(&pa.translation, *radius, pb, half_extents)
        }
        (Shape::Box { half_extents: ha }, Shape::Box { half_extents: hb }) => box_box(pa, ha, pb, hb),
        _ => {
            let (ca, ra) = Core::of(a, pa);
            let (cb, rb) = Core::of(b, pb);
            gjk_distance(&ca, &cb) <= ra + rb + GJK_TOLERANCE
        }
    }
}

fn sphere_box(center: &Vector3<f64>, radius: f64, box_pose: &Pose, h: &Vector3<f64>) -> bool {
    let local = box_pose.rotation.inverse() * (center - box_pose.translation);
    let clamped = Vector3::new(
        local.x.clamp(-h.x, h.x),
        local.y.clamp(-h.y, h.y),
        local.z.clamp(-h.z, h.z),
    );
    (local - clamped).norm_squared() <= radius * radius
}

/// Separating-axis test for two oriented boxes; touching counts as intersecting.
fn box_box(pa: &Pose, ha: &Vector3<f64>, pb: &Pose, hb: &Vector3<f64>) -> bool {
    let ra_m = pa.rotation_matrix();
    let rb_m = pb.rotation_matrix();
    // rotation of b expressed in a's frame
    let r: Matrix3<f64> = ra_m.transpose() * rb_m;
    let t = ra_m.transpose() * (pb.translation - pa.translation);
    let abs_r = r.map(|x| x.abs() + 1e-12);

    for i in 0..3 {
        let ra = ha[i];
        let rb = hb[0] * abs_r[(i, 0)] + hb[1] * abs_r[(i, 1)] + hb[2] * abs_r[(i, 2)];
        if t[i].abs() > ra + rb {
            return false;
        }
    }
    for j in 0..3 {
        let ra = ha[0] * abs_r[(0, j)] + ha[1] * abs_r[(1, j)] + ha[2] * abs_r[(2, j)];
        let rb = hb[j];
        let proj = t[0] * r[(0, j)] + t[1] * r[(1, j)] + t[2] * r[(2, j)];
        if proj.abs() > ra + rb {
            return false;
        }
    }
    for i in 0..3 {
        let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
        for j in 0..3 {
            let (j1, j2) = ((j + 1) % 3, (j + 2) % 3);
            let ra = ha[i1] * abs_r[(i2, j)] + ha[i2] * abs_r[(i1, j)];
            let rb = hb[j1] * abs_r[(i, j2)] + hb[j2] * abs_r[(i, j1)];
            let proj = t[i2] * r[(i1, j)] - t[i1] * r[(i2, j)];
            if proj.abs() > ra + rb {
                return false;
            }
        }
    }
    true
}

/// Convex core of a shape in world coordinates; the shape is the core inflated by a radius.
enum Core<'a> {
    Point(Vector3<f64>),
    Segment(Vector3<f64>, Vector3<f64>),
    Box(Pose, Vector3<f64>),
    Hull(Pose, &'a ConvexHull),
}

impl<'a> Core<'a> {
    fn of(shape: &'a Shape, pose: &Pose) -> (Core<'a>, f64) {
        match shape {
            Shape::Sphere { radius } => (Core::Point(pose.translation), *radius),
            Shape::Cylinder { radius, length } => {
                let half = pose.transform_vector(&Vector3::new(0.0, 0.0, length / 2.0));
                (Core::Segment(pose.translation - half, pose.translation + half), *radius)
            }
            Shape::Box { half_extents } => (Core::Box(*pose, *half_extents), 0.0),
            Shape::ConvexMesh(h) => (Core::Hull(*pose, h), 0.0),
        }
    }

    fn support(&self, d: &Vector3<f64>) -> Vector3<f64> {
        match self {
            Core::Point(p) => *p,
            Core::Segment(a, b) => {
                if b.dot(d) > a.dot(d) {
                    *b
                } else {
                    *a
                }
            }
            Core::Box(pose, h) => {
                let local = pose.rotation.inverse() * d;
                let corner = Vector3::new(
                    if local.x >= 0.0 { h.x } else { -h.x },
                    if local.y >= 0.0 { h.y } else { -h.y },
                    if local.z >= 0.0 { h.z } else { -h.z },
                );
                pose.translation + pose.rotation * corner
            }
            Core::Hull(pose, hull) => {
                let local = pose.rotation.inverse() * d;
                let p: Point3<f64> = hull.support(&local);
                pose.translation + pose.rotation * p.coords
            }
        }
    }

    fn center(&self) -> Vector3<f64> {
        match self {
            Core::Point(p) => *p,
            Core::Segment(a, b) => (a + b) / 2.0,
            Core::Box(pose, _) | Core::Hull(pose, _) => pose.translation,
        }
    }
}

/// Distance between two convex cores (zero when they overlap).
fn gjk_distance(a: &Core, b: &Core) -> f64 {
    let support = |d: &Vector3<f64>| a.support(&-d) - b.support(d);
    let mut dir = a.center() - b.center();
    if dir.norm_squared() < 1e-24 {
        dir = Vector3::x();
    }
    let mut v = a.support(&dir) - b.support(&-dir);
    let mut simplex: Vec<Vector3<f64>> = vec![v];
    for _ in 0..GJK_MAX_ITERATIONS {
        let vv = v.norm_squared();
        if vv <= 1e-24 {
            return 0.0;
        }
        let w = support(&v);
        let vnorm = vv.sqrt();
        // gap between the current distance estimate and the supporting plane
        if (vv - v.dot(&w)) / vnorm <= GJK_TOLERANCE {
            return vnorm;
        }
        if simplex.iter().any(|s| (s - w).norm_squared() <= 1e-30) {
            return vnorm;
        }
        simplex.push(w);
        let (next, kept) = closest_on_simplex(&simplex);
        simplex = kept;
        if simplex.len() == 4 {
            return 0.0;
        }
        if next.norm_squared() >= vv {
            // no progress: numerical floor reached
            return next.norm().min(vnorm);
        }
        v = next;
    }
    v.norm()
}

fn closest_on_simplex(s: &[Vector3<f64>]) -> (Vector3<f64>, Vec<Vector3<f64>>) {
    match s.len() {
        1 => (s[0], vec![s[0]]),
        2 => closest_segment(s[0], s[1]),
        3 => closest_triangle(s[0], s[1], s[2]),
        _ => closest_tetrahedron(s[0], s[1], s[2], s[3]),
    }
}

fn closest_segment(a: Vector3<f64>, b: Vector3<f64>) -> (Vector3<f64>, Vec<Vector3<f64>>) {
    let ab = b - a;
    let denom = ab.norm_squared();
    if denom <= 1e-30 {
        return (a, vec![a]);
    }
    let t = -a.dot(&ab) / denom;
    if t <= 0.0 {
        (a, vec![a])
    } else if t >= 1.0 {
        (b, vec![b])
    } else {
        (a + ab * t, vec![a, b])
    }
}

fn closest_triangle(a: Vector3<f64>, b: Vector3<f64>, c: Vector3<f64>) -> (Vector3<f64>, Vec<Vector3<f64>>) {
    let ab = b - a;
    let ac = c - a;
    let ap = -a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (a, vec![a]);
    }
    let bp = -b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (b, vec![b]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, vec![a, b]);
    }
    let cp = -c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (c, vec![c]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, vec![a, c]);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, vec![b, c]);
    }
    let sum = va + vb + vc;
    if sum.abs() <= 1e-300 {
        // degenerate triangle: best of its edges
        return [closest_segment(a, b), closest_segment(b, c), closest_segment(a, c)]
            .into_iter()
            .min_by(|x, y| x.0.norm_squared().total_cmp(&y.0.norm_squared()))
            .expect("three candidates");
    }
    let v = vb / sum;
    let w = vc / sum;
    (a + ab * v + ac * w, vec![a, b, c])
}

fn closest_tetrahedron(
    a: Vector3<f64>,
    b: Vector3<f64>,
    c: Vector3<f64>,
    d: Vector3<f64>,
) -> (Vector3<f64>, Vec<Vector3<f64>>) {
    let volume = (b - a).cross(&(c - a)).dot(&(d - a));
    let scale = [(b - a).norm(), (c - a).norm(), (d - a).norm()]
        .into_iter()
        .fold(0.0, f64::max);
    let degenerate = volume.abs() <= 1e-12 * scale.powi(3);
    let faces = [(a, b, c, d), (a, c, d, b), (a, d, b, c), (b, d, c, a)];
    let mut best: Option<(Vector3<f64>, Vec<Vector3<f64>>)> = None;
    for (p, q, r, opp) in faces {
        let n = (q - p).cross(&(r - p));
        let origin_side = (-p).dot(&n);
        let opp_side = (opp - p).dot(&n);
        if degenerate || origin_side * opp_side < 0.0 {
            let cand = closest_triangle(p, q, r);
            if best.as_ref().map_or(true, |b| cand.0.norm_squared() < b.0.norm_squared()) {
                best = Some(cand);
            }
        }
    }
    match best {
        Some(b) => b,
        None => (Vector3::zeros(), vec![a, b, c, d]),
    }
}
