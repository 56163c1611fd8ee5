//! Brute-force self-collision classification over a dense joint grid, with its own
//! geometry tests, for comparison with the sampled matrix.

use std::collections::{BTreeMap, BTreeSet};

use robosetup_core::acm_gen::AcmReport;
use robosetup_core::collision::AcmReason;
use robosetup_core::fixtures;
use robosetup_core::kinematics::RobotState;

use super::fk_oracle::{from_rpy, mul, triple, Oracle, M4};

#[derive(Clone, Copy, Debug)]
enum Solid {
    Sphere(f64),
    /// Half extents.
    Cuboid([f64; 3]),
}

struct Placed {
    solid: Solid,
    /// Rotation columns and centre in the world frame.
    rot: [[f64; 3]; 3],
    centre: [f64; 3],
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn place(m: &M4, solid: Solid) -> Placed {
    let col = |j: usize| [m[0][j], m[1][j], m[2][j]];
    Placed {
        solid,
        rot: [col(0), col(1), col(2)],
        centre: col(3),
    }
}

/// Separating-axis test for boxes, closest point for sphere-box. Touching counts
/// as overlapping.
fn overlap(a: &Placed, b: &Placed) -> bool {
    match (a.solid, b.solid) {
        (Solid::Sphere(ra), Solid::Sphere(rb)) => {
            let d = sub(a.centre, b.centre);
            dot(d, d).sqrt() <= ra + rb
        }
        (Solid::Sphere(r), Solid::Cuboid(h)) => {
            let d = sub(a.centre, b.centre);
            let mut gap2 = 0.0;
            for i in 0..3 {
                let x = dot(d, b.rot[i]);
                let excess = (x.abs() - h[i]).max(0.0);
                gap2 += excess * excess;
            }
            gap2.sqrt() <= r
        }
        (Solid::Cuboid(_), Solid::Sphere(_)) => overlap(b, a),
        (Solid::Cuboid(ha), Solid::Cuboid(hb)) => {
            let d = sub(b.centre, a.centre);
            let mut axes = Vec::new();
            for i in 0..3 {
                axes.push(a.rot[i]);
                axes.push(b.rot[i]);
                for j in 0..3 {
                    let c = cross(a.rot[i], b.rot[j]);
                    let n = dot(c, c).sqrt();
                    if n > 1e-9 {
                        axes.push(c.map(|x| x / n));
                    }
                }
            }
            axes.iter().all(|l| {
                let ra: f64 = (0..3).map(|i| ha[i] * dot(a.rot[i], *l).abs()).sum();
                let rb: f64 = (0..3).map(|i| hb[i] * dot(b.rot[i], *l).abs()).sum();
                dot(d, *l).abs() <= ra + rb
            })
        }
    }
}

/// Reference classification of every link pair.
#[derive(Debug, Default, PartialEq)]
pub struct GridAcm {
    pub adjacent: BTreeSet<(String, String)>,
    pub never: BTreeSet<(String, String)>,
    pub always: BTreeSet<(String, String)>,
    /// Grid states evaluated.
    pub states: u64,
}

fn ordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Classifies a fixture's pairs over `steps` evenly spaced values per revolute
/// joint (limits inclusive). Pairs joined by a joint are adjacent; others are
/// `always` when they overlap in at least `threshold` of the grid, and `never` when
/// they overlap nowhere on it nor at the interval midpoints.
pub fn classify(fixture: &str, steps: usize, threshold: f64) -> GridAcm {
    let text = std::fs::read_to_string(fixtures::fixture_path(fixture)).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    let mut solids: BTreeMap<String, Vec<(M4, Solid)>> = BTreeMap::new();
    for link in doc.descendants().filter(|n| n.has_tag_name("link")) {
        let mut list = Vec::new();
        for c in link.children().filter(|c| c.has_tag_name("collision")) {
            let origin = c.children().find(|o| o.has_tag_name("origin"));
            let frame = from_rpy(
                triple(origin.and_then(|o| o.attribute("xyz")), [0.0; 3]),
                triple(origin.and_then(|o| o.attribute("rpy")), [0.0; 3]),
            );
            let g = c.children().find(|g| g.has_tag_name("geometry")).unwrap();
            let shape = g.children().find(|s| s.is_element()).unwrap();
            let solid = match shape.tag_name().name() {
                "sphere" => Solid::Sphere(shape.attribute("radius").unwrap().parse().unwrap()),
                "box" => Solid::Cuboid(triple(shape.attribute("size"), [0.0; 3]).map(|s| s / 2.0)),
                other => panic!("grid oracle does not model {other}"),
            };
            list.push((frame, solid));
        }
        if !list.is_empty() {
            solids.insert(link.attribute("name").unwrap().to_string(), list);
        }
    }

    let oracle = Oracle::load(fixture);
    let mut out = GridAcm::default();
    let mut axes: Vec<(String, Vec<f64>, f64)> = Vec::new();
    for j in &oracle.joints {
        if solids.contains_key(&j.parent) && solids.contains_key(&j.child) {
            out.adjacent.insert(ordered(&j.parent, &j.child));
        }
        if j.kind == "revolute" {
            let node = doc
                .descendants()
                .find(|n| n.has_tag_name("joint") && n.attribute("name") == Some(&j.name))
                .unwrap();
            let limit = node.children().find(|c| c.has_tag_name("limit")).unwrap();
            let lo: f64 = limit.attribute("lower").unwrap().parse().unwrap();
            let hi: f64 = limit.attribute("upper").unwrap().parse().unwrap();
            let values = (0..steps).map(|k| lo + (hi - lo) * k as f64 / (steps - 1) as f64).collect();
            axes.push((j.name.clone(), values, 0.5 * (lo + hi)));
        }
    }

    let names: Vec<&String> = solids.keys().collect();
    let mut pairs = Vec::new();
    for (i, a) in names.iter().enumerate() {
        for b in &names[i + 1..] {
            if !out.adjacent.contains(&ordered(a, b)) {
                pairs.push(ordered(a, b));
            }
        }
    }
    let pair_hits = |state: &RobotState| -> Vec<bool> {
        let frames = oracle.transforms(state);
        let placed: BTreeMap<&String, Vec<Placed>> = solids
            .iter()
            .map(|(l, list)| (l, list.iter().map(|(f, s)| place(&mul(&frames[l], f), *s)).collect()))
            .collect();
        pairs
            .iter()
            .map(|(a, b)| placed[a].iter().any(|x| placed[b].iter().any(|y| overlap(x, y))))
            .collect()
    };

    let midpoint: RobotState = axes.iter().map(|(n, _, mid)| (n.clone(), *mid)).collect();
    let at_default = pair_hits(&midpoint);
    let mut counts = vec![0u64; pairs.len()];
    let total: usize = axes.iter().map(|(_, v, _)| v.len()).product();
    for flat in 0..total {
        let mut rest = flat;
        let mut state = RobotState::new();
        for (name, values, _) in &axes {
            state.set(name.clone(), values[rest % values.len()]);
            rest /= values.len();
        }
        for (c, hit) in counts.iter_mut().zip(pair_hits(&state)) {
            *c += hit as u64;
        }
    }
    out.states = total as u64;
    for (k, pair) in pairs.into_iter().enumerate() {
        if counts[k] as f64 >= threshold * total as f64 {
            out.always.insert(pair);
        } else if counts[k] == 0 && !at_default[k] {
            out.never.insert(pair);
        }
    }
    out
}

/// The generated report in the oracle's terms; `states` is left at zero.
pub fn sets_of(report: &AcmReport) -> GridAcm {
    let mut out = GridAcm::default();
    for p in &report.pairs {
        let set = match p.reason {
            Some(AcmReason::Adjacent) => &mut out.adjacent,
            Some(AcmReason::Never) => &mut out.never,
            Some(AcmReason::Always) => &mut out.always,
            _ => continue,
        };
        set.insert(ordered(&p.link1, &p.link2));
    }
    out
}
