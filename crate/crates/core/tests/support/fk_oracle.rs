//! Link transforms computed straight from the URDF text with naive 4x4 matrix
//! products, plus the FK, Jacobian and IK measurements built on them.

use std::collections::HashMap;

use robosetup_core::fixtures;
use robosetup_core::kinematics::{
    default_positions, forward_kinematics, indexed_rng, jacobian, sample_random_state, solve_ik, IkParams, JointGroup,
    RobotState,
};
use robosetup_core::model::RobotModel;
use robosetup_core::pose::Pose;
use robosetup_core::srdf::{effective_model, resolve_group};

pub type M4 = [[f64; 4]; 4];

pub fn mul(a: &M4, b: &M4) -> M4 {
    let mut c = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            c[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

pub fn rot3(r: [[f64; 3]; 3], t: [f64; 3]) -> M4 {
    let mut m = [[0.0; 4]; 4];
    for i in 0..3 {
        m[i][..3].copy_from_slice(&r[i]);
        m[i][3] = t[i];
    }
    m[3][3] = 1.0;
    m
}

pub fn from_rpy(xyz: [f64; 3], [r, p, y]: [f64; 3]) -> M4 {
    let (sr, cr) = r.sin_cos();
    let (sp, cp) = p.sin_cos();
    let (sy, cy) = y.sin_cos();
    // Rz(y) * Ry(p) * Rx(r)
    rot3(
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ],
        xyz,
    )
}

pub fn about_axis(axis: [f64; 3], angle: f64) -> M4 {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let [x, y, z] = axis.map(|a| a / n);
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    rot3(
        [
            [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
            [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
            [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
        ],
        [0.0; 3],
    )
}

pub fn triple(s: Option<&str>, default: [f64; 3]) -> [f64; 3] {
    match s {
        None => default,
        Some(s) => {
            let v: Vec<f64> = s.split_whitespace().map(|x| x.parse().unwrap()).collect();
            [v[0], v[1], v[2]]
        }
    }
}

pub struct OracleJoint {
    pub name: String,
    pub kind: String,
    pub parent: String,
    pub child: String,
    pub origin: M4,
    pub axis: [f64; 3],
}

/// Link transforms computed directly from the URDF document; revolute and fixed
/// joints only, which is all the fixtures use.
pub struct Oracle {
    pub root: String,
    pub joints: Vec<OracleJoint>,
}

impl Oracle {
    pub fn load(name: &str) -> Oracle {
        let text = std::fs::read_to_string(fixtures::fixture_path(name)).unwrap();
        let doc = roxmltree::Document::parse(&text).unwrap();
        let mut joints = Vec::new();
        for j in doc.descendants().filter(|n| n.has_tag_name("joint")) {
            let child = |tag: &str| j.children().find(|c| c.has_tag_name(tag));
            let origin = child("origin");
            joints.push(OracleJoint {
                name: j.attribute("name").unwrap().into(),
                kind: j.attribute("type").unwrap().into(),
                parent: child("parent").unwrap().attribute("link").unwrap().into(),
                child: child("child").unwrap().attribute("link").unwrap().into(),
                origin: from_rpy(
                    triple(origin.and_then(|o| o.attribute("xyz")), [0.0; 3]),
                    triple(origin.and_then(|o| o.attribute("rpy")), [0.0; 3]),
                ),
                axis: triple(child("axis").and_then(|a| a.attribute("xyz")), [1.0, 0.0, 0.0]),
            });
        }
        let children: Vec<&str> = joints.iter().map(|j| j.child.as_str()).collect();
        let root = doc
            .descendants()
            .filter(|n| n.has_tag_name("link"))
            .map(|l| l.attribute("name").unwrap())
            .find(|l| !children.contains(l))
            .unwrap()
            .to_string();
        Oracle { root, joints }
    }

    pub fn transforms(&self, state: &RobotState) -> HashMap<String, M4> {
        let mut out = HashMap::from([(self.root.clone(), rot3([[1., 0., 0.], [0., 1., 0.], [0., 0., 1.]], [0.0; 3]))]);
        while out.len() <= self.joints.len() {
            for j in &self.joints {
                if out.contains_key(&j.child) || !out.contains_key(&j.parent) {
                    continue;
                }
                let mut m = mul(&out[&j.parent], &j.origin);
                match j.kind.as_str() {
                    "fixed" => {}
                    "revolute" | "continuous" => m = mul(&m, &about_axis(j.axis, state.get(&j.name).unwrap())),
                    other => panic!("oracle does not model {other} joints"),
                }
                out.insert(j.child.clone(), m);
            }
        }
        out
    }
}

pub const FIXTURES: [&str; 6] = [
    "sample_arm.urdf",
    "dual_arm.urdf",
    "planar_2link.urdf",
    "planar_3link.urdf",
    "always_pair.urdf",
    "obstructed_2joint.urdf",
];

pub fn load(name: &str) -> RobotModel {
    robosetup_core::model::parse_urdf_file(&fixtures::fixture_path(name), Some(&fixtures::fixture_dir())).unwrap()
}

pub fn max_deviation(pose: &Pose, m: &M4) -> f64 {
    let pm = pose.to_matrix();
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for j in 0..4 {
            worst = worst.max((pm[(i, j)] - m[i][j]).abs());
        }
    }
    worst
}

/// Worst FK deviation over `count` seeded states spread across every fixture.
pub fn fk_worst(count: u64, seed: u64) -> f64 {
    let models: Vec<(RobotModel, Oracle)> = FIXTURES.iter().map(|f| (load(f), Oracle::load(f))).collect();
    let mut worst: f64 = 0.0;
    for i in 0..count {
        let (model, oracle) = &models[i as usize % models.len()];
        let state = sample_random_state(model, None, &mut indexed_rng(seed, i)).unwrap();
        let fk = forward_kinematics(model, &state).unwrap();
        let expected = oracle.transforms(&state);
        assert_eq!(fk.len(), expected.len());
        for (link, pose) in &fk {
            worst = worst.max(max_deviation(pose, &expected[link]));
        }
    }
    worst
}

/// Chain groups from the root to every link that ends a branch.
pub fn tip_groups(model: &RobotModel) -> Vec<JointGroup> {
    let mut out = Vec::new();
    for (li, link) in model.links().iter().enumerate() {
        let has_child = model.joints().iter().any(|j| j.parent_link == link.name);
        if has_child {
            continue;
        }
        let joints: Vec<String> = model
            .joints_to_link(li)
            .into_iter()
            .map(|j| &model.joints()[j])
            .filter(|j| j.is_active())
            .map(|j| j.name.clone())
            .collect();
        if joints.is_empty() {
            continue;
        }
        out.push(JointGroup::new(model, link.name.clone(), joints, vec![], true, Some(link.name.clone())).unwrap());
    }
    out
}

/// Worst |J - J_fd| entry over `count` seeded states.
pub fn jacobian_worst(count: u64, seed: u64) -> f64 {
    const H: f64 = 1e-6;
    let models: Vec<RobotModel> = FIXTURES.iter().map(|f| load(f)).collect();
    let mut worst: f64 = 0.0;
    for i in 0..count {
        let model = &models[i as usize % models.len()];
        let mut rng = indexed_rng(seed, i);
        for group in tip_groups(model) {
            let tip = group.tip_link.clone().unwrap();
            // keep the central difference inside the limits
            let mut state = sample_random_state(model, None, &mut rng).unwrap();
            for j in &group.joints {
                let lim = model.joint(j).unwrap().limits.unwrap();
                state.set(j, state.get(j).unwrap().clamp(lim.lower + 2.0 * H, lim.upper - 2.0 * H));
            }
            let jac = jacobian(model, &group, &state, &tip).unwrap();
            for (col, j) in group.joints.iter().enumerate() {
                let q = state.get(j).unwrap();
                let plus = forward_kinematics(model, &state.clone().with(j, q + H)).unwrap()[&tip];
                let minus = forward_kinematics(model, &state.clone().with(j, q - H)).unwrap()[&tip];
                let lin = (plus.translation - minus.translation) / (2.0 * H);
                let ang = (plus.rotation * minus.rotation.inverse()).scaled_axis() / (2.0 * H);
                for r in 0..3 {
                    worst = worst.max((jac[(r, col)] - lin[r]).abs());
                    worst = worst.max((jac[(r + 3, col)] - ang[r]).abs());
                }
            }
        }
    }
    worst
}

/// Seeded pose targets from random arm states of the sample arm, solved from the
/// default state. Returns (solved, worst position error, worst rotation error)
/// over the solutions.
pub fn ik_trials(count: u64, seed: u64) -> (usize, f64, f64) {
    let model = effective_model(&fixtures::sample_arm(), &fixtures::sample_arm_semantic()).unwrap();
    let group = resolve_group(&model, &fixtures::sample_arm_semantic(), "arm").unwrap();
    let tip = group.tip_link.clone().unwrap();
    let params = IkParams {
        seed,
        ..Default::default()
    };
    let seed_state = RobotState::from_vector(&model, &default_positions(&model));
    let (mut solved, mut worst_p, mut worst_r) = (0, 0.0f64, 0.0f64);
    for i in 0..count {
        let truth = sample_random_state(&model, Some(&group), &mut indexed_rng(seed, i)).unwrap();
        let target = forward_kinematics(&model, &truth).unwrap()[&tip];
        if let Some(sol) = solve_ik(&model, &group, &target, &seed_state, &params).unwrap() {
            let reached = forward_kinematics(&model, &sol).unwrap()[&tip];
            let (dp, dr) = reached.error_to(&target);
            worst_p = worst_p.max(dp);
            worst_r = worst_r.max(dr);
            solved += 1;
        }
    }
    (solved, worst_p, worst_r)
}
