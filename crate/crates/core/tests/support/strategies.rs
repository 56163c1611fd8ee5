//! Property-test generators for semantic descriptions and planning scenes.

use nalgebra::Point3;
use proptest::prelude::*;
use robosetup_core::collision::{AcmEntry, AcmReason, PairStats, PlanningSceneWorld, WorldObject};
use robosetup_core::kinematics::RobotState;
use robosetup_core::model::RobotModel;
use robosetup_core::pose::XyzRpy;
use robosetup_core::shape::Shape;
use robosetup_core::srdf::*;

pub fn name() -> impl Strategy<Value = String> {
    "[a-z][a-zA-Z0-9_&<>\"' .-]{0,10}"
}

pub fn semantic(m: &RobotModel) -> impl Strategy<Value = SemanticModel> {
    let joints: Vec<String> = m.joints().iter().map(|j| j.name.clone()).collect();
    let links: Vec<String> = m.links().iter().map(|l| l.name.clone()).collect();
    let vars: Vec<String> = m.variables().iter().map(|v| v.name.clone()).collect();
    let pick = |v: &Vec<String>| proptest::sample::select(v.clone());
    let group = (
        proptest::collection::vec(pick(&joints), 0..4),
        proptest::collection::vec(pick(&links), 0..3),
        proptest::collection::vec((pick(&links), pick(&links)), 0..2),
        proptest::collection::vec(name(), 0..2),
    );
    let groups = proptest::collection::btree_map(name(), group, 0..4);
    let value = prop_oneof![any::<f64>().prop_filter("finite", |x| x.is_finite()), -3.0..3.0f64];
    let state = (name(), name(), proptest::collection::btree_map(pick(&vars), value, 0..6));
    let ee = (name(), name(), pick(&links), proptest::option::of(name()));
    let ws = proptest::collection::vec((-5.0..0.0f64, 0.0..5.0f64), 3);
    let vj = (
        name(),
        prop_oneof![
            Just(VirtualJointKind::Fixed),
            Just(VirtualJointKind::Planar),
            Just(VirtualJointKind::Floating)
        ],
        name(),
        pick(&links),
        proptest::option::of(ws),
    );
    let reason = proptest::sample::select(AcmReason::ALL.to_vec());
    let pair = (pick(&links), pick(&links), reason, proptest::option::of((0u64..100_000, 0u64..100_000)));
    (
        name(),
        groups,
        proptest::collection::vec(state, 0..4),
        proptest::collection::vec(ee, 0..3),
        proptest::collection::vec(vj, 0..2),
        proptest::collection::vec(pick(&joints), 0..3),
        proptest::collection::vec(pair, 0..8),
    )
        .prop_map(|(robot, groups, states, ees, vjs, passive, pairs)| {
            let mut s = SemanticModel::new(robot);
            for (name, (joints, links, chains, subgroups)) in groups {
                s.groups.push(PlanningGroup {
                    name,
                    joints,
                    links,
                    chains: chains
                        .into_iter()
                        .map(|(base_link, tip_link)| Chain { base_link, tip_link })
                        .collect(),
                    subgroups,
                });
            }
            for (name, group, values) in states {
                s.group_states.push(GroupState {
                    name,
                    group,
                    values: values.into_iter().collect::<RobotState>(),
                });
            }
            for (name, group, parent_link, parent_group) in ees {
                s.end_effectors.push(EndEffector {
                    name,
                    group,
                    parent_link,
                    parent_group,
                });
            }
            for (name, kind, parent_frame, child_link, ws) in vjs {
                let dims = kind.joint_kind().translation_dims();
                s.virtual_joints.push(VirtualJoint {
                    name,
                    kind,
                    parent_frame,
                    child_link,
                    workspace: ws.map(|w| w[..dims].to_vec()),
                });
            }
            s.passive_joints = passive;
            for (a, b, reason, stats) in pairs {
                if a == b {
                    continue;
                }
                let stats = match (reason.requires_stats(), stats) {
                    (true, None) => Some(PairStats { samples: 1, collisions: 0 }),
                    (_, s) => s.map(|(samples, collisions)| PairStats { samples, collisions }),
                };
                s.disabled_pairs
                    .set(&a, &b, AcmEntry { disabled: true, reason, stats })
                    .unwrap();
            }
            s
        })
}

pub fn finite(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    prop_oneof![lo..hi, Just(0.0), Just(-0.0), Just(1e-300), Just(0.1 + 0.2)]
}

pub fn shape() -> impl Strategy<Value = Shape> {
    prop_oneof![
        (1e-6..10.0f64).prop_map(|r| Shape::sphere(r).unwrap()),
        [1e-6..10.0f64, 1e-6..10.0, 1e-6..10.0].prop_map(|s| Shape::cuboid(s).unwrap()),
        (1e-6..10.0f64, 1e-6..10.0f64).prop_map(|(r, l)| Shape::cylinder(r, l).unwrap()),
        proptest::collection::vec([-1.0..1.0f64, -1.0..1.0, -1.0..1.0], 4..12).prop_filter_map("degenerate", |v| {
            let pts: Vec<Point3<f64>> = v.iter().map(|p| Point3::new(p[0], p[1], p[2])).collect();
            Shape::convex_mesh(&pts).ok()
        }),
    ]
}

pub fn world() -> impl Strategy<Value = PlanningSceneWorld> {
    let pose = ([finite(-5.0, 5.0), finite(-5.0, 5.0), finite(-5.0, 5.0)], [finite(-3.2, 3.2), finite(-3.2, 3.2), finite(-3.2, 3.2)])
        .prop_map(|(xyz, rpy)| XyzRpy { xyz, rpy });
    proptest::collection::btree_map("[a-z_]{1,8}", (shape(), pose), 0..5).prop_map(|objs| {
        let mut w = PlanningSceneWorld::new();
        for (name, (shape, pose)) in objs {
            w.add(WorldObject { name, shape, pose }).unwrap();
        }
        w
    })
}
