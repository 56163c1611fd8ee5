//! Bundled sample robots used by the examples, tests and the quickstart.

use std::path::{Path, PathBuf};

use crate::collision::PlanningSceneWorld;
use crate::model::{parse_urdf, RobotModel};
use crate::srdf::{parse_srdf, SemanticModel};

pub const SAMPLE_ARM_URDF: &str = include_str!("../fixtures/sample_arm.urdf");
pub const SAMPLE_ARM_SRDF: &str = include_str!("../fixtures/sample_arm.srdf");
pub const DUAL_ARM_URDF: &str = include_str!("../fixtures/dual_arm.urdf");
pub const PLANAR_2LINK_URDF: &str = include_str!("../fixtures/planar_2link.urdf");
pub const PLANAR_3LINK_URDF: &str = include_str!("../fixtures/planar_3link.urdf");
pub const ALWAYS_PAIR_URDF: &str = include_str!("../fixtures/always_pair.urdf");
pub const OBSTRUCTED_2JOINT_URDF: &str = include_str!("../fixtures/obstructed_2joint.urdf");
pub const OBSTRUCTED_2JOINT_SRDF: &str = include_str!("../fixtures/obstructed_2joint.srdf");
pub const OBSTRUCTED_2JOINT_SCENE: &str = include_str!("../fixtures/obstructed_2joint.scene.json");

/// Directory holding the fixture files (and the mesh assets they reference).
pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn fixture_path(name: &str) -> PathBuf {
    fixture_dir().join(name)
}

fn load(doc: &str) -> RobotModel {
    parse_urdf(doc, Some(&fixture_dir())).expect("bundled fixture parses")
}

/// Six revolute joints, seven links, tool link meshed.
pub fn sample_arm() -> RobotModel {
    load(SAMPLE_ARM_URDF)
}

pub fn sample_arm_semantic() -> SemanticModel {
    parse_srdf(SAMPLE_ARM_SRDF, &sample_arm()).expect("bundled SRDF parses")
}

/// Two 2-joint arms and a torso joint, each on its own branch from the base.
pub fn dual_arm() -> RobotModel {
    load(DUAL_ARM_URDF)
}

pub fn planar_2link() -> RobotModel {
    load(PLANAR_2LINK_URDF)
}

/// Three small spheres on a two-joint chain; the outer links cannot meet.
pub fn planar_3link() -> RobotModel {
    load(PLANAR_3LINK_URDF)
}

/// Two concentric spheres rigidly attached through a geometry-less link.
pub fn always_pair() -> RobotModel {
    load(ALWAYS_PAIR_URDF)
}

pub fn obstructed_2joint() -> RobotModel {
    load(OBSTRUCTED_2JOINT_URDF)
}

/// Group `arm` over both joints, poses `left` and `right`, adjacent pairs disabled.
pub fn obstructed_2joint_semantic() -> SemanticModel {
    parse_srdf(OBSTRUCTED_2JOINT_SRDF, &obstructed_2joint()).expect("bundled SRDF parses")
}

/// A pillar that blocks the straight motion from `left` to `right`.
pub fn obstructed_2joint_scene() -> PlanningSceneWorld {
    PlanningSceneWorld::from_json(OBSTRUCTED_2JOINT_SCENE).expect("bundled scene parses")
}
