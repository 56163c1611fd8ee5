//! The robot description: an immutable kinematic tree of links and joints.

mod urdf;
mod validate;

use std::collections::HashMap;
use std::f64::consts::PI;
use std::ops::Range;

use nalgebra::Vector3;
use serde::Serialize;
use thiserror::Error;

use crate::pose::Pose;
use crate::shape::{Shape, ShapeError};

pub use urdf::{parse_urdf, parse_urdf_file};
pub use validate::validate_model;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("malformed XML: {0}")]
    Xml(String),
    #[error("<{element}> is missing attribute `{attribute}`")]
    MissingAttribute { element: String, attribute: String },
    #[error("<{element}>: invalid value `{value}` for `{attribute}`")]
    InvalidValue {
        element: String,
        attribute: String,
        value: String,
    },
    #[error("duplicate link `{0}`")]
    DuplicateLink(String),
    #[error("duplicate joint `{0}`")]
    DuplicateJoint(String),
    #[error("joint `{joint}` references undeclared link `{link}`")]
    DanglingReference { joint: String, link: String },
    #[error("link `{link}` is the child of both `{first}` and `{second}`")]
    MultipleParents {
        link: String,
        first: String,
        second: String,
    },
    #[error("model has multiple root links: {}", .0.join(", "))]
    MultipleRoots(Vec<String>),
    #[error("model has no root link (every link is a child)")]
    NoRoot,
    #[error("links not reachable from the root (cycle): {}", .0.join(", "))]
    Cycle(Vec<String>),
    #[error("joint `{0}` requires <limit> with lower and upper")]
    MissingLimits(String),
    #[error("joint `{joint}`: lower limit {lower} exceeds upper limit {upper}")]
    InvalidLimits { joint: String, lower: f64, upper: f64 },
    #[error("joint `{joint}` has unknown type `{kind}`")]
    UnknownJointType { joint: String, kind: String },
    #[error("joint `{0}` has a zero-length axis")]
    ZeroAxis(String),
    #[error("{element}: {source}")]
    Shape {
        element: String,
        #[source]
        source: ShapeError,
    },
    #[error("model has no links")]
    Empty,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JointKind {
    Fixed,
    Revolute,
    Continuous,
    Prismatic,
    Floating,
    Planar,
}

impl JointKind {
    pub fn parse(s: &str) -> Option<JointKind> {
        Some(match s {
            "fixed" => JointKind::Fixed,
            "revolute" => JointKind::Revolute,
            "continuous" => JointKind::Continuous,
            "prismatic" => JointKind::Prismatic,
            "floating" => JointKind::Floating,
            "planar" => JointKind::Planar,
            _ => return None,
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            JointKind::Fixed => "fixed",
            JointKind::Revolute => "revolute",
            JointKind::Continuous => "continuous",
            JointKind::Prismatic => "prismatic",
            JointKind::Floating => "floating",
            JointKind::Planar => "planar",
        }
    }

    /// Names of the position variables relative to the joint name.
    fn variable_suffixes(&self) -> &'static [&'static str] {
        match self {
            JointKind::Fixed => &[],
            JointKind::Revolute | JointKind::Continuous | JointKind::Prismatic => &[""],
            JointKind::Planar => &["/x", "/y", "/theta"],
            JointKind::Floating => &["/trans_x", "/trans_y", "/trans_z", "/rot_x", "/rot_y", "/rot_z"],
        }
    }

    pub fn translation_dims(&self) -> usize {
        match self {
            JointKind::Planar => 2,
            JointKind::Floating => 3,
            _ => 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JointLimits {
    pub lower: f64,
    pub upper: f64,
    pub velocity: Option<f64>,
    pub effort: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Geometry {
    pub shape: Shape,
    pub origin: Pose,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Link {
    pub name: String,
    pub collision: Vec<Geometry>,
    pub visual: Vec<Geometry>,
}

impl Link {
    pub fn new(name: impl Into<String>) -> Link {
        Link {
            name: name.into(),
            collision: Vec::new(),
            visual: Vec::new(),
        }
    }

    /// Adds the same shape as both collision and visual geometry.
    pub fn with_geometry(mut self, shape: Shape, origin: Pose) -> Link {
        self.collision.push(Geometry { shape: shape.clone(), origin });
        self.visual.push(Geometry { shape, origin });
        self
    }

    pub fn has_collision(&self) -> bool {
        !self.collision.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Joint {
    pub name: String,
    pub kind: JointKind,
    pub parent_link: String,
    pub child_link: String,
    pub origin: Pose,
    /// Unit axis in the joint frame (meaningful for revolute, continuous and prismatic).
    pub axis: Vector3<f64>,
    pub limits: Option<JointLimits>,
    /// Source joint when this joint is declared as a mimic; such joints are held at zero.
    pub mimic: Option<String>,
    /// Bounds for the translational variables of planar/floating joints.
    pub workspace: Vec<(f64, f64)>,
}

impl Joint {
    pub fn new(
        name: impl Into<String>,
        kind: JointKind,
        parent: impl Into<String>,
        child: impl Into<String>,
        origin: Pose,
    ) -> Joint {
        Joint {
            name: name.into(),
            kind,
            parent_link: parent.into(),
            child_link: child.into(),
            origin,
            axis: Vector3::x(),
            limits: None,
            mimic: None,
            workspace: Vec::new(),
        }
    }

    pub fn with_axis(mut self, axis: Vector3<f64>) -> Joint {
        self.axis = axis;
        self
    }

    pub fn with_limits(mut self, lower: f64, upper: f64, velocity: Option<f64>) -> Joint {
        self.limits = Some(JointLimits {
            lower,
            upper,
            velocity,
            effort: None,
        });
        self
    }

    pub fn is_active(&self) -> bool {
        self.kind != JointKind::Fixed && self.mimic.is_none()
    }

    pub fn max_velocity(&self) -> Option<f64> {
        self.limits.and_then(|l| l.velocity).filter(|v| *v > 0.0)
    }
}

/// Sampling domain of one position variable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VariableBounds {
    Interval(f64, f64),
    /// Angle on the circle, represented in (-pi, pi].
    Circle,
    /// Translation of a floating/planar joint without declared workspace bounds.
    Unbounded,
}

impl VariableBounds {
    pub fn range(&self) -> Option<f64> {
        match *self {
            VariableBounds::Interval(lo, hi) => Some(hi - lo),
            VariableBounds::Circle => Some(2.0 * PI),
            VariableBounds::Unbounded => None,
        }
    }

    pub fn midpoint(&self) -> f64 {
        match *self {
            VariableBounds::Interval(lo, hi) => 0.5 * (lo + hi),
            _ => 0.0,
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        match *self {
            VariableBounds::Interval(lo, hi) => v >= lo && v <= hi,
            _ => v.is_finite(),
        }
    }
}

/// One scalar position variable of the model.
#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub joint: usize,
    pub bounds: VariableBounds,
}

/// Default workspace half-width for virtual-joint translations, meters.
pub const DEFAULT_WORKSPACE_HALF_WIDTH: f64 = 1.0;

#[derive(Clone, Debug, Serialize)]
pub struct RobotModel {
    name: String,
    links: Vec<Link>,
    joints: Vec<Joint>,
    root_link: String,
    active_joints: Vec<String>,
    #[serde(skip)]
    warnings: Vec<String>,
    #[serde(skip)]
    index: ModelIndex,
}

#[derive(Clone, Debug, Default)]
struct ModelIndex {
    link_by_name: HashMap<String, usize>,
    joint_by_name: HashMap<String, usize>,
    /// Per link: the joint whose child it is.
    parent_joint: Vec<Option<usize>>,
    /// Per link: joints whose parent it is, in document order.
    child_joints: Vec<Vec<usize>>,
    /// All joints, depth-first from the root.
    joint_order: Vec<usize>,
    root: usize,
    variables: Vec<Variable>,
    joint_variables: Vec<Range<usize>>,
    variable_by_name: HashMap<String, usize>,
}

impl PartialEq for RobotModel {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.links == other.links
            && self.joints == other.joints
            && self.root_link == other.root_link
            && self.active_joints == other.active_joints
    }
}

impl RobotModel {
    /// Builds a model, checking the tree invariants.
    pub fn new(
        name: impl Into<String>,
        links: Vec<Link>,
        joints: Vec<Joint>,
        warnings: Vec<String>,
    ) -> Result<RobotModel, ModelError> {
        if links.is_empty() {
            return Err(ModelError::Empty);
        }
        let mut link_by_name = HashMap::new();
        for (i, l) in links.iter().enumerate() {
            if link_by_name.insert(l.name.clone(), i).is_some() {
                return Err(ModelError::DuplicateLink(l.name.clone()));
            }
        }
        let mut joint_by_name = HashMap::new();
        let mut parent_joint: Vec<Option<usize>> = vec![None; links.len()];
        let mut child_joints: Vec<Vec<usize>> = vec![Vec::new(); links.len()];
        for (ji, j) in joints.iter().enumerate() {
            if joint_by_name.insert(j.name.clone(), ji).is_some() {
                return Err(ModelError::DuplicateJoint(j.name.clone()));
            }
            let p = *link_by_name.get(&j.parent_link).ok_or_else(|| ModelError::DanglingReference {
                joint: j.name.clone(),
                link: j.parent_link.clone(),
            })?;
            let c = *link_by_name.get(&j.child_link).ok_or_else(|| ModelError::DanglingReference {
                joint: j.name.clone(),
                link: j.child_link.clone(),
            })?;
            if let Some(prev) = parent_joint[c] {
                return Err(ModelError::MultipleParents {
                    link: j.child_link.clone(),
                    first: joints[prev].name.clone(),
                    second: j.name.clone(),
                });
            }
            parent_joint[c] = Some(ji);
            child_joints[p].push(ji);
            check_joint(j)?;
        }
        let roots: Vec<usize> = (0..links.len()).filter(|&i| parent_joint[i].is_none()).collect();
        let root = match roots.as_slice() {
            [] => return Err(ModelError::NoRoot),
            [r] => *r,
            many => {
                return Err(ModelError::MultipleRoots(
                    many.iter().map(|&i| links[i].name.clone()).collect(),
                ))
            }
        };

        let mut joint_order = Vec::with_capacity(joints.len());
        let mut reached = vec![false; links.len()];
        let mut stack = vec![root];
        while let Some(l) = stack.pop() {
            reached[l] = true;
            // push in reverse so that document order is visited first
            for &ji in child_joints[l].iter().rev() {
                stack.push(link_by_name[&joints[ji].child_link]);
            }
            if let Some(pj) = parent_joint[l] {
                joint_order.push(pj);
            }
        }
        if reached.iter().any(|r| !r) {
            return Err(ModelError::Cycle(
                (0..links.len()).filter(|&i| !reached[i]).map(|i| links[i].name.clone()).collect(),
            ));
        }

        let active_joints: Vec<String> = joint_order
            .iter()
            .filter(|&&ji| joints[ji].is_active())
            .map(|&ji| joints[ji].name.clone())
            .collect();

        let mut variables = Vec::new();
        let mut joint_variables = vec![0..0; joints.len()];
        for name in &active_joints {
            let ji = joint_by_name[name];
            let j = &joints[ji];
            let start = variables.len();
            for (k, suffix) in j.kind.variable_suffixes().iter().enumerate() {
                let bounds = match j.kind {
                    JointKind::Revolute | JointKind::Prismatic => {
                        let l = j.limits.expect("checked");
                        VariableBounds::Interval(l.lower, l.upper)
                    }
                    JointKind::Continuous => VariableBounds::Circle,
                    JointKind::Planar | JointKind::Floating => {
                        if k < j.kind.translation_dims() {
                            j.workspace
                                .get(k)
                                .map(|&(lo, hi)| VariableBounds::Interval(lo, hi))
                                .unwrap_or(VariableBounds::Unbounded)
                        } else {
                            VariableBounds::Circle
                        }
                    }
                    JointKind::Fixed => unreachable!(),
                };
                variables.push(Variable {
                    name: format!("{name}{suffix}"),
                    joint: ji,
                    bounds,
                });
            }
            joint_variables[ji] = start..variables.len();
        }
        let variable_by_name = variables.iter().enumerate().map(|(i, v)| (v.name.clone(), i)).collect();

        Ok(RobotModel {
            name: name.into(),
            root_link: links[root].name.clone(),
            links,
            joints,
            active_joints,
            warnings,
            index: ModelIndex {
                link_by_name,
                joint_by_name,
                parent_joint,
                child_joints,
                joint_order,
                root,
                variables,
                joint_variables,
                variable_by_name,
            },
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn root_link(&self) -> &str {
        &self.root_link
    }

    pub fn root_index(&self) -> usize {
        self.index.root
    }

    /// Non-fixed, non-mimic joints, depth-first from the root.
    pub fn active_joints(&self) -> &[String] {
        &self.active_joints
    }

    /// Parse-time warnings (ignored elements and the like).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn link(&self, name: &str) -> Option<&Link> {
        self.link_index(name).map(|i| &self.links[i])
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.index.link_by_name.get(name).copied()
    }

    pub fn joint(&self, name: &str) -> Option<&Joint> {
        self.joint_index(name).map(|i| &self.joints[i])
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.index.joint_by_name.get(name).copied()
    }

    pub fn parent_joint_of(&self, link: usize) -> Option<usize> {
        self.index.parent_joint[link]
    }

    pub fn child_joints_of(&self, link: usize) -> &[usize] {
        &self.index.child_joints[link]
    }

    pub fn joint_parent_link(&self, joint: usize) -> usize {
        self.index.link_by_name[&self.joints[joint].parent_link]
    }

    pub fn joint_child_link(&self, joint: usize) -> usize {
        self.index.link_by_name[&self.joints[joint].child_link]
    }

    /// All joints in depth-first order from the root (parents before children).
    pub fn joint_order(&self) -> &[usize] {
        &self.index.joint_order
    }

    pub fn variables(&self) -> &[Variable] {
        &self.index.variables
    }

    pub fn variable_count(&self) -> usize {
        self.index.variables.len()
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.index.variable_by_name.get(name).copied()
    }

    /// Variable indices belonging to a joint (empty for fixed and mimic joints).
    pub fn joint_variables(&self, joint: usize) -> Range<usize> {
        self.index.joint_variables[joint].clone()
    }

    /// Joints from the root down to `link`, root first.
    pub fn joints_to_link(&self, link: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = link;
        while let Some(j) = self.index.parent_joint[cur] {
            out.push(j);
            cur = self.joint_parent_link(j);
        }
        out.reverse();
        out
    }

    /// True when `ancestor` lies on the path from the root to `link` (or equals it).
    pub fn is_ancestor_link(&self, ancestor: usize, link: usize) -> bool {
        let mut cur = link;
        loop {
            if cur == ancestor {
                return true;
            }
            match self.index.parent_joint[cur] {
                Some(j) => cur = self.joint_parent_link(j),
                None => return false,
            }
        }
    }

    /// Links in depth-first order from the root.
    pub fn link_order(&self) -> Vec<usize> {
        std::iter::once(self.index.root)
            .chain(self.index.joint_order.iter().map(|&j| self.joint_child_link(j)))
            .collect()
    }

    /// Returns a copy of this model whose root is attached to a new `parent_frame`
    /// link through a virtual joint.
    pub fn with_virtual_joint(
        &self,
        name: &str,
        kind: JointKind,
        parent_frame: &str,
        workspace: Vec<(f64, f64)>,
    ) -> Result<RobotModel, ModelError> {
        let mut links = vec![Link::new(parent_frame)];
        links.extend(self.links.iter().cloned());
        let mut joints = vec![Joint {
            workspace,
            ..Joint::new(name, kind, parent_frame, self.root_link.clone(), Pose::identity())
        }];
        joints.extend(self.joints.iter().cloned());
        RobotModel::new(self.name.clone(), links, joints, self.warnings.clone())
    }
}

fn check_joint(j: &Joint) -> Result<(), ModelError> {
    match j.kind {
        JointKind::Revolute | JointKind::Prismatic => {
            let l = j.limits.ok_or_else(|| ModelError::MissingLimits(j.name.clone()))?;
            if !(l.lower <= l.upper) {
                return Err(ModelError::InvalidLimits {
                    joint: j.name.clone(),
                    lower: l.lower,
                    upper: l.upper,
                });
            }
        }
        _ => {}
    }
    if matches!(j.kind, JointKind::Revolute | JointKind::Continuous | JointKind::Prismatic)
        && (j.axis.norm() - 1.0).abs() > 1e-9
    {
        return Err(ModelError::ZeroAxis(j.name.clone()));
    }
    for &(lo, hi) in &j.workspace {
        if !(lo <= hi) {
            return Err(ModelError::InvalidLimits {
                joint: j.name.clone(),
                lower: lo,
                upper: hi,
            });
        }
    }
    Ok(())
}

/// All unordered pairs of distinct links that both carry collision geometry,
/// each as `(a, b)` with `a < b`, sorted lexicographically.
pub fn collidable_pairs(model: &RobotModel) -> Vec<(String, String)> {
    let mut names: Vec<&str> = model
        .links()
        .iter()
        .filter(|l| l.has_collision())
        .map(|l| l.name.as_str())
        .collect();
    names.sort_unstable();
    let mut out = Vec::with_capacity(names.len() * names.len().saturating_sub(1) / 2);
    for (i, a) in names.iter().enumerate() {
        for b in &names[i + 1..] {
            out.push((a.to_string(), b.to_string()));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere_link(name: &str) -> Link {
        Link::new(name).with_geometry(Shape::sphere(0.1).unwrap(), Pose::identity())
    }

    fn rev(name: &str, p: &str, c: &str) -> Joint {
        Joint::new(name, JointKind::Revolute, p, c, Pose::identity())
            .with_axis(Vector3::z())
            .with_limits(-1.0, 1.0, None)
    }

    #[test]
    fn collidable_pair_counts() {
        let m = RobotModel::new(
            "t",
            vec![sphere_link("c"), sphere_link("a"), sphere_link("b")],
            vec![rev("j1", "c", "a"), rev("j2", "a", "b")],
            vec![],
        )
        .unwrap();
        let pairs = collidable_pairs(&m);
        assert_eq!(
            pairs,
            vec![
                ("a".to_string(), "b".to_string()),
                ("a".to_string(), "c".to_string()),
                ("b".to_string(), "c".to_string())
            ]
        );
        let m = RobotModel::new(
            "t",
            vec![sphere_link("c"), Link::new("a"), sphere_link("b")],
            vec![rev("j1", "c", "a"), rev("j2", "a", "b")],
            vec![],
        )
        .unwrap();
        assert_eq!(collidable_pairs(&m).len(), 1);
    }

    #[test]
    fn tree_errors() {
        let links = || vec![sphere_link("a"), sphere_link("b"), sphere_link("c")];
        let e = RobotModel::new("t", links(), vec![rev("j1", "a", "b")], vec![]).unwrap_err();
        assert!(matches!(e, ModelError::MultipleRoots(ref r) if r == &["a", "c"]));
        let e = RobotModel::new(
            "t",
            links(),
            vec![rev("j1", "a", "b"), rev("j2", "c", "b")],
            vec![],
        )
        .unwrap_err();
        assert!(matches!(e, ModelError::MultipleParents { .. }));
        let e = RobotModel::new(
            "t",
            links(),
            vec![rev("j1", "a", "b"), rev("j2", "b", "c"), rev("j3", "c", "a")],
            vec![],
        )
        .unwrap_err();
        assert!(matches!(e, ModelError::NoRoot));
        let e = RobotModel::new(
            "t",
            vec![sphere_link("a"), sphere_link("b"), sphere_link("c"), sphere_link("d")],
            vec![rev("j1", "a", "b"), rev("j2", "c", "d"), rev("j3", "d", "c")],
            vec![],
        )
        .unwrap_err();
        assert!(matches!(e, ModelError::MultipleParents { .. } | ModelError::Cycle(_)));
    }

    #[test]
    fn virtual_joint_variables() {
        let m = RobotModel::new("t", vec![sphere_link("base")], vec![], vec![]).unwrap();
        let v = m
            .with_virtual_joint("vj", JointKind::Planar, "world", vec![(-1.0, 1.0), (-2.0, 2.0)])
            .unwrap();
        assert_eq!(v.root_link(), "world");
        let names: Vec<_> = v.variables().iter().map(|v| v.name.as_str()).collect();
        assert_eq!(names, ["vj/x", "vj/y", "vj/theta"]);
        assert_eq!(v.variables()[1].bounds, VariableBounds::Interval(-2.0, 2.0));
        assert_eq!(v.variables()[2].bounds, VariableBounds::Circle);
        let f = m.with_virtual_joint("vj", JointKind::Floating, "world", vec![]).unwrap();
        assert_eq!(f.variable_count(), 6);
        assert_eq!(f.variables()[0].bounds, VariableBounds::Unbounded);
    }
}
