//! Forward kinematics, Jacobians, numerical IK, random sampling and the
//! configuration-space quantities used for automatic tuning.

mod ik;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, Unit, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{JointKind, RobotModel, VariableBounds};
use crate::pose::Pose;

pub use ik::{solve_ik, IkParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("state has no value for `{0}`")]
    MissingJoint(String),
    #[error("`{variable}` = {value} is outside its limits [{lower}, {upper}]")]
    OutOfLimits {
        variable: String,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("`{0}` is not a joint of the model")]
    UnknownJoint(String),
    #[error("`{0}` is not a link of the model")]
    UnknownLink(String),
    #[error("link `{tip}` is not driven by every joint of group `{group}`")]
    TipNotInChain { tip: String, group: String },
    #[error("group `{0}` is not a serial chain")]
    NotAChain(String),
    #[error("`{0}` has no bounds; declare workspace bounds before sampling")]
    Unbounded(String),
    #[error("group `{0}` has no active joints")]
    EmptyGroup(String),
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
}

/// Joint positions keyed by variable name (a joint name for single-dof joints,
/// `joint/x` style names for planar and floating joints).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RobotState(BTreeMap<String, f64>);

impl RobotState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn set(&mut self, name: impl Into<String>, value: f64) {
        self.0.insert(name.into(), value);
    }

    pub fn with(mut self, name: impl Into<String>, value: f64) -> Self {
        self.set(name, value);
        self
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &f64)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn remove(&mut self, name: &str) -> Option<f64> {
        self.0.remove(name)
    }

    /// Full state from a vector in model variable order.
    pub fn from_vector(model: &RobotModel, q: &[f64]) -> Self {
        RobotState(
            model
                .variables()
                .iter()
                .zip(q)
                .map(|(v, x)| (v.name.clone(), *x))
                .collect(),
        )
    }

    /// Vector in model variable order; every variable must be present and within limits.
    pub fn to_vector(&self, model: &RobotModel) -> Result<Vec<f64>, KinematicsError> {
        let q = self.to_vector_unchecked(model)?;
        check_limits(model, &q)?;
        Ok(q)
    }

    /// Like [`RobotState::to_vector`] without the limit check.
    pub fn to_vector_unchecked(&self, model: &RobotModel) -> Result<Vec<f64>, KinematicsError> {
        model
            .variables()
            .iter()
            .map(|v| self.get(&v.name).ok_or_else(|| KinematicsError::MissingJoint(v.name.clone())))
            .collect()
    }

    /// Overlays this (possibly partial) state onto `base`; unknown names are rejected.
    pub fn overlay(&self, model: &RobotModel, base: &[f64]) -> Result<Vec<f64>, KinematicsError> {
        let mut q = base.to_vec();
        for (name, value) in &self.0 {
            let i = model
                .variable_index(name)
                .ok_or_else(|| KinematicsError::UnknownJoint(name.clone()))?;
            q[i] = *value;
        }
        Ok(q)
    }
}

impl FromIterator<(String, f64)> for RobotState {
    fn from_iter<T: IntoIterator<Item = (String, f64)>>(iter: T) -> Self {
        RobotState(iter.into_iter().collect())
    }
}

pub fn check_limits(model: &RobotModel, q: &[f64]) -> Result<(), KinematicsError> {
    for (v, &x) in model.variables().iter().zip(q) {
        if !v.bounds.contains(x) {
            let (lower, upper) = match v.bounds {
                VariableBounds::Interval(lo, hi) => (lo, hi),
                _ => (f64::NEG_INFINITY, f64::INFINITY),
            };
            return Err(KinematicsError::OutOfLimits {
                variable: v.name.clone(),
                value: x,
                lower,
                upper,
            });
        }
    }
    Ok(())
}

/// Wraps an angle into (-pi, pi].
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a % (2.0 * PI);
    if r <= -PI {
        r += 2.0 * PI;
    } else if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Clamps interval variables into their limits and wraps circular ones.
pub fn enforce_bounds(model: &RobotModel, q: &mut [f64]) {
    for (v, x) in model.variables().iter().zip(q.iter_mut()) {
        match v.bounds {
            VariableBounds::Interval(lo, hi) => *x = x.clamp(lo, hi),
            VariableBounds::Circle => *x = normalize_angle(*x),
            VariableBounds::Unbounded => {}
        }
    }
}

/// Midpoint of every interval, zero elsewhere.
pub fn default_positions(model: &RobotModel) -> Vec<f64> {
    model.variables().iter().map(|v| v.bounds.midpoint()).collect()
}

pub fn default_state(model: &RobotModel) -> RobotState {
    RobotState::from_vector(model, &default_positions(model))
}

/// A resolved set of joints that planning operates on.
#[derive(Clone, Debug, PartialEq)]
pub struct JointGroup {
    pub name: String,
    /// Active joints in chain order (or depth-first model order).
    pub joints: Vec<String>,
    pub links: Vec<String>,
    pub is_chain: bool,
    pub base_link: String,
    pub tip_link: Option<String>,
    variables: Vec<usize>,
}

impl JointGroup {
    pub fn new(
        model: &RobotModel,
        name: impl Into<String>,
        joints: Vec<String>,
        links: Vec<String>,
        is_chain: bool,
        tip_link: Option<String>,
    ) -> Result<JointGroup, KinematicsError> {
        let name = name.into();
        let mut variables = Vec::new();
        for j in &joints {
            let ji = model.joint_index(j).ok_or_else(|| KinematicsError::UnknownJoint(j.clone()))?;
            variables.extend(model.joint_variables(ji));
        }
        if variables.is_empty() {
            return Err(KinematicsError::EmptyGroup(name));
        }
        let base_link = model.joint(&joints[0]).map(|j| j.parent_link.clone()).unwrap_or_default();
        Ok(JointGroup {
            name,
            joints,
            links,
            is_chain,
            base_link,
            tip_link,
            variables,
        })
    }

    /// Every active joint of the model.
    pub fn whole_robot(model: &RobotModel) -> Result<JointGroup, KinematicsError> {
        let links = model.link_order().into_iter().map(|i| model.links()[i].name.clone()).collect();
        JointGroup::new(model, "all", model.active_joints().to_vec(), links, false, None)
    }

    /// Indices into the model variable vector, in group order.
    pub fn variables(&self) -> &[usize] {
        &self.variables
    }

    pub fn dof(&self) -> usize {
        self.variables.len()
    }

    pub fn variable_names<'m>(&self, model: &'m RobotModel) -> Vec<&'m str> {
        self.variables.iter().map(|&i| model.variables()[i].name.as_str()).collect()
    }

    pub fn extract(&self, q: &[f64]) -> Vec<f64> {
        self.variables.iter().map(|&i| q[i]).collect()
    }

    pub fn insert(&self, q: &mut [f64], values: &[f64]) {
        for (&i, v) in self.variables.iter().zip(values) {
            q[i] = *v;
        }
    }

    /// Weighted (unit weights) joint-space L2 distance over the group's variables.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.variables
            .iter()
            .map(|&i| (a[i] - b[i]).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Joint-space L2 distance between two group vectors.
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn joint_motion(kind: JointKind, axis: &Vector3<f64>, v: &[f64]) -> Pose {
    match kind {
        JointKind::Fixed => Pose::identity(),
        JointKind::Revolute | JointKind::Continuous => match v.first() {
            Some(a) => Pose::new(
                Vector3::zeros(),
                UnitQuaternion::from_axis_angle(&Unit::new_unchecked(*axis), *a),
            ),
            None => Pose::identity(),
        },
        JointKind::Prismatic => match v.first() {
            Some(d) => Pose::new(axis * *d, UnitQuaternion::identity()),
            None => Pose::identity(),
        },
        JointKind::Planar => Pose::new(
            Vector3::new(v[0], v[1], 0.0),
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), v[2]),
        ),
        JointKind::Floating => Pose::new(
            Vector3::new(v[0], v[1], v[2]),
            UnitQuaternion::from_euler_angles(v[3], v[4], v[5]),
        ),
    }
}

/// World pose of every link (indexed like `model.links()`) for a variable vector.
/// No limit check.
pub fn link_poses(model: &RobotModel, q: &[f64]) -> Vec<Pose> {
    let mut poses = vec![Pose::identity(); model.links().len()];
    for &ji in model.joint_order() {
        let j = &model.joints()[ji];
        let parent = poses[model.joint_parent_link(ji)];
        let motion = joint_motion(j.kind, &j.axis, &q[model.joint_variables(ji)]);
        poses[model.joint_child_link(ji)] = parent.compose(&j.origin).compose(&motion);
    }
    poses
}

/// World pose of every link, keyed by link name.
pub fn forward_kinematics(model: &RobotModel, state: &RobotState) -> Result<BTreeMap<String, Pose>, KinematicsError> {
    let q = state.to_vector(model)?;
    Ok(link_poses(model, &q)
        .into_iter()
        .zip(model.links())
        .map(|(p, l)| (l.name.clone(), p))
        .collect())
}

/// Geometric Jacobian of `tip_link` with respect to the group's variables: 6×n, linear
/// rows first, expressed in the world frame at the tip origin.
pub fn jacobian(
    model: &RobotModel,
    group: &JointGroup,
    state: &RobotState,
    tip_link: &str,
) -> Result<DMatrix<f64>, KinematicsError> {
    let tip = model
        .link_index(tip_link)
        .ok_or_else(|| KinematicsError::UnknownLink(tip_link.to_string()))?;
    check_tip(model, group, tip)?;
    let q = state.to_vector(model)?;
    Ok(jacobian_at(model, group, &q, tip, &link_poses(model, &q)))
}

pub(crate) fn check_tip(model: &RobotModel, group: &JointGroup, tip: usize) -> Result<(), KinematicsError> {
    for j in &group.joints {
        let ji = model.joint_index(j).ok_or_else(|| KinematicsError::UnknownJoint(j.clone()))?;
        if !model.is_ancestor_link(model.joint_child_link(ji), tip) {
            return Err(KinematicsError::TipNotInChain {
                tip: model.links()[tip].name.clone(),
                group: group.name.clone(),
            });
        }
    }
    Ok(())
}

pub(crate) fn jacobian_at(model: &RobotModel, group: &JointGroup, q: &[f64], tip: usize, poses: &[Pose]) -> DMatrix<f64> {
    let p_tip = poses[tip].translation;
    let mut jac = DMatrix::zeros(6, group.dof());
    let mut col = 0;
    for name in &group.joints {
        let ji = model.joint_index(name).expect("group joints resolve");
        let j = &model.joints()[ji];
        let frame = poses[model.joint_parent_link(ji)].compose(&j.origin);
        let rot = frame.rotation;
        let vars = &q[model.joint_variables(ji)];
        let mut put = |col: usize, lin: Vector3<f64>, ang: Vector3<f64>| {
            jac.fixed_view_mut::<3, 1>(0, col).copy_from(&lin);
            jac.fixed_view_mut::<3, 1>(3, col).copy_from(&ang);
        };
        match j.kind {
            JointKind::Revolute | JointKind::Continuous => {
                let w = rot * j.axis;
                put(col, w.cross(&(p_tip - frame.translation)), w);
            }
            JointKind::Prismatic => put(col, rot * j.axis, Vector3::zeros()),
            JointKind::Planar => {
                put(col, rot * Vector3::x(), Vector3::zeros());
                put(col + 1, rot * Vector3::y(), Vector3::zeros());
                let p = frame.translation + rot * Vector3::new(vars[0], vars[1], 0.0);
                let w = rot * Vector3::z();
                put(col + 2, w.cross(&(p_tip - p)), w);
            }
            JointKind::Floating => {
                for k in 0..3 {
                    put(col + k, rot * Vector3::ith(k, 1.0), Vector3::zeros());
                }
                let p = frame.translation + rot * Vector3::new(vars[0], vars[1], vars[2]);
                let rz = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), vars[5]);
                let ry = UnitQuaternion::from_axis_angle(&Vector3::y_axis(), vars[4]);
                let axes = [rz * (ry * Vector3::x()), rz * Vector3::y(), Vector3::z()];
                for (k, a) in axes.iter().enumerate() {
                    let w = rot * a;
                    put(col + 3 + k, w.cross(&(p_tip - p)), w);
                }
            }
            JointKind::Fixed => {}
        }
        col += model.joint_variables(ji).len();
    }
    jac
}

/// Deterministic per-index random stream derived from a master seed.
pub fn indexed_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws uniform values for the given variables into `q`.
pub fn sample_variables<R: Rng + ?Sized>(
    model: &RobotModel,
    variables: &[usize],
    rng: &mut R,
    q: &mut [f64],
) -> Result<(), KinematicsError> {
    for &i in variables {
        let v = &model.variables()[i];
        q[i] = match v.bounds {
            VariableBounds::Interval(lo, hi) => lo + (hi - lo) * rng.random::<f64>(),
            VariableBounds::Circle => PI - 2.0 * PI * rng.random::<f64>(),
            VariableBounds::Unbounded => return Err(KinematicsError::Unbounded(v.name.clone())),
        };
    }
    Ok(())
}

/// Uniform random state over the group's variables (all variables when `group` is
/// `None`); the remaining variables take their default positions.
pub fn sample_random_state<R: Rng + ?Sized>(
    model: &RobotModel,
    group: Option<&JointGroup>,
    rng: &mut R,
) -> Result<RobotState, KinematicsError> {
    let mut q = default_positions(model);
    let all: Vec<usize>;
    let vars = match group {
        Some(g) => g.variables(),
        None => {
            all = (0..model.variable_count()).collect();
            &all
        }
    };
    sample_variables(model, vars, rng, &mut q)?;
    Ok(RobotState::from_vector(model, &q))
}

/// Diameter of the group's configuration box under the joint-space metric with
/// unit weights.
pub fn space_extent(model: &RobotModel, group: &JointGroup) -> Result<f64, KinematicsError> {
    space_extent_weighted(model, group, &vec![1.0; group.dof()])
}

pub fn space_extent_weighted(model: &RobotModel, group: &JointGroup, weights: &[f64]) -> Result<f64, KinematicsError> {
    if weights.len() != group.dof() || weights.iter().any(|w| !(*w > 0.0)) {
        return Err(KinematicsError::InvalidParams("weights must be positive, one per variable".into()));
    }
    let mut sum = 0.0;
    for (&i, w) in group.variables().iter().zip(weights) {
        let v = &model.variables()[i];
        let r = v.bounds.range().ok_or_else(|| KinematicsError::Unbounded(v.name.clone()))?;
        sum += w * r * r;
    }
    Ok(sum.sqrt())
}

/// An orthogonal projection onto a few group variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSpec {
    pub joints: Vec<String>,
    pub weights: Vec<f64>,
}

impl ProjectionSpec {
    pub fn project(&self, state: &RobotState) -> Result<Vec<f64>, KinematicsError> {
        self.joints
            .iter()
            .map(|j| state.get(j).ok_or_else(|| KinematicsError::MissingJoint(j.clone())))
            .collect()
    }
}

/// Projection onto the first (at most two) variables of the group, i.e. the joints
/// nearest the group base.
pub fn default_projection(model: &RobotModel, group: &JointGroup) -> Result<ProjectionSpec, KinematicsError> {
    let names = group.variable_names(model);
    if names.is_empty() {
        return Err(KinematicsError::EmptyGroup(group.name.clone()));
    }
    let k = names.len().min(2);
    Ok(ProjectionSpec {
        joints: names[..k].iter().map(|s| s.to_string()).collect(),
        weights: vec![1.0; k],
    })
}
