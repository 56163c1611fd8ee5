//! Semantic layer over a robot model: planning groups, named group states, end
//! effectors, virtual and passive joints, and the disabled collision pairs.

mod xml;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use xml::{parse_srdf, serialize_srdf};

use crate::collision::AllowedCollisionMatrix;
use crate::kinematics::{JointGroup, KinematicsError, RobotState};
use crate::model::{JointKind, ModelError, RobotModel, DEFAULT_WORKSPACE_HALF_WIDTH};
use crate::report::ValidationReport;

#[derive(Debug, Error)]
pub enum SemanticError {
    #[error("malformed SRDF: {0}")]
    Xml(String),
    #[error("<{element}> is missing attribute `{attribute}`")]
    MissingAttribute { element: String, attribute: String },
    #[error("<{element}>: invalid value `{value}` for `{attribute}`")]
    InvalidValue {
        element: String,
        attribute: String,
        value: String,
    },
    #[error("{element} references unknown joint `{name}`")]
    UnknownJoint { element: String, name: String },
    #[error("{element} references unknown link `{name}`")]
    UnknownLink { element: String, name: String },
    #[error("no group named `{0}`")]
    UnknownGroup(String),
    #[error("group `{0}` is defined more than once")]
    DuplicateGroup(String),
    #[error("group `{group}`: no kinematic path from `{base}` down to `{tip}`")]
    UnresolvableChain { group: String, base: String, tip: String },
    #[error("subgroup cycle: {}", .0.join(" -> "))]
    SubgroupCycle(Vec<String>),
    #[error("group `{0}` resolves to no active joints")]
    EmptyGroup(String),
    #[error("no {kind} named `{name}`")]
    NotFound { kind: &'static str, name: String },
    #[error("{kind} `{name}` already exists")]
    Duplicate { kind: &'static str, name: String },
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanningGroup {
    pub name: String,
    pub joints: Vec<String>,
    pub links: Vec<String>,
    pub chains: Vec<Chain>,
    pub subgroups: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chain {
    pub base_link: String,
    pub tip_link: String,
}

impl PlanningGroup {
    pub fn chain(name: &str, base_link: &str, tip_link: &str) -> PlanningGroup {
        PlanningGroup {
            name: name.to_string(),
            chains: vec![Chain {
                base_link: base_link.to_string(),
                tip_link: tip_link.to_string(),
            }],
            ..Default::default()
        }
    }
}

/// A named configuration of one group; holds values for that group's joints only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupState {
    pub name: String,
    pub group: String,
    pub values: RobotState,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndEffector {
    pub name: String,
    pub group: String,
    pub parent_link: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_group: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VirtualJointKind {
    Fixed,
    Planar,
    Floating,
}

impl VirtualJointKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            VirtualJointKind::Fixed => "fixed",
            VirtualJointKind::Planar => "planar",
            VirtualJointKind::Floating => "floating",
        }
    }

    pub fn parse(s: &str) -> Option<VirtualJointKind> {
        match s {
            "fixed" => Some(VirtualJointKind::Fixed),
            "planar" => Some(VirtualJointKind::Planar),
            "floating" => Some(VirtualJointKind::Floating),
            _ => None,
        }
    }

    pub fn joint_kind(&self) -> JointKind {
        match self {
            VirtualJointKind::Fixed => JointKind::Fixed,
            VirtualJointKind::Planar => JointKind::Planar,
            VirtualJointKind::Floating => JointKind::Floating,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VirtualJoint {
    pub name: String,
    pub kind: VirtualJointKind,
    pub parent_frame: String,
    pub child_link: String,
    /// (lower, upper) per translation dimension; the default box when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workspace: Option<Vec<(f64, f64)>>,
}

impl VirtualJoint {
    pub fn workspace_or_default(&self) -> Vec<(f64, f64)> {
        self.workspace.clone().unwrap_or_else(|| {
            vec![(-DEFAULT_WORKSPACE_HALF_WIDTH, DEFAULT_WORKSPACE_HALF_WIDTH); self.kind.joint_kind().translation_dims()]
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SemanticModel {
    pub name: String,
    pub groups: Vec<PlanningGroup>,
    pub group_states: Vec<GroupState>,
    pub end_effectors: Vec<EndEffector>,
    pub virtual_joints: Vec<VirtualJoint>,
    pub passive_joints: Vec<String>,
    /// Disabled collision pairs; only disabled entries are kept.
    pub disabled_pairs: AllowedCollisionMatrix,
}

impl SemanticModel {
    pub fn new(name: impl Into<String>) -> SemanticModel {
        SemanticModel {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn group(&self, name: &str) -> Option<&PlanningGroup> {
        self.groups.iter().find(|g| g.name == name)
    }

    pub fn group_state(&self, group: &str, name: &str) -> Option<&GroupState> {
        self.group_states.iter().find(|s| s.group == group && s.name == name)
    }

    /// Replaces the disabled pairs with the disabled entries of `acm`.
    pub fn set_disabled_pairs(&mut self, acm: &AllowedCollisionMatrix) {
        let mut out = AllowedCollisionMatrix::new();
        for (pair, e) in acm.iter().filter(|(_, e)| e.disabled) {
            out.set(pair.first(), pair.second(), e.clone()).expect("entry already valid");
        }
        self.disabled_pairs = out;
    }
}

/// The model as planning sees it: the first virtual joint (if any) attached above
/// the root, with its workspace bounds.
pub fn effective_model(model: &RobotModel, semantic: &SemanticModel) -> Result<RobotModel, SemanticError> {
    match semantic.virtual_joints.first() {
        None => Ok(model.clone()),
        Some(vj) => Ok(model.with_virtual_joint(
            &vj.name,
            vj.kind.joint_kind(),
            &vj.parent_frame,
            vj.workspace_or_default(),
        )?),
    }
}

struct Members {
    joints: BTreeSet<usize>,
    links: BTreeSet<usize>,
    chain_tips: Vec<usize>,
}

fn collect(
    model: &RobotModel,
    semantic: &SemanticModel,
    name: &str,
    stack: &mut Vec<String>,
    out: &mut Members,
) -> Result<(), SemanticError> {
    if let Some(pos) = stack.iter().position(|g| g == name) {
        let mut cycle = stack[pos..].to_vec();
        cycle.push(name.to_string());
        return Err(SemanticError::SubgroupCycle(cycle));
    }
    let g = semantic
        .group(name)
        .ok_or_else(|| SemanticError::UnknownGroup(name.to_string()))?;
    let element = format!("group `{name}`");
    stack.push(name.to_string());
    for j in &g.joints {
        let ji = model.joint_index(j).ok_or_else(|| SemanticError::UnknownJoint {
            element: element.clone(),
            name: j.clone(),
        })?;
        out.joints.insert(ji);
        out.links.insert(model.joint_child_link(ji));
    }
    for l in &g.links {
        let li = model.link_index(l).ok_or_else(|| SemanticError::UnknownLink {
            element: element.clone(),
            name: l.clone(),
        })?;
        out.links.insert(li);
    }
    for c in &g.chains {
        let lookup = |l: &str| {
            model.link_index(l).ok_or_else(|| SemanticError::UnknownLink {
                element: element.clone(),
                name: l.to_string(),
            })
        };
        let (base, tip) = (lookup(&c.base_link)?, lookup(&c.tip_link)?);
        if base == tip || !model.is_ancestor_link(base, tip) {
            return Err(SemanticError::UnresolvableChain {
                group: name.to_string(),
                base: c.base_link.clone(),
                tip: c.tip_link.clone(),
            });
        }
        let above = model.joints_to_link(base).len();
        for ji in model.joints_to_link(tip).into_iter().skip(above) {
            out.joints.insert(ji);
            out.links.insert(model.joint_child_link(ji));
        }
        out.chain_tips.push(tip);
    }
    for s in &g.subgroups {
        collect(model, semantic, s, stack, out)?;
    }
    stack.pop();
    Ok(())
}

/// Flattens a group into its active joints (depth-first model order, which is chain
/// order for serial groups), its links, and whether the joints form one serial path.
/// Passive joints are left out.
pub fn resolve_group(model: &RobotModel, semantic: &SemanticModel, name: &str) -> Result<JointGroup, SemanticError> {
    let mut m = Members {
        joints: BTreeSet::new(),
        links: BTreeSet::new(),
        chain_tips: Vec::new(),
    };
    collect(model, semantic, name, &mut Vec::new(), &mut m)?;

    let passive: BTreeSet<&str> = semantic.passive_joints.iter().map(|s| s.as_str()).collect();
    let active = |ji: usize| model.joints()[ji].is_active() && !passive.contains(model.joints()[ji].name.as_str());
    let joints: Vec<usize> = model
        .joint_order()
        .iter()
        .copied()
        .filter(|&ji| m.joints.contains(&ji) && active(ji))
        .collect();
    if joints.is_empty() {
        return Err(SemanticError::EmptyGroup(name.to_string()));
    }

    let is_chain = joints.windows(2).all(|w| {
        let (upper, lower) = (model.joint_child_link(w[0]), model.joint_parent_link(w[1]));
        if !model.is_ancestor_link(upper, lower) {
            return false;
        }
        let skip = model.joints_to_link(upper).len();
        model.joints_to_link(lower)[skip..].iter().all(|&ji| !active(ji))
    });
    let tip = if is_chain {
        let last_child = model.joint_child_link(*joints.last().unwrap());
        // A declared chain tip below the last moving joint (e.g. a tool frame) wins.
        let t = m
            .chain_tips
            .iter()
            .copied()
            .filter(|&t| model.is_ancestor_link(last_child, t))
            .max_by_key(|&t| model.joints_to_link(t).len())
            .unwrap_or(last_child);
        Some(model.links()[t].name.clone())
    } else {
        None
    };

    let link_order = model.link_order();
    let links = link_order
        .into_iter()
        .filter(|l| m.links.contains(l))
        .map(|l| model.links()[l].name.clone())
        .collect();
    let names = joints.iter().map(|&ji| model.joints()[ji].name.clone()).collect();
    Ok(JointGroup::new(model, name, names, links, is_chain, tip)?)
}

/// Checks references and consistency of a semantic model against its robot model.
pub fn validate_semantic(model: &RobotModel, semantic: &SemanticModel) -> ValidationReport {
    let mut r = ValidationReport::default();
    let mut seen = BTreeSet::new();
    for g in &semantic.groups {
        if !seen.insert(g.name.as_str()) {
            r.error(&[&g.name], "group name is used more than once");
        }
    }
    for g in &semantic.groups {
        for j in &g.joints {
            if model.joint(j).is_none() {
                r.error(&[&g.name, j], "group references an unknown joint");
            }
        }
        for l in &g.links {
            if model.link(l).is_none() {
                r.error(&[&g.name, l], "group references an unknown link");
            }
        }
        for s in &g.subgroups {
            if semantic.group(s).is_none() {
                r.error(&[&g.name, s], "group references an unknown subgroup");
            }
        }
        if g.joints.is_empty() && g.links.is_empty() && g.chains.is_empty() && g.subgroups.is_empty() {
            r.error(&[&g.name], "group has no members");
            continue;
        }
        let link_only = g.joints.is_empty() && g.chains.is_empty() && g.subgroups.is_empty();
        match resolve_group(model, semantic, &g.name) {
            Ok(_) => {
                let members = group_joint_names(model, semantic, &g.name);
                for p in &semantic.passive_joints {
                    if members.contains(p.as_str()) {
                        r.warning(&[&g.name, p], "group includes a passive joint; it is left out of planning");
                    }
                }
            }
            // Link-only groups (typical for end effectors) need no joints.
            Err(SemanticError::EmptyGroup(_)) if link_only => {}
            Err(SemanticError::UnknownJoint { .. } | SemanticError::UnknownLink { .. } | SemanticError::UnknownGroup(_)) => {
                for c in &g.chains {
                    if model.link(&c.base_link).is_none() || model.link(&c.tip_link).is_none() {
                        r.error(&[&g.name, &c.base_link, &c.tip_link], "chain references an unknown link");
                    }
                }
            }
            Err(e) => r.error(&[&g.name], e.to_string()),
        }
    }

    let mut state_names = BTreeSet::new();
    for s in &semantic.group_states {
        if !state_names.insert((s.group.as_str(), s.name.as_str())) {
            r.error(&[&s.name, &s.group], "group state defined more than once for this group");
        }
        let Ok(rg) = resolve_group(model, semantic, &s.group) else {
            if semantic.group(&s.group).is_none() {
                r.error(&[&s.name, &s.group], "group state references an unknown group");
            }
            continue;
        };
        let vars = rg.variable_names(model);
        for v in &vars {
            match s.values.get(v) {
                None => r.error(&[&s.name, v], "group state has no value for this joint"),
                Some(x) => {
                    let idx = model.variable_index(v).expect("group variable");
                    if !model.variables()[idx].bounds.contains(x) {
                        r.error(&[&s.name, v], format!("value {x} lies outside the joint limits"));
                    }
                }
            }
        }
        for (k, _) in s.values.iter() {
            if !vars.contains(&k.as_str()) {
                r.error(&[&s.name, k], "group state sets a joint outside its group");
            }
        }
    }

    let mut ee_names = BTreeSet::new();
    for ee in &semantic.end_effectors {
        if !ee_names.insert(ee.name.as_str()) {
            r.error(&[&ee.name], "end effector name is used more than once");
        }
        if semantic.group(&ee.group).is_none() {
            r.error(&[&ee.name, &ee.group], "end effector references an unknown group");
        }
        if model.link(&ee.parent_link).is_none() {
            r.error(&[&ee.name, &ee.parent_link], "end effector parent link is not in the model");
        }
        if let Some(pg) = &ee.parent_group {
            if semantic.group(pg).is_none() {
                r.error(&[&ee.name, pg], "end effector references an unknown parent group");
            } else if semantic.group(&ee.group).is_some() {
                let a = group_joint_names(model, semantic, &ee.group);
                let b = group_joint_names(model, semantic, pg);
                if a.intersection(&b).next().is_some() {
                    r.warning(&[&ee.group, pg], "end effector group shares joints with its parent group");
                }
            }
        }
    }

    let mut vj_names = BTreeSet::new();
    for vj in &semantic.virtual_joints {
        if !vj_names.insert(vj.name.as_str()) || model.joint(&vj.name).is_some() {
            r.error(&[&vj.name], "virtual joint name clashes with another joint");
        }
        if model.link(&vj.child_link).is_none() {
            r.error(&[&vj.name, &vj.child_link], "virtual joint child link is not in the model");
        } else if vj.child_link != model.root_link() {
            r.warning(&[&vj.name, &vj.child_link], "virtual joint child is not the model root");
        }
        if model.link(&vj.parent_frame).is_some() {
            r.error(&[&vj.name, &vj.parent_frame], "virtual joint parent frame must not be a model link");
        }
        if let Some(ws) = &vj.workspace {
            if ws.len() != vj.kind.joint_kind().translation_dims() {
                r.error(&[&vj.name], "workspace bounds need one interval per translation dimension");
            }
            if ws.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
                r.error(&[&vj.name], "workspace bounds must be finite with lower <= upper");
            }
        }
    }
    if semantic.virtual_joints.len() > 1 {
        r.warning(&[&semantic.virtual_joints[1].name], "only the first virtual joint is used for planning");
    }

    let mut passive = BTreeSet::new();
    for p in &semantic.passive_joints {
        if !passive.insert(p.as_str()) {
            r.error(&[p], "passive joint listed more than once");
        }
        match model.joint(p) {
            None => r.error(&[p], "passive joint is not in the model"),
            Some(j) if !j.is_active() => r.warning(&[p], "passive joint does not move"),
            _ => {}
        }
    }

    for (pair, e) in semantic.disabled_pairs.iter() {
        for l in [pair.first(), pair.second()] {
            if model.link(l).is_none() {
                r.error(&[pair.first(), pair.second()], format!("disabled pair references unknown link `{l}`"));
            }
        }
        if !e.disabled {
            r.warning(&[pair.first(), pair.second()], "collision pair entry is not disabled");
        }
    }
    r
}

/// Names of every joint (active or not, passive included) a group pulls in.
fn group_joint_names<'m>(model: &'m RobotModel, semantic: &SemanticModel, name: &str) -> BTreeSet<&'m str> {
    let mut m = Members {
        joints: BTreeSet::new(),
        links: BTreeSet::new(),
        chain_tips: Vec::new(),
    };
    if collect(model, semantic, name, &mut Vec::new(), &mut m).is_err() {
        return BTreeSet::new();
    }
    m.joints.into_iter().map(|ji| model.joints()[ji].name.as_str()).collect()
}
